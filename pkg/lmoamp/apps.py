from django.apps import AppConfig


class LmoampConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "lmoamp"
    label = "lmoamp"
