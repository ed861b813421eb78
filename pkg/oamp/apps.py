from django.apps import AppConfig


class OampConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "oamp"
    label = "oamp"
