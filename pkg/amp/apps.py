from django.apps import AppConfig


class AmpConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "amp"
    label = "amp"
