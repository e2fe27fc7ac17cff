from django.apps import AppConfig


class SurvivabilityConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'survivability'
