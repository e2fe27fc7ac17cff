from django.apps import AppConfig


class BoostAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'boost'
    verbose_name = 'Perturbation boosting'
