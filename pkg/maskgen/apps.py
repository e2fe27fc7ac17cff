from django.apps import AppConfig


class MaskgenConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'maskgen'
    verbose_name = 'Mask generation'
