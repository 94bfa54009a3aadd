from django.apps import AppConfig


class DynamicsConfig(AppConfig):
    name = 'dynamics'
    verbose_name = 'Controlled HIV/PReP dynamics'
