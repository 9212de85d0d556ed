from django.apps import AppConfig


class NetworksConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "src.networks"
    verbose_name = "ReLU networks and network calculus"
