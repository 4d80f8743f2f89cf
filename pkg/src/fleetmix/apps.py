from django.apps import AppConfig


class FleetmixConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "fleetmix"
    verbose_name = "Fleet mix planning"
