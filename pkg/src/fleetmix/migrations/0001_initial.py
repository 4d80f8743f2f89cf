import django.utils.timezone
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "stage",
                    models.CharField(
                        help_text="Pipeline stage or stage chain (e.g., 'solve' or 'gen_instance..report')",
                        max_length=50,
                    ),
                ),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("pending", "Pending"),
                            ("running", "Running"),
                            ("success", "Success"),
                            ("failed", "Failed"),
                        ],
                        default="pending",
                        max_length=20,
                    ),
                ),
                (
                    "config",
                    models.JSONField(blank=True, default=dict, help_text="Resolved run configuration"),
                ),
                ("output_dir", models.CharField(blank=True, max_length=500)),
                (
                    "artifacts",
                    models.JSONField(
                        blank=True,
                        default=dict,
                        help_text="Artifact name -> path relative to the output directory",
                    ),
                ),
                (
                    "objective",
                    models.FloatField(
                        blank=True,
                        help_text="Objective of the solved plan, when the run solved one",
                        null=True,
                    ),
                ),
                ("error_message", models.TextField(blank=True)),
                ("started_at", models.DateTimeField(default=django.utils.timezone.now)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
            ],
            options={
                "db_table": "experiment_run",
                "ordering": ["-started_at"],
            },
        ),
    ]
