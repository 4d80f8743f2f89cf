from django.db import models
from django.utils import timezone


class RunStatus(models.TextChoices):
    PENDING = "pending", "Pending"
    RUNNING = "running", "Running"
    SUCCESS = "success", "Success"
    FAILED = "failed", "Failed"


class ExperimentRun(models.Model):
    """
    Ledger entry for one pipeline invocation.

    Wall-clock timestamps live here and in the logs only; artifacts written
    by the run stay free of them.
    """

    stage = models.CharField(
        max_length=50,
        help_text="Pipeline stage or stage chain (e.g., 'solve' or 'gen_instance..report')",
    )
    status = models.CharField(
        max_length=20,
        choices=RunStatus.choices,
        default=RunStatus.PENDING,
    )
    config = models.JSONField(
        default=dict,
        blank=True,
        help_text="Resolved run configuration",
    )
    output_dir = models.CharField(
        max_length=500,
        blank=True,
    )
    artifacts = models.JSONField(
        default=dict,
        blank=True,
        help_text="Artifact name -> path relative to the output directory",
    )
    objective = models.FloatField(
        null=True,
        blank=True,
        help_text="Objective of the solved plan, when the run solved one",
    )
    error_message = models.TextField(
        blank=True,
    )

    started_at = models.DateTimeField(
        default=timezone.now,
    )
    finished_at = models.DateTimeField(
        null=True,
        blank=True,
    )

    class Meta:
        db_table = "experiment_run"
        ordering = ["-started_at"]

    def __str__(self):
        return f"{self.stage} ({self.status})"

    @property
    def duration_seconds(self) -> float | None:
        if self.finished_at is None:
            return None
        return (self.finished_at - self.started_at).total_seconds()

    def mark_running(self) -> None:
        self.status = RunStatus.RUNNING
        self.save(update_fields=["status"])

    def mark_success(self, artifacts: dict, objective: float | None = None) -> None:
        self.status = RunStatus.SUCCESS
        self.artifacts = artifacts
        self.objective = objective
        self.finished_at = timezone.now()
        self.save()

    def mark_failed(self, error_message: str) -> None:
        self.status = RunStatus.FAILED
        self.error_message = error_message
        self.finished_at = timezone.now()
        self.save()
