from django.db import models


class ExperimentRun(models.Model):
    """One invocation of an experiment command and what it produced."""

    COMMAND_CHOICES = [
        ("simulate", "Monte-Carlo simulation"),
        ("se", "State evolution"),
        ("potential", "Potential function"),
        ("threshold", "Thresholds"),
        ("spectrum", "Spectrum transforms"),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    config_sha256 = models.CharField(max_length=64, db_index=True)
    seed = models.BigIntegerField(null=True, blank=True)
    config = models.JSONField(default=dict)
    summary = models.JSONField(default=dict)
    output_path = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self):
        return f"{self.command} {self.config_sha256[:12]}"
