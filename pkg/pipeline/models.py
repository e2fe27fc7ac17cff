"""
Pipeline App - Models

Registry of finished runs.
Maps to: pipeline_attack_run table
"""

from django.db import models


class AttackRun(models.Model):
    """
    One finished command run and where its outputs live.

    Maps to: pipeline_attack_run table
    """

    COMMANDS = [
        ('attack', 'Attack'),
        ('iterative', 'Iterative'),
        ('heatmap', 'Heatmap'),
        ('sweep', 'Budget Sweep'),
        ('ablate', 'Ablation'),
        ('baseline', 'Baseline'),
    ]

    command = models.CharField(max_length=20, choices=COMMANDS)
    status = models.CharField(max_length=30)  # 'complete', 'partial', 'threshold-unreachable'
    config_hash = models.CharField(max_length=64, blank=True)
    seed = models.BigIntegerField(default=0)
    total_queries = models.BigIntegerField(default=0)

    # Held-out figures, null for commands that do not attack
    heldout_survivability = models.FloatField(blank=True, null=True)
    mask_ratio = models.FloatField(blank=True, null=True)

    run_dir = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'pipeline_attack_run'
        ordering = ['-created_at', '-id']
        indexes = [
            models.Index(fields=['command', 'status'], name='idx_run_command_status'),
            models.Index(fields=['config_hash'], name='idx_run_config_hash'),
        ]

    def __str__(self):
        return f"{self.command} {self.status} ({self.total_queries} queries)"
