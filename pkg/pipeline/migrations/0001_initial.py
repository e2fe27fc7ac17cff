# Generated by Django 5.2.9 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='AttackRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('attack', 'Attack'), ('iterative', 'Iterative'), ('heatmap', 'Heatmap'), ('sweep', 'Budget Sweep'), ('ablate', 'Ablation'), ('baseline', 'Baseline')], max_length=20)),
                ('status', models.CharField(max_length=30)),
                ('config_hash', models.CharField(blank=True, max_length=64)),
                ('seed', models.BigIntegerField(default=0)),
                ('total_queries', models.BigIntegerField(default=0)),
                ('heldout_survivability', models.FloatField(blank=True, null=True)),
                ('mask_ratio', models.FloatField(blank=True, null=True)),
                ('run_dir', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'db_table': 'pipeline_attack_run',
                'ordering': ['-created_at', '-id'],
                'indexes': [models.Index(fields=['command', 'status'], name='idx_run_command_status'), models.Index(fields=['config_hash'], name='idx_run_config_hash')],
            },
        ),
    ]
