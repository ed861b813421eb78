# Generated by Django 5.2.1

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('simulate', 'Monte-Carlo simulation'), ('se', 'State evolution'), ('potential', 'Potential function'), ('threshold', 'Thresholds'), ('spectrum', 'Spectrum transforms')], max_length=20)),
                ('config_sha256', models.CharField(db_index=True, max_length=64)),
                ('seed', models.BigIntegerField(blank=True, null=True)),
                ('config', models.JSONField(default=dict)),
                ('summary', models.JSONField(default=dict)),
                ('output_path', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
