# Generated by Django 4.2.7 on 2026-10-17 09:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('run', models.PositiveIntegerField(default=0)),
                ('algorithm', models.CharField(choices=[('maram', 'Maram'), ('udr', 'Undo-do-redo'), ('global_lock', 'Global lock'), ('subtree_lock', 'Subtree lock'), ('naive', 'Naive')], max_length=32)),
                ('conflict_rate', models.FloatField(default=0)),
                ('latency_preset', models.CharField(max_length=32)),
                ('seed', models.BigIntegerField()),
                ('mean_resp_ms', models.FloatField()),
                ('median_resp_ms', models.FloatField()),
                ('p99_resp_ms', models.FloatField()),
                ('mean_stab_ms', models.FloatField()),
                ('median_stab_ms', models.FloatField()),
                ('aborts', models.PositiveIntegerField(default=0)),
                ('invariant_violations', models.PositiveIntegerField(default=0)),
                ('converged', models.BooleanField(default=True)),
                ('bytes_per_op', models.FloatField(default=0)),
                ('config', models.JSONField(default=dict)),
                ('created', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created', '-id'],
            },
        ),
        migrations.CreateModel(
            name='OperationRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('op_id', models.CharField(max_length=64)),
                ('origin', models.PositiveIntegerField()),
                ('kind', models.CharField(max_length=16)),
                ('mtype', models.CharField(blank=True, max_length=8)),
                ('submit_ms', models.FloatField()),
                ('ack_ms', models.FloatField(null=True)),
                ('stable_ms', models.FloatField(null=True)),
                ('status', models.CharField(blank=True, max_length=16)),
                ('simulation', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='records', to='core.simulationrun')),
            ],
            options={
                'ordering': ['id'],
            },
        ),
    ]
