"""
Serializers for simulation configs and stored simulation runs
"""
from rest_framework import serializers

from core.models import OperationRecord, SimulationRun
from sim.config import (
    PRESETS,
    Algorithm,
    LatencyMatrix,
    Mix,
    SimConfig,
    WorkloadSpec,
)

MAX_SEED = 2 ** 63 - 1


class LatencySerializer(serializers.Serializer):
    """Either a named preset or an explicit matrix"""
    preset = serializers.ChoiceField(choices=PRESETS, required=False)
    matrix = serializers.ListField(
        child=serializers.ListField(
            child=serializers.FloatField(min_value=0)
        ),
        required=False,
        allow_empty=False
    )

    def validate(self, attrs):
        if ('preset' in attrs) == ('matrix' in attrs):
            raise serializers.ValidationError(
                'give exactly one of "preset" or "matrix"'
            )
        return attrs


class MixSerializer(serializers.Serializer):
    add = serializers.FloatField(min_value=0)
    remove = serializers.FloatField(min_value=0)
    upmove = serializers.FloatField(min_value=0)
    downmove = serializers.FloatField(min_value=0)

    def validate(self, attrs):
        if abs(sum(attrs.values()) - 100) > 1e-9:
            raise serializers.ValidationError('mix must sum to 100')
        return attrs


class SimConfigSerializer(serializers.Serializer):
    """Validate a simulation config as read from JSON"""
    algorithm = serializers.ChoiceField(
        choices=[algorithm.value for algorithm in Algorithm]
    )
    latency = LatencySerializer(required=False)
    replicas = serializers.IntegerField(min_value=1, default=3)
    warmup_nodes = serializers.IntegerField(min_value=1, default=997)
    ops_per_replica = serializers.IntegerField(min_value=0, default=250)
    mix = MixSerializer(required=False)
    conflict_rate = serializers.FloatField(
        min_value=0,
        max_value=100,
        default=0
    )
    mean_gap_ms = serializers.FloatField(min_value=0.001, default=10.0)
    seed = serializers.IntegerField(
        min_value=0,
        max_value=MAX_SEED,
        default=42
    )
    heartbeat_ms = serializers.FloatField(min_value=1, default=100.0)
    runs = serializers.IntegerField(min_value=1, default=1)
    check_every_event = serializers.BooleanField(default=False)

    def validate(self, attrs):
        latency = attrs.get('latency') or {'preset': 'real'}
        try:
            if 'preset' in latency:
                matrix = LatencyMatrix.from_preset(
                    latency['preset'],
                    attrs['replicas']
                )
            else:
                matrix = LatencyMatrix(latency['matrix'])
        except ValueError as err:
            raise serializers.ValidationError({'latency': str(err)})
        if matrix.n_replicas != attrs['replicas']:
            raise serializers.ValidationError({
                'latency': 'matrix size must equal the replica count'
            })
        attrs['latency_matrix'] = matrix
        return attrs

    def to_config(self) -> SimConfig:
        data = self.validated_data
        mix = Mix(**data['mix']) if data.get('mix') else Mix()
        workload = WorkloadSpec(
            warmup_nodes=data['warmup_nodes'],
            ops_per_replica=data['ops_per_replica'],
            mix=mix,
            conflict_rate=data['conflict_rate'],
            mean_gap_ms=data['mean_gap_ms'],
        )
        return SimConfig(
            algorithm=Algorithm(data['algorithm']),
            latency=data['latency_matrix'],
            workload=workload,
            seed=data['seed'],
            heartbeat_ms=data['heartbeat_ms'],
            runs=data['runs'],
            check_every_event=data['check_every_event'],
        )


class SimulationRunSerializer(serializers.ModelSerializer):
    """Serializer for stored runs"""

    class Meta:
        model = SimulationRun
        fields = [
            'id', 'run', 'algorithm', 'conflict_rate', 'latency_preset',
            'seed', 'mean_resp_ms', 'p99_resp_ms', 'mean_stab_ms',
            'aborts', 'invariant_violations', 'converged', 'created',
        ]
        read_only_fields = fields


class SimulationRunDetailSerializer(SimulationRunSerializer):
    """Serializer for the run detail view"""

    class Meta(SimulationRunSerializer.Meta):
        fields = SimulationRunSerializer.Meta.fields + [
            'median_resp_ms', 'median_stab_ms', 'bytes_per_op', 'config',
        ]
        read_only_fields = fields


class OperationRecordSerializer(serializers.ModelSerializer):

    class Meta:
        model = OperationRecord
        fields = [
            'op_id', 'origin', 'kind', 'mtype', 'submit_ms', 'ack_ms',
            'stable_ms', 'status',
        ]
        read_only_fields = fields
