"""
Serializers for the op-log wire format
"""
from django.utils.translation import gettext_lazy as _
from rest_framework import serializers

from crdt.clock import VectorClock
from crdt.operations import Operation, OpId, OpKind, Priority
from tree.state import MoveType, NodeId


class NodeIdField(serializers.Field):
    """Node ids travel as "origin:seq" strings, or "root"."""
    default_error_messages = {
        'invalid': _('Not a valid node id.'),
    }

    def to_internal_value(self, data):
        if not isinstance(data, str):
            self.fail('invalid')
        try:
            return NodeId.parse(data)
        except ValueError:
            self.fail('invalid')

    def to_representation(self, value):
        return str(value)


class OpIdSerializer(serializers.Serializer):
    origin = serializers.IntegerField(min_value=0)
    seq = serializers.IntegerField(min_value=0)


class OperationSerializer(serializers.Serializer):
    """Validate one op-log record and build the Operation it describes"""
    id = OpIdSerializer()
    kind = serializers.ChoiceField(choices=[kind.value for kind in OpKind])
    n = NodeIdField(required=False)
    p = NodeIdField(required=False)
    new_parent = NodeIdField(required=False)
    mtype = serializers.ChoiceField(
        choices=[mtype.value for mtype in MoveType],
        required=False
    )
    prio = serializers.ListField(
        child=serializers.IntegerField(min_value=0),
        min_length=2,
        max_length=2,
        required=False
    )
    crit_anc = serializers.ListField(child=NodeIdField(), required=False)
    vc = serializers.DictField(child=serializers.IntegerField(min_value=0))

    required_fields = {
        'add': ('n', 'p'),
        'remove': ('n',),
        'move': ('n', 'new_parent'),
        'hb': (),
    }
    metadata_fields = ('mtype', 'prio', 'crit_anc')

    def validate_vc(self, value):
        if not all(str(key).isdigit() for key in value):
            raise serializers.ValidationError(
                _('Vector clock keys must be replica numbers.')
            )
        return VectorClock.of({int(k): v for k, v in value.items()})

    def validate(self, attrs):
        kind = attrs['kind']
        missing = [
            field for field in self.required_fields[kind]
            if field not in attrs
        ]
        if missing:
            raise serializers.ValidationError(
                {field: _('Required for this kind.') for field in missing}
            )
        metadata = [field for field in self.metadata_fields if field in attrs]
        if metadata and kind != 'move':
            raise serializers.ValidationError(
                _('Move metadata is only valid on moves.')
            )
        if metadata and len(metadata) != len(self.metadata_fields):
            raise serializers.ValidationError(
                _('Move metadata needs mtype, prio and crit_anc together.')
            )
        op_id = attrs['id']
        if kind != 'hb' and attrs['vc'].get(op_id['origin']) != op_id['seq']:
            raise serializers.ValidationError(
                _('The clock entry of the origin must equal the sequence.')
            )
        return attrs

    def to_operation(self) -> Operation:
        data = self.validated_data
        prio = data.get('prio')
        mtype = data.get('mtype')
        return Operation(
            id=OpId(data['id']['origin'], data['id']['seq']),
            kind=OpKind(data['kind']),
            vc=data['vc'],
            n=data.get('n'),
            p=data.get('p'),
            new_parent=data.get('new_parent'),
            mtype=MoveType(mtype) if mtype else None,
            crit_anc=frozenset(data.get('crit_anc', ())),
            prio=Priority(*prio) if prio else None,
        )

    def to_representation(self, op):
        data = {
            'id': {'origin': op.id.origin, 'seq': op.id.seq},
            'kind': op.kind.value,
        }
        for field in ('n', 'p', 'new_parent'):
            value = getattr(op, field)
            if value is not None:
                data[field] = str(value)
        if op.mtype is not None:
            data['mtype'] = op.mtype.value
            data['prio'] = [op.prio.num, op.prio.origin]
            data['crit_anc'] = [str(node) for node in sorted(op.crit_anc)]
        data['vc'] = {str(replica): count for replica, count in op.vc.items()}
        return data
