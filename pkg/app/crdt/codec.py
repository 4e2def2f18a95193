"""
Op-log codec: one JSON object per line, UTF-8
"""
import json
from pathlib import Path
from typing import Iterable, List, Union

from crdt.exceptions import DecodeError
from crdt.operations import Operation
from crdt.serializers import OperationSerializer


def encode_op(op: Operation) -> bytes:
    data = OperationSerializer(op).data
    return json.dumps(
        data,
        separators=(',', ':'),
        ensure_ascii=False
    ).encode('utf-8')


def decode_op(raw: Union[bytes, str]) -> Operation:
    """Decode one record; any field order is accepted."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode('utf-8')
        except UnicodeDecodeError as err:
            raise DecodeError('invalid UTF-8', offset=err.start) from err
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as err:
        raise DecodeError(err.msg, offset=err.pos) from err
    if not isinstance(data, dict):
        raise DecodeError('expected a JSON object', offset=0)
    serializer = OperationSerializer(data=data)
    if not serializer.is_valid():
        raise DecodeError(
            'invalid operation record',
            offset=0,
            errors=serializer.errors
        )
    return serializer.to_operation()


def read_oplog(path: Union[str, Path]) -> List[Operation]:
    """Read an op-log file; offsets of errors are relative to the file."""
    ops = []
    offset = 0
    with open(path, 'rb') as handle:
        for lineno, line in enumerate(handle, 1):
            if line.strip():
                try:
                    ops.append(decode_op(line))
                except DecodeError as err:
                    raise DecodeError(
                        f'line {lineno}: {err}',
                        offset=offset + err.offset,
                        errors=err.errors
                    ) from err
            offset += len(line)
    return ops


def write_oplog(path: Union[str, Path], ops: Iterable[Operation]):
    with open(path, 'wb') as handle:
        for op in ops:
            handle.write(encode_op(op) + b'\n')
