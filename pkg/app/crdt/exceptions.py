"""
Errors raised by the replication protocol
"""


class OperationError(ValueError):
    """Operation used where its kind or metadata does not fit"""

    def __init__(self, code, message=None):
        self.code = code
        super().__init__(message or code)


class CausalityError(ValueError):
    """Operation log or delivery query breaks causal closure"""

    def __init__(self, code, message=None):
        self.code = code
        super().__init__(message or code)


class DecodeError(ValueError):
    """Malformed op-log record, ``offset`` points into the input"""

    def __init__(self, message, offset=0, errors=None):
        self.offset = offset
        self.errors = errors
        super().__init__(f'{message} (offset {offset})')
