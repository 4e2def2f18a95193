"""
Errors raised by tree operations
"""


class TreeError(ValueError):
    """Base error for tree operations, identified by a stable code"""
    code = 'tree-error'

    def __init__(self, message=None, node=None):
        self.node = node
        if message is None:
            message = self.code if node is None else f'{self.code}: {node}'
        super().__init__(message)


class NodeNotFound(TreeError):
    code = 'node-not-found'


class DuplicateNode(TreeError):
    code = 'duplicate-node'


class ParentNotFound(TreeError):
    code = 'parent-not-found'


class CannotRemoveRoot(TreeError):
    code = 'cannot-remove-root'


class CannotMoveRoot(TreeError):
    code = 'cannot-move-root'


class SelfParent(TreeError):
    code = 'self-parent'


class CyclePreconditionViolated(TreeError):
    code = 'cycle-precondition-violated'


class PreconditionViolated(TreeError):
    """Request rejected at its origin replica, nothing is sent"""
    code = 'precondition-violated'

    def __init__(self, cause):
        self.cause = cause
        super().__init__(
            f'{self.code}: {cause}',
            node=getattr(cause, 'node', None)
        )
