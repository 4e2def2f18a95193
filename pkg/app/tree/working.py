"""
Mutable tree used inside replicas
"""
from typing import Optional

from tree.state import NodeId, TreeState, init_tree


class WorkingTree:
    """Mutable tree exposing the read interface of TreeState.

    No guard is checked here: replicas validate with the tree-core checks
    before mutating. Snapshots are cached until the next mutation.
    """

    def __init__(self, state: Optional[TreeState] = None):
        if state is None:
            state = init_tree()
        self.root = state.root
        self.nodes = set(state.nodes)
        self.parent = dict(state.parent)
        self.tombstones = set(state.tombstones)
        self._snapshot = state

    def snapshot(self) -> TreeState:
        if self._snapshot is None:
            self._snapshot = TreeState(
                self.root,
                self.nodes,
                self.parent,
                self.tombstones
            )
        return self._snapshot

    def add(self, n: NodeId, p: NodeId):
        self.nodes.add(n)
        self.parent[n] = p
        self._snapshot = None

    def discard(self, n: NodeId):
        self.nodes.discard(n)
        self.parent.pop(n, None)
        self._snapshot = None

    def tombstone(self, n: NodeId) -> bool:
        """Mark n removed, returning False when it already was"""
        if n in self.tombstones:
            return False
        self.tombstones.add(n)
        self._snapshot = None
        return True

    def revive(self, n: NodeId):
        self.tombstones.discard(n)
        self._snapshot = None

    def set_parent(self, n: NodeId, p: NodeId) -> Optional[NodeId]:
        previous = self.parent.get(n)
        if previous != p:
            self.parent[n] = p
            self._snapshot = None
        return previous

    def __len__(self):
        return len(self.nodes)
