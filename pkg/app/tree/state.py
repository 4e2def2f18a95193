"""
Sequential tree state, the tree invariant and ancestry computations.

Every read function accepts any object exposing ``root``, ``nodes``,
``parent`` and ``tombstones``: an immutable TreeState or a replica's
WorkingTree.
"""
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Tuple

from tree import exceptions

ROOT_LABEL = 'root'


@dataclass(frozen=True, order=True)
class NodeId:
    """Node identifier, unique by (origin replica, local counter)"""
    origin: int
    seq: int

    def __post_init__(self):
        if self.origin < 0 and (self.origin, self.seq) != (-1, 0):
            raise ValueError('negative origins are reserved for the root')
        if self.seq < 0:
            raise ValueError('node counters are non-negative')

    def __str__(self):
        if self.is_root:
            return ROOT_LABEL
        return f'{self.origin}:{self.seq}'

    @property
    def is_root(self):
        return self.origin < 0

    @classmethod
    def parse(cls, text):
        """Parse the "origin:seq" form, or the literal "root"."""
        if text == ROOT_LABEL:
            return ROOT
        origin, sep, seq = str(text).partition(':')
        if not sep or not origin.isdigit() or not seq.isdigit():
            raise ValueError(f'malformed node id {text!r}')
        return cls(int(origin), int(seq))


ROOT = NodeId(-1, 0)


class MoveType(Enum):
    UP = 'up'
    DOWN = 'down'


class AbstractionMode(Enum):
    SKIPPING = 'skipping'
    KEEPING = 'keeping'


@dataclass(frozen=True)
class TreeState:
    """Replicated tree state: nodes, child to parent map and tombstones"""
    root: NodeId
    nodes: FrozenSet[NodeId]
    parent: Mapping[NodeId, NodeId]
    tombstones: FrozenSet[NodeId] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, 'nodes', frozenset(self.nodes))
        object.__setattr__(self, 'parent', MappingProxyType(dict(self.parent)))
        object.__setattr__(self, 'tombstones', frozenset(self.tombstones))

    def __hash__(self):
        return hash((
            self.root,
            self.nodes,
            frozenset(self.parent.items()),
            self.tombstones
        ))

    def __len__(self):
        return len(self.nodes)

    def __deepcopy__(self, memo):
        return self


@dataclass(frozen=True)
class InvariantReport:
    """One flag per invariant clause, with a witness for each failure"""
    root_ok: bool
    parent_ok: bool
    unique_ok: bool
    reachable_ok: bool
    root_witness: Optional[NodeId] = None
    parent_witness: Optional[NodeId] = None
    unique_witness: Optional[NodeId] = None
    reachable_witness: Optional[NodeId] = None

    @property
    def ok(self):
        return (
            self.root_ok and self.parent_ok
            and self.unique_ok and self.reachable_ok
        )

    def failures(self) -> List[str]:
        clauses = ['root', 'parent', 'unique', 'reachable']
        return [
            f'{clause} ({getattr(self, clause + "_witness")})'
            for clause in clauses if not getattr(self, clause + '_ok')
        ]

    def __str__(self):
        if self.ok:
            return 'invariant OK'
        return 'invariant violated: ' + ', '.join(self.failures())


def init_tree() -> TreeState:
    return TreeState(ROOT, {ROOT}, {ROOT: ROOT}, frozenset())


def _require(state, *nodes):
    for node in nodes:
        if node not in state.nodes:
            raise exceptions.NodeNotFound(node=node)


def _strict_ancestors(state, n) -> Iterator[NodeId]:
    """Yield the strict ancestors of n, nearest first, up to the root.

    The walk is bounded by the node count so broken states terminate.
    """
    root, parent = state.root, state.parent
    current = n
    for _ in range(len(state.nodes) + 1):
        if current == root:
            return
        current = parent.get(current)
        if current is None:
            return
        yield current


def _climb(state, n, known) -> Tuple[List[NodeId], Optional[NodeId]]:
    """Walk up from n until a node in ``known`` is met.

    Returns the nodes passed on the way and the known node reached, or None
    when the walk leaves the node set, loops, or exceeds the node count.
    """
    trail = []
    seen = set()
    current = n
    for _ in range(len(state.nodes) + 1):
        if current in known:
            return trail, current
        if current in seen:
            return trail, None
        seen.add(current)
        trail.append(current)
        current = state.parent.get(current)
        if current is None:
            return trail, None
    return trail, None


def is_strict_ancestor(state, a: NodeId, n: NodeId) -> bool:
    """True iff a is reached from n by following one or more parent edges"""
    _require(state, a, n)
    return any(ancestor == a for ancestor in _strict_ancestors(state, n))


def path_to_root(state, n: NodeId) -> Tuple[NodeId, ...]:
    """The node sequence from n up to and including the root"""
    _require(state, n)
    path = (n, *_strict_ancestors(state, n))
    if path[-1] != state.root:
        raise exceptions.TreeError(f'{n} does not reach the root', node=n)
    return path


def rank(state, n: NodeId) -> int:
    return len(path_to_root(state, n)) - 1


def check_invariant(state) -> InvariantReport:
    """Check the Root, Parent, Unique and Reachable clauses.

    Works on arbitrary states, failures are reported rather than raised.
    """
    root, nodes, parent = state.root, state.nodes, state.parent
    ordered = sorted(nodes)

    root_ok = (
        root in nodes
        and parent.get(root) == root
        and root not in state.tombstones
    )

    parent_witness = next(
        (n for n in ordered if parent.get(n) not in nodes),
        None
    )

    unique_witness = None
    for child in sorted(parent):
        if child not in nodes or not isinstance(parent[child], NodeId):
            unique_witness = child
            break

    reachable_witness = None
    good = {root}
    for n in ordered:
        trail, reached = _climb(state, n, good)
        if reached is None:
            reachable_witness = n
            break
        good.update(trail)

    return InvariantReport(
        root_ok=root_ok,
        parent_ok=parent_witness is None,
        unique_ok=unique_witness is None,
        reachable_ok=reachable_witness is None,
        root_witness=None if root_ok else root,
        parent_witness=parent_witness,
        unique_witness=unique_witness,
        reachable_witness=reachable_witness,
    )


def critical_ancestors(state, n: NodeId, p_new: NodeId) -> FrozenSet[NodeId]:
    """p_new and its ancestors below the lowest common ancestor with n"""
    _require(state, n, p_new)
    own = {n, *_strict_ancestors(state, n)}
    result = set()
    for candidate in (p_new, *_strict_ancestors(state, p_new)):
        if candidate in own:
            break
        result.add(candidate)
    return frozenset(result)


def critical_descendants(state, n: NodeId) -> FrozenSet[NodeId]:
    """n together with every node having n as a strict ancestor"""
    _require(state, n)
    below: Dict[NodeId, bool] = {n: True}
    if n != state.root:
        below[state.root] = False
    for d in state.nodes:
        trail, reached = _climb(state, d, below)
        flag = reached is not None and below[reached]
        for node in trail:
            below[node] = flag
    return frozenset(node for node, flag in below.items() if flag)


def classify_move(state, n: NodeId, p_new: NodeId) -> MoveType:
    if rank(state, n) > rank(state, p_new):
        return MoveType.UP
    return MoveType.DOWN


def check_move(state, n: NodeId, p_new: NodeId):
    """Raise the guard error for move(n, p_new), if any"""
    _require(state, n, p_new)
    if n == state.root:
        raise exceptions.CannotMoveRoot(node=n)
    if n == p_new:
        raise exceptions.SelfParent(node=n)
    if is_strict_ancestor(state, n, p_new):
        raise exceptions.CyclePreconditionViolated(
            f'{p_new} is a descendant of {n}',
            node=n
        )


def check_add(state, n: NodeId, p: NodeId):
    if n in state.nodes:
        raise exceptions.DuplicateNode(node=n)
    if p not in state.nodes:
        raise exceptions.ParentNotFound(node=p)


def check_remove(state, n: NodeId):
    _require(state, n)
    if n == state.root:
        raise exceptions.CannotRemoveRoot(node=n)


def apply_add(state: TreeState, n: NodeId, p: NodeId) -> TreeState:
    check_add(state, n, p)
    parent = dict(state.parent)
    parent[n] = p
    return TreeState(state.root, state.nodes | {n}, parent, state.tombstones)


def apply_remove(state: TreeState, n: NodeId) -> TreeState:
    check_remove(state, n)
    if n in state.tombstones:
        return state
    return TreeState(
        state.root,
        state.nodes,
        state.parent,
        state.tombstones | {n}
    )


def apply_move(state: TreeState, n: NodeId, p_new: NodeId) -> TreeState:
    check_move(state, n, p_new)
    parent = dict(state.parent)
    parent[n] = p_new
    return TreeState(state.root, state.nodes, parent, state.tombstones)


def abstract_view(state, mode: AbstractionMode) -> FrozenSet[NodeId]:
    """Nodes visible to queries under the given tombstone abstraction"""
    tombstones = state.tombstones
    if mode is AbstractionMode.SKIPPING:
        status = {state.root: state.root not in tombstones}
        for n in state.nodes:
            trail, reached = _climb(state, n, status)
            visible = reached is not None and status[reached]
            for node in reversed(trail):
                visible = visible and node not in tombstones
                status[node] = visible
        return frozenset(n for n in state.nodes if status.get(n))

    visible = set()
    anchors = {state.root}
    for n in state.nodes:
        if n in tombstones:
            continue
        trail, reached = _climb(state, n, anchors)
        if reached is not None:
            anchors.update(trail)
            visible.update(trail)
            visible.add(reached)
    return frozenset(visible & state.nodes)


def render_tree(state, mode=AbstractionMode.KEEPING) -> str:
    """Indented rendering of a view, tombstoned nodes marked with a dagger"""
    visible = abstract_view(state, mode)
    children = {}
    for n in sorted(visible):
        if n != state.root:
            children.setdefault(state.parent[n], []).append(n)
    lines = []
    stack = [(state.root, 0)] if state.root in visible else []
    while stack:
        node, depth = stack.pop()
        mark = ' †' if node in state.tombstones else ''
        lines.append('  ' * depth + str(node) + mark)
        for child in reversed(children.get(node, [])):
            stack.append((child, depth + 1))
    return '\n'.join(lines)
