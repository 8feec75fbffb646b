"""Parameter schedules, vertex addressing and label-free neighbor/geometry logic.

The graph family: a regular core graph (the "expander") where every core vertex
carries, for each level k = 1..K-1, (d_k - d_{k+1}) pendant copies of the
recursively decorated tree of level k.  A level-k tree is a perfect tree whose
internal vertices have d_k - 1 children and whose leaves sit at depth l_k; every
internal vertex additionally carries, for each lower level i < k, (d_i - d_{i+1})
pendant copies of the level-i tree.  With expander degree equal to d_K every
non-leaf, non-isolated vertex of the assembled graph has degree d_1.

Everything here is pure and immutable; no vertex set is ever materialized unless
`materialize` is called explicitly.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Union

MATERIALIZE_CAP = 200_000
RANKING_CAP = 1 << 50

CORE = "c"
DECOR = "d"


class ScheduleError(ValueError):
    """Invalid degree/depth schedule or parameters."""


class InvalidAddressError(ValueError):
    """A tree address that does not denote a node of the requested tree."""


class InvalidVertexError(ValueError):
    """A vertex that does not belong to the instance."""


class SizeCapError(RuntimeError):
    """Instance too large for the requested dense / label-indexed operation."""


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

def degree_schedule(n: int, k: int) -> int:
    """Level-k degree 2n - k*sqrt(n) of the standard family; n must be a perfect square."""
    root = _exact_sqrt(n)
    if not 1 <= k <= root:
        raise ScheduleError(f"level k={k} out of range [1, {root}]")
    return 2 * n - k * root


def depth_schedule(n: int, k: int) -> int:
    """Level-k depth k * 10 * n^(3/2) * log2(n), rounded to the nearest integer."""
    root = _exact_sqrt(n)
    if not 1 <= k <= root:
        raise ScheduleError(f"level k={k} out of range [1, {root}]")
    return round(k * 10 * n * root * math.log2(n))


def standard_girth_floor(n: int) -> int:
    """Core girth requirement 40 n^2 log2(n) + 8 of the standard family."""
    return round(40 * n * n * math.log2(n)) + 8


def standard_expander_size(n: int) -> int:
    """Core vertex count 2^(21 n^2 log2(n)^2) of the standard family (exact big int)."""
    return 1 << round(21 * n * n * math.log2(n) ** 2)


def _exact_sqrt(n: int) -> int:
    if n < 1:
        raise ScheduleError("n must be positive")
    root = math.isqrt(n)
    if root * root != n:
        raise ScheduleError(f"n={n} is not a perfect square")
    return root


@dataclass(frozen=True)
class Schedule:
    """Degree/depth schedule (d_1..d_K, l_1..l_K) defining the tree family.

    Degrees strictly decrease with d_K >= 2; depths strictly increase.  A depth
    of 0 (single-vertex core) is allowed only at level 1, for degenerate
    spectral fixtures; graph instances require depths >= 1.
    """

    degrees: tuple[int, ...]
    depths: tuple[int, ...]

    def __post_init__(self):
        d, l = self.degrees, self.depths
        if len(d) != len(l) or not d:
            raise ScheduleError("degrees and depths must be equal-length, non-empty")
        if any(d[i] <= d[i + 1] for i in range(len(d) - 1)):
            raise ScheduleError(f"degrees must strictly decrease: {d}")
        if d[-1] < 2:
            raise ScheduleError(f"last degree must be >= 2: {d}")
        if any(l[i] >= l[i + 1] for i in range(len(l) - 1)):
            raise ScheduleError(f"depths must strictly increase: {l}")
        if l[0] < 0:
            raise ScheduleError(f"depths must be non-negative: {l}")

    @property
    def levels(self) -> int:
        return len(self.degrees)

    def degree(self, k: int) -> int:
        self._check_level(k)
        return self.degrees[k - 1]

    def depth(self, k: int) -> int:
        self._check_level(k)
        return self.depths[k - 1]

    def branching(self, k: int) -> int:
        """Core children per internal vertex of a level-k segment."""
        return self.degree(k) - 1

    def decoration_count(self, i: int) -> int:
        """Pendant level-i tree copies per decorated vertex: d_i - d_{i+1}."""
        self._check_level(i)
        if i >= self.levels:
            raise ScheduleError(f"decoration count undefined at top level {i}")
        return self.degrees[i - 1] - self.degrees[i]

    def decoration_levels(self, j: int) -> tuple[int, ...]:
        """Decoration levels attached to internal level-j vertices, descending."""
        self._check_level(j)
        return tuple(range(j - 1, 0, -1))

    def _check_level(self, k: int):
        if not 1 <= k <= self.levels:
            raise ScheduleError(f"level {k} out of range [1, {self.levels}]")


@dataclass(frozen=True)
class GraphParams:
    """Full parameter set for one instance of the graph family."""

    degrees: tuple[int, ...]
    depths: tuple[int, ...]
    expander_degree: int
    expander_size: int
    girth_floor: int
    padding_ratio: float
    scale_mode: str  # "standard" | "scaled"
    n: Optional[int] = None

    def __post_init__(self):
        sched = Schedule(self.degrees, self.depths)
        if self.depths[0] < 1:
            raise ScheduleError("graph instances require depths >= 1")
        # Degree identity: d_E + sum_{k<K}(d_k - d_{k+1}) = d_1 forces d_E = d_K.
        if self.expander_degree != self.degrees[-1]:
            raise ScheduleError(
                f"expander degree {self.expander_degree} must equal the last "
                f"schedule degree {self.degrees[-1]} for degree regularity"
            )
        if not 0 < self.padding_ratio <= 1:
            raise ScheduleError(f"padding_ratio must lie in (0, 1]: {self.padding_ratio}")
        if self.scale_mode not in ("standard", "scaled"):
            raise ScheduleError(f"unknown scale_mode {self.scale_mode!r}")
        object.__setattr__(self, "_schedule", sched)

    @property
    def schedule(self) -> Schedule:
        return self._schedule

    @property
    def levels(self) -> int:
        return len(self.degrees)

    @classmethod
    def standard(cls, n: int, padding_ratio: Optional[float] = None) -> "GraphParams":
        """Standard-family parameters for perfect-square n."""
        root = _exact_sqrt(n)
        degrees = tuple(degree_schedule(n, k) for k in range(1, root + 1))
        depths = tuple(depth_schedule(n, k) for k in range(1, root + 1))
        return cls(
            degrees=degrees,
            depths=depths,
            expander_degree=n,
            expander_size=standard_expander_size(n),
            girth_floor=standard_girth_floor(n),
            padding_ratio=padding_ratio if padding_ratio is not None else 2.0 ** -20,
            scale_mode="standard",
            n=n,
        )

    @classmethod
    def scaled(
        cls,
        degrees: Iterable[int],
        depths: Iterable[int],
        expander_size: int,
        girth_floor: int = 3,
        padding_ratio: float = 2.0 ** -20,
    ) -> "GraphParams":
        degrees = tuple(degrees)
        depths = tuple(depths)
        return cls(
            degrees=degrees,
            depths=depths,
            expander_degree=degrees[-1],
            expander_size=expander_size,
            girth_floor=girth_floor,
            padding_ratio=padding_ratio,
            scale_mode="scaled",
        )

    def attached_levels(self) -> tuple[int, ...]:
        """Tree levels attached to each expander vertex: 1..K-1."""
        return tuple(range(1, self.levels))


# ---------------------------------------------------------------------------
# vertices and tree addresses
# ---------------------------------------------------------------------------

class ExpanderVertex(NamedTuple):
    index: int


class TreeVertex(NamedTuple):
    anchor: int
    level: int
    copy: int
    address: tuple


class IsolatedVertex(NamedTuple):
    index: int


Vertex = Union[ExpanderVertex, TreeVertex, IsolatedVertex]


def core_hop(child: int) -> tuple:
    return (CORE, child)


def decoration_hop(level: int, slot: int) -> tuple:
    return (DECOR, level, slot)


class NodeClass(NamedTuple):
    """Structural class of a tree node: containing segment level and depth within it."""

    segment: int
    depth: int


def classify_address(schedule: Schedule, k: int, address: tuple) -> NodeClass:
    """Walk an address from the level-k root, validating every hop."""
    schedule._check_level(k)
    seg, depth = k, 0
    for hop in address:
        if depth >= schedule.depth(seg):
            raise InvalidAddressError(f"hop below a leaf in {address!r}")
        if hop[0] == CORE:
            child = hop[1]
            if not 0 <= child < schedule.branching(seg):
                raise InvalidAddressError(f"core child {child} out of range in {address!r}")
            depth += 1
        elif hop[0] == DECOR:
            _, lvl, slot = hop
            if not 1 <= lvl < seg:
                raise InvalidAddressError(f"decoration level {lvl} invalid below segment {seg}")
            if not 0 <= slot < schedule.decoration_count(lvl):
                raise InvalidAddressError(f"decoration slot {slot} out of range in {address!r}")
            seg, depth = lvl, 0
        else:
            raise InvalidAddressError(f"unknown hop {hop!r}")
    return NodeClass(seg, depth)


def is_leaf(schedule: Schedule, node: NodeClass) -> bool:
    return node.depth == schedule.depth(node.segment)


def leaf_level(k: int, node: NodeClass) -> int:
    """Level of a leaf within the level-k tree: 0 for outermost-core (exit) leaves."""
    return k - node.segment


def tree_children(schedule: Schedule, k: int, address: tuple) -> tuple[list[tuple], NodeClass]:
    """Children addresses in canonical order (core first, then decorations by
    descending level) plus the node's structural class.  Leaves have no children."""
    node = classify_address(schedule, k, address)
    if is_leaf(schedule, node):
        return [], node
    children = [address + (core_hop(t),) for t in range(schedule.branching(node.segment))]
    for lvl in schedule.decoration_levels(node.segment):
        for slot in range(schedule.decoration_count(lvl)):
            children.append(address + (decoration_hop(lvl, slot),))
    return children, node


# ---------------------------------------------------------------------------
# exact counting (arbitrary precision)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _core_counts(degrees: tuple, depths: tuple, j: int) -> tuple[int, int]:
    """(internal vertex count, leaf count) of a bare level-j perfect tree."""
    b = degrees[j - 1] - 1
    depth = depths[j - 1]
    if b == 1:
        return depth, 1
    return (b ** depth - 1) // (b - 1), b ** depth


@lru_cache(maxsize=None)
def _tree_count(degrees: tuple, depths: tuple, k: int) -> int:
    internal, leaves = _core_counts(degrees, depths, k)
    per_internal = sum(
        (degrees[i - 1] - degrees[i]) * _tree_count(degrees, depths, i)
        for i in range(1, k)
    )
    return internal + leaves + internal * per_internal


def count_tree_vertices(schedule: Schedule, k: int) -> int:
    """Exact vertex count of the fully decorated level-k tree."""
    schedule._check_level(k)
    return _tree_count(schedule.degrees, schedule.depths, k)


def count_core_vertices(schedule: Schedule, j: int) -> int:
    internal, leaves = _core_counts(schedule.degrees, schedule.depths, j)
    return internal + leaves


def count_main_nonisolated(params: GraphParams) -> int:
    """Exact non-isolated vertex count of the assembled graph."""
    per_anchor = 1 + sum(
        params.schedule.decoration_count(k) * count_tree_vertices(params.schedule, k)
        for k in params.attached_levels()
    )
    return params.expander_size * per_anchor


# ---------------------------------------------------------------------------
# canonical ranking of tree nodes (preorder; children in canonical order)
# ---------------------------------------------------------------------------

class _SubtreeSizes:
    """Subtree sizes per (segment level, depth), plus child-block offsets."""

    def __init__(self, schedule: Schedule, k: int):
        self.schedule = schedule
        self.k = k
        self.sizes: dict[int, list[int]] = {}
        dec_totals: dict[int, int] = {}
        for j in range(1, k + 1):
            dec_total = sum(
                schedule.decoration_count(i) * self.sizes[i][0]
                for i in schedule.decoration_levels(j)
            )
            dec_totals[j] = dec_total
            depth_j = schedule.depth(j)
            b = schedule.branching(j)
            arr = [0] * (depth_j + 1)
            arr[depth_j] = 1
            for p in range(depth_j - 1, -1, -1):
                arr[p] = 1 + b * arr[p + 1] + dec_total
            self.sizes[j] = arr
        # Offsets of descending-level decoration blocks after the core blocks.
        self.dec_offsets: dict[int, dict[int, int]] = {}
        for j in range(1, k + 1):
            offs, acc = {}, 0
            for lvl in schedule.decoration_levels(j):
                offs[lvl] = acc
                acc += schedule.decoration_count(lvl) * self.sizes[lvl][0]
            self.dec_offsets[j] = offs

    def total(self) -> int:
        return self.sizes[self.k][0]

    def rank(self, address: tuple) -> int:
        sched = self.schedule
        seg, depth, r = self.k, 0, 0
        for hop in address:
            if depth >= sched.depth(seg):
                raise InvalidAddressError(f"hop below a leaf in {address!r}")
            child_size = self.sizes[seg][depth + 1]
            r += 1
            if hop[0] == CORE:
                t = hop[1]
                if not 0 <= t < sched.branching(seg):
                    raise InvalidAddressError(f"core child {t} out of range")
                r += t * child_size
                depth += 1
            else:
                _, lvl, slot = hop
                if not 1 <= lvl < seg or not 0 <= slot < sched.decoration_count(lvl):
                    raise InvalidAddressError(f"bad decoration hop {hop!r}")
                r += sched.branching(seg) * child_size
                r += self.dec_offsets[seg][lvl] + slot * self.sizes[lvl][0]
                seg, depth = lvl, 0
        return r

    def unrank(self, r: int) -> tuple:
        if not 0 <= r < self.total():
            raise InvalidAddressError(f"rank {r} out of range")
        sched = self.schedule
        seg, depth = self.k, 0
        hops = []
        while r > 0:
            r -= 1
            child_size = self.sizes[seg][depth + 1]
            core_block = sched.branching(seg) * child_size
            if r < core_block:
                t, r = divmod(r, child_size)
                hops.append(core_hop(t))
                depth += 1
                continue
            r -= core_block
            for lvl in sched.decoration_levels(seg):
                block = sched.decoration_count(lvl) * self.sizes[lvl][0]
                if r < block:
                    slot, r = divmod(r, self.sizes[lvl][0])
                    hops.append(decoration_hop(lvl, slot))
                    seg, depth = lvl, 0
                    break
                r -= block
            else:
                raise InvalidAddressError("rank walk escaped decoration blocks")
        return tuple(hops)


@lru_cache(maxsize=None)
def _sizes_for(degrees: tuple, depths: tuple, k: int) -> _SubtreeSizes:
    return _SubtreeSizes(Schedule(degrees, depths), k)


# ---------------------------------------------------------------------------
# graph instances
# ---------------------------------------------------------------------------

class TreeGraph:
    """A standalone fully decorated level-k tree, rooted; used by tree-exploration
    experiments.  The root has no parent, so its degree is d_1 - 1."""

    def __init__(self, params_or_schedule, k: int):
        if isinstance(params_or_schedule, GraphParams):
            self.schedule = params_or_schedule.schedule
            self.params = params_or_schedule
        else:
            self.schedule = params_or_schedule
            self.params = None
        self.schedule._check_level(k)
        if self.schedule.depth(1) < 1:
            raise ScheduleError("tree instances require depths >= 1")
        self.k = k
        self.num_nonisolated = count_tree_vertices(self.schedule, k)
        if self.num_nonisolated > RANKING_CAP:
            raise SizeCapError(
                f"tree with a ~{self.num_nonisolated.bit_length()}-bit vertex count "
                f"exceeds the ranking cap 2^{RANKING_CAP.bit_length() - 1}"
            )
        self._sizes = _sizes_for(self.schedule.degrees, self.schedule.depths, k)
        self._nbr_cache: dict[int, tuple] = {}

    def neighbor_indices(self, index: int) -> tuple:
        """Canonical indices of the neighbors of the vertex at `index`; cached,
        since the index-level topology is shared by every labeling."""
        cached = self._nbr_cache.get(index)
        if cached is None:
            v = self.vertex_at(index)
            cached = tuple(self.index_of(w) for w in self.neighbors(v))
            if len(self._nbr_cache) < 1 << 20:
                self._nbr_cache[index] = cached
        return cached

    @property
    def root(self) -> TreeVertex:
        return TreeVertex(0, self.k, 0, ())

    def roots(self) -> list[Vertex]:
        return [self.root]

    def contains(self, v: Vertex) -> bool:
        return (
            isinstance(v, TreeVertex)
            and v.anchor == 0
            and v.copy == 0
            and v.level == self.k
        )

    def neighbors(self, v: Vertex) -> list[Vertex]:
        if isinstance(v, IsolatedVertex):
            return []
        if not self.contains(v):
            raise InvalidVertexError(f"{v!r} is not a vertex of this tree")
        children, _ = tree_children(self.schedule, self.k, v.address)
        out = []
        if v.address:
            out.append(TreeVertex(0, self.k, 0, v.address[:-1]))
        out.extend(TreeVertex(0, self.k, 0, a) for a in children)
        return out

    def classify(self, v: TreeVertex) -> NodeClass:
        return classify_address(self.schedule, self.k, v.address)

    def leaf_level(self, v: TreeVertex) -> Optional[int]:
        node = self.classify(v)
        if not is_leaf(self.schedule, node):
            return None
        return leaf_level(self.k, node)

    def index_of(self, v: TreeVertex) -> int:
        if not self.contains(v):
            raise InvalidVertexError(f"{v!r} is not a vertex of this tree")
        return self._sizes.rank(v.address)

    def vertex_at(self, index: int) -> TreeVertex:
        return TreeVertex(0, self.k, 0, self._sizes.unrank(index))


class MainGraph:
    """The assembled instance: expander core plus attached trees at levels 1..K-1.

    `expander` must expose `N` (vertex count) and `adjacency` (per-vertex sorted
    neighbor tuples); its degree must equal params.expander_degree.
    """

    def __init__(self, params: GraphParams, expander):
        self.params = params
        self.schedule = params.schedule
        self.expander = expander
        if expander.N != params.expander_size:
            raise InvalidVertexError(
                f"expander has {expander.N} vertices, params say {params.expander_size}"
            )
        degs = {len(nbrs) for nbrs in expander.adjacency}
        if degs != {params.expander_degree}:
            raise InvalidVertexError(
                f"expander degree set {degs} does not match d_E={params.expander_degree}"
            )
        self._attach = [
            (k, self.schedule.decoration_count(k)) for k in params.attached_levels()
        ]
        self._tree_sizes = {
            k: count_tree_vertices(self.schedule, k) for k, _ in self._attach
        }
        self.per_anchor = 1 + sum(c * self._tree_sizes[k] for k, c in self._attach)
        self.num_nonisolated = expander.N * self.per_anchor
        self._rankers = {}
        if self.num_nonisolated <= RANKING_CAP:
            self._rankers = {
                k: _sizes_for(self.schedule.degrees, self.schedule.depths, k)
                for k, _ in self._attach
            }
        # Cumulative offsets of (level, copy) tree blocks within one anchor block.
        self._block_offsets = []
        acc = 1
        for k, c in self._attach:
            self._block_offsets.append((k, c, acc, self._tree_sizes[k]))
            acc += c * self._tree_sizes[k]
        self._bfs_cache: dict[int, list[int]] = {}
        self._nbr_cache: dict[int, tuple] = {}

    def neighbor_indices(self, index: int) -> tuple:
        """Canonical indices of the neighbors of the vertex at `index`; cached,
        since the index-level topology is shared by every labeling."""
        cached = self._nbr_cache.get(index)
        if cached is None:
            v = self.vertex_at(index)
            cached = tuple(self.index_of(w) for w in self.neighbors(v))
            if len(self._nbr_cache) < 1 << 20:
                self._nbr_cache[index] = cached
        return cached

    # -- structure ---------------------------------------------------------

    def degree_identity(self) -> bool:
        d = self.schedule.degrees
        return self.params.expander_degree + sum(
            d[k - 1] - d[k] for k in range(1, len(d))
        ) == d[0]

    def neighbors(self, v: Vertex) -> list[Vertex]:
        if isinstance(v, IsolatedVertex):
            return []
        if isinstance(v, ExpanderVertex):
            if not 0 <= v.index < self.expander.N:
                raise InvalidVertexError(f"expander index {v.index} out of range")
            out: list[Vertex] = [ExpanderVertex(w) for w in self.expander.adjacency[v.index]]
            for k, c in self._attach:
                out.extend(TreeVertex(v.index, k, j, ()) for j in range(c))
            return out
        if isinstance(v, TreeVertex):
            self._check_tree_vertex(v)
            children, _ = tree_children(self.schedule, v.level, v.address)
            out = []
            if v.address:
                out.append(TreeVertex(v.anchor, v.level, v.copy, v.address[:-1]))
            else:
                out.append(ExpanderVertex(v.anchor))
            out.extend(TreeVertex(v.anchor, v.level, v.copy, a) for a in children)
            return out
        raise InvalidVertexError(f"unknown vertex {v!r}")

    def _check_tree_vertex(self, v: TreeVertex):
        if not 0 <= v.anchor < self.expander.N:
            raise InvalidVertexError(f"anchor {v.anchor} out of range")
        lvls = dict(self._attach)
        if v.level not in lvls:
            raise InvalidVertexError(f"no trees attached at level {v.level}")
        if not 0 <= v.copy < lvls[v.level]:
            raise InvalidVertexError(f"copy {v.copy} out of range at level {v.level}")

    def expander_anchor(self, v: Vertex) -> int:
        """Index of the closest expander vertex (identity on the core)."""
        if isinstance(v, ExpanderVertex):
            return v.index
        if isinstance(v, TreeVertex):
            return v.anchor
        raise InvalidVertexError("isolated vertices have no expander anchor")

    def classify(self, v: TreeVertex) -> NodeClass:
        return classify_address(self.schedule, v.level, v.address)

    def leaf_level(self, v: Vertex) -> Optional[int]:
        if not isinstance(v, TreeVertex):
            return None
        node = self.classify(v)
        if not is_leaf(self.schedule, node):
            return None
        return leaf_level(v.level, node)

    # -- distance ----------------------------------------------------------

    def _bfs_from(self, source: int) -> list[int]:
        cached = self._bfs_cache.get(source)
        if cached is not None:
            return cached
        adj = self.expander.adjacency
        dist = [-1] * self.expander.N
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if len(self._bfs_cache) < 64:
            self._bfs_cache[source] = dist
        return dist

    def expander_distance(self, u: Vertex, v: Vertex) -> int:
        """Number of expander vertices on a shortest path, endpoints included.

        Zero iff both endpoints live in the same attached tree; vertices of
        distinct trees sharing an anchor are at distance 1.  Satisfies the
        triangle inequality.
        """
        for x in (u, v):
            if isinstance(x, IsolatedVertex):
                raise InvalidVertexError("distance undefined for isolated vertices")
        if (
            isinstance(u, TreeVertex)
            and isinstance(v, TreeVertex)
            and (u.anchor, u.level, u.copy) == (v.anchor, v.level, v.copy)
        ):
            return 0
        a, b = self.expander_anchor(u), self.expander_anchor(v)
        d = self._bfs_from(a)[b]
        if d < 0:
            raise InvalidVertexError("expander is disconnected between the anchors")
        return 1 + d

    def expander_distance_to_set(self, us: Iterable[Vertex], v: Vertex) -> int:
        return min(self.expander_distance(u, v) for u in us)

    # -- canonical enumeration ---------------------------------------------

    def index_of(self, v: Vertex) -> int:
        if isinstance(v, ExpanderVertex):
            return v.index
        if isinstance(v, TreeVertex):
            self._require_ranking()
            self._check_tree_vertex(v)
            base = self.expander.N + v.anchor * (self.per_anchor - 1)
            # Anchor blocks hold only tree vertices; the anchor itself is indexed
            # in the expander range, hence per_anchor - 1 per block.
            for k, c, off, size in self._block_offsets:
                if k == v.level:
                    return base + (off - 1) + v.copy * size + self._rankers[k].rank(v.address)
            raise InvalidVertexError(f"no block for level {v.level}")
        raise InvalidVertexError("isolated vertices are not enumerated")

    def vertex_at(self, index: int) -> Vertex:
        self._require_ranking()
        if not 0 <= index < self.num_nonisolated:
            raise InvalidVertexError(f"index {index} out of range")
        if index < self.expander.N:
            return ExpanderVertex(index)
        r = index - self.expander.N
        anchor, r = divmod(r, self.per_anchor - 1)
        r += 1
        for k, c, off, size in self._block_offsets:
            if r < off + c * size:
                copy, inner = divmod(r - off, size)
                return TreeVertex(anchor, k, copy, self._rankers[k].unrank(inner))
        raise InvalidVertexError("index walk escaped anchor block")

    def _require_ranking(self):
        if not self._rankers:
            raise SizeCapError(
                f"instance with a ~{self.num_nonisolated.bit_length()}-bit vertex "
                f"count exceeds the ranking cap 2^{RANKING_CAP.bit_length() - 1}"
            )


Instance = Union[TreeGraph, MainGraph]


# ---------------------------------------------------------------------------
# materialization (small instances only)
# ---------------------------------------------------------------------------

@dataclass
class MaterializedGraph:
    vertices: list
    index: dict
    adjacency: list  # list[list[int]], sorted

    @property
    def n(self) -> int:
        return len(self.vertices)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])


def materialize(graph: Instance, cap: int = MATERIALIZE_CAP) -> MaterializedGraph:
    """Explicit vertex list + adjacency of a small instance, in canonical order."""
    n = graph.num_nonisolated
    if n > cap:
        raise SizeCapError(f"{n} vertices exceeds materialization cap {cap}")
    vertices = [graph.vertex_at(i) for i in range(n)]
    index = {v: i for i, v in enumerate(vertices)}
    adjacency = []
    for v in vertices:
        adjacency.append(sorted(index[w] for w in graph.neighbors(v)))
    return MaterializedGraph(vertices, index, adjacency)


def bfs_distances(adjacency: list, source: int) -> list[int]:
    """Plain BFS hop distances on an adjacency-list graph; -1 for unreachable."""
    dist = [-1] * len(adjacency)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def shortest_path(adjacency: list, source: int, target: int) -> list[int]:
    """One shortest path (vertex index sequence) via BFS parents."""
    parent = {source: source}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if u == target:
            break
        for w in adjacency[u]:
            if w not in parent:
                parent[w] = u
                queue.append(w)
    if target not in parent:
        raise InvalidVertexError("target unreachable")
    path = [target]
    while path[-1] != source:
        path.append(parent[path[-1]])
    return path[::-1]
