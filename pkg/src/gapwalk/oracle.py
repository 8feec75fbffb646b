"""Hidden-label adjacency oracle: a keyed pseudorandom bijection over an m-bit
label space wraps a graph instance, exposing only neighbor queries.

Labels outside the image of the non-isolated vertex enumeration are isolated;
with the default padding almost every random label is isolated, which forces
explorers to grow connected components from their given roots.  Strategies
receive an `OracleView` carrying only `query`; vertex identities come back out
only through `reveal` on the trusted object, used for post-hoc scoring.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

from . import expander_gen
from ._util import derive_seed
from .graph_model import (
    ExpanderVertex,
    GraphParams,
    IsolatedVertex,
    MainGraph,
    Schedule,
    TreeGraph,
    Vertex,
)

MAX_LABEL_BITS = 62
_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class LabelSpaceError(ValueError):
    """Label space too small for the non-isolated vertex set, or too large to index."""


class BudgetExhaustedError(RuntimeError):
    """A query exceeded the attached budget."""


class RevealSealedError(RuntimeError):
    """reveal() called on an oracle whose trusted side has been sealed."""


def _mix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x ^= x >> 30
    x = (x * _MIX1) & _MASK64
    x ^= x >> 27
    x = (x * _MIX2) & _MASK64
    x ^= x >> 31
    return x


class FeistelPermutation:
    """Keyed bijection on [0, 2^bits) built from an alternating-width Feistel
    network with a splitmix-style keyed round function.

    Round subkeys are derived from the 128-bit key by SHA-256.  An even number
    of rounds restores the original half-widths, so odd bit counts are handled
    without cycle walking.
    """

    def __init__(self, bits: int, key: bytes, rounds: int = 8):
        if not 1 <= bits <= MAX_LABEL_BITS:
            raise LabelSpaceError(f"label bits must lie in [1, {MAX_LABEL_BITS}]")
        if len(key) != 16:
            raise ValueError("key must be 16 bytes")
        if rounds < 8 or rounds % 2:
            raise ValueError("rounds must be even and >= 8")
        self.bits = bits
        self.key = key
        self.rounds = rounds
        self.left_bits = bits // 2
        self.right_bits = bits - self.left_bits
        self.subkeys = tuple(
            int.from_bytes(hashlib.sha256(key + bytes([r])).digest()[:8], "little")
            for r in range(rounds)
        )

    def forward(self, x: int) -> int:
        if not 0 <= x < (1 << self.bits):
            raise LabelSpaceError(f"label {x} outside [0, 2^{self.bits})")
        wl, wr = self.left_bits, self.right_bits
        left, right = x >> wr, x & ((1 << wr) - 1)
        for sk in self.subkeys:
            left, right = right, (left ^ _mix64(sk ^ right)) & ((1 << wl) - 1)
            wl, wr = wr, wl
        return (left << wr) | right

    def inverse(self, y: int) -> int:
        if not 0 <= y < (1 << self.bits):
            raise LabelSpaceError(f"label {y} outside [0, 2^{self.bits})")
        wl, wr = self.left_bits, self.right_bits
        left, right = y >> wr, y & ((1 << wr) - 1)
        for sk in reversed(self.subkeys):
            wl, wr = wr, wl
            left, right = (right ^ _mix64(sk ^ left)) & ((1 << wl) - 1), left
        return (left << wr) | right

    # Vectorized twins (bit-identical to the scalar path; cross-checked by tests).

    def forward_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint64)
        wl, wr = self.left_bits, self.right_bits
        left, right = x >> np.uint64(wr), x & np.uint64((1 << wr) - 1)
        for sk in self.subkeys:
            new_right = (left ^ _mix64_array(np.uint64(sk) ^ right)) & np.uint64((1 << wl) - 1)
            left, right = right, new_right
            wl, wr = wr, wl
        return (left << np.uint64(wr)) | right

    def inverse_array(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.uint64)
        wl, wr = self.left_bits, self.right_bits
        left, right = y >> np.uint64(wr), y & np.uint64((1 << wr) - 1)
        for sk in reversed(self.subkeys):
            wl, wr = wr, wl
            left, right = (right ^ _mix64_array(np.uint64(sk) ^ left)) & np.uint64((1 << wl) - 1), left
        return (left << np.uint64(wr)) | right


def _mix64_array(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(_GOLDEN))
    x ^= x >> np.uint64(30)
    x = x * np.uint64(_MIX1)
    x ^= x >> np.uint64(27)
    x = x * np.uint64(_MIX2)
    x ^= x >> np.uint64(31)
    return x


@dataclass
class QueryBudget:
    limit: int
    consumed: int = 0

    def consume(self):
        if self.consumed >= self.limit:
            raise BudgetExhaustedError(f"budget of {self.limit} queries exhausted")
        self.consumed += 1

    @property
    def remaining(self) -> int:
        return self.limit - self.consumed


class OracleView:
    """The only surface exploration strategies see: neighbor queries by label."""

    __slots__ = ("query", "label_bits", "num_labels")

    def __init__(self, query, label_bits: int):
        self.query = query
        self.label_bits = label_bits
        self.num_labels = 1 << label_bits


class LabeledOracle:
    """Query-counted adjacency oracle over a pseudorandomly labeled instance."""

    def __init__(
        self,
        graph: Union[MainGraph, TreeGraph],
        key: bytes,
        padding_ratio: Optional[float] = None,
        label_bits: Optional[int] = None,
    ):
        self.graph = graph
        self.key = key
        if padding_ratio is None:
            params = getattr(graph, "params", None)
            padding_ratio = params.padding_ratio if params is not None else 2.0 ** -20
        if not 0 < padding_ratio <= 1:
            raise LabelSpaceError(f"padding_ratio must lie in (0, 1]: {padding_ratio}")
        self.padding_ratio = padding_ratio
        n = graph.num_nonisolated
        if label_bits is None:
            label_bits = max(1, math.ceil(math.log2(n / padding_ratio)))
        if (1 << label_bits) < n:
            raise LabelSpaceError(
                f"2^{label_bits} labels cannot host {n} non-isolated vertices"
            )
        self.label_bits = label_bits
        self.num_labels = 1 << label_bits
        self.num_nonisolated = n
        self.padding_count = self.num_labels - n
        self.nonisolated_fraction = n / self.num_labels
        self.perm = FeistelPermutation(label_bits, key)
        self._count_lock = threading.Lock()
        self.query_count = 0
        self.sealed = False

    # -- trusted side --------------------------------------------------------

    def label_of(self, v: Vertex) -> int:
        if isinstance(v, IsolatedVertex):
            return self.perm.forward(self.num_nonisolated + v.index)
        return self.perm.forward(self.graph.index_of(v))

    def reveal(self, label: int) -> Vertex:
        """Invert the labeling; trusted post-hoc scoring only."""
        if self.sealed:
            raise RevealSealedError("reveal() is sealed on this oracle")
        idx = self.perm.inverse(label)
        if idx >= self.num_nonisolated:
            return IsolatedVertex(idx - self.num_nonisolated)
        return self.graph.vertex_at(idx)

    def seal(self):
        """Permanently disable reveal(); queries keep working."""
        self.sealed = True

    def root_labels(self) -> list[int]:
        return [self.label_of(r) for r in self.graph.roots()] if isinstance(
            self.graph, TreeGraph
        ) else []

    # -- query side ----------------------------------------------------------

    def query(self, label: int, budget: Optional[QueryBudget] = None) -> tuple:
        """Sorted labels of the neighbors of the vertex behind `label`; empty
        for isolated labels.  Counts every call."""
        if budget is not None:
            budget.consume()
        with self._count_lock:
            self.query_count += 1
        idx = self.perm.inverse(label)
        if idx >= self.num_nonisolated:
            return ()
        fwd = self.perm.forward
        return tuple(sorted(fwd(i) for i in self.graph.neighbor_indices(idx)))

    def view(self) -> OracleView:
        return OracleView(self.query, self.label_bits)

    # -- persistence ---------------------------------------------------------

    def descriptor(self, expander_file: Optional[str] = None) -> dict:
        g = self.graph
        desc = {
            "label_bits": self.label_bits,
            "key": self.key.hex(),
            "padding_ratio": self.padding_ratio,
        }
        if isinstance(g, TreeGraph):
            desc["kind"] = "tree"
            desc["degrees"] = list(g.schedule.degrees)
            desc["depths"] = list(g.schedule.depths)
            desc["level"] = g.k
        else:
            desc["kind"] = "main"
            desc["degrees"] = list(g.params.degrees)
            desc["depths"] = list(g.params.depths)
            desc["girth_floor"] = g.params.girth_floor
            desc["expander_file"] = expander_file
        return desc


def build_oracle(
    graph: Union[MainGraph, TreeGraph],
    key: bytes,
    padding_ratio: Optional[float] = None,
    label_bits: Optional[int] = None,
) -> LabeledOracle:
    return LabeledOracle(graph, key, padding_ratio, label_bits)


def save_descriptor(oracle: LabeledOracle, path, expander_file: Optional[str] = None):
    with open(path, "w") as fh:
        json.dump(oracle.descriptor(expander_file), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_oracle(path) -> LabeledOracle:
    """Rebuild an oracle bit-exactly from its descriptor file."""
    path = Path(path)
    with open(path) as fh:
        desc = json.load(fh)
    key = bytes.fromhex(desc["key"])
    if desc["kind"] == "tree":
        graph = TreeGraph(
            Schedule(tuple(desc["degrees"]), tuple(desc["depths"])), desc["level"]
        )
    else:
        expander = expander_gen.load(path.parent / desc["expander_file"])
        params = GraphParams.scaled(
            tuple(desc["degrees"]),
            tuple(desc["depths"]),
            expander_size=expander.N,
            girth_floor=desc.get("girth_floor", 3),
            padding_ratio=desc["padding_ratio"],
        )
        graph = MainGraph(params, expander)
    return LabeledOracle(
        graph, key, padding_ratio=desc["padding_ratio"], label_bits=desc["label_bits"]
    )


# ---------------------------------------------------------------------------
# guiding-state input samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GuidingSpec:
    """Input distribution handed to experiment algorithms.

    kinds: "exact-ground-state" (the squared-amplitude distribution),
    "expander-uniform", "single-fixed-root" (constant root label), and
    "mixture" with (weight, GuidingSpec) components.
    """

    kind: str
    root: Optional[int] = None
    components: tuple = ()

    def __post_init__(self):
        kinds = {"exact-ground-state", "expander-uniform", "single-fixed-root", "mixture"}
        if self.kind not in kinds:
            raise ValueError(f"unknown guiding kind {self.kind!r}")
        if self.kind == "mixture":
            if not self.components:
                raise ValueError("mixture needs components")
            total = sum(w for w, _ in self.components)
            if not math.isclose(total, 1.0, rel_tol=1e-9):
                raise ValueError(f"mixture weights sum to {total}, expected 1")
            if any(w < 0 for w, _ in self.components):
                raise ValueError("mixture weights must be non-negative")


def input_sampler(oracle: LabeledOracle, spec: GuidingSpec, seed: int) -> Iterator[int]:
    """Deterministic i.i.d. label stream for a guiding spec."""
    import random as _random

    from . import spectral

    rng = _random.Random(derive_seed("guiding", seed, spec.kind))
    graph = oracle.graph

    if spec.kind == "single-fixed-root":
        if spec.root is not None:
            fixed = spec.root
        elif isinstance(graph, TreeGraph):
            fixed = oracle.label_of(graph.root)
        else:
            fixed = oracle.label_of(ExpanderVertex(0))
        while True:
            yield fixed

    elif spec.kind == "expander-uniform":
        if not isinstance(graph, MainGraph):
            raise ValueError("expander-uniform guiding needs a main-graph oracle")
        n_e = graph.expander.N
        while True:
            yield oracle.label_of(ExpanderVertex(rng.randrange(n_e)))

    elif spec.kind == "exact-ground-state":
        if not isinstance(graph, MainGraph):
            raise ValueError("ground-state guiding needs a main-graph oracle")
        solution = spectral.solve_for_instance(graph)
        sampler = spectral.GroundStateSampler(solution, graph.expander.N, seed=0)
        while True:
            yield oracle.label_of(sampler.sample(rng))

    else:  # mixture
        subs = [
            (w, input_sampler(oracle, sub, derive_seed(seed, i)))
            for i, (w, sub) in enumerate(spec.components)
        ]
        weights = [w for w, _ in subs]
        while True:
            x = rng.random()
            for w, stream in subs:
                if x < w:
                    yield next(stream)
                    break
                x -= w
            else:
                yield next(subs[-1][1])
