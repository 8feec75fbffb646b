"""Exploration strategies against labeled oracles, transcript recording, and
post-hoc event scoring.

Strategies see only the oracle view (neighbor lists by label). The runner holds
the trusted oracle, records every query, classifies the revealed vertex behind
it (isolated hit, leaf level, which decoration copy a leaf belongs to), and can
halt a run when the watched event fires. Scoring therefore never leaks back
into the strategy.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from ._util import binomial_stderr, derive_key, derive_seed, wilson_interval
from .graph_model import (
    DECOR,
    IsolatedVertex,
    MainGraph,
    Schedule,
    TreeGraph,
    TreeVertex,
    Vertex,
    is_leaf,
    classify_address,
    leaf_level,
)
from .oracle import BudgetExhaustedError, LabeledOracle, QueryBudget


class ExplorationHalted(Exception):
    """Raised into a strategy when its run is over (budget or watched event)."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class UnknownStrategyError(ValueError):
    pass


@dataclass
class Step:
    label: int
    answer_size: int
    fresh: bool = False
    is_root: bool = False


@dataclass
class Transcript:
    """Ordered record of one exploration run."""

    roots: list
    steps: list
    events: list
    query_count: int
    seed: int
    strategy: str
    budget: int
    halted: str = "done"
    output: Optional[int] = None
    answers: Optional[list] = None  # full answers, kept in memory for audits

    SCHEMA = 1

    def to_record(self) -> dict:
        return {
            "schema": self.SCHEMA,
            "roots": list(self.roots),
            "steps": [[s.label, s.answer_size, int(s.fresh), int(s.is_root)] for s in self.steps],
            "events": self.events,
            "query_count": self.query_count,
            "seed": self.seed,
            "strategy": self.strategy,
            "budget": self.budget,
            "halted": self.halted,
            "output": self.output,
        }


@dataclass(frozen=True)
class EventStats:
    trials: int
    successes: int
    p_hat: float
    stderr: float
    wilson: tuple

    @classmethod
    def from_counts(cls, successes: int, trials: int) -> "EventStats":
        p = successes / trials if trials else 0.0
        return cls(trials, successes, p, binomial_stderr(successes, trials), wilson_interval(successes, trials))


def _decoration_prefix(address: tuple) -> Optional[tuple]:
    """Address prefix up to and including the first decoration hop; identifies
    the outermost decoration copy a node lives in (None inside the outer core)."""
    for i, hop in enumerate(address):
        if hop[0] == DECOR:
            return address[: i + 1]
    return None


def classify_vertex(graph: Union[TreeGraph, MainGraph], v: Vertex) -> dict:
    """Event-relevant classification of a revealed vertex."""
    if isinstance(v, IsolatedVertex):
        return {"kind": "isolated"}
    if isinstance(v, TreeVertex):
        if isinstance(graph, TreeGraph):
            tree_level = graph.k
        else:
            tree_level = v.level
        node = classify_address(graph.schedule, tree_level, v.address)
        if is_leaf(graph.schedule, node):
            return {
                "kind": "leaf",
                "level": leaf_level(tree_level, node),
                "decoration": _decoration_prefix(v.address),
                "tree": (v.anchor, v.level, v.copy),
            }
        return {"kind": "internal"}
    return {"kind": "expander"}


class ExplorationSession:
    """Runner-owned session: budget, transcript, inline event scoring."""

    def __init__(
        self,
        oracle: LabeledOracle,
        budget: int,
        seed: int,
        strategy_name: str,
        score_events: bool = True,
        stop_on_exit: bool = False,
    ):
        self.oracle = oracle
        self.budget = QueryBudget(budget)
        self.seed = seed
        self.strategy_name = strategy_name
        self.score_events = score_events
        self.stop_on_exit = stop_on_exit
        self.steps: list[Step] = []
        self.answers: list[tuple] = []
        self.events: list[dict] = []
        self.roots: list[int] = []
        self.halted: Optional[str] = None
        self.exit_step: Optional[int] = None
        self.decorations_with_level1_leaf: set = set()

    def query(self, label: int, fresh: bool = False, is_root: bool = False) -> tuple:
        if self.halted:
            raise ExplorationHalted(self.halted)
        try:
            answer = self.oracle.query(label, self.budget)
        except BudgetExhaustedError:
            self.halted = "budget"
            raise ExplorationHalted("budget")
        step = len(self.steps)
        self.steps.append(Step(label, len(answer), fresh=fresh, is_root=is_root))
        self.answers.append(answer)
        if is_root:
            self.roots.append(label)
        if self.score_events:
            self._score(label, step)
        if self.budget.remaining == 0:
            self.halted = "budget"
        return answer

    def _score(self, label: int, step: int):
        info = classify_vertex(self.oracle.graph, self.oracle.reveal(label))
        if info["kind"] == "isolated":
            self.events.append({"kind": "isolated_hit", "step": step})
        elif info["kind"] == "leaf":
            self.events.append(
                {
                    "kind": "leaf",
                    "step": step,
                    "level": info["level"],
                    "decoration": repr(info["decoration"]),
                    "tree": repr(info["tree"]),
                }
            )
            if info["level"] == 1:
                self.decorations_with_level1_leaf.add((info["tree"], info["decoration"]))
            if info["level"] == 0:
                if self.exit_step is None:
                    self.exit_step = step
                self.events.append({"kind": "exit_leaf", "step": step})
                if self.stop_on_exit:
                    self.halted = "exit"
                    raise ExplorationHalted("exit")

    def finish(self, output: Optional[int], halted: str) -> Transcript:
        return Transcript(
            roots=self.roots,
            steps=self.steps,
            events=self.events,
            query_count=len(self.steps),
            seed=self.seed,
            strategy=self.strategy_name,
            budget=self.budget.limit,
            halted=halted,
            output=output,
            answers=self.answers,
        )


# ---------------------------------------------------------------------------
# strategies: (session, roots, rng) -> optional output label
# ---------------------------------------------------------------------------

def uniform_walk(session, roots, rng):
    cur = roots[0]
    answer = session.root_answer(cur)
    while True:
        if not answer:
            return cur
        cur = answer[rng.randrange(len(answer))]
        answer = session.query(cur)


def non_backtracking_walk(session, roots, rng):
    cur = roots[0]
    prev = None
    answer = session.root_answer(cur)
    while True:
        if not answer:
            return cur
        options = [x for x in answer if x != prev] or list(answer)
        prev = cur
        cur = options[rng.randrange(len(options))]
        answer = session.query(cur)


def greedy_unvisited(session, roots, rng):
    cur = roots[0]
    queried = set(roots)
    answer = session.root_answer(cur)
    while True:
        if not answer:
            return cur
        fresh = [x for x in answer if x not in queried]
        options = fresh or list(answer)
        cur = options[rng.randrange(len(options))]
        queried.add(cur)
        answer = session.query(cur)


def frontier_bfs_random(session, roots, rng):
    seen = set(roots)
    frontier = []
    for r in roots:
        for x in session.root_answer(r):
            if x not in seen:
                seen.add(x)
                frontier.append(x)
    last = roots[0]
    while frontier:
        i = rng.randrange(len(frontier))
        frontier[i], frontier[-1] = frontier[-1], frontier[i]
        last = frontier.pop()
        for x in session.query(last):
            if x not in seen:
                seen.add(x)
                frontier.append(x)
    return last


def random_probe(session, roots, rng):
    """Probes fresh uniformly random labels; declared, so audits count the
    non-isolated hits instead of flagging violations."""
    space = session.num_labels
    last = roots[0]
    while True:
        last = rng.randrange(space)
        session.query(last, fresh=True)


def scripted(plan: Sequence[int]):
    """Fixed query plan, replayed label by label (fixture strategy)."""

    def run(session, roots, rng):
        last = roots[0] if roots else None
        for label in plan:
            session.query(label)
            last = label
        return last

    run.__name__ = "scripted"
    return run


STRATEGIES: dict[str, Callable] = {
    "uniform-walk": uniform_walk,
    "non-backtracking-walk": non_backtracking_walk,
    "greedy-unvisited": greedy_unvisited,
    "frontier-bfs-random": frontier_bfs_random,
    "random-probe": random_probe,
}

# Adjacency-disciplined strategies used in exploration sweeps.
EXPLORATION_STRATEGIES = (
    "uniform-walk",
    "non-backtracking-walk",
    "greedy-unvisited",
    "frontier-bfs-random",
)


class _StrategyView:
    """What a strategy actually receives: root answers plus view-limited query."""

    __slots__ = ("query", "root_answer", "num_labels")

    def __init__(self, session: ExplorationSession, root_answers: dict):
        def query(label: int, fresh: bool = False) -> tuple:
            return session.query(label, fresh=fresh)

        self.query = query
        self.root_answer = lambda label: root_answers[label]
        self.num_labels = 1 << session.oracle.label_bits


def resolve_strategy(strategy: Union[str, Callable]) -> tuple[str, Callable]:
    if callable(strategy):
        return getattr(strategy, "__name__", "custom"), strategy
    try:
        return strategy, STRATEGIES[strategy]
    except KeyError:
        raise UnknownStrategyError(
            f"unknown strategy {strategy!r}; known: {sorted(STRATEGIES)}"
        ) from None


def run_exploration(
    oracle: LabeledOracle,
    roots: Sequence[int],
    strategy: Union[str, Callable],
    budget: int,
    seed: int,
    score_events: bool = True,
    stop_on_exit: bool = False,
) -> Transcript:
    """Run one strategy against an oracle; roots are queried first (counted)."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    name, fn = resolve_strategy(strategy)
    session = ExplorationSession(
        oracle, budget, seed, name, score_events=score_events, stop_on_exit=stop_on_exit
    )
    rng = random.Random(derive_seed("strategy", seed))
    output = None
    halted = "done"
    try:
        root_answers = {r: session.query(r, is_root=True) for r in roots}
        view = _StrategyView(session, root_answers)
        output = fn(view, list(roots), rng)
    except ExplorationHalted as halt:
        halted = halt.reason
    return session.finish(output, halted)


# ---------------------------------------------------------------------------
# exit-probability estimation on standalone trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExitEstimate:
    schedule: Schedule
    level: int
    strategy: str
    budget: int
    trials: int
    exit: EventStats
    restricted: dict  # w -> EventStats for [exit and fewer than w distinct decorations' level-1 leaves]
    mean_queries: float


def estimate_exit_probability(
    schedule: Schedule,
    level: int,
    strategy: Union[str, Callable],
    budget: int,
    trials: int,
    seed: int,
    padding_ratio: float = 0.25,
    restricted_w: Sequence[int] = (1, 2),
) -> ExitEstimate:
    """Monte Carlo estimate of the probability that a strategy, exploring a
    standalone tree from its root under a query budget, ever queries an
    outermost-core (exit) leaf.  Each trial runs under a fresh labeling key.

    Also tallies the avoidance-restricted events: exit with fewer than w
    distinct decoration copies having had a level-1 leaf queried (trials stop
    at the exit event, so the tally is the count at that moment).
    """
    name, _ = resolve_strategy(strategy)
    graph = TreeGraph(schedule, level)
    exits = 0
    restricted = {w: 0 for w in restricted_w}
    total_queries = 0
    for t in range(trials):
        key = derive_key("exit-trial", seed, t)
        orc = LabeledOracle(graph, key, padding_ratio=padding_ratio)
        transcript = run_exploration(
            orc,
            [orc.label_of(graph.root)],
            strategy,
            budget,
            seed=derive_seed(seed, t),
            stop_on_exit=True,
        )
        total_queries += transcript.query_count
        if transcript.halted == "exit":
            exits += 1
            distinct = _distinct_level1_decorations(transcript)
            for w in restricted_w:
                if distinct < w:
                    restricted[w] += 1
    return ExitEstimate(
        schedule=schedule,
        level=level,
        strategy=name,
        budget=budget,
        trials=trials,
        exit=EventStats.from_counts(exits, trials),
        restricted={w: EventStats.from_counts(c, trials) for w, c in restricted.items()},
        mean_queries=total_queries / trials if trials else 0.0,
    )


def _distinct_level1_decorations(transcript: Transcript) -> int:
    seen = set()
    for ev in transcript.events:
        if ev["kind"] == "leaf" and ev["level"] == 1:
            seen.add((ev["tree"], ev["decoration"]))
    return len(seen)


# ---------------------------------------------------------------------------
# transcript audits and localization scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditReport:
    ok: bool
    violations: tuple       # step indices of undeclared non-adjacent queries
    fresh_probes: int
    fresh_nonisolated_hits: int


def component_audit(transcript: Transcript) -> AuditReport:
    """Check the adjacency discipline: every queried label must be a root, a
    declared fresh probe, or present in some earlier answer.  Fresh probes that
    hit non-isolated vertices (nonempty answers) are counted, not flagged."""
    if transcript.answers is None:
        raise ValueError("transcript lacks retained answers; rerun with them enabled")
    seen = set(transcript.roots)
    violations = []
    fresh_probes = 0
    fresh_hits = 0
    for i, step in enumerate(transcript.steps):
        if step.fresh:
            fresh_probes += 1
            if step.answer_size > 0:
                fresh_hits += 1
        elif not step.is_root and step.label not in seen:
            violations.append(i)
        seen.update(transcript.answers[i])
    return AuditReport(
        ok=not violations,
        violations=tuple(violations),
        fresh_probes=fresh_probes,
        fresh_nonisolated_hits=fresh_hits,
    )


@dataclass(frozen=True)
class LocalizationScore:
    distance: Optional[int]  # None when the output label is isolated
    success: bool
    threshold: int


def score_localization(
    oracle: LabeledOracle, root_labels: Sequence[int], output_label: Optional[int], threshold: int
) -> LocalizationScore:
    """Expander-vertex path distance from the root set to the output vertex,
    scored through the trusted side; isolated or missing outputs fail."""
    graph = oracle.graph
    if not isinstance(graph, MainGraph):
        raise ValueError("localization scoring needs a main-graph oracle")
    if output_label is None:
        return LocalizationScore(None, False, threshold)
    out_v = oracle.reveal(output_label)
    if isinstance(out_v, IsolatedVertex):
        return LocalizationScore(None, False, threshold)
    roots = [oracle.reveal(r) for r in root_labels]
    roots = [r for r in roots if not isinstance(r, IsolatedVertex)]
    if not roots:
        return LocalizationScore(None, False, threshold)
    dist = graph.expander_distance_to_set(roots, out_v)
    return LocalizationScore(dist, dist >= threshold, threshold)


# ---------------------------------------------------------------------------
# end-to-end guided-output experiment
# ---------------------------------------------------------------------------

def echo_first_input(view, inputs, rng):
    return inputs[0]


def echo_random_input(view, inputs, rng):
    return inputs[rng.randrange(len(inputs))]


def walk_from_input(view, inputs, rng):
    """Greedy exploration seeded at the first input; outputs the last queried label."""
    cur = inputs[0]
    queried = {cur}
    answer = view.query(cur)
    while True:
        if not answer:
            return cur
        fresh = [x for x in answer if x not in queried]
        options = fresh or list(answer)
        cur = options[rng.randrange(len(options))]
        queried.add(cur)
        answer = view.query(cur)


class GroundStateCheat:
    """Reference algorithm that samples the exact ground state through the
    trusted side, ignoring its inputs; the upper-bound comparator."""

    requires_trust = True
    __name__ = "ground-state-cheat"

    def __call__(self, oracle: LabeledOracle, inputs, rng):
        from . import spectral

        if self._sampler is None or self._oracle is not oracle:
            solution = spectral.solve_for_instance(oracle.graph)
            self._sampler = spectral.GroundStateSampler(solution, oracle.graph.expander.N)
            self._oracle = oracle
        return oracle.label_of(self._sampler.sample(rng))

    def __init__(self):
        self._sampler = None
        self._oracle = None


ALGORITHMS: dict[str, Callable] = {
    "echo-first-input": echo_first_input,
    "echo-random-input": echo_random_input,
    "walk-from-input": walk_from_input,
}


@dataclass(frozen=True)
class GgspReport:
    algorithm: str
    trials: int
    inputs_per_trial: int
    budget: int
    threshold: int
    localization: EventStats
    mean_queries: float
    budget_failures: int
    trial_rows: tuple = ()  # schema-versioned per-trial records


def ggsp_experiment(
    make_oracle: Callable[[bytes], LabeledOracle],
    guiding_kind,
    algorithm: Union[str, Callable],
    trials: int,
    inputs_per_trial: int,
    budget: int,
    threshold: int,
    seed: int,
    fresh_keys: bool = True,
) -> GgspReport:
    """Per-trial: draw guiding inputs, run the algorithm under a budget, score
    the output's expander distance from the inputs.  `make_oracle` builds the
    oracle for a key, so fresh-key trials model averaging over labelings."""
    from itertools import islice

    from .oracle import GuidingSpec, input_sampler

    if isinstance(guiding_kind, GuidingSpec):
        spec = guiding_kind
    else:
        spec = GuidingSpec(kind=guiding_kind)
    if callable(algorithm):
        name, fn = getattr(algorithm, "__name__", "custom"), algorithm
    else:
        name, fn = algorithm, ALGORITHMS.get(algorithm) or STRATEGIES.get(algorithm)
        if fn is None:
            raise UnknownStrategyError(f"unknown algorithm {algorithm!r}")
    successes = 0
    total_queries = 0
    budget_failures = 0
    rows = []
    oracle = make_oracle(derive_key("ggsp", seed, 0))
    for t in range(trials):
        if fresh_keys and t > 0:
            oracle = make_oracle(derive_key("ggsp", seed, t))
        stream = input_sampler(oracle, spec, derive_seed("ggsp-in", seed, t))
        inputs = list(islice(stream, inputs_per_trial))
        rng = random.Random(derive_seed("ggsp-alg", seed, t))
        session = ExplorationSession(oracle, budget, seed, name, score_events=False)
        output = None
        exhausted = False
        if getattr(fn, "requires_trust", False):
            output = fn(oracle, inputs, rng)
        else:
            view = _StrategyView(session, {})
            try:
                output = fn(view, inputs, rng)
            except ExplorationHalted:
                budget_failures += 1
                exhausted = True
                output = None
        total_queries += len(session.steps)
        score = score_localization(oracle, inputs, output, threshold)
        if score.success:
            successes += 1
        rows.append(
            {
                "schema": Transcript.SCHEMA,
                "trial": t,
                "seed": seed,
                "strategy": name,
                "budget": budget,
                "inputs": inputs,
                "output": output,
                "query_count": len(session.steps),
                "budget_exhausted": exhausted,
                "localized": score.success,
                "distance": score.distance,
            }
        )
    return GgspReport(
        algorithm=name,
        trials=trials,
        inputs_per_trial=inputs_per_trial,
        budget=budget,
        threshold=threshold,
        localization=EventStats.from_counts(successes, trials),
        mean_queries=total_queries / trials if trials else 0.0,
        budget_failures=budget_failures,
        trial_rows=tuple(rows),
    )
