import itertools
import math
import random

import numpy as np
import pytest

from gapwalk import expander_gen as eg, graph_model as gm, oracle as orc, spectral as sp
from gapwalk._util import derive_key


@pytest.fixture(scope="module")
def tree_oracle():
    graph = gm.TreeGraph(gm.Schedule((4, 3), (1, 2)), 2)
    return orc.build_oracle(graph, derive_key("tree-oracle"), padding_ratio=2.0 ** -4)


@pytest.fixture(scope="module")
def main_oracle(small_instance):
    return orc.build_oracle(small_instance, derive_key("main-oracle"), padding_ratio=2.0 ** -6)


# -- permutation --------------------------------------------------------------

@pytest.mark.parametrize("bits", [1, 2, 7, 16, 17])
def test_feistel_is_a_bijection(bits):
    perm = orc.FeistelPermutation(bits, derive_key("bij", bits))
    n = 1 << bits
    images = perm.forward_array(np.arange(n, dtype=np.uint64))
    assert len(np.unique(images)) == n
    assert (perm.inverse_array(images) == np.arange(n, dtype=np.uint64)).all()


def test_feistel_scalar_and_vector_paths_agree():
    perm = orc.FeistelPermutation(23, derive_key("sv"))
    xs = np.arange(4096, dtype=np.uint64) * np.uint64(7919) % np.uint64(1 << 23)
    vec = perm.forward_array(xs)
    for x, y in zip(xs[:512], vec[:512]):
        assert perm.forward(int(x)) == int(y)
        assert perm.inverse(int(y)) == int(x)


def test_feistel_key_determinism_and_sensitivity():
    a = orc.FeistelPermutation(16, derive_key("k", 1))
    b = orc.FeistelPermutation(16, derive_key("k", 1))
    c = orc.FeistelPermutation(16, derive_key("k", 2))
    xs = list(range(100))
    assert [a.forward(x) for x in xs] == [b.forward(x) for x in xs]
    assert [a.forward(x) for x in xs] != [c.forward(x) for x in xs]


def test_feistel_rejects_bad_parameters():
    with pytest.raises(orc.LabelSpaceError):
        orc.FeistelPermutation(0, derive_key("x"))
    with pytest.raises(ValueError):
        orc.FeistelPermutation(8, b"short")
    with pytest.raises(ValueError):
        orc.FeistelPermutation(8, derive_key("x"), rounds=7)
    perm = orc.FeistelPermutation(8, derive_key("x"))
    with pytest.raises(orc.LabelSpaceError):
        perm.forward(1 << 9)


# -- oracle construction ------------------------------------------------------

def test_label_space_sizing(tree_oracle):
    n = tree_oracle.num_nonisolated
    assert tree_oracle.num_labels >= n / tree_oracle.padding_ratio
    assert tree_oracle.padding_count == tree_oracle.num_labels - n


def test_label_space_too_small_rejected(small_instance):
    with pytest.raises(orc.LabelSpaceError):
        orc.build_oracle(small_instance, derive_key("tiny"), label_bits=5)


def test_single_vertex_graph_with_full_density():
    graph = gm.TreeGraph(gm.Schedule((2,), (1,)), 1)  # one edge, two vertices
    o = orc.build_oracle(graph, derive_key("small"), padding_ratio=1.0)
    assert o.num_labels == 2
    labels = {o.label_of(graph.vertex_at(i)) for i in range(2)}
    assert labels == {0, 1}


def test_same_key_gives_identical_answers(small_instance):
    a = orc.build_oracle(small_instance, derive_key("det"), padding_ratio=2.0 ** -4)
    b = orc.build_oracle(small_instance, derive_key("det"), padding_ratio=2.0 ** -4)
    for x in range(0, a.num_labels, 97):
        assert a.query(x) == b.query(x)


# -- querying -----------------------------------------------------------------

def test_isolated_labels_answer_empty(main_oracle):
    rng = random.Random(1)
    seen_isolated = 0
    for _ in range(200):
        x = rng.randrange(main_oracle.num_labels)
        v = main_oracle.reveal(x)
        if isinstance(v, gm.IsolatedVertex):
            seen_isolated += 1
            assert main_oracle.query(x) == ()
    assert seen_isolated > 0


def test_internal_answer_size_is_d1(main_oracle, small_instance, small_materialized):
    d1 = small_instance.params.degrees[0]
    for v in small_materialized.vertices[:80]:
        label = main_oracle.label_of(v)
        expected = len(small_instance.neighbors(v))
        assert len(main_oracle.query(label)) == expected
        if isinstance(v, gm.ExpanderVertex):
            assert expected == d1


def test_query_symmetry_exhaustive(tree_oracle):
    graph = tree_oracle.graph
    for i in range(graph.num_nonisolated):
        x = tree_oracle.label_of(graph.vertex_at(i))
        for y in tree_oracle.query(x):
            assert x in tree_oracle.query(y)


def test_query_counts_every_call(tree_oracle):
    before = tree_oracle.query_count
    x = tree_oracle.label_of(tree_oracle.graph.root)
    tree_oracle.query(x)
    tree_oracle.query(x)
    assert tree_oracle.query_count == before + 2


def test_budget_enforcement(tree_oracle):
    budget = orc.QueryBudget(2)
    x = tree_oracle.label_of(tree_oracle.graph.root)
    tree_oracle.query(x, budget)
    tree_oracle.query(x, budget)
    with pytest.raises(orc.BudgetExhaustedError):
        tree_oracle.query(x, budget)
    assert budget.consumed == 2


# -- reveal -------------------------------------------------------------------

def test_reveal_round_trip_for_every_vertex(tree_oracle):
    graph = tree_oracle.graph
    for i in range(graph.num_nonisolated):
        v = graph.vertex_at(i)
        assert tree_oracle.reveal(tree_oracle.label_of(v)) == v


def test_reveal_isolated_labels(main_oracle):
    iso = main_oracle.label_of(gm.IsolatedVertex(0))
    assert main_oracle.reveal(iso) == gm.IsolatedVertex(0)


def test_reveal_histogram_matches_padding(main_oracle):
    rng = random.Random(5)
    n = 20_000
    hits = sum(
        1
        for _ in range(n)
        if not isinstance(main_oracle.reveal(rng.randrange(main_oracle.num_labels)), gm.IsolatedVertex)
    )
    p = main_oracle.nonisolated_fraction
    sigma = math.sqrt(p * (1 - p) * n)
    assert abs(hits - n * p) <= 4 * sigma


def test_sealed_oracle_refuses_reveal(small_instance):
    o = orc.build_oracle(small_instance, derive_key("seal"), padding_ratio=2.0 ** -4)
    label = o.label_of(gm.ExpanderVertex(0))
    o.seal()
    with pytest.raises(orc.RevealSealedError):
        o.reveal(label)
    assert len(o.query(label)) > 0  # queries still served


def test_view_exposes_only_query(main_oracle):
    view = main_oracle.view()
    assert not hasattr(view, "reveal")
    assert not hasattr(view, "graph")
    x = main_oracle.label_of(gm.ExpanderVertex(1))
    assert view.query(x) == main_oracle.query(x)


# -- persistence --------------------------------------------------------------

def test_descriptor_round_trip_tree(tmp_path, tree_oracle):
    path = tmp_path / "oracle.json"
    orc.save_descriptor(tree_oracle, path)
    loaded = orc.load_oracle(path)
    for i in range(tree_oracle.graph.num_nonisolated):
        x = tree_oracle.label_of(tree_oracle.graph.vertex_at(i))
        assert loaded.query(x) == tree_oracle.query(x)


def test_descriptor_round_trip_main(tmp_path, small_instance):
    o = orc.build_oracle(small_instance, derive_key("desc"), padding_ratio=2.0 ** -5)
    eg.save(small_instance.expander, tmp_path / "core.txt")
    orc.save_descriptor(o, tmp_path / "oracle.json", expander_file="core.txt")
    loaded = orc.load_oracle(tmp_path / "oracle.json")
    rng = random.Random(2)
    for _ in range(100):
        x = rng.randrange(o.num_labels)
        assert loaded.query(x) == o.query(x)


# -- guiding samplers ---------------------------------------------------------

def test_input_sampler_determinism(main_oracle):
    spec = orc.GuidingSpec(kind="expander-uniform")
    a = list(itertools.islice(orc.input_sampler(main_oracle, spec, seed=4), 20))
    b = list(itertools.islice(orc.input_sampler(main_oracle, spec, seed=4), 20))
    assert a == b


def test_single_fixed_root_constant(main_oracle):
    spec = orc.GuidingSpec(kind="single-fixed-root", root=123)
    stream = orc.input_sampler(main_oracle, spec, seed=0)
    assert [next(stream) for _ in range(5)] == [123] * 5


def test_ground_state_sampler_fidelity_is_one(main_oracle, small_instance, small_materialized):
    # Empirical distribution of the exact-ground-state stream converges to the
    # squared-amplitude distribution.
    sol = sp.solve_for_instance(small_instance)
    exact = sp.exact_distribution(sol, small_materialized)
    spec = orc.GuidingSpec(kind="exact-ground-state")
    stream = orc.input_sampler(main_oracle, spec, seed=8)
    n = 60_000
    counts = {}
    for _ in range(n):
        v = main_oracle.reveal(next(stream))
        counts[v] = counts.get(v, 0) + 1
    emp = np.array([counts.get(v, 0) / n for v in small_materialized.vertices])
    tv = 0.5 * np.abs(emp - exact).sum()
    assert tv <= 0.05


def test_expander_uniform_fidelity_equals_norm_ratio(small_instance, small_materialized):
    # Classical fidelity between the uniform-on-core distribution and the
    # ground-state distribution equals the core share of the squared norm.
    sol = sp.solve_for_instance(small_instance)
    exact = sp.exact_distribution(sol, small_materialized)
    n_e = small_instance.expander.N
    fid = 0.0
    for u in range(n_e):
        fid += math.sqrt((1 / n_e) * exact[small_materialized.index[gm.ExpanderVertex(u)]])
    fid = fid ** 2
    split = sp.norm_decomposition(sol)
    assert fid == pytest.approx(split.ratio, rel=1e-10)


def test_mixture_weights_validated():
    with pytest.raises(ValueError):
        orc.GuidingSpec(kind="mixture", components=((0.5, orc.GuidingSpec("expander-uniform")),))
    with pytest.raises(ValueError):
        orc.GuidingSpec(kind="nonsense")


def test_mixture_stream_draws_from_components(main_oracle):
    spec = orc.GuidingSpec(
        kind="mixture",
        components=(
            (0.5, orc.GuidingSpec(kind="single-fixed-root", root=7)),
            (0.5, orc.GuidingSpec(kind="single-fixed-root", root=9)),
        ),
    )
    stream = orc.input_sampler(main_oracle, spec, seed=3)
    values = {next(stream) for _ in range(200)}
    assert values == {7, 9}
