import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crispy.core import GiB, ExecutionRecord, Framework, MemoryModel, Strategy, total_cluster_memory
from crispy.memmodel import RequirementParams, estimate_requirement
from crispy.selector import RankedConfig, SelectionError, bfa_rank, normalize_costs, select
from crispy.synthetic import example_catalog, random_history

from oracles import brute_force_bfa, exhaustive_first_qualifying

CAT = example_catalog()
SPARK = Framework.SPARK


def rec(job, cfg, cost, label="huge", fw=SPARK):
    return ExecutionRecord(job, fw, label, cfg, 100.0, cost)


def as_tuples(history):
    return [(r.job_name, r.framework, r.dataset_label, r.config.key, r.cost) for r in history]


A = CAT.config("c4.large", 4)
B = CAT.config("m4.xlarge", 8)
C = CAT.config("r4.2xlarge", 12)


def planted_two_jobs():
    return [
        rec("j1", A, 10), rec("j1", B, 12), rec("j1", C, 30),
        rec("j2", A, 50), rec("j2", B, 20), rec("j2", C, 25),
    ]


def test_two_job_ranking_matches_enumeration():
    history = planted_two_jobs()
    ranking = bfa_rank(history, SPARK)
    # j1: A 1.0, B 1.2, C 3.0 ; j2: A 2.5, B 1.0, C 1.25
    assert [r.config.key for r in ranking] == [B.key, A.key, C.key]
    assert [r.mean_normalized_cost for r in ranking] == pytest.approx([1.1, 1.75, 2.125])
    oracle = brute_force_bfa(as_tuples(history), SPARK, None)
    assert sorted((k, pytest.approx(v)) for k, v in oracle) == sorted(
        (r.config.key, r.mean_normalized_cost) for r in ranking)


def test_singleton():
    ranking = bfa_rank([rec("j", A, 3.0)], SPARK)
    assert len(ranking) == 1 and ranking[0].mean_normalized_cost == 1.0 and ranking[0].support_count == 1


def test_excluding_only_job_fails():
    with pytest.raises(SelectionError):
        bfa_rank([rec("j", A, 3.0), rec("j", B, 4.0, label="bigdata")], SPARK, exclude_job="j")


def test_framework_filter():
    history = planted_two_jobs() + [rec("h", C, 1.0, fw=Framework.HADOOP), rec("h", A, 100.0, fw=Framework.HADOOP)]
    assert bfa_rank(history, Framework.HADOOP)[0].config == C
    assert bfa_rank(history, SPARK)[0].config == B


def test_tie_breaks():
    small = CAT.config("c4.large", 4)       # 15 GiB
    big = CAT.config("m4.large", 4)         # 32 GiB
    history = [rec("j", small, 5.0), rec("j", big, 5.0)]
    assert [r.config for r in bfa_rank(history, SPARK)] == [small, big]
    # both 64 GiB: falls through to the machine-type name
    same_mem = [rec("j", CAT.config("m4.large", 8), 5.0), rec("j", CAT.config("m4.xlarge", 4), 5.0)]
    assert [r.config.machine_type.name for r in bfa_rank(same_mem, SPARK)] == ["m4.large", "m4.xlarge"]


def test_missing_cells_averaged_over_support():
    history = planted_two_jobs()[:-1] + [rec("j3", C, 7.0), rec("j3", A, 14.0)]
    by_key = {r.config.key: r for r in bfa_rank(history, SPARK)}
    assert by_key[C.key].support_count == 2
    assert by_key[C.key].mean_normalized_cost == pytest.approx((3.0 + 1.0) / 2)


def test_repeated_executions_are_averaged():
    norm = normalize_costs([rec("j", A, 10.0), rec("j", A, 14.0), rec("j", B, 6.0)])
    assert norm == {A.key: pytest.approx(2.0), B.key: 1.0}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ranking_matches_brute_force_on_random_histories(seed):
    rng = np.random.default_rng(seed)
    history = random_history(rng, n_jobs=5, n_configs=6)
    fw = history[0].framework
    exclude = history[-1].job_name
    try:
        ranking = bfa_rank(history, fw, exclude_job=exclude)
    except SelectionError:
        assert not [r for r in history if r.framework is fw and r.job_name != exclude]
        return
    oracle = dict(brute_force_bfa(as_tuples(history), fw, exclude))
    assert {r.config.key: r.mean_normalized_cost for r in ranking} == pytest.approx(oracle)
    means = [r.mean_normalized_cost for r in ranking]
    assert means == sorted(means)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_excluded_job_never_influences_ranking(seed):
    rng = np.random.default_rng(seed)
    history = random_history(rng, n_jobs=4, n_configs=6)
    extra = [rec("target", r.config, float(rng.uniform(0.01, 100)), fw=r.framework) for r in history[:8]]
    for fw in (SPARK, Framework.HADOOP):
        try:
            before = bfa_rank(history, fw, exclude_job="target")
        except SelectionError:
            continue
        assert bfa_rank(history + extra, fw, exclude_job="target") == before


def ranking_of(*configs):
    return [RankedConfig(c, 1.0 + i / 10, 1) for i, c in enumerate(configs)]


def test_nonlinear_model_falls_back_to_head():
    ranking = ranking_of(A, B, C)
    for model in (None, MemoryModel(1.0, 0.0, 0.98)):
        r = select(ranking, model, 100 * GiB)
        assert r.config == A and r.strategy is Strategy.BFA_FALLBACK and r.job_memory_bytes == 0


def test_skips_underprovisioned_configs():
    # A: 15 GiB / 4 nodes, B: 128 GiB / 8 nodes, C: 732 GiB / 12 nodes
    ranking = ranking_of(A, B, C)
    model = MemoryModel(1.0, 0.0, 0.999)
    params = RequirementParams(2 * GiB, 0.10)
    full = 200 * GiB
    need = lambda k: estimate_requirement(model, full, k[1], params)
    memory = {c.key: total_cluster_memory(c) for c in (A, B, C)}
    expected = exhaustive_first_qualifying([A.key, B.key, C.key], memory.__getitem__, need)
    assert expected == C.key
    r = select(ranking, model, full, params)
    assert r.config == C and r.strategy is Strategy.CRISPY and r.satisfied_memory_constraint
    assert r.job_memory_bytes == 200 * GiB
    assert r.required_bytes == need(C.key)


def test_zero_requirement_matches_fallback():
    ranking = ranking_of(B, A, C)
    zero = select(ranking, MemoryModel(0.0, 0.0, 1.0), 100 * GiB, RequirementParams(0, 0.0))
    assert zero.config == select(ranking, None, 100 * GiB).config


def test_no_qualifying_config_picks_largest():
    r = select(ranking_of(A, B, C), MemoryModel(10.0, 0.0, 0.999), 1000 * GiB)
    assert r.config == C and not r.satisfied_memory_constraint
    assert "WARNING" in r.rationale


def test_empty_ranking():
    with pytest.raises(SelectionError):
        select([], None, GiB)


CONFIGS = [CAT.config(m.name, n) for m in CAT for n in (4, 8, 16, 32)]


@settings(max_examples=100, deadline=None)
@given(st.permutations(range(len(CONFIGS))), st.floats(0.01, 4), st.integers(1, 4000),
       st.floats(0, 1), st.floats(0, 1))
def test_selection_soundness_and_monotonicity(order, slope, full_gib, l1, l2):
    ranking = [RankedConfig(CONFIGS[i], 1.0, 1) for i in order[:12]]
    model = MemoryModel(slope, 0.5 * GiB, 0.999)
    lo, hi = sorted((l1, l2))
    r_lo = select(ranking, model, full_gib * GiB, RequirementParams(leeway_factor=lo))
    r_hi = select(ranking, model, full_gib * GiB, RequirementParams(leeway_factor=hi))
    for r, lw in ((r_lo, lo), (r_hi, hi)):
        if r.satisfied_memory_constraint:
            need = estimate_requirement(model, full_gib * GiB, r.config.node_count, RequirementParams(leeway_factor=lw))
            assert total_cluster_memory(r.config) >= need
    pos = {rc.config: i for i, rc in enumerate(ranking)}
    if r_hi.satisfied_memory_constraint:
        assert pos[r_hi.config] >= pos[r_lo.config]
