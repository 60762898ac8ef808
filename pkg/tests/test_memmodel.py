import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from crispy.core import GiB, MemoryModel
from crispy.memmodel import (
    ModelError,
    RequirementParams,
    decide_linearity,
    estimate_requirement,
    fit_linear,
    fit_memory_model,
    model_report,
    points_from_runs,
    r2_score,
)
from crispy.synthetic import synthetic_runs

from oracles import grid_search_least_squares, sum_of_squares_by_hand


def test_exact_line():
    slope, intercept = fit_linear([(1, 3), (2, 5), (3, 7)])
    assert slope == pytest.approx(2) and intercept == pytest.approx(1)


def test_constant_line():
    slope, intercept = fit_linear([(1, 4.5), (2, 4.5), (3, 4.5)])
    assert slope == 0 and intercept == pytest.approx(4.5)
    assert r2_score([(1, 4.5), (2, 4.5), (3, 4.5)], slope, intercept) == 1.0


def test_degenerate_design():
    with pytest.raises(ModelError):
        fit_linear([(2, 1), (2, 3), (2, 5)])
    with pytest.raises(ModelError):
        fit_linear([(1, 1)])
    with pytest.raises(ModelError):
        r2_score([], 1, 0)


def test_constant_y_with_residual_scores_zero():
    assert r2_score([(1, 2), (2, 2)], 1.0, 0.0) == 0.0


def test_noisy_points_match_grid_search():
    # frozen instance: the grid-search oracle converges to (1.93, 1.15)
    xs = [1.0, 2.0, 3.0, 4.0, 5.0]
    ys = [3.1, 4.8, 7.2, 8.9, 10.7]
    a_ref, b_ref = grid_search_least_squares(xs, ys)
    slope, intercept = fit_linear(zip(xs, ys))
    assert slope == pytest.approx(a_ref, rel=1e-6)
    assert intercept == pytest.approx(b_ref, rel=1e-6)
    assert slope == pytest.approx(1.93, rel=1e-9)
    assert intercept == pytest.approx(1.15, rel=1e-9)


def test_quadratic_r2_matches_hand_decomposition():
    xs = [1, 2, 3, 4, 5]
    ys = [x * x for x in xs]
    slope, intercept = fit_linear(zip(xs, ys))
    assert (slope, intercept) == pytest.approx((6.0, -7.0))
    ss_res, ss_tot = sum_of_squares_by_hand(xs, ys, slope, intercept)
    assert (ss_res, ss_tot) == pytest.approx((14.0, 374.0))
    r2 = r2_score(zip(xs, ys), slope, intercept)
    assert r2 == pytest.approx(1 - 14 / 374, rel=1e-12)
    assert not decide_linearity(r2)


@pytest.mark.parametrize("r2,expected", [(0.995, True), (0.99, False), (1.0, True), (0.5, False), (-3.0, False)])
def test_decide_linearity(r2, expected):
    assert decide_linearity(r2) is expected


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_linearity_monotone(a, b):
    if a <= b:
        assert decide_linearity(a) <= decide_linearity(b)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=10), st.integers(0, 2**32 - 1))
def test_ols_beats_every_grid_neighbour(ys, seed):
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.uniform(0, 50, len(ys)))
    assume(np.ptp(xs) > 1e-3)
    a, b = fit_linear(zip(xs, ys))
    sse = lambda a_, b_: float(((a_ * xs + b_ - np.asarray(ys)) ** 2).sum())
    best = sse(a, b)
    for da in np.linspace(-1, 1, 9):
        for db in np.linspace(-1, 1, 9):
            for scale in (1e-3, 1e-1, 1.0):
                assert best <= sse(a + scale * da, b + scale * db) + 1e-9 * (1 + best)


@given(st.floats(-1e3, 1e3).filter(lambda v: abs(v) > 1e-3), st.floats(-1e6, 1e6),
       st.floats(0.01, 1e3), st.floats(-1e3, 1e3))
def test_r2_exact_line_and_affine_invariance(a, b, scale, shift):
    xs = [1.0, 2.0, 3.0, 4.0, 5.0]
    pts = [(x, a * x + b) for x in xs]
    s, i = fit_linear(pts)
    assert r2_score(pts, s, i) == pytest.approx(1.0, abs=1e-9)
    noisy = [(x, y + (0.3 if k % 2 else -0.2) * abs(a)) for k, (x, y) in enumerate(pts)]
    s1, i1 = fit_linear(noisy)
    moved = [(scale * x + shift, y) for x, y in noisy]
    s2, i2 = fit_linear(moved)
    assert r2_score(noisy, s1, i1) == pytest.approx(r2_score(moved, s2, i2), abs=1e-9)


@given(st.floats(0.01, 10), st.floats(0, 8 * GiB))
def test_planted_line_recovered(a, b):
    sizes = [200 * 1024**2 * k for k in range(1, 6)]
    pts = [(x, a * x + b) for x in sizes]
    model = fit_memory_model(pts)
    assert model.slope == pytest.approx(a, rel=1e-9)
    assert model.intercept == pytest.approx(b, rel=1e-9, abs=1e-3)
    assert model.is_linear


def test_requirement_examples():
    m = MemoryModel(0.5, 1 * GiB, 0.999)
    p0 = RequirementParams(2 * GiB, 0.0)
    assert estimate_requirement(m, 100 * GiB, 4, p0) == 59 * GiB
    p10 = RequirementParams(2 * GiB, 0.10)
    assert abs(estimate_requirement(m, 100 * GiB, 4, p10) - 64.1 * GiB) <= 1
    neg = MemoryModel(-0.5, 1 * GiB, 0.999)
    assert estimate_requirement(neg, 100 * GiB, 4, p10) == 8 * GiB


def test_requirement_defaults():
    p = RequirementParams()
    assert p.per_node_overhead_bytes == 2 * GiB and p.leeway_factor == 0.10
    with pytest.raises(ValueError):
        RequirementParams(-1, 0.1)
    with pytest.raises(ValueError):
        RequirementParams(0, -0.1)


def test_requirement_rejects_nonlinear_model():
    with pytest.raises(ModelError):
        estimate_requirement(MemoryModel(1, 0, 0.9), GiB, 4)
    with pytest.raises(ModelError):
        estimate_requirement(MemoryModel(1, 0, 0.999), 0, 4)
    with pytest.raises(ModelError):
        estimate_requirement(MemoryModel(1, 0, 0.999), GiB, 0)


@given(st.floats(0, 5), st.floats(0, 4 * GiB), st.integers(1, 1 << 42), st.integers(1, 1 << 42),
       st.integers(1, 48), st.integers(1, 48), st.floats(0, 1), st.floats(0, 1),
       st.integers(0, 4 * GiB), st.integers(0, 4 * GiB))
def test_requirement_monotone(a, b, f1, f2, n1, n2, l1, l2, o1, o2):
    m = MemoryModel(a, b, 1.0)
    lo = lambda x, y: min(x, y)
    hi = lambda x, y: max(x, y)
    r_lo = estimate_requirement(m, lo(f1, f2), lo(n1, n2), RequirementParams(lo(o1, o2), lo(l1, l2)))
    r_hi = estimate_requirement(m, hi(f1, f2), hi(n1, n2), RequirementParams(hi(o1, o2), hi(l1, l2)))
    assert r_lo <= r_hi


def test_points_from_runs_skips_failures():
    runs = synthetic_runs(2.0, GiB, [100, 200, 300])
    runs[1].exit_status = 1
    pts = points_from_runs(runs)
    assert [p[0] for p in pts] == [100, 300]


def test_report_mentions_verdict():
    text = model_report(MemoryModel(2.0, GiB, 0.9995, 5))
    assert "linear" in text and "0.999500" in text
    assert "not linear" in model_report(MemoryModel(2.0, GiB, 0.5, 5))
