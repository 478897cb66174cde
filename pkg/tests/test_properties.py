from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fxreserves.accounting import drifted_shares, zero_coupon_quarterly_return
from fxreserves.particle_filter import normalize_log_weights, weighted_quantile
from fxreserves.simplex_lsq import WindowProblem, solve_window
from fxreserves.state_model import ModelParams, alpha_scale, transition_sample


def _simplex(draw, n):
    raw = draw(arrays(float, n, elements=st.floats(0.01, 1.0)))
    return raw / raw.sum()


@st.composite
def share_and_moves(draw):
    n = draw(st.integers(2, 8))
    return _simplex(draw, n), draw(arrays(float, n, elements=st.floats(-0.5, 0.5)))


@given(share_and_moves())
def test_drifted_shares_stay_on_simplex(case):
    beta, de = case
    out = drifted_shares(beta, de)
    assert np.all(out >= 0) and abs(out.sum() - 1) < 1e-12


@given(share_and_moves())
def test_drift_favours_appreciating_currency(case):
    beta, de = case
    out = drifted_shares(beta, de)
    i, j = int(np.argmax(de)), int(np.argmin(de))
    assert out[i] / beta[i] >= out[j] / beta[j] - 1e-12


@given(st.floats(0.0, 0.1), st.floats(0.0, 0.1), st.floats(0.5, 30.0))
def test_zero_coupon_return_falls_as_yield_rises(y0, y1, m):
    lo = zero_coupon_quarterly_return(y0, y1, m)
    hi = zero_coupon_quarterly_return(y0, y1 + 0.01, m)
    assert hi < lo


@given(st.floats(0.0, 0.1), st.floats(0.5, 30.0))
def test_zero_coupon_flat_curve_earns_the_yield(y, m):
    r = zero_coupon_quarterly_return(y, y, m)
    assert abs(r - ((1 + y) ** 0.25 - 1)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1))
def test_transition_sample_is_valid(n, seed):
    rng = np.random.default_rng(seed)
    beta = rng.dirichlet(np.ones(n))
    out, _ = transition_sample(np.broadcast_to(beta, (64, n)), ModelParams(), rng)
    assert np.all(out >= 0) and np.all(np.isfinite(out))
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)


@given(st.floats(1e-6, 1 - 1e-6))
def test_alpha_positive(b):
    alpha, clamped = alpha_scale(b, 0.015 ** 2)
    assert alpha > 0
    assert clamped == (b - b * b - 0.015 ** 2 <= 0)


@given(arrays(float, st.integers(1, 40), elements=st.floats(0, 1)),
       st.integers(0, 2 ** 32 - 1))
def test_weighted_quantiles_monotone(values, seed):
    w = np.random.default_rng(seed).dirichlet(np.ones(values.size))
    q = weighted_quantile(values, w, np.linspace(0, 1, 11))
    assert np.all(np.diff(q) >= 0)
    assert values.min() <= q[0] and q[-1] <= values.max()


@given(arrays(float, st.integers(1, 50), elements=st.floats(-700, 0)))
def test_normalized_weights_sum_to_one(logw):
    w = normalize_log_weights(logw)
    assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 10), st.integers(0, 2 ** 32 - 1))
def test_solve_window_feasible_and_beats_vertices(n, m, seed):
    rng = np.random.default_rng(seed)
    G = rng.normal(0, 0.05, (m, n))
    y = rng.normal(0, 0.05, m)
    sol = solve_window(WindowProblem(G, y))
    assert np.all(sol.beta >= 0) and abs(sol.beta.sum() - 1) < 1e-10
    best_vertex = min(float(np.sum((y - G[:, k]) ** 2)) for k in range(n))
    assert sol.sse <= best_vertex + 1e-12
