from __future__ import annotations

import itertools

import numpy as np
import pytest

from fxreserves.accounting import CurrencySet, ObservationSeries, Quarter, quarter_range
from fxreserves.simplex_lsq import WindowProblem, rolling_optimize, solve_window, window_regressors
from fxreserves.simulate import random_returns


def _objective(G, y, b):
    r = y - G @ b
    return float(r @ r)


def simplex_grid(n, step):
    k = int(round(1 / step))
    for combo in itertools.product(range(k + 1), repeat=n - 1):
        if sum(combo) <= k:
            yield np.array([*combo, k - sum(combo)]) / k


class TestSolveWindow:
    def test_one_currency(self):
        sol = solve_window(WindowProblem(np.array([[0.01], [0.03]]), [0.5, -0.2]))
        np.testing.assert_array_equal(sol.beta, [1.0])

    def test_noiseless_recovery(self, rng):
        for _ in range(20):
            n = rng.integers(2, 7)
            G = rng.normal(0, 0.05, (2 * n, n))
            b = rng.dirichlet(np.full(n, 3.0))
            sol = solve_window(WindowProblem(G, G @ b))
            np.testing.assert_allclose(sol.beta, b, atol=1e-6)
            assert sol.kkt_residual <= 1e-8 and not sol.nonunique

    def test_boundary_solution(self):
        G = np.eye(3)
        sol = solve_window(WindowProblem(G, [1.0, 0.5, -1.0]))
        np.testing.assert_allclose(sol.beta, [0.75, 0.25, 0.0], atol=1e-12)

    def test_identical_columns_flagged(self, rng):
        g = rng.normal(0, 0.05, (6, 1))
        G = np.hstack([g, g, rng.normal(0, 0.05, (6, 1))])
        sol = solve_window(WindowProblem(G, G @ np.array([0.3, 0.3, 0.4])))
        assert sol.nonunique
        assert abs(sol.beta[0] - sol.beta[1]) < 1e-8  # min-norm splits the tie evenly

    def test_vertex_bound(self, rng):
        for n in range(2, 9):
            G = rng.normal(0, 0.05, (n + 3, n))
            y = rng.normal(0, 0.05, n + 3)
            sol = solve_window(WindowProblem(G, y))
            vertices = [_objective(G, y, e) for e in np.eye(n)]
            assert sol.sse <= min(vertices) + 1e-12
            assert np.all(sol.beta >= 0) and sol.beta.sum() == pytest.approx(1.0, abs=1e-12)

    def test_grid_search_agreement(self, rng):
        G = rng.normal(0, 0.05, (5, 3))
        y = G @ np.array([0.52, 0.31, 0.17])
        grid = list(simplex_grid(3, 0.01))
        best = min(grid, key=lambda b: _objective(G, y, b))
        sol = solve_window(WindowProblem(G, y))
        assert np.max(np.abs(sol.beta - best)) <= 0.01 + 1e-12
        assert sol.sse <= _objective(G, y, best) + 1e-15

    def test_smoothing_pulls_toward_anchor(self, rng):
        G = rng.normal(0, 0.05, (4, 3))
        y = G @ np.array([0.7, 0.2, 0.1])
        anchor = np.array([0.2, 0.3, 0.5])
        far = solve_window(WindowProblem(G, y))
        near = solve_window(WindowProblem(G, y), smoothing=1.0, anchor=anchor)
        assert np.linalg.norm(near.beta - anchor) < np.linalg.norm(far.beta - anchor)
        with pytest.raises(ValueError):
            solve_window(WindowProblem(G, y), smoothing=1.0)


class TestRollingOptimize:
    cur = CurrencySet(("USD", "EUR", "JPY"))

    def _data(self, seed, T=24, noise=0.0):
        rng = np.random.default_rng(seed)
        quarters = quarter_range(Quarter(2000, 1), Quarter(2000, 1) + (T - 1))
        ret = random_returns(self.cur, quarters, rng)
        b = np.array([0.6, 0.3, 0.1])
        y = window_regressors(ret, 0.0) @ b + rng.normal(0, noise, T) if noise else \
            window_regressors(ret, 0.0) @ b
        return ObservationSeries(quarters, y, np.full(T, 0.003)), ret, b

    def test_flat_noiseless_recovery(self):
        obs, ret, b = self._data(0)
        res = rolling_optimize(obs, ret, 3)
        assert res.shares.shape == (22, 3)
        assert res.quarters[0] == obs.quarters[2]
        np.testing.assert_allclose(res.shares, np.broadcast_to(b, res.shares.shape), atol=1e-6)

    def test_zero_regressors_flag_everything(self):
        obs, ret, _ = self._data(1)
        ret.r_bd[:] = 0.0
        ret.de[:] = 0.0
        res = rolling_optimize(obs, ret, 3)
        assert res.nonunique.all()

    def test_longer_window_smoother(self):
        obs, ret, _ = self._data(2, T=60, noise=0.004)
        short = rolling_optimize(obs, ret, 3)
        long = rolling_optimize(obs, ret, 6)
        assert long.shares.var(axis=0).sum() <= short.shares.var(axis=0).sum()

    def test_window_validation(self):
        obs, ret, _ = self._data(3, T=4)
        with pytest.raises(ValueError):
            rolling_optimize(obs, ret, 0)
        with pytest.raises(ValueError):
            rolling_optimize(obs, ret, 5)
