"""Least squares over the probability simplex, solved window by window.

This is the deterministic comparison method: ignore observation noise and find
the shares that best reproduce the non-purchase rates over a short rolling
window. The solver is a primal active-set method for the small convex QP

    minimize ||y - G b||^2 + lam * ||b - b_prev||^2   s.t.  b >= 0, sum(b) = 1
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accounting import ObservationSeries, Quarter, ReturnPanel
from .state_model import return_loadings


@dataclass
class WindowProblem:
    G: np.ndarray
    y: np.ndarray
    quarters: list[Quarter] | None = None

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.G.shape[0] != self.y.size or self.y.size == 0:
            raise ValueError("window needs matching, nonempty regressors and targets")


@dataclass
class WindowSolution:
    beta: np.ndarray
    sse: float
    nonunique: bool
    kkt_residual: float
    iterations: int


def _eqp(Q, c, free):
    """Minimize b'Qb - 2c'b over the free coordinates subject to sum(b) = 1."""
    F = np.flatnonzero(free)
    k = F.size
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = 2.0 * Q[np.ix_(F, F)]
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    rhs = np.append(2.0 * c[F], 1.0)
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    p = np.zeros(Q.shape[0])
    p[F] = sol[:k]
    return p


def _kkt_residual(beta, grad, active, scale):
    free = ~active
    nu = np.mean(grad[free])
    stationarity = np.abs(grad[free] - nu)
    dual = np.maximum(nu - grad[active], 0.0)
    worst = max(stationarity.max(initial=0.0), dual.max(initial=0.0))
    primal = abs(beta.sum() - 1.0) + np.maximum(-beta, 0.0).sum()
    return float(worst / scale + primal)


def solve_window(problem: WindowProblem, tol: float = 1e-8, smoothing: float = 0.0,
                 anchor=None, max_iter: int | None = None) -> WindowSolution:
    """Simplex-constrained least squares for one window.

    ``nonunique`` is raised when some direction inside the simplex's affine
    hull leaves the fitted values unchanged (e.g. two identical regressor
    columns); the returned point is then the minimum-norm member of the
    solution set reached by the active-set path.
    """
    G, y = problem.G, problem.y
    N = G.shape[1]
    Q = G.T @ G
    c = G.T @ y
    if smoothing > 0:
        if anchor is None:
            raise ValueError("smoothing needs an anchor composition")
        Q = Q + smoothing * np.eye(N)
        c = c + smoothing * np.asarray(anchor, dtype=float)
    scale = 1.0 + 2.0 * (np.abs(Q).sum(axis=1).max() + np.abs(c).max())
    eps = 1e-13

    beta = np.full(N, 1.0 / N)
    active = np.zeros(N, dtype=bool)
    max_iter = max_iter or 20 * N + 50
    it = 0
    for it in range(1, max_iter + 1):
        p = _eqp(Q, c, ~active)
        if np.all(p[~active] >= -eps):
            beta = np.where(active, 0.0, np.maximum(p, 0.0))
            beta /= beta.sum()
            grad = 2.0 * (Q @ beta - c)
            nu = np.mean(grad[~active])
            mult = grad - nu
            cand = np.flatnonzero(active & (mult < -tol * scale))
            if cand.size == 0:
                break
            active[cand[np.argmin(mult[cand])]] = False
        else:
            step = p - beta
            shrinking = (~active) & (step < 0)
            ratios = np.full(N, np.inf)
            ratios[shrinking] = beta[shrinking] / -step[shrinking]
            a = min(1.0, ratios.min())
            beta = beta + a * step
            hit = shrinking & (ratios <= a + 1e-15)
            active |= hit
            beta[active] = 0.0
            beta = np.maximum(beta, 0.0)
            beta /= beta.sum()
    grad = 2.0 * (Q @ beta - c)
    resid = y - G @ beta
    augmented = np.vstack([G, np.ones((1, N))])
    nonunique = smoothing <= 0 and np.linalg.matrix_rank(augmented) < N
    return WindowSolution(
        beta=beta,
        sse=float(resid @ resid),
        nonunique=bool(nonunique),
        kkt_residual=_kkt_residual(beta, grad, active, scale),
        iterations=it,
    )


@dataclass
class BaselineResult:
    quarters: list[Quarter]
    currencies: tuple[str, ...]
    shares: np.ndarray
    nonunique: np.ndarray
    sse: np.ndarray


def window_regressors(returns: ReturnPanel, equity_share) -> np.ndarray:
    """``(T, N)`` loadings: the observation is ``loadings[t] @ shares``."""
    x = np.broadcast_to(np.asarray(getattr(equity_share, "x", equity_share), dtype=float),
                        (len(returns),))
    return np.stack([return_loadings(x[t], returns.r_eq[t], returns.r_bd[t], returns.de[t])
                     for t in range(len(returns))])


def rolling_optimize(obs: ObservationSeries, returns: ReturnPanel, window_len: int,
                     equity_share=0.0, smoothing: float = 0.0,
                     tol: float = 1e-8) -> BaselineResult:
    """Solve every trailing window of ``window_len`` quarters.

    Shares are reported at each window's last quarter, so the first
    ``window_len - 1`` quarters carry no estimate. With ``smoothing > 0``
    each window is pulled toward the previous window's solution.
    """
    if window_len < 1:
        raise ValueError("window_len must be at least 1")
    T = len(obs)
    if window_len > T:
        raise ValueError(f"window of {window_len} quarters exceeds the {T} available")
    G = window_regressors(returns, equity_share)
    shares, flags, sse = [], [], []
    prev = None
    for end in range(window_len - 1, T):
        sl = slice(end - window_len + 1, end + 1)
        sol = solve_window(WindowProblem(G[sl], obs.y[sl]), tol=tol,
                           smoothing=smoothing if prev is not None else 0.0, anchor=prev)
        shares.append(sol.beta)
        flags.append(sol.nonunique)
        sse.append(sol.sse)
        prev = sol.beta
    return BaselineResult(list(obs.quarters[window_len - 1:]), tuple(returns.currencies.codes),
                          np.array(shares), np.array(flags), np.array(sse))
