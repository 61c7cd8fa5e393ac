"""Regularized logistic MLE, the projected estimator and confidence radii."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .oracle import log_sigmoid, sigmoid


class ConvergenceError(RuntimeError):
    pass


class DuelDataset:
    """Append-only log of feature differences ``z`` and outcomes ``o``."""

    def __init__(self, dim: int, bound: float | None = None):
        self.dim = dim
        self.bound = bound
        self._z = np.empty((16, dim))
        self._o = np.empty(16)
        self._n = 0

    def append(self, z, o: int) -> None:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"expected a length-{self.dim} difference, got {z.shape}")
        if o not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {o}")
        if self.bound is not None and np.linalg.norm(z) > 2 * self.bound + 1e-9:
            raise ValueError(f"||z|| = {np.linalg.norm(z):.6g} exceeds 2B = {2 * self.bound:.6g}")
        if self._n == self._z.shape[0]:
            self._z = np.concatenate([self._z, np.empty_like(self._z)])
            self._o = np.concatenate([self._o, np.empty_like(self._o)])
        self._z[self._n] = z
        self._o[self._n] = o
        self._n += 1

    def __len__(self):
        return self._n

    @property
    def z(self) -> np.ndarray:
        return self._z[: self._n]

    @property
    def o(self) -> np.ndarray:
        return self._o[: self._n]

    @classmethod
    def from_arrays(cls, z, o, bound: float | None = None) -> "DuelDataset":
        z = np.atleast_2d(np.asarray(z, dtype=float))
        data = cls(z.shape[1], bound)
        for zi, oi in zip(z, o):
            data.append(zi, int(oi))
        return data


@dataclass(frozen=True)
class DataMatrix:
    """Symmetric positive-definite design matrix with its cached inverse."""

    matrix: np.ndarray
    inverse: np.ndarray
    base: float

    @classmethod
    def identity(cls, dim: int, base: float) -> "DataMatrix":
        if base <= 0:
            raise ValueError("base must be positive")
        return cls(base * np.eye(dim), np.eye(dim) / base, float(base))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def update_data_matrix(V: DataMatrix, z) -> DataMatrix:
    """``V + z z^T`` with a Sherman-Morrison update of the inverse."""
    z = np.asarray(z, dtype=float)
    M = V.matrix + np.outer(z, z)
    Vz = V.inverse @ z
    inv = V.inverse - np.outer(Vz, Vz) / (1.0 + z @ Vz)
    inv = 0.5 * (inv + inv.T)
    return DataMatrix(M, inv, V.base)


def data_matrix_from(diffs, base: float, dim: int) -> DataMatrix:
    """Rebuild ``base * I + sum z z^T`` from scratch (used to audit updates)."""
    diffs = np.asarray(diffs, dtype=float).reshape(-1, dim)
    M = base * np.eye(dim) + diffs.T @ diffs
    return DataMatrix(M, np.linalg.inv(M), base)


def log_likelihood(w, data: DuelDataset, lam: float) -> float:
    w = np.asarray(w, dtype=float)
    x = data.z @ w
    o = data.o
    ll = float(o @ log_sigmoid(x) + (1.0 - o) @ log_sigmoid(-x))
    return ll - 0.5 * lam * float(w @ w)


def log_likelihood_grad(w, data: DuelDataset, lam: float) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return data.z.T @ (data.o - sigmoid(data.z @ w)) - lam * w


def g_transform(w, data: DuelDataset, lam: float) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return data.z.T @ sigmoid(data.z @ w) + lam * w


def g_jacobian(w, data: DuelDataset, lam: float) -> np.ndarray:
    """Jacobian of ``g_transform``; also the negative log-likelihood Hessian."""
    w = np.asarray(w, dtype=float)
    s = sigmoid(data.z @ w)
    Z = data.z
    return (Z.T * (s * (1.0 - s))) @ Z + lam * np.eye(w.shape[0])


def mle_fit(data: DuelDataset, lam: float, tol: float = 1e-10, max_iter: int = 100,
            w0=None) -> np.ndarray:
    """Maximize the regularized log-likelihood by damped Newton."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    d = data.dim
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=float)
    if len(data) == 0:
        return np.zeros(d)
    Z, o = data.z, data.o
    ll = log_likelihood(w, data, lam)
    gnorm = math.inf
    for _ in range(max_iter):
        s = sigmoid(Z @ w)
        grad = Z.T @ (o - s) - lam * w
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return w
        hess = (Z.T * (s * (1.0 - s))) @ Z + lam * np.eye(d)
        step = np.linalg.solve(hess, grad)
        # near the optimum the likelihood is flat to rounding; accept such steps
        floor = ll - 1e-13 * (1.0 + abs(ll))
        t = 1.0
        while True:
            cand = w + t * step
            ll_c = log_likelihood(cand, data, lam)
            if ll_c >= floor or t < 1e-12:
                break
            t *= 0.5
        if ll_c < floor:
            break
        w, ll = cand, max(ll, ll_c)
    grad = log_likelihood_grad(w, data, lam)
    gnorm = float(np.linalg.norm(grad))
    if gnorm <= tol:
        return w
    raise ConvergenceError(f"MLE did not converge: gradient norm {gnorm:.3e} > {tol:.1e}")


def _ball(w: np.ndarray, S: float) -> np.ndarray:
    n = float(np.linalg.norm(w))
    return w if n <= S else w * (S / n)


def projection_objective(w, g_hat, data: DuelDataset, V: DataMatrix, lam: float) -> float:
    """``|| g(w) - g(w_hat) ||_{V^{-1}}``."""
    r = g_transform(w, data, lam) - g_hat
    return math.sqrt(max(float(r @ V.inverse @ r), 0.0))


def _pgd(w0, g_hat, Z, lam, Vinv, S, max_iter, xtol):
    eye = lam * np.eye(w0.shape[0])

    def f_and_grad(w):
        s = sigmoid(Z @ w)
        r = Z.T @ s + lam * w - g_hat
        Vr = Vinv @ r
        J = (Z.T * (s * (1.0 - s))) @ Z + eye
        return float(r @ Vr), J @ Vr

    def ball(w):
        n = math.sqrt(float(w @ w))
        return w if n <= S else w * (S / n)

    w = ball(np.asarray(w0, dtype=float))
    f, grad = f_and_grad(w)
    step = 1.0
    for _ in range(max_iter):
        while True:
            cand = ball(w - step * grad)
            dw = cand - w
            f_c, grad_c = f_and_grad(cand)
            if f_c <= f + grad @ dw + (dw @ dw) / (2 * step) or step < 1e-16:
                break
            step *= 0.5
        if f_c > f:
            break
        y = grad_c - grad
        f_prev = f
        w, f, grad = cand, f_c, grad_c
        if math.sqrt(float(dw @ dw)) <= xtol or f_prev - f <= 1e-16 * f_prev:
            break
        sy = float(dw @ y)
        step = float(dw @ dw) / sy if sy > 1e-300 else step * 2.0
    return w, f


def _ball_least_squares(H, q, S):
    """Minimize ``x^T H x - 2 q^T x`` over ``||x|| <= S`` for positive-definite ``H``."""
    lam, Q = np.linalg.eigh(H)
    qt = Q.T @ q
    x = qt / lam
    if float(x @ x) <= S * S:
        return Q @ x
    # Newton on 1/||x(mu)|| - 1/S increases mu monotonically to the root
    q2 = qt * qt
    mu = 0.0
    for _ in range(100):
        inv = 1.0 / (lam + mu)
        n2 = float(q2 @ inv**2)
        n = math.sqrt(n2)
        phi = 1.0 / n - 1.0 / S
        if phi >= -1e-15 / S:
            break
        mu -= phi * n2 * n / float(q2 @ inv**3)
    return Q @ (qt / (lam + mu))


def _gauss_newton(w0, g_hat, Z, lam, Vinv, S, max_iter, xtol):
    eye = lam * np.eye(w0.shape[0])

    def parts(w):
        s = sigmoid(Z @ w)
        r = Z.T @ s + lam * w - g_hat
        J = (Z.T * (s * (1.0 - s))) @ Z + eye
        return r, J, float(r @ Vinv @ r)

    w = np.asarray(w0, dtype=float)
    n = math.sqrt(float(w @ w))
    if n > S:
        w = w * (S / n)
    r, J, f = parts(w)
    for _ in range(max_iter):
        JV = J @ Vinv
        target = _ball_least_squares(JV @ J, JV @ (J @ w - r), S)
        step = target - w
        t = 1.0
        while True:
            cand = w + t * step
            r_c, J_c, f_c = parts(cand)
            if f_c < f or t < 1e-10:
                break
            t *= 0.5
        if f_c >= f:
            break
        moved = t * math.sqrt(float(step @ step))
        w, r, J, f = cand, r_c, J_c, f_c
        if moved <= xtol:
            break
    return w, f


def project_estimate(w_mle, data: DuelDataset, V: DataMatrix, lam: float, S: float,
                     max_iter: int = 500, xtol: float = 1e-12, extra_starts=()) -> np.ndarray:
    """Feasible minimizer of ``||g(w) - g(w_mle)||_{V^{-1}}`` over ``||w|| <= S``.

    Gauss-Newton with an exact ball-constrained subproblem runs from
    ``S * w_mle / ||w_mle||``, the origin, two perturbations of the first point
    and any ``extra_starts``; the best end point is polished by projected
    gradient with Barzilai-Borwein steps.
    """
    w_mle = np.asarray(w_mle, dtype=float)
    norm = float(np.linalg.norm(w_mle))
    if norm <= S:
        return w_mle.copy()
    u = w_mle / norm
    e = np.zeros_like(u)
    e[int(np.argmin(np.abs(u)))] = 1.0
    e = e - (e @ u) * u
    en = np.linalg.norm(e)
    e = e / en if en > 0 else e
    starts = [S * u, np.zeros_like(u),
              _ball(S * (u + 0.5 * e), S), _ball(S * (u - 0.5 * e), S),
              *[np.asarray(x, dtype=float) for x in extra_starts]]
    g_hat = g_transform(w_mle, data, lam)
    best, best_f = None, math.inf
    tol = xtol * (1.0 + S)
    for w0 in starts:
        w, f = _gauss_newton(w0, g_hat, data.z, lam, V.inverse, S, 50, tol)
        if f < best_f:
            best, best_f = w, f
    return _pgd(best, g_hat, data.z, lam, V.inverse, S, max_iter, tol)[0]


@dataclass(frozen=True)
class Estimate:
    w_mle: np.ndarray
    w_proj: np.ndarray
    lam: float
    param_bound: float
    projection_gap: float = 0.0


def fit_estimate(data: DuelDataset, V: DataMatrix, lam: float, S: float,
                 previous: Estimate | None = None, tol: float = 1e-10) -> Estimate:
    """MLE followed by projection onto the ``S`` ball, warm-started from ``previous``."""
    w0 = None if previous is None else previous.w_mle
    w_mle = mle_fit(data, lam, tol=tol, w0=w0)
    extra = () if previous is None else (previous.w_proj,)
    w_proj = project_estimate(w_mle, data, V, lam, S, extra_starts=extra)
    gap = 0.0
    if w_proj is not w_mle and float(np.linalg.norm(w_mle)) > S:
        gap = projection_objective(w_proj, g_transform(w_mle, data, lam), data, V, lam)
    return Estimate(w_mle, w_proj, lam, S, gap)


def beta(t: float, delta: float, lam: float, S: float, B: float, d: int, kappa: float) -> float:
    """Confidence radius ``sqrt(lam) S + sqrt(log(1/delta) + 2 d log(1 + t B / (kappa lam d)))``."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if t < 0:
        raise ValueError("t must be nonnegative")
    inner = math.log(1.0 / delta) + 2 * d * math.log1p(t * B / (kappa * lam * d))
    return math.sqrt(lam) * S + math.sqrt(inner)


def weighted_distance(w1, w2, M) -> float:
    """``||w1 - w2||_M``; ``M`` may be a ``DataMatrix`` or a plain array."""
    M = M.matrix if isinstance(M, DataMatrix) else np.asarray(M)
    x = np.asarray(w1, dtype=float) - np.asarray(w2, dtype=float)
    return math.sqrt(max(float(x @ M @ x), 0.0))


def in_confidence_set(w, w_proj, V: DataMatrix, radius: float) -> bool:
    return weighted_distance(w, w_proj, V) <= radius
