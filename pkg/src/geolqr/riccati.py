"""Riccati machinery behind the optimal attitude gains.

The coupled scalar system

    1 - k3^2 / alpha          = gamma k1
    1 + 2 k3 - k2^2 / alpha   = gamma k2
    k1 - k3 k2 / alpha        = gamma k3

is equivalent to the 2x2 algebraic Riccati equation
A.T K + K A - K B R^-1 B.T K = -Q with K = [[k1, k3], [k3, k2]],
B = [0, 1].T, Q = I, R = alpha and A = [[-gamma/2, 1], [0, -gamma/2]]
(direct expansion; see drift_matrix for the other bookkeeping modes).
The stabilizing K yields the gain pair (kP, kD) = (k3/alpha, k2/alpha).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoStabilizingSolution, NotControllable, StepTooLarge

# Published gain tables are reproduced by these drift matrices, which do not
# coincide with the scalar system's reconciled form for nonzero gamma. The
# mode is always explicit in configs, never inferred from gamma.
DRIFT_MODES = ("published-regulation", "published-tracking", "reconciled")

_B_CANONICAL = np.array([[0.0], [1.0]])


@dataclass(frozen=True)
class CostParams:
    """Quadratic cost weights: control weight alpha > 0, discount rate gamma,
    and a 2x2 PSD state-cost matrix (identity by default)."""

    alpha: float
    gamma: float = 0.0
    q_weights: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        q = np.asarray(self.q_weights, dtype=float)
        if q.shape != (2, 2) or abs(q[0, 1] - q[1, 0]) > 1e-12:
            raise ValueError("q_weights must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(q).min() < -1e-12:
            raise ValueError("q_weights must be positive semidefinite")
        object.__setattr__(self, "q_weights", q)


@dataclass(frozen=True)
class RiccatiSolution:
    """Symmetric 2x2 Riccati solution stored as its three entries."""

    k1: float
    k2: float
    k3: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.k1, self.k3], [self.k3, self.k2]])

    def is_positive_definite(self) -> bool:
        return (self.k1 > 0.0 and self.k2 > 0.0
                and self.k1 * self.k2 - self.k3 * self.k3 > 0.0)


@dataclass(frozen=True)
class GainPair:
    """Proportional/derivative feedback gains."""

    kP: float
    kD: float


@dataclass(frozen=True)
class GainSchedule:
    """Riccati solution sampled on a uniform time grid, zero at the horizon."""

    times: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray
    alpha: float

    def solution_at(self, t: float) -> RiccatiSolution:
        return RiccatiSolution(
            float(np.interp(t, self.times, self.k1)),
            float(np.interp(t, self.times, self.k2)),
            float(np.interp(t, self.times, self.k3)),
        )

    def gains_at(self, t: float) -> GainPair:
        sol = self.solution_at(t)
        return GainPair(sol.k3 / self.alpha, sol.k2 / self.alpha)


def drift_matrix(mode: str, gamma: float = 0.0) -> np.ndarray:
    """Drift matrix A for the 2x2 Riccati problem under a named bookkeeping.

    "published-regulation" and "published-tracking" pin the matrices that
    reproduce the published gain tables (1.4142, 2.7671) and
    (8.7852, 8.3357); "reconciled" is the form consistent with the scalar
    system for every gamma.
    """
    if mode == "published-regulation":
        return np.array([[0.0, 2.0], [0.0, 0.0]])
    if mode == "published-tracking":
        return np.array([[-gamma, 2.0], [0.0, -gamma]])
    if mode == "reconciled":
        return np.array([[-gamma / 2.0, 1.0], [0.0, -gamma / 2.0]])
    raise ValueError(f"unknown drift mode {mode!r}; expected one of {DRIFT_MODES}")


def scalar_residual(sol: RiccatiSolution, p: CostParams) -> np.ndarray:
    """Residuals of the three coupled scalar equations at (k1, k2, k3)."""
    a, g = p.alpha, p.gamma
    return np.array([
        1.0 - sol.k3 ** 2 / a - g * sol.k1,
        1.0 + 2.0 * sol.k3 - sol.k2 ** 2 / a - g * sol.k2,
        sol.k1 - sol.k3 * sol.k2 / a - g * sol.k3,
    ])


def are_residual(a, b, q, rw, sol: RiccatiSolution) -> float:
    """Frobenius norm of A.T K + K A - K B Rw^-1 B.T K + Q."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).reshape(2, 1)
    q = np.asarray(q, dtype=float)
    k = sol.as_matrix()
    s = (b @ b.T) / float(rw)
    return float(np.linalg.norm(a.T @ k + k @ a - k @ s @ k + q))


def _gain_matrix(a, b, rw, k: np.ndarray) -> np.ndarray:
    return (b.T @ k) / float(rw)


def are_solve(a, b, q, rw: float) -> RiccatiSolution:
    """Stabilizing solution of A.T K + K A - K B Rw^-1 B.T K = -Q.

    Eigenvector method on the 4x4 Hamiltonian matrix followed by a Newton
    refinement pass, so the returned residual sits at machine precision.

    Args:
        a: (2, 2) drift matrix.
        b: (2,) or (2, 1) input matrix.
        q: (2, 2) PSD state weight.
        rw: positive control weight.

    Returns:
        RiccatiSolution with K symmetric positive definite and
        A - B Rw^-1 B.T K Hurwitz.

    Raises:
        NotControllable: rank [B, AB] < 2.
        NoStabilizingSolution: Hamiltonian eigenvalues on the imaginary axis
            or the stable subspace does not produce a positive definite K.
    """
    a = np.asarray(a, dtype=float).reshape(2, 2)
    b = np.asarray(b, dtype=float).reshape(2, 1)
    q = np.asarray(q, dtype=float).reshape(2, 2)
    rw = float(rw)
    if not rw > 0.0:
        raise ValueError(f"control weight must be positive, got {rw}")

    ctrb = np.hstack([b, a @ b])
    if np.linalg.matrix_rank(ctrb) < 2:
        raise NotControllable(f"rank [B, AB] = {np.linalg.matrix_rank(ctrb)} < 2")

    s = (b @ b.T) / rw
    ham = np.block([[a, -s], [-q, -a.T]])
    eigvals, eigvecs = np.linalg.eig(ham)
    tol = 1e-9 * max(1.0, float(np.abs(eigvals).max()))
    stable = np.where(eigvals.real < -tol)[0]
    if stable.size != 2:
        raise NoStabilizingSolution(
            f"Hamiltonian spectrum {np.round(eigvals, 6)} has no 2-dim stable subspace")
    basis = eigvecs[:, stable]
    x, y = basis[:2, :], basis[2:, :]
    try:
        k = y @ np.linalg.inv(x)
    except np.linalg.LinAlgError as exc:
        raise NoStabilizingSolution("stable subspace not a graph over the state") from exc
    k = np.real(k)
    k = 0.5 * (k + k.T)

    # Newton polish: solve the Lyapunov equation for the correction.
    eye2 = np.eye(2)
    for _ in range(30):
        res = a.T @ k + k @ a - k @ s @ k + q
        if np.linalg.norm(res) <= 1e-13 * max(1.0, np.linalg.norm(k)):
            break
        acl = a - s @ k
        m = np.kron(acl.T, eye2) + np.kron(eye2, acl.T)
        delta = np.linalg.solve(m, -res.reshape(4)).reshape(2, 2)
        k = k + 0.5 * (delta + delta.T)

    sol = RiccatiSolution(float(k[0, 0]), float(k[1, 1]),
                          float(0.5 * (k[0, 1] + k[1, 0])))
    if not sol.is_positive_definite():
        raise NoStabilizingSolution(f"stable-subspace K not positive definite: {k}")
    closed = np.linalg.eigvals(a - s @ sol.as_matrix())
    if closed.real.max() >= 0.0:
        raise NoStabilizingSolution(f"closed loop not Hurwitz: {closed}")
    return sol


def gains_from_K(sol: RiccatiSolution, p: CostParams) -> GainPair:
    """Feedback gains Rw^-1 B.T K = (k3/alpha, k2/alpha)."""
    return GainPair(sol.k3 / p.alpha, sol.k2 / p.alpha)


def _dre_rate(y: np.ndarray, a: np.ndarray, s: np.ndarray, q: np.ndarray) -> np.ndarray:
    """dK/ds in reversed time s = T - t, propagating only (k1, k2, k3)."""
    k = np.array([[y[0], y[2]], [y[2], y[1]]])
    m = a.T @ k + k @ a - k @ s @ k + q
    return np.array([m[0, 0], m[1, 1], 0.5 * (m[0, 1] + m[1, 0])])


def dre_integrate(a, b, q, rw: float, t_end: float, h: float = 1e-3) -> GainSchedule:
    """Backward differential Riccati sweep with terminal condition K(T) = 0.

    Classical 4th-order one-step method on (k1, k2, k3), which keeps every
    stored K exactly symmetric.

    Args:
        a, b, q, rw: same problem data as are_solve.
        t_end: horizon T > 0.
        h: step size, 0 < h <= T. Adjusted to the nearest uniform divisor.

    Raises:
        StepTooLarge: an entry of K exceeded 1e9 (finite escape).
    """
    if not t_end > 0.0:
        raise ValueError(f"horizon must be positive, got {t_end}")
    if not 0.0 < h <= t_end:
        raise ValueError(f"step must satisfy 0 < h <= {t_end}, got {h}")
    a = np.asarray(a, dtype=float).reshape(2, 2)
    b = np.asarray(b, dtype=float).reshape(2, 1)
    q = np.asarray(q, dtype=float).reshape(2, 2)
    s = (b @ b.T) / float(rw)

    n = max(1, int(round(t_end / h)))
    hs = t_end / n
    ys = np.empty((n + 1, 3))
    ys[0] = 0.0
    y = np.zeros(3)
    for i in range(n):
        f1 = _dre_rate(y, a, s, q)
        f2 = _dre_rate(y + 0.5 * hs * f1, a, s, q)
        f3 = _dre_rate(y + 0.5 * hs * f2, a, s, q)
        f4 = _dre_rate(y + hs * f3, a, s, q)
        y = y + (hs / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        if np.abs(y).max() > 1e9:
            raise StepTooLarge(f"K entry exceeded 1e9 at s = {(i + 1) * hs:.6g}")
        ys[i + 1] = y

    # Stored in reversed time; flip so times run 0..T with K(T) = 0 exact.
    ys = ys[::-1]
    times = np.linspace(0.0, t_end, n + 1)
    return GainSchedule(times, ys[:, 0].copy(), ys[:, 1].copy(), ys[:, 2].copy(),
                        alpha=float(rw))
