"""Small dense linear-algebra helpers shared by the solvers."""

from __future__ import annotations

import numpy as np

from .errors import NoStationaryState, NumericalError


def sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def kron_sum(M: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> M X + X M^T`` acting on column-major ``vec(X)``."""
    n = M.shape[0]
    eye = np.eye(n)
    return np.kron(eye, M) + np.kron(M, eye)


def lyapunov_vec(M: np.ndarray, Q: np.ndarray, check: bool = True) -> np.ndarray:
    """Solve ``M X + X M^T + Q = 0`` by vectorization.

    Parameters
    ----------
    M : (n, n) array
        Must be Hurwitz when ``check`` is set.
    Q : (n, n) array

    Raises
    ------
    NoStationaryState
        If some eigenvalue of ``M`` has nonnegative real part.
    """
    n = M.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if check:
        lam = np.linalg.eigvals(M)
        # conserved combinations (e.g. pure inductor loops) sit at zero up to round-off
        if np.max(lam.real) >= -1e-10 * max(1.0, np.abs(lam).max()):
            raise NoStationaryState(
                f"drift matrix is not Hurwitz (max Re eigenvalue {np.max(lam.real):.3g}); no stationary state"
            )
    x = np.linalg.solve(kron_sum(M), -Q.reshape(-1, order="F"))
    X = x.reshape(n, n, order="F")
    return sym(X) if np.isrealobj(X) and np.allclose(Q, Q.T) else X


def lyapunov_residual(M, X, Q) -> float:
    r = M @ X + X @ M.conj().T + Q
    return float(np.linalg.norm(r) / max(np.linalg.norm(Q), 1e-300))


def rk4_linear_steps(M0, Mh, M1, h):
    """One-step RK4 propagators for ``y' = M(t) y`` (batched over steps).

    ``M0, Mh, M1`` hold ``M`` at the start, midpoint and end of each step.
    """
    eye = np.eye(M0.shape[-1])
    K1 = M0
    K2 = Mh @ (eye + 0.5 * h * K1)
    K3 = Mh @ (eye + 0.5 * h * K2)
    K4 = M1 @ (eye + h * K3)
    return eye + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


def ordered_product(P: np.ndarray) -> np.ndarray:
    """``P[N-1] @ ... @ P[1] @ P[0]`` by pairwise reduction."""
    P = np.asarray(P)
    if P.shape[0] == 0:
        return np.eye(P.shape[-1])
    while P.shape[0] > 1:
        m = P.shape[0]
        head = P[1 : m - m % 2 : 2] @ P[0 : m - m % 2 : 2]
        if m % 2:
            head = np.concatenate([head, P[-1:]], axis=0)
        P = head
    return P[0]


def check_finite(arr, t: float, what: str = "state") -> None:
    if not np.all(np.isfinite(arr)):
        from .errors import InstabilityError

        raise InstabilityError(f"non-finite {what} at t = {t:.6g}", time=t)


def solve_or_raise(a, b, what="linear system"):
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular {what}") from exc
