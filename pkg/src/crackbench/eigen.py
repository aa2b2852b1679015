"""Dense symmetric eigensolvers.

Two backends behind one call: LAPACK (``numpy.linalg.eigh``) and an in-house
cyclic Jacobi solver. The Jacobi solver uses round-robin (tournament)
ordering, so each round is a set of disjoint plane rotations. Rotations in
disjoint planes commute and leave each other's 2x2 pivot blocks untouched, so
applying a whole round at once with array operations is the same as applying
it one rotation at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues; ``eigenvectors[:, k]`` pairs with ``eigenvalues[k]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self):
        return self.eigenvalues.size

    def residual(self, a: np.ndarray) -> float:
        """max_k ||A v_k - lambda_k v_k||_inf"""
        r = a @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return float(np.abs(r).max()) if r.size else 0.0

    def orthonormality_error(self) -> float:
        v = self.eigenvectors
        if v.size == 0:
            return 0.0
        return float(np.abs(v.T @ v - np.eye(v.shape[1])).max())


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings covering every (p, q), p < q, exactly once over n - 1 rounds.

    ``n`` must be even.
    """
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        p = np.array(players[: n // 2])
        q = np.array(players[n // 2 :][::-1])
        lo = np.minimum(p, q)
        hi = np.maximum(p, q)
        rounds.append((lo, hi))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _check_symmetric(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if a.size and not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix must be symmetric")
    return a


def jacobi_eigh(a, tol: float = 1e-15, max_sweeps: int = 60) -> EigenSystem:
    """Cyclic Jacobi eigendecomposition of a real symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``tol * ||A||_F``. Raises :class:`ConvergenceError` after ``max_sweeps``.
    """
    a = _check_symmetric(a)
    n = a.shape[0]
    if n == 0:
        return EigenSystem(np.zeros(0), np.zeros((0, 0)))
    a = 0.5 * (a + a.T)
    # odd sizes get a decoupled dummy row/column that is dropped at the end
    size = n + (n % 2)
    if size != n:
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(size)
    rounds = _round_robin(size)
    fro = np.linalg.norm(a)
    target = tol * fro

    def off_norm():
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        return np.linalg.norm(off)

    last = np.inf
    for _ in range(max_sweeps):
        off = off_norm()
        # stagnation at the rounding floor also counts as converged
        if off <= target or (off >= last and off <= 1e-10 * fro):
            break
        last = off
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            theta2 = np.where(big, 0.0, theta * theta)
            t = np.where(
                big,
                0.5 / np.where(big, theta, 1.0),
                np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta2 + 1.0)),
            )
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            ap = a[:, p]
            aq = a[:, q]
            a[:, p] = ap * c - aq * s
            a[:, q] = ap * s + aq * c
            ap = a[p, :]
            aq = a[q, :]
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp = v[:, p]
            vq = v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
    else:
        if off_norm() > target:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")

    # the dummy index (if any) has zero couplings, so it is never rotated
    w = np.diag(a)[:n].copy()
    v = v[:n, :n]
    order = np.argsort(w, kind="stable")
    return EigenSystem(w[order], np.ascontiguousarray(v[:, order]))


def eigh(a, method: str = "lapack", **kwargs) -> EigenSystem:
    """Full symmetric eigendecomposition with eigenvalues ascending."""
    if method == "lapack":
        w, v = np.linalg.eigh(_check_symmetric(a))
        return EigenSystem(w, v)
    if method == "jacobi":
        return jacobi_eigh(a, **kwargs)
    raise ValueError(f"unknown eigensolver {method!r}")
