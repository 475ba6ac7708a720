"""Round-sphere targets ``S^{N-1}`` in ``R^N`` and their Killing fields."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

UNIT_TOL = 1e-10


def _check_unit(p):
    p = np.asarray(p, dtype=float)
    if abs(np.linalg.norm(p) - 1.0) > UNIT_TOL:
        raise ValueError(f"expected a unit vector, |p| = {np.linalg.norm(p)!r}")
    return p


def check_sphere_map(u, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate that ``u`` (shape ``(M, N)``, ``N >= 2``) is unit length at every node."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] < 2:
        raise ValueError(f"sphere map must have shape (M, N>=2), got {u.shape}")
    defect = np.max(np.abs(np.linalg.norm(u, axis=1) - 1.0))
    if defect > tol:
        raise ValueError(f"not a sphere map: max | |u_i| - 1 | = {defect:.3e}")
    return u


def project_sphere(v, min_norm: float = 1e-8) -> np.ndarray:
    """Nearest-point projection ``v -> v/|v|``, node by node."""
    v = np.asarray(v, dtype=float)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms < min_norm):
        raise ValueError("cannot project a (near) zero vector onto the sphere")
    return v / norms


def tangent_project(p, w) -> np.ndarray:
    """``(I - p p^T) w`` for a unit vector ``p``."""
    p = _check_unit(p)
    w = np.asarray(w, dtype=float)
    return w - np.dot(p, w) * p


def tangent_project_map(u, w) -> np.ndarray:
    """Node-wise tangent projection of ``w`` at the sphere map ``u``."""
    return w - np.sum(u * w, axis=-1, keepdims=True) * u


@dataclass(frozen=True)
class KillingBasis:
    """Generators ``A = e_a e_b^T - e_b e_a^T`` (``a < b``) of ``so(N)``.

    On the unit sphere the Killing fields are ``X(p) = A p`` and they double
    as the tangent frame ``Y``, since ``sum_A (A p)(A p)^T = I - p p^T``.
    """

    N: int
    generators: np.ndarray
    pairs: tuple

    @classmethod
    def standard(cls, N: int) -> "KillingBasis":
        if N < 2:
            raise ValueError(f"need N >= 2, got {N}")
        pairs = tuple(combinations(range(N), 2))
        gens = np.zeros((len(pairs), N, N))
        for k, (a, b) in enumerate(pairs):
            gens[k, a, b] = 1.0
            gens[k, b, a] = -1.0
        gens.flags.writeable = False
        return cls(N, gens, pairs)

    def __len__(self):
        return len(self.pairs)

    def fields(self, u) -> np.ndarray:
        """``X_alpha(u_i) = A_alpha u_i``, shape ``(m, M, N)`` (or ``(m, N)`` for one point)."""
        return np.einsum("aij,...j->a...i", self.generators, np.asarray(u, dtype=float))


def killing_projection_identity(basis: KillingBasis, p) -> float:
    """Max-abs entry of ``sum_A (A p)(A p)^T - (I - p p^T)``."""
    p = _check_unit(p)
    X = basis.fields(p)
    lhs = X.T @ X
    return float(np.max(np.abs(lhs - (np.eye(basis.N) - np.outer(p, p)))))


def killing_pointwise_property(basis: KillingBasis, p, q) -> float:
    """``max_A |<A p - A q, p - q>|``; vanishes for antisymmetric generators."""
    diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    vals = np.einsum("i,aij,j->a", diff, basis.generators, diff)
    return float(np.max(np.abs(vals)))


def killing_reconstruction(basis: KillingBasis, p, w) -> np.ndarray:
    """``sum_A <A p, w> A p``; equals ``w`` for tangent ``w``."""
    X = basis.fields(_check_unit(p))
    return X.T @ (X @ np.asarray(w, dtype=float))


@dataclass(frozen=True)
class TangencyReport:
    max_ratio: float
    mean_ratio: float
    pairs: int


def tangency_defect(u, min_gap: float = 1e-10) -> TangencyReport:
    """Normal part of chords relative to their squared length.

    Over pairs with ``|u_i - u_j| >= min_gap`` the ratio
    ``|(I - Pi(u_j))(u_i - u_j)| / |u_i - u_j|^2`` is computed.  On the unit
    sphere the normal component of a chord is ``|u_i - u_j|^2 / 2`` exactly,
    so every ratio is one half.
    """
    u = check_sphere_map(u)
    diff = u[:, None, :] - u[None, :, :]
    gap2 = np.sum(diff**2, axis=-1)
    # normal component of u_i - u_j at u_j
    normal = np.abs(np.einsum("ijc,jc->ij", diff, u))
    valid = gap2 >= min_gap**2
    if not np.any(valid):
        raise ValueError("tangency defect undefined for a constant map")
    ratios = normal[valid] / gap2[valid]
    return TangencyReport(float(ratios.max()), float(ratios.mean()), int(valid.sum()))
