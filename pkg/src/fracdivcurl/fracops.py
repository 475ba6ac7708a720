"""Nonlocal calculus on a :class:`~fracdivcurl.domain.Domain`.

Off-diagonal fields are arrays of shape ``(M, M)`` (one component) or
``(M, M, c)``; entry ``[i, j]`` is the value on the ordered pair
``(x_i, x_j)`` and the diagonal is zero.  The pair measure is
``mu_i mu_j / d_ij**n``.

The s-divergence is the exact discrete adjoint of the s-gradient under that
measure, which makes ``div_s(d_s f) = 2 (-Delta)^s f`` hold identically.
"""
from __future__ import annotations

import numpy as np

from .domain import Ball, Domain, ball_members


def _check_s(s):
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")


def _check_p(p, name="p"):
    if p < 1:
        raise ValueError(f"{name} must be >= 1, got {p}")


def _check_field(domain: Domain, f, name="field"):
    f = np.asarray(f, dtype=float)
    if f.ndim not in (1, 2) or f.shape[0] != domain.size:
        raise ValueError(
            f"{name} must have {domain.size} node values, got shape {f.shape}"
        )
    return f


def _check_offdiag(domain: Domain, F, name="F"):
    F = np.asarray(F, dtype=float)
    M = domain.size
    if F.ndim not in (2, 3) or F.shape[:2] != (M, M):
        raise ValueError(f"{name} must have shape ({M}, {M}[, c]), got {F.shape}")
    return F


def pair_measure(domain: Domain) -> np.ndarray:
    """``mu_i mu_j / d_ij**n`` with zero diagonal."""
    mu = domain.weights
    return mu[:, None] * mu[None, :] * domain.inverse_distance_power(domain.dim)


def pair_norm(F: np.ndarray) -> np.ndarray:
    """Euclidean norm over the component axis, shape ``(M, M)``."""
    F = np.asarray(F, dtype=float)
    if F.ndim == 2:
        return np.abs(F)
    return np.sqrt(np.sum(F**2, axis=-1))


def s_gradient(domain: Domain, f, s: float) -> np.ndarray:
    """``(d_s f)_ij = (f_i - f_j) / d_ij**s``, zero on the diagonal."""
    _check_s(s)
    f = _check_field(domain, f)
    kernel = domain.inverse_distance_power(s)
    diff = f[:, None, ...] - f[None, :, ...]
    if f.ndim == 2:
        return diff * kernel[..., None]
    return diff * kernel


def pairing(domain: Domain, F, G) -> np.ndarray:
    """Pointwise scalar product ``<F, G>(x_i) = sum_j F_ij . G_ij mu_j / d_ij**n``."""
    F = _check_offdiag(domain, F)
    G = _check_offdiag(domain, G, "G")
    if F.shape != G.shape:
        raise ValueError(f"component mismatch: {F.shape} vs {G.shape}")
    prod = F * G
    if prod.ndim == 3:
        prod = prod.sum(axis=-1)
    w = domain.inverse_distance_power(domain.dim) * domain.weights[None, :]
    return np.sum(prod * w, axis=1)


def local_p_norm(domain: Domain, F, p: float) -> np.ndarray:
    """``||F||_p(x_i) = (sum_j |F_ij|^p mu_j / d_ij**n)^(1/p)``."""
    _check_p(p)
    F = _check_offdiag(domain, F)
    w = domain.inverse_distance_power(domain.dim) * domain.weights[None, :]
    return np.sum(pair_norm(F) ** p * w, axis=1) ** (1.0 / p)


def offdiag_lp_norm(domain: Domain, F, p: float, restriction: Ball | None = None) -> float:
    """L^p norm of an off-diagonal field under the pair measure.

    With ``restriction`` the sum runs over ordered pairs ``(i, j)`` with
    ``i`` or ``j`` in the ball, i.e. over ``(B x R^n) u (R^n x B)``.
    """
    _check_p(p)
    F = _check_offdiag(domain, F)
    terms = pair_norm(F) ** p * pair_measure(domain)
    if restriction is not None:
        inside = np.zeros(domain.size, dtype=bool)
        inside[ball_members(domain, restriction)] = True
        terms = terms[inside[:, None] | inside[None, :]]
    return float(np.sum(terms) ** (1.0 / p))


def gagliardo_seminorm(domain: Domain, f, s: float, p: float) -> float:
    """``[f]_{W^{s,p}} = ||d_s f||_{L^p}`` on the pair measure."""
    return offdiag_lp_norm(domain, s_gradient(domain, f, s), p)


def s_divergence(domain: Domain, F, s: float) -> np.ndarray:
    """Discrete adjoint of :func:`s_gradient`.

    ``(div_s F)_k = sum_{j != k} (F_kj - F_jk) mu_j / d_kj**(n+s)``, so that
    ``sum_k (div_s F)_k phi_k mu_k`` equals the pair integral of
    ``F * d_s phi`` exactly.  Multi-component fields are handled per component.
    """
    _check_s(s)
    F = _check_offdiag(domain, F)
    w = domain.inverse_distance_power(domain.dim + s) * domain.weights[None, :]
    anti = F - np.swapaxes(F, 0, 1)
    if F.ndim == 3:
        return np.einsum("kjc,kj->kc", anti, w)
    return np.sum(anti * w, axis=1)


def laplacian_matrix(domain: Domain, s: float) -> np.ndarray:
    """Dense matrix of :func:`fractional_laplacian` acting on node values."""
    _check_s(s)
    K = domain.inverse_distance_power(domain.dim + 2 * s) * domain.weights[None, :]
    return np.diag(K.sum(axis=1)) - K


def fractional_laplacian(domain: Domain, f, s: float) -> np.ndarray:
    """``((-Delta)^s f)_k = sum_{j != k} (f_k - f_j) mu_j / d_kj**(n+2s)``."""
    _check_s(s)
    f = _check_field(domain, f)
    K = domain.inverse_distance_power(domain.dim + 2 * s) * domain.weights[None, :]
    diff = f[:, None, ...] - f[None, :, ...]
    if f.ndim == 2:
        return np.einsum("kjc,kj->kc", diff, K)
    return np.sum(diff * K, axis=1)


def xspq_seminorm(domain: Domain, f, s: float, p: float, q: float) -> float:
    """Mixed seminorm ``(sum_i mu_i (sum_j |f_i-f_j|^q mu_j/d^(n+sq))^(p/q))^(1/p)``."""
    _check_s(s)
    if not (p > 1 and q > 1 and np.isfinite(p) and np.isfinite(q)):
        raise ValueError(f"p and q must lie in (1, inf), got p={p}, q={q}")
    f = _check_field(domain, f)
    diff = f[:, None, ...] - f[None, :, ...]
    absdiff = np.sqrt(np.sum(diff**2, axis=-1)) if f.ndim == 2 else np.abs(diff)
    K = domain.inverse_distance_power(domain.dim + s * q) * domain.weights[None, :]
    inner = np.sum(absdiff**q * K, axis=1)
    return float(np.sum(domain.weights * inner ** (p / q)) ** (1.0 / p))
