"""Uniform node sets standing in for R^n.

Every nonlocal integral in the package is a weighted double sum over the
nodes of a :class:`Domain`.  Scalar fields are arrays of shape ``(M,)``,
vector maps arrays of shape ``(M, N)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PERIODIC = "periodic"
BOX = "box"
TOPOLOGIES = (PERIODIC, BOX)


@dataclass(frozen=True)
class Ball:
    """Discrete ball ``B(x_center, radius)``; membership is ``d < radius``."""

    center: int
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")


@dataclass(frozen=True, eq=False)
class Domain:
    """Uniform lattice on a periodic torus or a truncated box.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    topology : str
        ``"periodic"`` or ``"box"``.
    lower, upper : tuple of float
        Per-axis bounds.  For the torus ``upper - lower`` is the side length.
    n_per_axis : int
        Nodes per axis.

    Use :func:`build_domain` rather than calling this directly.
    """

    dim: int
    topology: str
    lower: tuple
    upper: tuple
    n_per_axis: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacing(self) -> float:
        return (self.upper[0] - self.lower[0]) / self.n_per_axis

    @property
    def side_lengths(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lower, self.upper))

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_lengths))

    @property
    def diameter(self) -> float:
        return float(self.distances.max())

    @property
    def periodic(self) -> bool:
        return self.topology == PERIODIC

    def inverse_distance_power(self, power: float) -> np.ndarray:
        """``d_ij ** -power`` with a zero diagonal."""
        out = np.zeros_like(self.distances)
        off = ~np.eye(self.size, dtype=bool)
        out[off] = self.distances[off] ** (-power)
        return out

    def dyadic_radii(self, largest: float | None = None) -> list:
        """Radii ``2h, 4h, ...`` up to ``largest`` (default ``diameter / 2``)."""
        if largest is None:
            largest = self.diameter / 2
        radii = []
        t = 2 * self.spacing
        while t <= largest * (1 + 1e-12):
            radii.append(t)
            t *= 2
        if not radii:
            radii.append(2 * self.spacing)
        return radii

    def nearest_node(self, point) -> int:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        delta = np.abs(self.nodes - point)
        if self.periodic:
            sides = np.asarray(self.side_lengths)
            delta = np.minimum(delta, sides - delta)
        return int(np.argmin(np.sum(delta**2, axis=1)))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "topology": self.topology,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "n_per_axis": self.n_per_axis,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Domain":
        return build_domain(
            data["dim"],
            data["topology"],
            data["n_per_axis"],
            lower=data.get("lower"),
            upper=data.get("upper"),
        )


def _as_bounds(value, default, dim):
    if value is None:
        value = default
    value = np.atleast_1d(np.asarray(value, dtype=float))
    if value.size == 1:
        value = np.repeat(value, dim)
    if value.size != dim:
        raise ValueError(f"expected {dim} bounds, got {value.size}")
    return tuple(float(v) for v in value)


def build_domain(
    dim: int,
    topology: str = PERIODIC,
    n_per_axis: int = 32,
    lower: Sequence[float] | float | None = None,
    upper: Sequence[float] | float | None = None,
) -> Domain:
    """Build a uniform lattice with quadrature weights and pair distances.

    Nodes sit at ``lower + i*h`` with ``h = (upper - lower) / n_per_axis``
    and every node carries the cell volume ``h**dim``.  On the torus the
    distance uses the minimal-image convention per axis.

    Examples
    --------
    >>> d = build_domain(1, "periodic", 4)
    >>> d.nodes[:, 0].tolist(), d.distances[0, 2], d.distances[0, 3]
    ([0.0, 0.25, 0.5, 0.75], 0.5, 0.25)
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if topology not in TOPOLOGIES:
        raise ValueError(f"topology must be one of {TOPOLOGIES}, got {topology!r}")
    if int(n_per_axis) != n_per_axis or n_per_axis < 4:
        raise ValueError(f"need at least 4 nodes per axis, got {n_per_axis}")
    n_per_axis = int(n_per_axis)

    lo = _as_bounds(lower, 0.0, dim)
    hi = _as_bounds(upper, 1.0, dim)
    sides = np.subtract(hi, lo)
    if np.any(sides <= 0):
        raise ValueError("upper bounds must exceed lower bounds")
    if not np.allclose(sides, sides[0]):
        raise ValueError("only uniform spacing is supported: equal side lengths required")

    h = sides[0] / n_per_axis
    axes = [lo[k] + h * np.arange(n_per_axis) for k in range(dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)

    delta = np.abs(nodes[:, None, :] - nodes[None, :, :])
    if topology == PERIODIC:
        delta = np.minimum(delta, sides - delta)
    distances = np.sqrt(np.sum(delta**2, axis=-1))
    np.fill_diagonal(distances, 0.0)

    weights = np.full(nodes.shape[0], h**dim)
    for arr in (nodes, weights, distances):
        arr.flags.writeable = False

    return Domain(dim, topology, lo, hi, n_per_axis, nodes, weights, distances)


def ball_members(domain: Domain, ball: Ball) -> np.ndarray:
    """Indices ``j`` with ``d(center, j) < radius``; always contains the center."""
    if not 0 <= ball.center < domain.size:
        raise IndexError(f"ball center {ball.center} outside 0..{domain.size - 1}")
    return np.flatnonzero(domain.distances[ball.center] < ball.radius)
