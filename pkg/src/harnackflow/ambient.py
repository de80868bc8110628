"""Space-form ambient geometry.

Only constant-curvature ambients with ``K >= 0`` are simulated.  General
Einstein backgrounds enter solely through :class:`AmbientBounds`, which
feeds the mean-curvature threshold of :func:`mainA_threshold`.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class AmbientBounds:
    """Lower sectional-curvature bound ``c1`` and a bound on the covariant
    derivative of the curvature tensor."""

    c1: float
    grad_rm_norm: float = 0.0

    def __post_init__(self):
        if not self.c1 > 0:
            raise ValueError(f"c1 must be positive, got {self.c1}")
        if not self.grad_rm_norm >= 0:
            raise ValueError(f"grad_rm_norm must be non-negative, got {self.grad_rm_norm}")


@dataclass(frozen=True)
class SpaceForm:
    """Simply connected space of constant sectional curvature ``K >= 0``.

    Parameters
    ----------
    ambient_dim : int
        Dimension ``n + 1`` of the ambient space.  The hypersurfaces have
        dimension ``n``.
    K : float
        Sectional curvature. ``0`` is Euclidean space, ``1`` the unit sphere.
    """

    ambient_dim: int
    K: float = 1.0

    def __post_init__(self):
        if int(self.ambient_dim) != self.ambient_dim or self.ambient_dim < 2:
            raise ValueError(f"ambient_dim must be an integer >= 2, got {self.ambient_dim}")
        if not (self.K >= 0 and math.isfinite(self.K)):
            raise ValueError(f"K must be finite and non-negative, got {self.K}")

    @property
    def n(self) -> int:
        return self.ambient_dim - 1

    @property
    def radius(self) -> float:
        """Radius of the model sphere, ``inf`` for flat space."""
        return math.inf if self.K == 0 else 1.0 / math.sqrt(self.K)

    @property
    def scalar_curvature(self) -> float:
        return self.n * (self.n + 1) * self.K

    @property
    def grad_rm_norm(self) -> float:
        # space forms are locally symmetric
        return 0.0

    def bounds(self) -> AmbientBounds:
        if self.K == 0:
            raise ValueError("flat space has no positive sectional curvature bound")
        return AmbientBounds(c1=self.K, grad_rm_norm=0.0)

    def riem(self, X, Y, Z, W, gram=None):
        return riem(self.K, X, Y, Z, W, gram=gram)

    def ricci(self, X, Y, gram=None):
        """Ricci curvature ``n K <X, Y>``."""
        return self.n * self.K * _inner(X, Y, gram)


def _inner(a, b, gram=None):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if gram is None:
        return np.sum(a * b, axis=-1)
    return np.einsum("...i,ij,...j->...", a, np.asarray(gram, dtype=float), b)


def riem_from_products(K, xw, yz, xz, yw):
    """Constant-curvature tensor from the four inner products it needs."""
    return K * (xw * yz - xz * yw)


def riem(K, X, Y, Z, W, gram=None):
    """Curvature tensor ``Rm(X, Y, Z, W)`` of a space form.

    ``Rm(X,Y,Z,W) = K (<X,W><Y,Z> - <X,Z><Y,W>)`` so that ``Rm(X,Y,Y,X)``
    is ``K`` times the squared area of the parallelogram spanned by X, Y.
    Vectors may carry leading batch axes; ``gram`` is an optional metric
    matrix (identity if omitted).
    """
    return riem_from_products(
        K,
        _inner(X, W, gram),
        _inner(Y, Z, gram),
        _inner(X, Z, gram),
        _inner(Y, W, gram),
    )


def mainA_threshold(n: int, p: float, bounds: AmbientBounds) -> float:
    """Smallest admissible mean curvature for the Einstein-manifold Harnack estimate.

    Returns ``2 n p / min(1 - p, 2 p) * grad_rm_norm``; a flow snapshot
    satisfies the hypothesis iff its minimum mean curvature is at least
    this value.
    """
    if not 0 < p < 1:
        raise ValueError(f"threshold defined only for 0 < p < 1, got p={p}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return 2.0 * n * p / min(1.0 - p, 2.0 * p) * bounds.grad_rm_norm
