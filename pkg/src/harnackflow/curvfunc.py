"""Admissible curvature functions and their algebraic functionals.

Every shipped function is symmetric, 1-homogeneous, strictly monotone
and convex on the positive cone, and normalized so that
``F(1, ..., 1) = n``.  All methods broadcast over leading axes: a
curvature array of shape ``(..., n)`` gives values of shape ``(...)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import OutsideConeError

KINDS = ("mean", "quad_norm", "power_mean")


def _check_cone(kappa):
    kappa = np.asarray(kappa, dtype=float)
    if kappa.ndim == 0:
        raise ValueError("kappa must have at least one axis")
    if not np.all(kappa > 0):
        bad = np.argwhere(~(kappa > 0))
        raise OutsideConeError(f"curvature vector outside the positive cone at index {bad[0].tolist()}")
    return kappa


@dataclass(frozen=True)
class CurvatureFunction:
    """Curvature function selected by ``kind``.

    ``mean``        F = sum(k)
    ``quad_norm``   F = sqrt(n * sum(k**2))
    ``power_mean``  F = n * (sum(k**q) / n) ** (1/q), q >= 1
    """

    kind: str
    n: int
    q: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown curvature function {self.kind!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.kind == "power_mean" and not self.q >= 1:
            raise ValueError(f"power_mean requires q >= 1, got {self.q}")

    @classmethod
    def from_name(cls, name: str, n: int) -> "CurvatureFunction":
        """Parse ``"mean" | "quad_norm" | "power_mean:q"``."""
        name = name.strip()
        if name.startswith("power_mean"):
            _, _, q = name.partition(":")
            if not q:
                raise ValueError("power_mean needs an exponent, e.g. 'power_mean:3'")
            return cls("power_mean", n, float(q))
        return cls(name, n)

    @property
    def name(self) -> str:
        if self.kind == "power_mean":
            return f"power_mean:{self.q:g}"
        return self.kind

    @property
    def _exponent(self) -> float:
        return {"mean": 1.0, "quad_norm": 2.0}.get(self.kind, self.q)

    def value(self, kappa):
        kappa = _check_cone(kappa)
        self._check_dim(kappa)
        q = self._exponent
        if q == 1.0:
            return kappa.sum(axis=-1)
        if q == 2.0:
            return np.sqrt(self.n * np.sum(kappa * kappa, axis=-1))
        return self.n ** (1.0 - 1.0 / q) * np.sum(kappa**q, axis=-1) ** (1.0 / q)

    def grad(self, kappa):
        """Partial derivatives dF/dk_i."""
        kappa = _check_cone(kappa)
        self._check_dim(kappa)
        q = self._exponent
        if q == 1.0:
            return np.ones_like(kappa)
        F = self.value(kappa)[..., None]
        if q == 2.0:
            return self.n * kappa / F
        return F * kappa ** (q - 1) / np.sum(kappa**q, axis=-1, keepdims=True)

    def hess(self, kappa):
        """Second derivatives, shape ``(..., n, n)``."""
        kappa = _check_cone(kappa)
        self._check_dim(kappa)
        q = self._exponent
        n = kappa.shape[-1]
        if q == 1.0:
            return np.zeros(kappa.shape + (n,))
        F = self.value(kappa)[..., None, None]
        sq = np.sum(kappa**q, axis=-1)[..., None, None]
        a = kappa ** (q - 1)
        diag = np.einsum("...i,ij->...ij", kappa ** (q - 2), np.eye(n))
        return (q - 1) * F / sq * (diag - a[..., :, None] * a[..., None, :] / sq)

    def bonus_constant(self) -> float:
        """Continuous extension F(0, ..., 0, 1)."""
        return float(self.n ** (1.0 - 1.0 / self._exponent))

    def _check_dim(self, kappa):
        if kappa.shape[-1] != self.n:
            raise ValueError(f"expected {self.n} principal curvatures, got {kappa.shape[-1]}")


def euler_residual(F: CurvatureFunction, kappa):
    """``sum_i F^i k_i - F``; zero for 1-homogeneous F."""
    kappa = np.asarray(kappa, dtype=float)
    return np.sum(F.grad(kappa) * kappa, axis=-1) - F.value(kappa)


def pinching_deficit(F: CurvatureFunction, kappa, p: float):
    """Weighted pinching functional for powers ``p > 1`` in the sphere.

    With curvatures sorted ascending, returns

        sum_{i<n} F^i k_i - (p - 1)/(p + 1) * F^n k_n

    The pinching hypothesis holds where the result is non-negative.
    """
    kappa = np.sort(np.asarray(kappa, dtype=float), axis=-1)
    Fi = F.grad(kappa)
    terms = Fi * kappa
    return terms[..., :-1].sum(axis=-1) - (p - 1.0) / (p + 1.0) * terms[..., -1]
