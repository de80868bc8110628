"""Rotationally symmetric hypersurfaces in space forms.

A hypersurface of revolution is stored through its meridian, a curve in
the two-dimensional orbit space joining two points of the rotation axis.
Nodes live in R^3:

* ``K = 0``: ``(x, y, 0)`` in the half plane ``y >= 0``; ``y`` is the warp
  (radius of the orbit sphere) and the axis is ``y = 0``.
* ``K > 0``: points of the sphere of radius ``R = 1/sqrt(K)``,
  ``(R sin(phi) cos(theta), R sin(phi) sin(theta), R cos(phi))``.  The
  second coordinate is again the warp and ``phi`` is the geodesic angle
  from the centre ``(0, 0, R)``.

The meridian extended by its mirror image across the axis is a smooth
closed curve, which supplies the ghost nodes for the centred stencils.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from .ambient import SpaceForm
from .curvfunc import CurvatureFunction
from .exceptions import ConvexityLost, ResolutionError

WARP = 1

# 4th-order centred stencils on offsets -2..2
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
# 6th-order, used only by the embedding oracle
_D1_6 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
_D2_6 = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0


@dataclass(frozen=True)
class OrbitSpace:
    """Orbit space of a space form under rotations about an axis."""

    K: float

    @property
    def radius(self) -> float:
        return math.inf if self.K == 0 else 1.0 / math.sqrt(self.K)

    def to_coords(self, nodes):
        """Orbit coordinates: ``(x, y)`` if flat, ``(phi, theta)`` otherwise."""
        nodes = np.asarray(nodes, dtype=float)
        if self.K == 0:
            return nodes[..., :2].copy()
        R = self.radius
        phi = np.arccos(np.clip(nodes[..., 2] / R, -1.0, 1.0))
        theta = np.arctan2(nodes[..., 1], nodes[..., 0])
        return np.stack([phi, theta], axis=-1)

    def from_coords(self, coords):
        coords = np.asarray(coords, dtype=float)
        a, b = coords[..., 0], coords[..., 1]
        if self.K == 0:
            return np.stack([a, b, np.zeros_like(a)], axis=-1)
        R = self.radius
        return R * np.stack([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)], axis=-1)

    def warp(self, nodes):
        return np.asarray(nodes, dtype=float)[..., WARP]

    def up(self, nodes):
        """Unit normal of the orbit space inside R^3 at each node."""
        nodes = np.asarray(nodes, dtype=float)
        if self.K == 0:
            out = np.zeros_like(nodes)
            out[..., 2] = 1.0
            return out
        return nodes / self.radius


@dataclass(frozen=True)
class ProfileCurve:
    """Meridian of a closed, rotationally symmetric hypersurface.

    ``nodes`` has shape ``(N + 1, 3)``; the first and last node lie on the
    rotation axis.
    """

    nodes: np.ndarray
    space: SpaceForm

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 3 or nodes.shape[0] < 5:
            raise ValueError("nodes must be an (N+1, 3) array with N >= 4")
        if self.space.K > 0:
            nodes *= self.space.radius / np.linalg.norm(nodes, axis=1, keepdims=True)
        else:
            nodes[:, 2] = 0.0
        scale = np.max(np.abs(nodes))
        for end in (0, -1):
            if abs(nodes[end, WARP]) > 1e-9 * scale:
                raise ValueError("profile endpoints must lie on the rotation axis")
            nodes[end, WARP] = 0.0
        if np.any(nodes[1:-1, WARP] <= 0):
            raise ResolutionError("interior nodes must lie strictly off the axis")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def N(self) -> int:
        """Number of meridian intervals."""
        return self.nodes.shape[0] - 1

    @property
    def orbit(self) -> OrbitSpace:
        return OrbitSpace(self.space.K)

    @property
    def endpoints(self):
        return (True, True)

    def spacing(self):
        """Chord lengths between consecutive nodes."""
        return np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)

    @property
    def h(self) -> float:
        """Nominal arclength spacing (mean chord)."""
        return float(self.spacing().mean())

    def coords(self):
        return self.orbit.to_coords(self.nodes)

    def with_nodes(self, nodes) -> "ProfileCurve":
        return ProfileCurve(nodes, self.space)


@dataclass
class GeometryFields:
    """Per-node geometric quantities of a profile (all arrays of length N+1)."""

    s: np.ndarray
    w: np.ndarray
    nu: np.ndarray
    tangent: np.ndarray
    speed: np.ndarray  # |dP/du|
    kappa_prof: np.ndarray
    kappa_rot: np.ndarray
    kappa: np.ndarray  # (N+1, n)
    H: np.ndarray
    Fval: np.ndarray
    f: np.ndarray
    ds_f: np.ndarray
    binv_grad: np.ndarray
    p: float
    du: float
    extra: dict = field(default_factory=dict)

    @property
    def V_norm2(self):
        """Squared norm of grad_h f, the reparametrization velocity."""
        return (self.ds_f / self.kappa_prof) ** 2

    @property
    def tilde_H(self):
        """Trace of the inverse second fundamental form."""
        return np.sum(1.0 / self.kappa, axis=-1)


def _reflect(nodes):
    out = np.array(nodes, dtype=float, copy=True)
    out[..., WARP] *= -1.0
    return out


def _pad_nodes(nodes, width=2):
    """Append mirror ghosts: P[-j] = refl(P[j]), P[N+j] = refl(P[N-j])."""
    left = _reflect(nodes[width:0:-1])
    right = _reflect(nodes[-2:-2 - width:-1])
    return np.concatenate([left, nodes, right], axis=0)


def _pad_even(values, width=2):
    values = np.asarray(values, dtype=float)
    return np.concatenate([values[width:0:-1], values, values[-2:-2 - width:-1]], axis=0)


def _stencil(padded, weights, width=2):
    m = padded.shape[0] - 2 * width
    out = np.zeros((m,) + padded.shape[1:])
    for k, c in enumerate(weights):
        if c:
            out += c * padded[k:k + m]
    return out


def _param_step(profile):
    return math.pi / profile.N


def compute_fields(profile: ProfileCurve, F: CurvatureFunction, p: float) -> GeometryFields:
    """Principal curvatures, speed and gradient data at every node.

    Raises
    ------
    ConvexityLost
        if a principal curvature is non-positive somewhere.
    ResolutionError
        if adjacent nodes coincide.
    """
    nodes = profile.nodes
    n = profile.n
    du = _param_step(profile)
    padded = _pad_nodes(nodes)
    Pu = _stencil(padded, _D1) / du
    Puu = _stencil(padded, _D2) / du**2

    up = profile.orbit.up(nodes)
    if profile.space.K > 0:
        Pu -= np.sum(Pu * up, axis=1, keepdims=True) * up
    speed = np.linalg.norm(Pu, axis=1)
    if np.any(speed <= 1e-14 * max(1.0, np.max(np.abs(nodes)))) or np.any(profile.spacing() == 0):
        raise ResolutionError("adjacent nodes coincide")
    T = Pu / speed[:, None]
    nu = np.cross(T, up)
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)

    kappa_prof = -np.sum(Puu * nu, axis=1) / speed**2
    w = nodes[:, WARP]
    kappa_rot = np.empty_like(kappa_prof)
    kappa_rot[1:-1] = nu[1:-1, WARP] / w[1:-1]
    kappa_rot[[0, -1]] = kappa_prof[[0, -1]]

    bad = np.flatnonzero(~((kappa_prof > 0) & (kappa_rot > 0)))
    if bad.size:
        i = int(bad[0])
        raise ConvexityLost(
            f"strict convexity lost at node {i}: kappa_prof={kappa_prof[i]:.6g}, kappa_rot={kappa_rot[i]:.6g}",
            node=i,
            nodes=nodes,
        )

    kappa = np.empty((nodes.shape[0], n))
    kappa[:, 0] = kappa_prof
    kappa[:, 1:] = kappa_rot[:, None]
    H = kappa_prof + (n - 1) * kappa_rot
    Fval = F.value(kappa)
    f = Fval**p
    ds_f = _stencil(_pad_even(f), _D1) / du / speed
    ds_f[[0, -1]] = 0.0

    s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * du)])
    return GeometryFields(
        s=s,
        w=w,
        nu=nu,
        tangent=T,
        speed=speed,
        kappa_prof=kappa_prof,
        kappa_rot=kappa_rot,
        kappa=kappa,
        H=H,
        Fval=Fval,
        f=f,
        ds_f=ds_f,
        binv_grad=ds_f**2 / kappa_prof,
        p=p,
        du=du,
    )


# ---------------------------------------------------------------------------
# initial data

def profile_from_polar(radius_fn, space: SpaceForm, N: int, center_x: float = 0.0) -> ProfileCurve:
    """Star-shaped profile ``rho(theta)``, theta in [0, pi], about the centre.

    For ``K = 0`` rho is the Euclidean distance from ``(center_x, 0)``; for
    ``K > 0`` it is the geodesic distance from the pole ``(0, 0, R)``.
    """
    theta = np.linspace(0.0, math.pi, N + 1)
    rho = np.asarray(radius_fn(theta), dtype=float) * np.ones_like(theta)
    orbit = OrbitSpace(space.K)
    if space.K == 0:
        coords = np.stack([center_x + rho * np.cos(theta), rho * np.sin(theta)], axis=-1)
    else:
        coords = np.stack([rho / orbit.radius, theta], axis=-1)
    nodes = orbit.from_coords(coords)
    nodes[[0, -1], WARP] = 0.0
    return ProfileCurve(nodes, space)


def geodesic_sphere_profile(r: float, K: float, n: int, N: int) -> ProfileCurve:
    """Meridian of the geodesic sphere of radius ``r`` (exact data)."""
    space = SpaceForm(n + 1, K)
    if K > 0 and not 0 < r * math.sqrt(K) < math.pi / 2:
        raise ValueError(f"strictly convex geodesic spheres need 0 < r < pi/(2 sqrt K), got r={r}")
    if K == 0 and not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    return profile_from_polar(lambda th: np.full_like(th, r), space, N)


def perturbed_sphere_profile(r: float, amplitude: float, mode: int, K: float, n: int, N: int) -> ProfileCurve:
    """Sphere with radius ``r + amplitude * cos(mode * theta)``."""
    space = SpaceForm(n + 1, K)
    return profile_from_polar(lambda th: r + amplitude * np.cos(mode * th), space, N)


def random_sphere_profile(r, amplitude, K, n, N, seed=0, max_mode=4) -> ProfileCurve:
    """Sphere with a seeded random smooth perturbation of total size ``amplitude``."""
    rng = np.random.default_rng(seed)
    modes = np.arange(2, max_mode + 1)
    coef = rng.normal(size=modes.size)
    coef *= amplitude / np.sum(np.abs(coef))
    space = SpaceForm(n + 1, K)

    def rho(th):
        return r + np.sum(coef[:, None] * np.cos(np.outer(modes, th)), axis=0)

    return profile_from_polar(rho, space, N)


def spheroid_profile(axis_semi: float, equator_semi: float, n: int, N: int) -> ProfileCurve:
    """Euclidean spheroid generated by an ellipse (semi-axis along the axis first)."""
    t = np.linspace(0.0, math.pi, N + 1)
    nodes = np.stack([axis_semi * np.cos(t), equator_semi * np.sin(t), np.zeros_like(t)], axis=-1)
    nodes[[0, -1], WARP] = 0.0
    return ProfileCurve(nodes, SpaceForm(n + 1, 0.0))


# ---------------------------------------------------------------------------
# independent curvature oracle

def _embed(nodes, K, R, omega):
    """Embed orbit nodes with orbit direction ``omega`` into flat space."""
    w = nodes[..., WARP][..., None] * omega
    if K == 0:
        return np.concatenate([nodes[..., :1], w], axis=-1)
    return np.concatenate([nodes[..., 2:3], nodes[..., :1], w], axis=-1)


def _omega(alpha):
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    v = np.concatenate([[1.0], alpha])
    return v / np.linalg.norm(v)


def fd_embedding_oracle(profile: ProfileCurve, dalpha: float | None = None):
    """Principal curvatures from the embedded hypersurface (test oracle).

    The meridian is embedded into R^{n+1} (flat) or R^{n+2} (sphere) and
    swept by the orbit sphere in a gnomonic chart. First and second
    fundamental forms come from 4th-order finite differences on a
    meridian-times-orbit stencil; principal curvatures are eigenvalues
    of the Weingarten matrix. Meridian derivatives use 6th-order stencils
    so the oracle shares no stencil with :func:`compute_fields`.
    Returns ``(kappa_prof, kappa_rot)``.
    """
    nodes = profile.nodes
    n = profile.n
    K = profile.space.K
    R = profile.space.radius
    du = _param_step(profile)
    da = du if dalpha is None else dalpha
    m = n - 1
    padded = _pad_nodes(nodes, width=3)
    offsets = np.arange(-2, 3)

    # X on the grid (u offset) x (alpha offsets along each orbit coordinate pair)
    base = _embed(padded, K, R, _omega(np.zeros(m)))

    def sheet(alpha):
        # offsets from the alpha=0 sheet keep the stencils free of cancellation
        return _embed(padded, K, R, _omega(alpha)) - base

    def u_first(X):
        return _stencil(X, _D1_6, width=3) / du

    def u_second(X):
        return _stencil(X, _D2_6, width=3) / du**2

    def interior(X):
        return X[3:-3]

    X0 = base
    tangents = [u_first(X0)]
    second = {}
    second[(0, 0)] = u_second(X0)
    for i in range(m):
        e = np.eye(m)[i]
        along = [sheet(k * da * e) for k in offsets]
        tangents.append(sum(c * interior(X) for c, X in zip(_D1, along)) / da)
        second[(i + 1, i + 1)] = sum(c * interior(X) for c, X in zip(_D2, along)) / da**2
        second[(0, i + 1)] = sum(c * u_first(X) for c, X in zip(_D1, along)) / da
        for j in range(i + 1, m):
            ej = np.eye(m)[j]
            acc = 0.0
            for a, ca in zip(offsets, _D1):
                for b, cb in zip(offsets, _D1):
                    if ca and cb:
                        acc = acc + ca * cb * interior(sheet(a * da * e + b * da * ej))
            second[(i + 1, j + 1)] = acc / da**2

    E = np.stack(tangents, axis=1)  # (M, n, D)
    pos = interior(X0)
    constraints = E.copy()
    if m:
        # orbit tangents vanish on the axis; use the orbit directions there
        axis_rows = np.flatnonzero(nodes[:, WARP] == 0)
        D = E.shape[2]
        constraints[axis_rows, 1:, :] = 0.0
        constraints[np.ix_(axis_rows, np.arange(1, m + 1), np.arange(D - m, D))] = np.eye(m)
    if K > 0:
        constraints = np.concatenate([constraints, pos[:, None, :] / R], axis=1)
    _, _, vh = np.linalg.svd(constraints)
    nu = vh[:, -1, :]
    c3 = nodes.mean(axis=0)
    c3[WARP] = 0.0
    centre = _embed(c3, K, R, _omega(np.zeros(m)))
    if K == 0:
        outward = np.sum(nu * (pos - centre), axis=1) > 0
    else:
        centre *= R / np.linalg.norm(centre)
        outward = np.sum(nu * centre, axis=1) < 0
    nu = np.where(outward[:, None], nu, -nu)

    g = np.einsum("mid,mjd->mij", E, E)
    h = np.zeros_like(g)
    for (i, j), Xij in second.items():
        h[:, i, j] = h[:, j, i] = -np.sum(Xij * nu, axis=1)

    w = nodes[:, WARP]
    kp = np.empty(nodes.shape[0])
    kr = np.empty(nodes.shape[0])
    kp[[0, -1]] = h[[0, -1], 0, 0] / g[[0, -1], 0, 0]
    kr[[0, -1]] = kp[[0, -1]]
    inner = slice(1, -1) if n > 1 else slice(0, 0)
    if n > 1:
        Wm = np.linalg.solve(g[inner], h[inner])
        vals, vecs = np.linalg.eig(Wm)
        vals = vals.real
        # eigenvector with the largest meridian component is the profile direction
        idx = np.argmax(np.abs(vecs[:, 0, :]), axis=1)
        rows = np.arange(vals.shape[0])
        kp[inner] = vals[rows, idx]
        mask = np.ones_like(vals, dtype=bool)
        mask[rows, idx] = False
        kr[inner] = vals[mask].reshape(vals.shape[0], m).mean(axis=1)
    else:
        kp[1:-1] = h[1:-1, 0, 0] / g[1:-1, 0, 0]
        kr[1:-1] = np.nan
    return kp, kr


# ---------------------------------------------------------------------------
# Laplacian

def laplacian_scalar(profile: ProfileCurve, psi, w_min: float = 0.0):
    """Laplace-Beltrami operator of a rotationally symmetric scalar.

    ``Delta psi = psi_ss + (n - 1) (d_s log w) psi_s`` with 2nd-order centred
    differences and even reflection ghosts; at the poles the limit value
    ``n psi_ss`` is used.
    """
    psi = np.asarray(psi, dtype=float)
    nodes = profile.nodes
    n = profile.n
    du = _param_step(profile)
    padded = _pad_nodes(nodes, width=1)
    Pu = (padded[2:] - padded[:-2]) / (2 * du)
    Puu = (padded[2:] - 2 * padded[1:-1] + padded[:-2]) / du**2
    up = profile.orbit.up(nodes)
    if profile.space.K > 0:
        Pu -= np.sum(Pu * up, axis=1, keepdims=True) * up
    su = np.linalg.norm(Pu, axis=1)
    suu = np.sum(Pu * Puu, axis=1) / su
    T = Pu / su[:, None]

    q = _pad_even(psi, width=1)
    psi_u = (q[2:] - q[:-2]) / (2 * du)
    psi_uu = (q[2:] - 2 * q[1:-1] + q[:-2]) / du**2
    psi_s = psi_u / su
    psi_ss = (psi_uu - psi_u * suu / su) / su**2

    w = nodes[:, WARP]
    out = np.empty_like(psi)
    if w_min > 0 and np.any(w[1:-1] < w_min):
        raise ResolutionError("interior node too close to the axis")
    out[1:-1] = psi_ss[1:-1] + (n - 1) * T[1:-1, WARP] / w[1:-1] * psi_s[1:-1]
    out[[0, -1]] = n * psi_ss[[0, -1]]
    return out


# ---------------------------------------------------------------------------
# regridding

class _TrigCurve:
    """Trigonometric interpolant of the doubled (closed) meridian."""

    def __init__(self, profile: ProfileCurve):
        nodes = profile.nodes
        self.N = profile.N
        self.M = 2 * self.N
        doubled = np.concatenate([nodes, _reflect(nodes[-2:0:-1])], axis=0)
        self.coef = np.fft.fft(doubled, axis=0)
        self.k = np.fft.fftfreq(self.M, 1.0 / self.M)
        self.nyq = self.M // 2
        dcoef = 1j * self.k[:, None] * self.coef
        dcoef[self.nyq] = 0.0
        deriv = np.fft.ifft(dcoef, axis=0).real
        if profile.space.K > 0:
            up = doubled / profile.space.radius
            deriv -= np.sum(deriv * up, axis=1, keepdims=True) * up
        g = np.linalg.norm(deriv, axis=1)
        self.gcoef = np.fft.fft(g) / self.M
        self.gcoef[self.nyq] = 0.0
        self.length = 2 * math.pi * self.gcoef[0].real

    def _basis(self, u):
        return np.exp(1j * np.outer(u, self.k))

    def position(self, u):
        E = self._basis(u)
        c = self.coef.copy()
        nyq = c[self.nyq].real
        c[self.nyq] = 0.0
        out = (E @ c).real + np.outer(np.cos(self.nyq * u), nyq)
        return out / self.M

    def speed(self, u):
        return (self._basis(u) @ self.gcoef).real

    def arclength(self, u):
        u = np.asarray(u, dtype=float)
        k = self.k.copy()
        k[0] = 1.0
        integ = self.gcoef / (1j * k)
        integ[0] = 0.0
        E = self._basis(u)
        return self.gcoef[0].real * u + ((E - 1.0) @ integ).real


def arclength(profile: ProfileCurve) -> float:
    """Spectrally accurate length of the meridian."""
    return _TrigCurve(profile).length / 2


def regrid(profile: ProfileCurve, max_newton: int = 30) -> ProfileCurve:
    """Resample the meridian to uniform arclength.

    The closed doubled meridian is represented by its trigonometric
    interpolant; new nodes sit at uniform arclength of that interpolant.
    The inverse arclength map is seeded by monotone cubic interpolation
    and refined by Newton iteration.
    """
    curve = _TrigCurve(profile)
    N = profile.N
    u_nodes = np.linspace(0.0, math.pi, N + 1)
    s_nodes = curve.arclength(u_nodes)
    s_nodes[0] = 0.0
    half = curve.length / 2
    targets = np.linspace(0.0, half, N + 1)
    u = PchipInterpolator(s_nodes, u_nodes)(targets)
    for _ in range(max_newton):
        step = (curve.arclength(u) - targets) / curve.speed(u)
        step[[0, -1]] = 0.0
        u -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    u[0], u[-1] = 0.0, math.pi
    nodes = curve.position(u)
    nodes[[0, -1], WARP] = 0.0
    return profile.with_nodes(nodes)
