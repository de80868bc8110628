"""Time integration of the normal flow ``dx/dt = -F^p nu``.

Profiles move by pure normal motion with Lagrangian nodes (classical RK4,
fields recomputed at every stage).  Geodesic spheres reduce to the ODE
``dr/dt = -(n k(r))^p`` with ``k(r) = sqrt(K) cot(sqrt(K) r)`` (or ``1/r``
when flat), which :func:`sphere_ode` integrates independently.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp

from .curvfunc import CurvatureFunction
from .exceptions import ConvexityLost, StepRejected
from .geometry import GeometryFields, ProfileCurve, compute_fields, regrid

log = logging.getLogger(__name__)

MAX_HALVINGS = 10
KAPPA_JUMP = 0.2


@dataclass
class FlowConfig:
    """Time-stepping parameters.

    Exactly one of ``dt`` (fixed step) and ``cfl`` (parabolic CFL factor)
    is used; ``dt`` wins when both are given.  ``window`` is the number of
    steps between regrid opportunities; Harnack measurements are taken in
    the middle of each window.  ``regrid_period`` of 0 disables regridding.
    """

    p: float
    F: str | CurvatureFunction = "mean"
    dt: Optional[float] = None
    cfl: Optional[float] = 0.25
    t_end: float = 0.0
    regrid_period: int = 0
    window: int = 10
    snapshot_stride: int = 0
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.dt is None and self.cfl is None:
            raise ValueError("need a fixed dt or a CFL factor")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.dt is None and not 0 < self.cfl <= 0.5:
            raise ValueError(f"CFL factor must lie in (0, 0.5], got {self.cfl}")
        if self.window < 2:
            raise ValueError("window must be at least 2 steps")
        if self.regrid_period and self.regrid_period % self.window:
            raise ValueError("regrid_period must be a multiple of window")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")

    def curvature_function(self, n: int) -> CurvatureFunction:
        if isinstance(self.F, CurvatureFunction):
            return self.F
        return CurvatureFunction.from_name(self.F, n)


@dataclass
class Snapshot:
    t: float
    step: int
    profile: ProfileCurve
    fields: GeometryFields
    regrid_id: int = 0


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    final: Optional[Snapshot] = None
    steps: int = 0
    regrids: int = 0
    measurements: int = 0

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])


# ---------------------------------------------------------------------------
# stepping

def cfl_timestep(fields: GeometryFields, F: CurvatureFunction, p: float, cfl: float, h: float) -> float:
    """``cfl * h^2 / max_node(p F^(p-1) max_i F^i)``."""
    diffusivity = p * fields.Fval ** (p - 1) * np.max(F.grad(fields.kappa), axis=-1)
    return cfl * h**2 / float(np.max(diffusivity))


def _velocity(nodes, space, F, p):
    fields = compute_fields(ProfileCurve(nodes, space), F, p)
    return -fields.f[:, None] * fields.nu, fields


def rk4_step(profile: ProfileCurve, F: CurvatureFunction, p: float, dt: float,
             fields: Optional[GeometryFields] = None) -> ProfileCurve:
    """One classical RK4 step of the normal flow, without step control."""
    if dt == 0:
        return profile
    P = profile.nodes
    if fields is None:
        fields = compute_fields(profile, F, p)
    k1 = -fields.f[:, None] * fields.nu
    k2, _ = _velocity(P + 0.5 * dt * k1, profile.space, F, p)
    k3, _ = _velocity(P + 0.5 * dt * k2, profile.space, F, p)
    k4, _ = _velocity(P + dt * k3, profile.space, F, p)
    return profile.with_nodes(P + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


def _kappa_jump(old: GeometryFields, new: GeometryFields) -> float:
    return float(np.max(np.abs(new.kappa - old.kappa) / old.kappa))


def step_normal(profile: ProfileCurve, F: CurvatureFunction, p: float, dt: float,
                fields: Optional[GeometryFields] = None, _depth: int = 0):
    """Advance by ``dt``; rejected steps are retried as two half steps.

    Returns ``(profile, fields)`` at the new time.
    """
    if fields is None:
        fields = compute_fields(profile, F, p)
    if dt == 0:
        return profile, fields
    try:
        new = rk4_step(profile, F, p, dt, fields)
        new_fields = compute_fields(new, F, p)
        ok = _kappa_jump(fields, new_fields) <= KAPPA_JUMP
    except ConvexityLost:
        if _depth >= MAX_HALVINGS:
            raise
        ok = False
    if ok:
        return new, new_fields
    if _depth >= MAX_HALVINGS:
        raise StepRejected(f"curvature still jumps by more than {KAPPA_JUMP:.0%} after {MAX_HALVINGS} halvings")
    log.debug("step of %.3g rejected, halving", dt)
    mid, mid_fields = step_normal(profile, F, p, dt / 2, fields, _depth + 1)
    return step_normal(mid, F, p, dt / 2, mid_fields, _depth + 1)


def _needs_regrid(profile: ProfileCurve) -> bool:
    sp = profile.spacing()
    h = sp.mean()
    return bool(sp.min() < h / 2 or sp.max() > 2 * h)


def evolve(profile: ProfileCurve, config: FlowConfig, monitors: Sequence = (),
           on_step: Optional[Callable[[Snapshot], None]] = None) -> Trajectory:
    """Run the flow to ``config.t_end``.

    Monitors may implement any of ``step(snapshot)`` (every accepted
    snapshot, including the initial one), ``regridded(snapshot)`` and
    ``observe(prev, now, next)``; the latter receives three consecutive
    Lagrangian snapshots (no regrid in between) at the middle of every
    window.  ``on_step`` is called with every accepted snapshot.

    Raises ConvexityLost (with ``.trajectory`` attached) if the profile
    stops being strictly convex.
    """
    F = config.curvature_function(profile.n)
    p = config.p
    fields = compute_fields(profile, F, p)
    now = Snapshot(0.0, 0, profile, fields, 0)
    traj = Trajectory(snapshots=[now])
    history = [now]
    regrid_id = 0
    t = 0.0
    step = 0
    dt = config.dt
    W = config.window
    steppers = [m.step for m in monitors if hasattr(m, "step")]
    observers = [m.observe for m in monitors if hasattr(m, "observe")]
    if on_step:
        steppers.append(on_step)
    for cb in steppers:
        cb(now)

    while t < config.t_end * (1 - 1e-14) and step < config.max_steps:
        if step % W == 0:
            if step and config.regrid_period and (step % config.regrid_period == 0 or _needs_regrid(profile)):
                profile = regrid(profile)
                fields = compute_fields(profile, F, p)
                regrid_id += 1
                traj.regrids += 1
                history = [Snapshot(t, step, profile, fields, regrid_id)]
                for m in monitors:
                    if hasattr(m, "regridded"):
                        m.regridded(history[0])
            if config.dt is None:
                dt = cfl_timestep(fields, F, p, config.cfl, float(profile.spacing().min()))
            elif step == 0 and dt > cfl_timestep(fields, F, p, 0.5, float(profile.spacing().min())):
                log.warning("fixed dt=%.3g exceeds the explicit stability limit; expect blow-up", dt)
        dt_step = min(dt, config.t_end - t)
        try:
            profile, fields = step_normal(profile, F, p, dt_step, fields)
        except ConvexityLost as exc:
            exc.t = t
            exc.nodes = profile.nodes
            exc.trajectory = traj
            raise
        t += dt_step
        step += 1
        now = Snapshot(t, step, profile, fields, regrid_id)
        history = (history + [now])[-3:]
        for cb in steppers:
            cb(now)
        if config.snapshot_stride and step % config.snapshot_stride == 0:
            traj.snapshots.append(now)
        if len(history) == 3 and history[1].step % W == W // 2 and history[0].regrid_id == regrid_id:
            traj.measurements += 1
            for obs in observers:
                obs(*history)

    traj.steps = step
    traj.final = now
    if traj.snapshots[-1] is not now:
        traj.snapshots.append(now)
    return traj


# ---------------------------------------------------------------------------
# geodesic spheres

def sphere_curvature(r, K):
    """Principal curvature of the geodesic sphere of radius r."""
    r = np.asarray(r, dtype=float)
    if K == 0:
        return 1.0 / r
    sk = math.sqrt(K)
    return sk / np.tan(sk * r)


def sphere_radius(profile: ProfileCurve):
    """Distance of each node from the centre (origin, or the pole (0,0,R))."""
    P = profile.nodes
    if profile.space.K == 0:
        return np.linalg.norm(P[:, :2], axis=1)
    R = profile.space.radius
    return R * np.arccos(np.clip(P[:, 2] / R, -1.0, 1.0))


def mcf_sphere_radius(r0, t, K, n):
    """Closed-form radius of a geodesic sphere under mean curvature flow."""
    t = np.asarray(t, dtype=float)
    if K == 0:
        return np.sqrt(r0**2 - 2 * n * t)
    sk = math.sqrt(K)
    return np.arccos(np.cos(sk * r0) * np.exp(n * K * t)) / sk


@dataclass
class SphereSolution:
    t: np.ndarray
    r: np.ndarray
    p: float
    n: int
    K: float
    direction: str
    exit_time: Optional[float] = None
    exit_reason: Optional[str] = None
    sol: object = None

    def __call__(self, t):
        """Dense radius at time(s) t."""
        return np.asarray(self.sol(t))[0]


def _sphere_speed(r, p, K, n, F=None):
    k = sphere_curvature(max(r, 0.0), K) if r > 0 else math.inf
    k = max(float(k), 0.0)
    value = n * k if F is None else float(F.value(np.full(F.n, k))) if k > 0 else 0.0
    return value**p


def sphere_ode(r0: float, p: float, K: float, n: int, direction: str = "forward",
               t_span: float = math.inf, F: Optional[CurvatureFunction] = None,
               rtol: float = 1e-10, r_floor: Optional[float] = None, equator_gap: float = 1e-8,
               max_step: float = math.inf) -> SphereSolution:
    """Integrate the radius ODE of a shrinking geodesic sphere.

    Integration stops at ``|t| = t_span`` or when the radius leaves
    ``(r_floor, equator - equator_gap)``; the exit is reported in
    ``exit_time`` / ``exit_reason`` ("collapse", "equator" or
    "solver_failed").  The default ``r_floor`` keeps the remaining
    lifetime, about ``r_floor^(1+p)``, near 1e-8 so it stays resolvable in
    double precision.
    """
    if r_floor is None:
        r_floor = default_r_floor(r0, p)
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    equator = math.inf if K == 0 else math.pi / (2 * math.sqrt(K))
    if not 0 < r0 < equator:
        raise ValueError(f"r0 must lie in (0, {equator}), got {r0}")
    sign = 1.0 if direction == "forward" else -1.0
    # backward runs approach the equator; integrate the gap to it instead of r
    # so that the relative tolerance still resolves tiny gaps
    use_gap = direction == "backward" and K > 0
    to_r = (lambda y: equator - y) if use_gap else (lambda y: y)

    def rhs(t, y):
        v = _sphere_speed(to_r(y[0]), p, K, n, F)
        return [v if use_gap else -v]

    def collapse(t, y):
        return to_r(y[0]) - r_floor
    collapse.terminal = True

    def reach_equator(t, y):
        return (equator - equator_gap) - to_r(y[0])
    reach_equator.terminal = True

    events = [collapse] if K == 0 else [collapse, reach_equator]
    t_stop = sign * (t_span if math.isfinite(t_span) else 1e12)
    y0 = equator - r0 if use_gap else r0
    res = solve_ivp(rhs, (0.0, t_stop), [y0], method="DOP853", rtol=rtol, atol=rtol * 1e-3 * min(y0, 1.0),
                    events=events, dense_output=True, max_step=max_step)
    dense = res.sol
    sol = SphereSolution(res.t, to_r(res.y[0]), p, n, K, direction,
                         sol=(lambda t: to_r(dense(t))) if use_gap else dense)
    for name, te in zip(("collapse", "equator"), res.t_events):
        if len(te):
            sol.exit_time = float(te[0])
            sol.exit_reason = name
    if res.status == -1:
        sol.exit_time = float(res.t[-1])
        sol.exit_reason = "solver_failed"
    return sol


def default_r_floor(r0: float, p: float) -> float:
    return r0 * 10.0 ** (-min(6.0, 8.0 / (1.0 + p)))


def _tail_to_centre(r_floor, p, K, n):
    return quad(lambda r: 1.0 / _sphere_speed(r, p, K, n), 0.0, r_floor, epsabs=0, epsrel=1e-12)[0]


def sphere_collapse_time(r0: float, p: float, K: float, n: int, **kw) -> float:
    """Forward lifetime of the geodesic sphere of radius r0."""
    kw.setdefault("r_floor", default_r_floor(r0, p))
    sol = sphere_ode(r0, p, K, n, "forward", **kw)
    if sol.exit_reason != "collapse":
        raise RuntimeError(f"sphere did not collapse ({sol.exit_reason})")
    return sol.exit_time + _tail_to_centre(kw["r_floor"], p, K, n)


def quasi_ancient_time(p: float, n: int, K: float = 1.0) -> float:
    """Equator-to-point lifetime ``n^-p K^-(1+p)/2 int_0^{pi/2} tan^p r dr``.

    The integrand blows up like ``(pi/2 - r)^-p`` at the equator; the
    algebraic weight of QUADPACK's QAWS rule absorbs it.
    """
    if not 0 < p < 1:
        raise ValueError(f"the equator-to-point time is finite only for 0 < p < 1, got p={p}")
    if not K > 0:
        raise ValueError("needs a spherical ambient (K > 0)")
    half = math.pi / 2

    def smooth_part(r):
        gap = half - r
        if gap <= 0:
            return 1.0
        return (math.sin(r) * gap / math.cos(r)) ** p if gap > 1e-8 else math.sin(r) ** p

    val, _ = quad(smooth_part, 0.0, half, weight="alg", wvar=(0.0, -p), epsabs=0, epsrel=1e-13)
    return val * n ** (-p) * K ** (-(1 + p) / 2)


def quasi_ancient_time_ode(p: float, n: int, r0: float = math.pi / 4, gap: float = 1e-8,
                           r_floor: float = 1e-6) -> float:
    """Same lifetime via the sphere ODE: backward to the equator plus forward to collapse.

    The two short end pieces are added from their leading-order expansions
    (``tan r ~ 1/gap`` near the equator, ``tan r ~ r`` near the centre).
    """
    if not 0 < p < 1:
        raise ValueError("finite equator-to-point time needs 0 < p < 1")
    back = sphere_ode(r0, p, 1.0, n, "backward", equator_gap=gap, r_floor=r_floor)
    if back.exit_reason != "equator":
        raise RuntimeError("backward sphere ODE did not reach the equator")
    fwd = sphere_ode(r0, p, 1.0, n, "forward", equator_gap=gap, r_floor=r_floor)
    if fwd.exit_reason != "collapse":
        raise RuntimeError("forward sphere ODE did not collapse")
    equator_tail = (gap ** (1 - p) / (1 - p) - p * gap ** (3 - p) / (3 * (3 - p))) / n**p
    centre_tail = (r_floor ** (1 + p) / (1 + p) + p * r_floor ** (3 + p) / (3 * (3 + p))) / n**p
    return -back.exit_time + equator_tail + fwd.exit_time + centre_tail
