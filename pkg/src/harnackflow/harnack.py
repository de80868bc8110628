"""Harnack diagnostics along a normal flow in a space form.

Everything here is evaluated from Lagrangian snapshot triples produced by
:func:`harnackflow.flow.evolve`.  The time derivative of ``f`` is a
material derivative along the normal motion, so the Harnack quadratic

    Q = (df/dt - b(grad f, grad f)) / f

is computed directly in the standard parametrization.  Quantities of the
Gauss-map-like reparametrization (where ``Q`` becomes ``d log f / dt``) are
rebuilt algebraically from the tangential field ``V = (d_s f / k_prof) d_s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .ambient import AmbientBounds, mainA_threshold
from .curvfunc import CurvatureFunction, pinching_deficit
from .exceptions import FloorViolation, WindowViolation
from .geometry import GeometryFields, laplacian_scalar

# Constant of every inequality tolerance, tol = C (h^2 + dt^2) scale.  Frozen
# at ten times the worst ratio |error of df/dt| / ((h^2 + dt^2) slack scale)
# seen on geodesic-sphere runs with 100 <= N <= 400 (about 1.7e-3; the
# coarsest grids, N = 50, reach 6.4e-3).  tests/test_harnack.py re-measures it.
TOL_C = 0.02

THEOREMS = ("thm11", "thm12i", "thm12ii", "master", "thm14", "floor", "evh")


def tolerance(h: float, dt: float, scale, tol_scale: float = 1.0, C: float = TOL_C):
    """``tol_scale * C * (h^2 + dt^2) * scale``."""
    return tol_scale * C * (h * h + dt * dt) * np.asarray(scale, dtype=float)


# ---------------------------------------------------------------------------
# time derivatives

@dataclass
class TimeDerivative:
    value: np.ndarray
    error: np.ndarray  # consistency gap between the one-sided quotients
    dt_prev: float
    dt_next: float

    @property
    def dt(self) -> float:
        return max(self.dt_prev, self.dt_next)


def material_dt(prev, now, nxt, key: str = "f") -> TimeDerivative:
    """Material time derivative of a node field from three Lagrangian snapshots.

    Uses the three-point quotient, which is the centred difference for
    uniform steps and stays second order when the last step was shortened.
    The error estimate is half the gap between the backward and forward
    one-sided quotients (first order), an upper scale for the centred error.
    """
    if not (prev.regrid_id == now.regrid_id == nxt.regrid_id):
        raise WindowViolation(f"regrid inside the measurement window around t={now.t:.6g}")
    a = now.t - prev.t
    b = nxt.t - now.t
    if not (a > 0 and b > 0):
        raise ValueError("snapshots must be strictly increasing in time")
    f0 = getattr(prev.fields, key)
    f1 = getattr(now.fields, key)
    f2 = getattr(nxt.fields, key)
    back = (f1 - f0) / a
    fwd = (f2 - f1) / b
    value = (b * back + a * fwd) / (a + b)
    return TimeDerivative(value, 0.5 * np.abs(fwd - back), a, b)


def material_dtf(prev, now, nxt) -> TimeDerivative:
    """``df/dt`` at the middle snapshot; see :func:`material_dt`."""
    return material_dt(prev, now, nxt, "f")


# ---------------------------------------------------------------------------
# algebraic diagnostics

def harnack_quadratic(dtf, fields: GeometryFields):
    dtf = getattr(dtf, "value", dtf)
    return (dtf - fields.binv_grad) / fields.f


def compute_S(fields: GeometryFields, F: CurvatureFunction, p: float, K: float):
    """``S = K p F^(p-1) sum_i F^i``."""
    return K * p * fields.Fval ** (p - 1) * np.sum(F.grad(fields.kappa), axis=-1)


def compute_R(fields: GeometryFields, F: CurvatureFunction, p: float, K: float):
    """Space-form reduction of the zero-order term of the Harnack evolution.

    ``(1-p) K |V|^2 + (2p/F) K (F (f^2 + |V|^2) - F^1 k_prof |V|^2)`` with
    ``|V| = |d_s f| / k_prof`` and ``F^1`` the derivative in the profile
    direction.
    """
    V2 = fields.V_norm2
    F1 = F.grad(fields.kappa)[:, 0]
    Fv = fields.Fval
    return (1 - p) * K * V2 + (2 * p / Fv) * K * (Fv * (fields.f**2 + V2) - F1 * fields.kappa_prof * V2)


def beta_roots(S, R, p: float):
    """Roots of ``(p+1)/p b^2 - 4/p S b + 2/p S^2 + R``.

    Array input gives ``(beta_minus, beta_plus)`` with NaN where the roots
    are complex.  Scalar input gives a tuple of floats, or None if complex.
    """
    S = np.asarray(S, dtype=float)
    R = np.asarray(R, dtype=float)
    disc = 0.5 * (1 - p) * S**2 - 0.25 * p * (p + 1) * R
    root = np.sqrt(np.where(disc >= 0, disc, np.nan))
    bm = 2.0 / (p + 1) * (S - root)
    bp = 2.0 / (p + 1) * (S + root)
    if bm.ndim == 0:
        return None if disc < 0 else (float(bm), float(bp))
    return bm, bp


def harnack_polynomial(beta, S, R, p: float):
    return (p + 1) / p * beta**2 - 4.0 / p * S * beta + 2.0 / p * S**2 + R


def beta_candidate(S, R, p: float):
    """Per-node ``min(2S/(p+1), beta_minus)``, the latter only where real."""
    bm, _ = beta_roots(np.atleast_1d(S), np.atleast_1d(R), p)
    cap = 2.0 * np.atleast_1d(S) / (p + 1)
    return np.where(np.isnan(bm), cap, np.minimum(cap, bm))


@dataclass
class Slack:
    value: np.ndarray
    scale: np.ndarray  # magnitude of the terms, for the tolerance
    in_force: np.ndarray  # boolean mask of nodes where the hypotheses hold
    reason: str = ""


def _is_mean(F: CurvatureFunction) -> bool:
    return F.kind == "mean" or (F.kind == "power_mean" and F.q == 1)


def hypotheses(theorem: str, fields: GeometryFields, F: CurvatureFunction, p: float, K: float,
               bounds: Optional[AmbientBounds] = None):
    """Mask of nodes where the selected estimate applies, with a reason if it never does."""
    N = fields.f.shape[0]
    none = np.zeros(N, bool)
    alln = np.ones(N, bool)
    n = F.n
    if theorem == "thm11":
        if not _is_mean(F):
            return none, "thm11 needs F = mean curvature"
        if not 0 < p < 1:
            return none, "thm11 requires 0<p<1"
        if n < 2:
            return none, "thm11 needs n >= 2"
        if K <= 0 and bounds is None:
            return none, "thm11 needs a positive lower sectional curvature bound"
        b = bounds if bounds is not None else AmbientBounds(c1=K, grad_rm_norm=0.0)
        if fields.H.min() < mainA_threshold(n, p, b):
            return none, "mean curvature below the Main-A threshold"
        return alln, ""
    if theorem == "thm12i":
        if K <= 0:
            return none, "thm12i needs a spherical ambient"
        if not p > 1:
            return none, "thm12i requires p>1"
        return pinching_deficit(F, fields.kappa, p) >= 0, ""
    if theorem == "thm12ii":
        if K <= 0:
            return none, "thm12ii needs a spherical ambient"
        if p != 1:
            return none, "thm12ii requires p=1"
        return alln, ""
    if theorem == "thm14":
        if not _is_mean(F) or p != 1:
            return none, "thm14 requires mean curvature flow"
        if n < 2:
            return none, "thm14 needs n >= 2"
        return alln, ""
    if theorem == "floor":
        if not 0 < p < 1:
            return none, "floor requires 0<p<1"
        return alln, ""
    if theorem == "evh":
        if not _is_mean(F) or p != 1:
            return none, "evh requires mean curvature flow"
        return alln, ""
    if theorem == "master":
        return alln, ""
    raise ValueError(f"unknown theorem id {theorem!r}")


def theorem_slacks(theorem: str, dtf, fields: GeometryFields, t: float, F: CurvatureFunction,
                   p: float, K: float, beta: Optional[float] = None,
                   bounds: Optional[AmbientBounds] = None) -> Slack:
    """Left-hand side of the selected Harnack inequality per node.

    ``thm11`` and ``thm12i`` share the form ``df/dt - b(grad f, grad f)
    + p/((p+1)t) f``; ``thm12ii`` is the p = 1 estimate with bonus term
    ``-F(0,...,0,1) F`` and ``1/(2t)``; ``master`` is ``Q - beta +
    p/((p+1)t)`` and needs ``beta``.
    """
    if not t > 0:
        raise ValueError("slacks need t > 0")
    dtf = getattr(dtf, "value", dtf)
    f = fields.f
    b = fields.binv_grad
    mask, reason = hypotheses(theorem, fields, F, p, K, bounds)
    if theorem in ("thm11", "thm12i"):
        c = p / ((p + 1) * t)
        return Slack(dtf - b + c * f, np.abs(dtf) + b + f / t, mask, reason)
    if theorem == "thm12ii":
        # with p = 1, f is F itself
        bonus = F.bonus_constant()
        return Slack(dtf - b - bonus * f + f / (2 * t), np.abs(dtf) + b + bonus * f + f / t, mask, reason)
    if theorem == "master":
        if beta is None:
            raise ValueError("the master estimate needs beta")
        Q = harnack_quadratic(dtf, fields)
        return Slack(Q - beta + p / ((p + 1) * t), np.abs(Q) + abs(beta) + 1.0 / t, mask, reason)
    raise ValueError(f"{theorem!r} is not a slack-type estimate")


def evh_residual(prev, now, nxt, K: float):
    """Residual of the mean-curvature evolution equation under MCF.

    ``dH/dt - Lap H - (|A|^2 + n K) H`` per node, with the second-order
    Laplacian, so the residual is O(h^2 + dt^2).
    """
    dH = material_dt(prev, now, nxt, "H").value
    fl = now.fields
    n = now.profile.n
    A2 = fl.kappa_prof**2 + (n - 1) * fl.kappa_rot**2
    return dH - laplacian_scalar(now.profile, fl.H) - (A2 + n * K) * fl.H


# ---------------------------------------------------------------------------
# per-measurement record

@dataclass
class HarnackDiagnostics:
    t: float
    step: int
    Q: np.ndarray
    S: np.ndarray
    Rcal: np.ndarray
    beta_minus: np.ndarray
    beta_plus: np.ndarray
    V_norm2: np.ndarray
    xdot_norm2: np.ndarray
    pinching_deficit: np.ndarray
    slacks: dict = field(default_factory=dict)
    tol_h2dt2: float = 0.0
    dtf_error: Optional[np.ndarray] = None

    @property
    def u(self):
        # Q is u in the reparametrized frame
        return self.Q


def diagnose(prev, now, nxt, F: CurvatureFunction, p: float, K: float, theorems=(),
             bounds: Optional[AmbientBounds] = None) -> HarnackDiagnostics:
    fl = now.fields
    dtf = material_dtf(prev, now, nxt)
    S = compute_S(fl, F, p, K)
    R = compute_R(fl, F, p, K)
    bm, bp = beta_roots(S, R, p)
    diag = HarnackDiagnostics(
        t=now.t, step=now.step, Q=harnack_quadratic(dtf, fl), S=S, Rcal=R,
        beta_minus=bm, beta_plus=bp, V_norm2=fl.V_norm2, xdot_norm2=fl.f**2 + fl.V_norm2,
        pinching_deficit=pinching_deficit(F, fl.kappa, p),
        tol_h2dt2=now.profile.h**2 + dtf.dt**2, dtf_error=dtf.error,
    )
    for th in theorems:
        if th in ("thm11", "thm12i", "thm12ii"):
            diag.slacks[th] = theorem_slacks(th, dtf, fl, now.t, F, p, K, bounds=bounds)
    return diag


# ---------------------------------------------------------------------------
# monitors

@dataclass
class CheckResult:
    name: str
    passed: bool
    min_slack: float = math.nan
    worst_excess: float = math.nan  # most negative slack + tol, <0 means failure
    coverage: float = math.nan
    detail: str = ""


class HarnackMonitor:
    """Collects Harnack diagnostics at every measurement triple.

    Slack checks are evaluated as they come in; the master estimate needs
    the run-global beta and is evaluated in :meth:`finalize`.
    """

    def __init__(self, F: CurvatureFunction, p: float, K: float, theorems=("master",),
                 tol_scale: float = 1.0, bounds: Optional[AmbientBounds] = None, keep_diagnostics=False):
        self.F, self.p, self.K = F, p, K
        self.theorems = tuple(theorems)
        self.tol_scale = tol_scale
        self.bounds = bounds
        self.keep = keep_diagnostics
        self.diagnostics = []
        self.rows = []
        self._master = []  # (t, Q, h2dt2)
        self._beta = math.inf
        self._acc = {th: dict(min_slack=math.inf, worst=math.inf, covered=0, total=0, reason="")
                     for th in self.theorems if th in ("thm11", "thm12i", "thm12ii")}
        self.min_S = math.inf
        self.min_R = math.inf
        self.min_R_bound_slack = math.inf
        self.max_root_residual = 0.0

    def observe(self, prev, now, nxt):
        d = diagnose(prev, now, nxt, self.F, self.p, self.K, self.theorems, self.bounds)
        if self.keep:
            self.diagnostics.append(d)
        fl = now.fields
        row = dict(t=d.t, min_S=float(d.S.min()), min_R=float(d.Rcal.min()),
                   min_pinching=float(d.pinching_deficit.min()), min_kappa1=float(fl.kappa.min()),
                   max_tildeH=float(fl.tilde_H.max()), min_H=float(fl.H.min()))
        self.min_S = min(self.min_S, row["min_S"])
        self.min_R = min(self.min_R, row["min_R"])
        if 0 < self.p <= 1:
            gap = d.Rcal - min(1 - self.p, 2 * self.p) * self.K * d.xdot_norm2
            self.min_R_bound_slack = min(self.min_R_bound_slack, float(gap.min()))
        for th, sl in d.slacks.items():
            acc = self._acc[th]
            tol = tolerance(1.0, 0.0, sl.scale, self.tol_scale) * d.tol_h2dt2
            acc["total"] += sl.value.size
            acc["covered"] += int(sl.in_force.sum())
            acc["reason"] = acc["reason"] or sl.reason
            if sl.in_force.any():
                acc["min_slack"] = min(acc["min_slack"], float(sl.value[sl.in_force].min()))
                acc["worst"] = min(acc["worst"], float((sl.value + tol)[sl.in_force].min()))
                row[f"min_slack_{th}"] = float(sl.value[sl.in_force].min())
            else:
                row[f"min_slack_{th}"] = math.nan
            row[f"hyp_{th}"] = float(sl.in_force.mean())
        if "master" in self.theorems:
            self._beta = min(self._beta, float(beta_candidate(d.S, d.Rcal, self.p).min()))
            self._master.append((d.t, d.Q, d.tol_h2dt2))
            for b in (d.beta_minus, d.beta_plus):
                ok = ~np.isnan(b)
                if ok.any():
                    r = np.abs(harnack_polynomial(b[ok], d.S[ok], d.Rcal[ok], self.p))
                    self.max_root_residual = max(self.max_root_residual, float(r.max()))
        self.rows.append(row)

    @property
    def beta(self) -> float:
        return self._beta

    def finalize(self) -> list:
        results = []
        for th, acc in self._acc.items():
            cov = acc["covered"] / acc["total"] if acc["total"] else math.nan
            if acc["covered"] == 0:
                results.append(CheckResult(th, acc["total"] == 0, coverage=cov,
                                           detail=acc["reason"] or "no measurements"))
                continue
            results.append(CheckResult(th, acc["worst"] >= 0, acc["min_slack"], acc["worst"], cov))
        if "master" in self.theorems:
            beta = self._beta
            worst = math.inf
            min_slack = math.inf
            for row, (t, Q, h2) in zip(self.rows, self._master):
                slack = Q - beta + self.p / ((self.p + 1) * t)
                tol = tolerance(1.0, 0.0, np.abs(Q) + abs(beta) + 1.0 / t, self.tol_scale) * h2
                row["min_slack_master"] = float(slack.min())
                min_slack = min(min_slack, float(slack.min()))
                worst = min(worst, float((slack + tol).min()))
            if self._master:
                results.append(CheckResult("master", worst >= 0, min_slack, worst, 1.0, f"beta={beta:.17g}"))
            else:
                results.append(CheckResult("master", True, detail="no measurements"))
        return results


class ConvexityMonitor:
    """Per-step record of min k_1, max tilde H = sum 1/k_i and min H."""

    def __init__(self):
        self.t = []
        self.min_kappa1 = []
        self.max_tildeH = []
        self.min_H = []
        self.h2dt2 = []
        self._last_t = None

    def step(self, snap):
        fl = snap.fields
        dt = 0.0 if self._last_t is None else snap.t - self._last_t
        self._last_t = snap.t
        self.t.append(snap.t)
        self.min_kappa1.append(float(fl.kappa.min()))
        self.max_tildeH.append(float(fl.tilde_H.max()))
        self.min_H.append(float(fl.H.min()))
        self.h2dt2.append(snap.profile.h**2 + dt**2)

    def arrays(self):
        return {k: np.asarray(getattr(self, k)) for k in ("t", "min_kappa1", "max_tildeH", "min_H", "h2dt2")}


@dataclass
class FloorReport:
    c: float
    n: int
    floor: float
    min_kappa1: float
    worst_excess: float
    passed: bool
    t_worst: float
    max_tildeH_initial: float
    max_tildeH_final: float
    tildeH_increase: float


def convexity_floor(monitor: ConvexityMonitor, c: Optional[float] = None, n: Optional[int] = None,
                    tol_scale: float = 1.0, raise_on_fail: bool = True) -> FloorReport:
    """Check ``min k_1(t) >= c/n - tol`` over a recorded run.

    ``c`` defaults to the initial minimum principal curvature.  Also reports
    the largest increase of ``max tilde H`` over its running minimum.
    """
    a = monitor.arrays()
    if a["t"].size == 0:
        raise ValueError("empty convexity record")
    if n is None:
        raise ValueError("n is required")
    c = float(a["min_kappa1"][0]) if c is None else float(c)
    floor = c / n
    tol = tolerance(1.0, 0.0, c, tol_scale) * a["h2dt2"]
    excess = a["min_kappa1"] - floor + tol
    k = int(np.argmin(excess))
    tH = a["max_tildeH"]
    rep = FloorReport(c, n, floor, float(a["min_kappa1"].min()), float(excess[k]), bool(excess[k] >= 0),
                      float(a["t"][k]), float(tH[0]), float(tH[-1]),
                      float(np.max(tH - np.minimum.accumulate(tH))))
    if raise_on_fail and not rep.passed:
        raise FloorViolation(f"min k_1 = {a['min_kappa1'][k]:.17g} below c/n = {floor:.17g} at t = {a['t'][k]:.17g}", rep)
    return rep


class UTracker:
    """Series of u = Q along particles of the reparametrized flow.

    The reparametrized flow moves points by ``-f nu - V``; relative to the
    normal-flow nodes its particles drift along the profile with parameter
    velocity ``-(d_s f / k_prof) / |P_u|``, integrated here with Heun's
    method between consecutive snapshots.  ``u`` is sampled at the particles
    at each measurement by cubic interpolation of the nodal ``Q``.  A regrid
    starts a new epoch (new particles at the nodes).
    """

    def __init__(self, track: bool = True):
        self.track = track
        self.epochs = []
        self._pos = {}  # step -> particle parameters, last few steps only
        self._last = None
        self._grid = None

    def _velocity(self, snap, pos):
        fl = snap.fields
        v = -(fl.ds_f / fl.kappa_prof) / fl.speed
        return np.interp(pos, self._grid, v)

    def step(self, snap):
        if self._last is None or snap.regrid_id != self._last.regrid_id:
            self._grid = np.linspace(0.0, math.pi, snap.profile.N + 1)
            self._pos = {snap.step: self._grid.copy()}
            self.epochs.append(dict(t=[], u=[], u_nodes=[], h2dt2=[]))
        else:
            pos = self._pos[self._last.step]
            if self.track:
                dt = snap.t - self._last.t
                v0 = self._velocity(self._last, pos)
                v1 = self._velocity(snap, np.clip(pos + dt * v0, 0.0, math.pi))
                pos = np.clip(pos + 0.5 * dt * (v0 + v1), 0.0, math.pi)
            self._pos[snap.step] = pos
            self._pos.pop(snap.step - 3, None)
        self._last = snap

    def regridded(self, snap):
        self._last = None
        self.step(snap)

    def observe(self, prev, now, nxt):
        Q = harnack_quadratic(material_dtf(prev, now, nxt), now.fields)
        ep = self.epochs[-1]
        ep["t"].append(now.t)
        ep["u"].append(CubicSpline(self._grid, Q)(self._pos[now.step]))
        ep["u_nodes"].append(Q.copy())
        ep["h2dt2"].append(now.profile.h**2 + max(now.t - prev.t, nxt.t - now.t) ** 2)

    def check(self, tol_scale: float = 1.0, nodes: bool = False) -> "MonotoneReport":
        """Worst monotonicity report over all epochs."""
        reports = [monotone_u_check(ep["t"], ep["u_nodes" if nodes else "u"], ep["h2dt2"], tol_scale)
                   for ep in self.epochs if ep["t"]]
        if not reports:
            return MonotoneReport(0.0, -math.inf, 0, True, 0, 0)
        worst = max(reports, key=lambda r: r.worst_excess)
        return MonotoneReport(max(r.worst_violation for r in reports), worst.worst_excess,
                              sum(r.violations for r in reports), all(r.passed for r in reports),
                              worst.particles, sum(r.samples for r in reports),
                              max(r.min_drop for r in reports))


@dataclass
class MonotoneReport:
    worst_violation: float  # largest drop of u below its running maximum
    worst_excess: float  # largest drop beyond the tolerance (<= 0 means pass)
    violations: int
    passed: bool
    particles: int
    samples: int
    min_drop: float = 0.0  # largest drop of min_j u(t, j) below its running maximum


def monotone_u_check(times, u, h2dt2=None, tol_scale: float = 1.0) -> MonotoneReport:
    """Check that each column of ``u`` (time x particle) is non-decreasing.

    A sample violates if it lies below the running maximum of its column by
    more than ``C (h^2 + dt^2) |u|``.  The report also carries the drop of
    the spatial minimum, the weaker statement a maximum principle gives.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[0] == 0:
        return MonotoneReport(0.0, -math.inf, 0, True, u.shape[1] if u.ndim == 2 else 0, 0)
    umin = u.min(axis=1)
    min_drop = float(np.max(np.maximum.accumulate(umin) - umin))
    runmax = np.maximum.accumulate(u, axis=0)
    drop = runmax - u
    h2 = np.zeros(u.shape[0]) if h2dt2 is None else np.asarray(h2dt2, dtype=float)
    tol = tolerance(1.0, 0.0, np.abs(runmax), tol_scale) * h2[:, None]
    excess = drop - tol
    nviol = int(np.sum(excess > 0))
    return MonotoneReport(float(drop.max()), float(excess.max()), nviol, nviol == 0, u.shape[1], u.shape[0],
                          min_drop)


class EvhMonitor:
    """Residual of the mean-curvature evolution equation at every measurement.

    On exact spheres the residual must vanish within the tolerance.  When
    it does not, the Laplacian truncation error is measured instead: the
    residual is recomputed with the Laplacian taken on every other node and
    the observed order log2(coarse/fine) must lie in [1.7, 2.3].
    """

    ORDER_RANGE = (1.7, 2.3)

    def __init__(self, K: float, tol_scale: float = 1.0):
        self.K = K
        self.tol_scale = tol_scale
        self.t = []
        self.max_residual = []
        self.orders = []
        self.worst_excess = -math.inf
        self.failures = 0

    def observe(self, prev, now, nxt):
        res = evh_residual(prev, now, nxt, self.K)
        fl = now.fields
        n = now.profile.n
        dH = material_dt(prev, now, nxt, "H")
        reaction = (fl.kappa_prof**2 + (n - 1) * fl.kappa_rot**2 + n * self.K) * fl.H
        lap = dH.value - res - reaction
        scale = np.abs(dH.value) + np.abs(lap) + reaction
        tol = tolerance(now.profile.h, dH.dt, scale, self.tol_scale)
        excess = float(np.max(np.abs(res) - tol))
        self.t.append(now.t)
        self.max_residual.append(float(np.abs(res).max()))
        self.worst_excess = max(self.worst_excess, excess)
        if excess <= 0:
            return
        order = math.nan
        if now.profile.N % 2 == 0:
            coarse = now.profile.with_nodes(now.profile.nodes[::2])
            lap2 = laplacian_scalar(coarse, fl.H[::2])
            res2 = dH.value[::2] - lap2 - reaction[::2]
            order = math.log2(float(np.abs(res2).max()) / float(np.abs(res[::2]).max()))
        self.orders.append(order)
        lo, hi = self.ORDER_RANGE
        if not lo <= order <= hi:
            self.failures += 1

    @property
    def passed(self) -> bool:
        return self.failures == 0
