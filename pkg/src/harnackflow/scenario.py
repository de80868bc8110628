"""Scenario files, the scenario runner and its output files.

A scenario is a flat ``key = value`` text file; ``#`` starts a comment.
Running one writes three files into the output directory:

``series.csv``     one row per Harnack measurement
``snapshots.csv``  one row per node per stored snapshot
``summary.txt``    ``key=value`` lines, including the exit status

and returns an exit code: 0 ok, 1 monitor failure, 2 configuration error,
3 loss of convexity.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields
import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .ambient import SpaceForm, mainA_threshold
from .curvfunc import CurvatureFunction
from .exceptions import ConfigError, ConvexityLost, FloorViolation, HarnackFlowError, OutsideConeError
from .flow import FlowConfig, evolve, sphere_collapse_time, sphere_ode, sphere_radius
from .geometry import (
    ProfileCurve,
    compute_fields,
    geodesic_sphere_profile,
    perturbed_sphere_profile,
    random_sphere_profile,
    spheroid_profile,
)
from .harnack import ConvexityMonitor, EvhMonitor, HarnackMonitor, UTracker, convexity_floor

log = logging.getLogger(__name__)

EXIT_OK, EXIT_MONITOR, EXIT_CONFIG, EXIT_CONVEXITY = 0, 1, 2, 3
MONITORS = ("thm11", "thm12i", "thm12ii", "master", "thm14", "floor", "evh", "sphere", "min_h")
INITIAL = ("geodesic_sphere", "perturbed_sphere", "random_sphere", "spheroid", "profile_file")

SERIES_COLUMNS = ("t", "min_slack_thm11", "min_slack_thm12i", "min_slack_thm12ii", "min_slack_master",
                  "min_pinching", "min_S", "min_R", "min_kappa1", "max_tildeH", "min_H",
                  "hyp_thm11", "hyp_thm12i", "hyp_thm12ii")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


@dataclass
class Scenario:
    name: str
    K: float = 1.0
    n: int = 2
    F: str = "mean"
    p: float = 1.0
    initial: str = "geodesic_sphere"
    r: float = 1.0
    amplitude: float = 0.0
    mode: int = 2
    max_mode: int = 4
    axis: float = 1.0
    equator: float = 1.0
    profile_file: str = ""
    nodes: int = 100
    cfl: float = 0.25
    dt: Optional[float] = None
    t_end: Optional[float] = None
    t_end_fraction: Optional[float] = None
    window: int = 4
    regrid_period: int = 0
    snapshot_stride: int = 0
    monitors: tuple = ("master",)
    tol_scale: float = 1.0
    sphere_tol: float = 1e-6
    floor_c: Optional[float] = None
    seed: int = 0
    source: Optional[Path] = field(default=None, repr=False)

    @classmethod
    def from_mapping(cls, cfg: dict, source: Optional[Path] = None, **overrides) -> "Scenario":
        known = {f.name: f for f in dc_fields(cls)}
        kw = {}
        for key, value in cfg.items():
            if key not in known or key == "source":
                raise ConfigError(f"unknown key {key!r}")
            kw[key] = _convert(key, value, known[key].type)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        if "name" not in kw:
            kw["name"] = source.stem if source is not None else "scenario"
        scn = cls(source=source, **kw)
        scn.validate()
        return scn

    @classmethod
    def from_file(cls, path, **overrides) -> "Scenario":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        return cls.from_mapping(parse_config(text), source=path, **overrides)

    # -- validation -------------------------------------------------------

    def validate(self):
        if not (self.K >= 0 and math.isfinite(self.K)):
            raise ConfigError(f"K must be finite and >= 0, got {self.K}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not self.p > 0:
            raise ConfigError(f"p must be positive, got {self.p}")
        try:
            self.curvature_function()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.initial not in INITIAL:
            raise ConfigError(f"initial must be one of {', '.join(INITIAL)}")
        if self.nodes < 8:
            raise ConfigError("need at least 8 nodes")
        if (self.t_end is None) == (self.t_end_fraction is None):
            raise ConfigError("give exactly one of t_end and t_end_fraction")
        if self.t_end_fraction is not None and not 0 <= self.t_end_fraction < 1:
            raise ConfigError("t_end_fraction must lie in [0, 1)")
        for m in self.monitors:
            if m not in MONITORS:
                raise ConfigError(f"unknown monitor {m!r}")
        self._check_theorem_ranges()
        if self.initial == "spheroid" and self.K != 0:
            raise ConfigError("spheroid initial data is Euclidean only (K = 0)")
        if self.sphere_monitor and self.initial != "geodesic_sphere":
            raise ConfigError("the sphere monitor needs geodesic_sphere initial data")
        try:
            self.flow_config(1.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        # builds the initial data and checks strict convexity
        self.initial_profile()

    def _check_theorem_ranges(self):
        p, F, mean = self.p, self.F, self.F in ("mean", "power_mean:1")
        rules = {
            "thm11": (0 < p < 1, "thm11 requires 0<p<1"),
            "thm12i": (p > 1, "thm12i requires p>1"),
            "thm12ii": (p == 1, "thm12ii requires p=1"),
            "thm14": (p == 1 and mean, "thm14 requires F=mean and p=1"),
            "evh": (p == 1 and mean, "evh requires F=mean and p=1"),
            "floor": (0 < p < 1, "floor requires 0<p<1"),
            "min_h": (mean, "min_h requires F=mean"),
        }
        for m in self.monitors:
            ok, why = rules.get(m, (True, ""))
            if not ok:
                raise ConfigError(why)
        if "thm11" in self.monitors and (F not in ("mean", "power_mean:1") or self.K <= 0 or self.n < 2):
            raise ConfigError("thm11 requires F=mean, K>0 and n>=2")
        if {"thm12i", "thm12ii"} & set(self.monitors) and self.K <= 0:
            raise ConfigError("thm12 monitors require K>0")

    @property
    def sphere_monitor(self) -> bool:
        return "sphere" in self.monitors

    # -- construction -----------------------------------------------------

    def curvature_function(self) -> CurvatureFunction:
        return CurvatureFunction.from_name(self.F, self.n)

    def space(self) -> SpaceForm:
        return SpaceForm(self.n + 1, self.K)

    def initial_profile(self) -> ProfileCurve:
        try:
            prof = self._build_profile()
            compute_fields(prof, self.curvature_function(), self.p)
        except ConvexityLost as exc:
            raise ConfigError(f"initial data not strictly convex at node {exc.node}") from None
        except (ValueError, HarnackFlowError) as exc:
            raise ConfigError(f"bad initial data: {exc}") from None
        return prof

    def _build_profile(self) -> ProfileCurve:
        K, n, N = self.K, self.n, self.nodes
        if self.initial == "geodesic_sphere":
            return geodesic_sphere_profile(self.r, K, n, N)
        if self.initial == "perturbed_sphere":
            return perturbed_sphere_profile(self.r, self.amplitude, self.mode, K, n, N)
        if self.initial == "random_sphere":
            return random_sphere_profile(self.r, self.amplitude, K, n, N, seed=self.seed, max_mode=self.max_mode)
        if self.initial == "spheroid":
            return spheroid_profile(self.axis, self.equator, n, N)
        path = Path(self.profile_file)
        if not path.is_absolute() and self.source is not None:
            path = self.source.parent / path
        return load_profile(path, self.space())

    def lifetime(self) -> float:
        """Lifetime of the geodesic sphere with the base radius ``r``."""
        return sphere_collapse_time(self.r, self.p, self.K, self.n)

    def end_time(self) -> float:
        if self.t_end is not None:
            return self.t_end
        return self.t_end_fraction * self.lifetime()

    def flow_config(self, t_end: float) -> FlowConfig:
        return FlowConfig(p=self.p, F=self.F, dt=self.dt, cfl=self.cfl, t_end=t_end,
                          regrid_period=self.regrid_period, window=self.window,
                          snapshot_stride=self.snapshot_stride)


def _convert(key, value, annotation):
    ann = str(annotation)
    try:
        if key == "monitors":
            return tuple(m.strip() for m in value.split(",") if m.strip())
        if value.lower() in ("none", "") and "Optional" in ann:
            return None
        if "int" in ann and "float" not in ann:
            return int(value)
        if "float" in ann:
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None


def load_profile(path: Path, space: SpaceForm) -> ProfileCurve:
    """Read a two-column orbit-coordinate file (one header line)."""
    from .geometry import OrbitSpace

    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 2:
        raise ValueError("profile file needs two coordinate columns")
    nodes = OrbitSpace(space.K).from_coords(data[:, :2])
    return ProfileCurve(nodes, space)


# ---------------------------------------------------------------------------
# runner monitors

class SphereMonitor:
    """Distance of every node from the centre against the sphere ODE."""

    def __init__(self, scn: Scenario, t_end: float):
        self.sol = sphere_ode(scn.r, scn.p, scn.K, scn.n, "forward", t_span=max(t_end, 1e-12) * 1.01 + 1e-12,
                              rtol=1e-12)
        self.rows = []
        self.max_error = 0.0

    def step(self, snap):
        r = sphere_radius(snap.profile)
        ref = float(self.sol(snap.t)) if snap.t > 0 else float(self.sol.r[0])
        err = float(np.max(np.abs(r - ref)))
        self.max_error = max(self.max_error, err)
        self.rows.append((snap.t, float(r.min()), float(r.max()), ref, err))


class MinHMonitor:
    """Largest decrease of min H over its running maximum."""

    def __init__(self):
        self.best = -math.inf
        self.max_H = 0.0
        self.worst_drop = 0.0

    def step(self, snap):
        H = snap.fields.H
        mH = float(H.min())
        self.max_H = max(self.max_H, float(H.max()))
        self.best = max(self.best, mH)
        self.worst_drop = max(self.worst_drop, self.best - mH)

    def passed(self, tol_scale=1.0) -> bool:
        return self.worst_drop <= 1e-6 * tol_scale * self.max_H


# ---------------------------------------------------------------------------
# running

@dataclass
class RunResult:
    name: str
    exit_code: int
    reason: str
    detail: str = ""
    summary: dict = field(default_factory=dict)
    out_dir: Optional[Path] = None

    @property
    def reason_line(self) -> str:
        line = f"scenario={self.name} exit={self.exit_code} reason={self.reason}"
        if self.detail:
            line += f' detail="{self.detail}"'
        return line


def _write_csv(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_summary(path: Path, summary: dict):
    with open(path, "w") as fh:
        for k, v in summary.items():
            fh.write(f"{k}={_fmt(v)}\n")


def _snapshot_rows(snapshots):
    for snap in snapshots:
        fl = snap.fields
        c = snap.profile.coords()
        for i in range(c.shape[0]):
            yield (snap.t, i, fl.s[i], c[i, 0], c[i, 1], fl.kappa_prof[i], fl.kappa_rot[i],
                   fl.H[i], fl.Fval[i], fl.f[i])


def run_scenario(scn: Scenario, out_dir=None) -> RunResult:
    """Run one validated scenario and write its files."""
    out = Path(out_dir) if out_dir is not None else Path("out") / scn.name
    out.mkdir(parents=True, exist_ok=True)
    F = scn.curvature_function()
    profile = scn.initial_profile()
    t_end = scn.end_time()
    summary = {"scenario": scn.name, "K": scn.K, "n": scn.n, "F": F.name, "p": scn.p,
               "initial": scn.initial, "nodes": scn.nodes, "t_end": t_end, "seed": scn.seed,
               "tol_scale": scn.tol_scale, "monitors": ",".join(scn.monitors)}

    theorems = [m for m in scn.monitors if m in ("thm11", "thm12i", "thm12ii", "master")]
    hm = HarnackMonitor(F, scn.p, scn.K, theorems, tol_scale=scn.tol_scale)
    cm = ConvexityMonitor()
    monitors = [hm, cm]
    ut = evh = sph = mh = None
    if "thm14" in scn.monitors:
        ut = UTracker()
        monitors.append(ut)
    if "evh" in scn.monitors:
        evh = EvhMonitor(scn.K, scn.tol_scale)
        monitors.append(evh)
    if scn.sphere_monitor:
        sph = SphereMonitor(scn, t_end)
        monitors.append(sph)
    if "min_h" in scn.monitors:
        mh = MinHMonitor()
        monitors.append(mh)

    exit_code, reason, detail = EXIT_OK, "ok", ""
    traj = None
    try:
        traj = evolve(profile, scn.flow_config(t_end), monitors)
    except ConvexityLost as exc:
        exit_code, reason = EXIT_CONVEXITY, "convexity_lost"
        detail = f"node={exc.node} t={_fmt(exc.t)}"
        traj = getattr(exc, "trajectory", None)
    except (HarnackFlowError, OutsideConeError) as exc:
        exit_code, reason, detail = EXIT_MONITOR, "step_failed", f"{type(exc).__name__}: {exc}"

    results = hm.finalize()
    failed = []
    for res in results:
        summary[f"{res.name}_pass"] = res.passed
        summary[f"{res.name}_min_slack"] = res.min_slack
        summary[f"{res.name}_worst_excess"] = res.worst_excess
        summary[f"{res.name}_coverage"] = res.coverage
        if res.detail:
            summary[f"{res.name}_detail"] = res.detail
        if not res.passed:
            failed.append(res.name)
    if "master" in theorems:
        summary["master_beta"] = hm.beta
    if "thm11" in theorems:
        summary["mainA_threshold"] = mainA_threshold(scn.n, scn.p, scn.space().bounds())
        summary["mainA_note"] = "space form, grad_rm_norm=0, condition holds identically"
    summary["min_S"] = hm.min_S
    summary["min_R"] = hm.min_R
    if ut is not None:
        rep = ut.check(scn.tol_scale)
        summary.update(thm14_pass=rep.passed, thm14_worst_drop=rep.worst_violation,
                       thm14_worst_excess=rep.worst_excess, thm14_violations=rep.violations,
                       thm14_samples=rep.samples, thm14_min_u_drop=rep.min_drop)
        if not rep.passed:
            failed.append("thm14")
    if "floor" in scn.monitors and cm.t:
        try:
            rep = convexity_floor(cm, scn.floor_c, scn.n, scn.tol_scale)
        except FloorViolation as exc:
            rep = exc.report
            failed.append("floor")
        summary.update(floor_pass=rep.passed, floor_c=rep.c, floor_value=rep.floor,
                       floor_min_kappa1=rep.min_kappa1, floor_worst_excess=rep.worst_excess,
                       max_tildeH_initial=rep.max_tildeH_initial, max_tildeH_final=rep.max_tildeH_final,
                       max_tildeH_increase=rep.tildeH_increase)
    if evh is not None:
        orders = [o for o in evh.orders if not math.isnan(o)]
        summary.update(evh_pass=evh.passed, evh_max_residual=max(evh.max_residual, default=0.0),
                       evh_worst_excess=evh.worst_excess,
                       evh_min_order=min(orders, default=math.nan), evh_max_order=max(orders, default=math.nan))
        if not evh.passed:
            failed.append("evh")
    if sph is not None:
        ok = sph.max_error <= scn.sphere_tol * scn.tol_scale
        summary.update(sphere_pass=ok, sphere_max_error=sph.max_error,
                       sphere_collapse_time=scn.lifetime())
        if not ok:
            failed.append("sphere")
    if mh is not None:
        ok = mh.passed(scn.tol_scale)
        summary.update(min_h_pass=ok, min_h_worst_drop=mh.worst_drop)
        if not ok:
            failed.append("min_h")

    if traj is not None:
        summary["steps"] = traj.steps
        summary["regrids"] = traj.regrids
        summary["measurements"] = traj.measurements
        summary["t_final"] = traj.final.t if traj.final is not None else traj.snapshots[-1].t
    if exit_code == EXIT_OK and failed:
        exit_code, reason, detail = EXIT_MONITOR, "monitor_fail", ",".join(failed)

    summary["exit_code"] = exit_code
    summary["reason"] = reason
    if detail:
        summary["detail"] = detail

    _write_csv(out / "series.csv", SERIES_COLUMNS,
               ([row.get(c, math.nan) for c in SERIES_COLUMNS] for row in hm.rows))
    coord_names = ("x", "y") if scn.K == 0 else ("phi", "theta")
    if traj is not None:
        _write_csv(out / "snapshots.csv",
                   ("t", "node", "s") + coord_names + ("kappa_prof", "kappa_rot", "H", "F", "f"),
                   _snapshot_rows(traj.snapshots))
    if sph is not None:
        _write_csv(out / "sphere.csv", ("t", "r_min", "r_max", "r_ode", "max_error"), sph.rows)
    _write_summary(out / "summary.txt", summary)
    return RunResult(scn.name, exit_code, reason, detail, summary, out)


def run_file(path, out_dir=None, **overrides) -> RunResult:
    """Load and run a scenario file; configuration errors give exit 2."""
    path = Path(path)
    try:
        scn = Scenario.from_file(path, **overrides)
    except ConfigError as exc:
        return RunResult(path.stem, EXIT_CONFIG, "config_error", str(exc))
    return run_scenario(scn, out_dir)


def scenario_files(directory) -> list:
    return sorted(Path(directory).glob("*.cfg"))


def run_suite(directory, out_dir=None, **overrides) -> list:
    """Run every ``*.cfg`` file in a directory, each into its own subdirectory."""
    base = Path(out_dir) if out_dir is not None else Path("out")
    results = []
    for path in scenario_files(directory):
        results.append(run_file(path, base / path.stem, **overrides))
    return results


def suite_exit_code(results) -> int:
    return max((r.exit_code for r in results), default=EXIT_OK)


def bundled_scenarios() -> Path:
    return Path(__file__).parent / "scenarios"
