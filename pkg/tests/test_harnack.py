import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from harnackflow.curvfunc import CurvatureFunction
from harnackflow.exceptions import FloorViolation, WindowViolation
from harnackflow.flow import FlowConfig, evolve, sphere_collapse_time, sphere_ode
from harnackflow.geometry import compute_fields, geodesic_sphere_profile, perturbed_sphere_profile
from harnackflow.harnack import (
    TOL_C,
    ConvexityMonitor,
    EvhMonitor,
    HarnackMonitor,
    UTracker,
    beta_candidate,
    beta_roots,
    compute_R,
    compute_S,
    convexity_floor,
    harnack_polynomial,
    harnack_quadratic,
    hypotheses,
    material_dt,
    material_dtf,
    monotone_u_check,
    theorem_slacks,
    tolerance,
)


class Triples:
    def __init__(self):
        self.tr = []

    def observe(self, a, b, c):
        self.tr.append((a, b, c))


def snap(t, f, regrid_id=0):
    return SimpleNamespace(t=t, regrid_id=regrid_id, fields=SimpleNamespace(f=np.atleast_1d(f)))


def sphere_triples(r0, p, K, n, N, frac=0.5, F="mean"):
    rec = Triples()
    T = sphere_collapse_time(r0, p, K, n)
    evolve(geodesic_sphere_profile(r0, K, n, N), FlowConfig(p=p, F=F, t_end=frac * T, window=4), [rec])
    return rec.tr, sphere_ode(r0, p, K, n, t_span=frac * T * 1.1, rtol=1e-13)


def sphere_dtf(r, p, K, n):
    """Exact ``df/dt`` and ``f`` on a shrinking geodesic sphere with F = H."""
    sK = math.sqrt(K)
    k = sK / math.tan(sK * r) if K else 1.0 / r
    dk_dr = -(K / math.sin(sK * r) ** 2) if K else -1.0 / r**2
    f = (n * k) ** p
    return -p * (n * k) ** (p - 1) * n * dk_dr * f, f


def test_tolerance_formula():
    assert tolerance(0.1, 0.01, 3.0) == pytest.approx(TOL_C * 0.0101 * 3.0)
    assert tolerance(0.1, 0.0, 1.0, tol_scale=4.0) == pytest.approx(4 * TOL_C * 0.01)
    assert np.shape(tolerance(0.1, 0.0, np.ones(5))) == (5,)


def test_material_dt_exact_on_quadratics():
    g = lambda t: 3.0 - 2.0 * t + 5.0 * t**2
    for ts in ((0.0, 0.1, 0.2), (0.0, 0.1, 0.13), (1.0, 1.5, 1.51)):
        d = material_dtf(*(snap(t, g(t)) for t in ts))
        assert d.value[0] == pytest.approx(-2.0 + 10.0 * ts[1], rel=1e-12)
    d = material_dtf(snap(0, 1.0), snap(1, 1.0), snap(2, 1.0))
    assert d.value[0] == 0 and d.error[0] == 0


def test_material_dt_second_order():
    errs = []
    for dt in (0.1, 0.05, 0.025):
        d = material_dtf(snap(1 - dt, math.exp(1 - dt)), snap(1, math.e), snap(1 + 0.5 * dt, math.exp(1 + 0.5 * dt)))
        errs.append(abs(d.value[0] - math.e))
    assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) >= 1.9)


def test_material_dt_guards():
    with pytest.raises(WindowViolation):
        material_dtf(snap(0, 1.0), snap(1, 1.0, regrid_id=1), snap(2, 1.0, regrid_id=1))
    with pytest.raises(ValueError):
        material_dtf(snap(0, 1.0), snap(0, 1.0), snap(1, 1.0))
    with pytest.raises(AttributeError):
        material_dt(snap(0, 1.0), snap(1, 1.0), snap(2, 1.0), key="missing")


def test_tolerance_constant_calibration():
    """Re-measure the error ratio behind TOL_C on exact sphere runs."""
    worst = 0.0
    for K, r0 in ((1.0, math.pi / 3), (0.0, 1.0)):
        for p in (0.5, 1.0, 2.0):
            triples, sol = sphere_triples(r0, p, K, 3, 100)
            for a, b, c in triples:
                d = material_dtf(a, b, c)
                ex, f = sphere_dtf(float(sol(b.t)), p, K, 3)
                h2 = b.profile.h**2 + d.dt**2
                worst = max(worst, np.max(np.abs(d.value - ex)) / (h2 * (abs(ex) + f / b.t)))
    assert worst <= TOL_C / 10


def test_euclidean_mcf_harnack_quadratic():
    # Q = dlog f/dt = 1/(2(T - t)) on a shrinking round sphere
    r0, n = 1.0, 2
    T = r0**2 / (2 * n)
    mon = HarnackMonitor(CurvatureFunction("mean", n), 1.0, 0.0, theorems=("master",), keep_diagnostics=True)
    evolve(geodesic_sphere_profile(r0, 0.0, n, 100), FlowConfig(p=1.0, t_end=0.8 * T, window=4), [mon])
    for d in mon.diagnostics:
        assert np.allclose(d.Q * 2 * (T - d.t), 1.0, rtol=1e-4)
    assert mon.beta == 0.0
    (res,) = mon.finalize()
    assert res.passed and res.min_slack > 0


def fake_fields(kappa, f=None, V2=0.0, p=1.0, F=None):
    kappa = np.atleast_2d(np.asarray(kappa, float))
    F = F or CurvatureFunction("mean", kappa.shape[1])
    Fv = F.value(kappa)
    return SimpleNamespace(kappa=kappa, Fval=Fv, f=Fv**p if f is None else f, V_norm2=np.full(len(kappa), V2),
                           kappa_prof=kappa[:, 0])


def test_S_examples():
    mean3 = CurvatureFunction("mean", 3)
    fl = fake_fields([[1.0, 2.0, 3.0]])
    assert compute_S(fl, mean3, 0.5, 0.0)[0] == 0.0
    # p = 1, F = H: S = K n
    assert compute_S(fl, mean3, 1.0, 1.0)[0] == pytest.approx(3.0)
    quad = CurvatureFunction.from_name("quad_norm", 2)
    # umbilic: F = n k, sum F^i = n
    fl = fake_fields([[2.0, 2.0]], F=quad)
    assert compute_S(fl, quad, 2.0, 1.0)[0] == pytest.approx(2 * 4.0 * 2)


def test_R_on_sphere_equals_2pKf2():
    for p in (0.5, 1.0, 2.0):
        fl = compute_fields(geodesic_sphere_profile(1.0, 1.0, 2, 40), CurvatureFunction("mean", 2), p)
        R = compute_R(fl, CurvatureFunction("mean", 2), p, 1.0)
        assert np.allclose(R, 2 * p * fl.f**2, rtol=1e-8)


@given(st.lists(st.floats(0.05, 20.0), min_size=2, max_size=4), st.floats(0.01, 0.99),
       st.floats(0.0, 50.0), st.floats(0.1, 4.0))
def test_R_lower_bound_mean(kappa, p, V2, K):
    F = CurvatureFunction("mean", len(kappa))
    fl = fake_fields([kappa], V2=V2, p=p, F=F)
    R = compute_R(fl, F, p, K)[0]
    xdot2 = fl.f[0] ** 2 + V2
    assert R >= 0
    assert R - min(1 - p, 2 * p) * K * xdot2 >= -1e-12 * (R + K * xdot2)


def test_beta_root_examples():
    assert beta_roots(1.0, 0.0, 0.5) == pytest.approx((2 / 3, 2.0))
    assert beta_roots(0.0, 0.0, 0.7) == (0.0, 0.0)
    assert beta_roots(1.0, 1.0, 2.0) is None
    bm, bp = beta_roots(np.array([1.0, 1.0]), np.array([0.0, 10.0]), 0.5)
    assert np.isnan(bm[1]) and np.isnan(bp[1]) and not np.isnan(bm[0])
    # complex roots fall back to 2S/(p+1)
    assert beta_candidate(np.array([1.0]), np.array([1.0]), 2.0)[0] == pytest.approx(2 / 3)
    assert beta_candidate(np.array([1.0]), np.array([0.0]), 0.5)[0] == pytest.approx(2 / 3)


@given(st.floats(0.0, 100.0), st.floats(-100.0, 100.0), st.floats(0.05, 5.0))
def test_beta_roots_annihilate_polynomial(S, R, p):
    roots = beta_roots(S, R, p)
    if roots is None:
        return
    for b in roots:
        scale = (p + 1) / p * b * b + 4 / p * abs(S * b) + 2 / p * S * S + abs(R) + 1.0
        assert abs(harnack_polynomial(b, S, R, p)) <= 1e-12 * scale
    assert roots[0] <= roots[1]


def test_hypotheses_messages():
    mean2 = CurvatureFunction("mean", 2)
    fl = compute_fields(geodesic_sphere_profile(1.0, 1.0, 2, 20), mean2, 2.0)
    mask, reason = hypotheses("thm11", fl, mean2, 2.0, 1.0)
    assert not mask.any() and reason == "thm11 requires 0<p<1"
    assert hypotheses("thm12i", fl, mean2, 2.0, 1.0)[0].all()
    assert hypotheses("thm12ii", fl, mean2, 2.0, 1.0)[1] == "thm12ii requires p=1"
    assert hypotheses("thm12i", fl, mean2, 2.0, 0.0)[1] == "thm12i needs a spherical ambient"
    with pytest.raises(ValueError):
        hypotheses("thm99", fl, mean2, 2.0, 1.0)


def test_slack_examples():
    mean2 = CurvatureFunction("mean", 2)
    fl = compute_fields(geodesic_sphere_profile(1.0, 1.0, 2, 20), mean2, 0.5)
    s = theorem_slacks("thm11", np.zeros_like(fl.f), fl, 2.0, mean2, 0.5, 1.0)
    # zero time derivative and zero gradient leave p/((p+1)t) f
    assert np.allclose(s.value, (0.5 / 1.5 / 2.0) * fl.f)
    assert s.in_force.all()
    quad = CurvatureFunction.from_name("quad_norm", 2)
    fl = compute_fields(geodesic_sphere_profile(1.0, 1.0, 2, 20), quad, 1.0)
    s = theorem_slacks("thm12ii", np.zeros_like(fl.f), fl, 1.0, quad, 1.0, 1.0)
    assert np.allclose(s.value, -math.sqrt(2) * fl.f + 0.5 * fl.f)
    m = theorem_slacks("master", np.zeros_like(fl.f), fl, 1.0, quad, 1.0, 1.0, beta=0.25)
    assert np.allclose(m.value, 0.25)
    with pytest.raises(ValueError):
        theorem_slacks("master", np.zeros_like(fl.f), fl, 1.0, quad, 1.0, 1.0)
    with pytest.raises(ValueError):
        theorem_slacks("thm11", np.zeros_like(fl.f), fl, 0.0, quad, 1.0, 1.0)


def test_harnack_quadratic_definition():
    fl = SimpleNamespace(binv_grad=np.array([1.0, 0.0]), f=np.array([2.0, 4.0]))
    assert np.allclose(harnack_quadratic(np.array([3.0, 2.0]), fl), [1.0, 0.5])


def test_monotone_u_check():
    t = np.arange(4.0)
    up = np.array([[0.0, 1.0], [0.5, 1.0], [0.6, 1.2], [0.6, 1.3]])
    rep = monotone_u_check(t, up)
    assert rep.passed and rep.violations == 0 and rep.worst_violation == 0
    down = up.copy()
    down[2, 1] = 0.9
    rep = monotone_u_check(t, down)
    assert not rep.passed and rep.violations == 1 and rep.worst_violation == pytest.approx(0.1)
    # the same drop is forgiven under a large enough tolerance
    assert monotone_u_check(t, down, h2dt2=np.full(4, 10.0)).passed
    assert monotone_u_check([], np.zeros((0, 3))).passed
    # a column may drop while the spatial minimum keeps rising
    assert rep.min_drop == 0.0
    sink = np.array([[1.0, 2.0], [0.8, 2.0]])
    assert monotone_u_check(t[:2], sink).min_drop == pytest.approx(0.2)


def test_convexity_floor():
    mon = SimpleNamespace(arrays=lambda: dict(t=np.array([0.0, 1.0, 2.0]), min_kappa1=np.array([0.5, 0.4, 0.2]),
                                                max_tildeH=np.array([4.0, 3.0, 3.5]), min_H=np.ones(3),
                                                h2dt2=np.full(3, 1e-4)))
    rep = convexity_floor(mon, n=2, raise_on_fail=False)
    assert rep.c == 0.5 and rep.floor == 0.25 and not rep.passed and rep.t_worst == 2.0
    assert rep.tildeH_increase == pytest.approx(0.5)
    with pytest.raises(FloorViolation) as info:
        convexity_floor(mon, n=2, raise_on_fail=True)
    assert info.value.report.min_kappa1 == 0.2
    assert convexity_floor(mon, c=0.3, n=2).passed
    with pytest.raises(ValueError):
        convexity_floor(mon)


def test_convexity_monitor_on_sphere():
    mon = ConvexityMonitor()
    evolve(geodesic_sphere_profile(1.0, 1.0, 2, 40), FlowConfig(p=0.5, t_end=0.05), [mon])
    rep = convexity_floor(mon, n=2)
    assert rep.passed and rep.tildeH_increase <= 1e-9


@pytest.mark.parametrize("K,r0", [(1.0, math.pi / 3), (0.0, 1.0)])
def test_evh_exact_on_spheres(K, r0):
    mon = EvhMonitor(K)
    evolve(geodesic_sphere_profile(r0, K, 2, 80), FlowConfig(p=1.0, t_end=0.04, window=4), [mon])
    assert mon.t and mon.passed and mon.orders == [] and mon.worst_excess <= 0


def test_evh_order_on_perturbed():
    mon = EvhMonitor(1.0)
    evolve(perturbed_sphere_profile(1.0, 0.05, 3, 1.0, 2, 80), FlowConfig(p=1.0, t_end=0.02, window=4), [mon])
    assert mon.passed
    assert all(1.7 <= o <= 2.3 for o in mon.orders)


@pytest.mark.parametrize("K,r0", [(1.0, 1.0), (0.0, 1.0)])
def test_u_monotone_on_exact_spheres(K, r0):
    tr = UTracker()
    evolve(geodesic_sphere_profile(r0, K, 2, 60), FlowConfig(p=1.0, t_end=0.05, window=4), [tr])
    rep = tr.check()
    assert rep.violations == 0 and rep.samples > 10
    assert tr.check(nodes=True).violations == 0


def test_u_tracker_particles_stay_on_nodes_for_spheres():
    tr = UTracker()
    evolve(geodesic_sphere_profile(1.0, 1.0, 2, 30), FlowConfig(p=1.0, t_end=0.02, window=4), [tr])
    ep = tr.epochs[-1]
    assert np.allclose(ep["u"][-1], ep["u_nodes"][-1], rtol=1e-6)
