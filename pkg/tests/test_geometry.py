import math

import numpy as np
import pytest

from harnackflow.ambient import SpaceForm
from harnackflow.curvfunc import CurvatureFunction
from harnackflow.exceptions import ConvexityLost, ResolutionError
from harnackflow.geometry import (
    OrbitSpace,
    ProfileCurve,
    arclength,
    compute_fields,
    fd_embedding_oracle,
    geodesic_sphere_profile,
    laplacian_scalar,
    perturbed_sphere_profile,
    profile_from_polar,
    random_sphere_profile,
    regrid,
    spheroid_profile,
)

from conftest import observed_order

MEAN2 = CurvatureFunction("mean", 2)


def fields(profile, F=None, p=1.0):
    return compute_fields(profile, F or CurvatureFunction("mean", profile.n), p)


# five canonical convex profiles: (builder(N), K, n)
CANONICAL = {
    "spheroid_K0_n2": lambda N: spheroid_profile(1.0, 1.2, 2, N),
    "perturbed_K1_n2": lambda N: perturbed_sphere_profile(math.pi / 4, 0.05, 2, 1.0, 2, N),
    "perturbed_K1_n3": lambda N: perturbed_sphere_profile(0.9, 0.04, 3, 1.0, 3, N),
    "random_K1_n2": lambda N: random_sphere_profile(1.0, 0.05, 1.0, 2, N, seed=3),
    "perturbed_K0_n3": lambda N: perturbed_sphere_profile(1.0, 0.06, 2, 0.0, 3, N),
}


def test_orbit_space_round_trip(rng):
    for K in (0.0, 1.0, 4.0):
        orb = OrbitSpace(K)
        c = np.column_stack([rng.uniform(0.1, 1.4, 10) / math.sqrt(max(K, 1)), rng.uniform(0.1, 3.0, 10)])
        if K == 0:
            c[:, 1] = np.abs(c[:, 1])
        back = orb.to_coords(orb.from_coords(c))
        assert np.allclose(back, c)
        assert np.all(orb.warp(orb.from_coords(c)) >= 0)


def test_sphere_s3_pi_over_4():
    fl = fields(geodesic_sphere_profile(math.pi / 4, 1.0, 2, 200))
    assert np.allclose(fl.kappa_prof, 1.0, atol=1e-8)
    assert np.allclose(fl.kappa_rot, 1.0, atol=1e-8)
    assert np.allclose(fl.H, 2.0, atol=1e-8)


@pytest.mark.parametrize("K,r,n", [(0.0, 1.0, 2), (0.0, 2.5, 3), (1.0, math.pi / 3, 2), (1.0, 1.2, 3), (4.0, 0.5, 2)])
def test_umbilic_exactness(K, r, n):
    fl = fields(geodesic_sphere_profile(r, K, n, 400))
    exact = 1 / r if K == 0 else math.sqrt(K) / math.tan(math.sqrt(K) * r)
    assert np.max(np.abs(fl.kappa_prof - fl.kappa_rot)) <= 1e-8
    assert np.max(np.abs(fl.kappa - exact)) <= 1e-8
    assert np.allclose(fl.H, n * exact, atol=1e-7)
    assert np.max(np.abs(fl.binv_grad)) <= 1e-12


def test_sphere_profile_rejects_bad_radius():
    with pytest.raises(ValueError):
        geodesic_sphere_profile(math.pi / 2, 1.0, 2, 50)
    with pytest.raises(ValueError):
        geodesic_sphere_profile(-1.0, 0.0, 2, 50)


def test_sphere_nodes_on_constant_phi():
    prof = geodesic_sphere_profile(math.pi / 3, 1.0, 2, 200)
    assert np.allclose(prof.coords()[:, 0], math.pi / 3)


def test_equatorial_limit():
    H = [fields(geodesic_sphere_profile(math.pi / 2 - eps, 1.0, 2, 100)).H.mean() for eps in (1e-1, 1e-2, 1e-3)]
    assert H[0] > H[1] > H[2] and H[2] < 3e-3


def test_field_identities():
    prof = perturbed_sphere_profile(1.0, 0.05, 3, 1.0, 3, 120)
    fl = fields(prof, CurvatureFunction.from_name("quad_norm", 3), 1.5)
    assert np.allclose(fl.H, fl.kappa_prof + 2 * fl.kappa_rot)
    assert np.all(fl.binv_grad >= 0)
    assert np.allclose(fl.f, fl.Fval**1.5)
    assert np.allclose(fl.V_norm2, (fl.ds_f / fl.kappa_prof) ** 2)
    assert np.allclose(fl.tilde_H, np.sum(1 / fl.kappa, axis=1))
    assert np.all(fl.tilde_H >= 9 / fl.H * (1 - 1e-12))
    assert np.all(np.diff(fl.s) > 0)


def test_perturbed_vs_oracle_second_order():
    errs = []
    hs = []
    for N in (50, 100, 200):
        prof = perturbed_sphere_profile(math.pi / 4, 0.05, 2, 1.0, 2, N)
        fl = fields(prof)
        kp, kr = fd_embedding_oracle(prof)
        errs.append(max(np.max(np.abs(fl.kappa_prof - kp)), np.max(np.abs(fl.kappa_rot - kr))))
        hs.append(prof.h)
    C = max(e / h**2 for e, h in zip(errs, hs))
    assert all(e <= C * h**2 for e, h in zip(errs, hs))
    assert np.all(observed_order(errs) >= 1.7)


@pytest.mark.parametrize("K,n", [(1.0, 2), (1.0, 3), (0.0, 2)])
def test_oracle_on_spheres(K, n):
    r = 1.0
    prof = geodesic_sphere_profile(r, K, n, 800)
    kp, kr = fd_embedding_oracle(prof)
    exact = 1 / r if K == 0 else 1 / math.tan(r)
    assert np.max(np.abs(kp - exact)) <= 1e-6
    assert np.max(np.abs(kr - exact)) <= 1e-6


@pytest.mark.parametrize("name", list(CANONICAL))
def test_mutual_convergence(name):
    build = CANONICAL[name]
    errs = []
    for N in (50, 100, 200):
        prof = build(N)
        fl = fields(prof)
        kp, kr = fd_embedding_oracle(prof)
        errs.append(max(np.max(np.abs(fl.kappa_prof - kp)), np.max(np.abs(fl.kappa_rot - kr))))
    assert np.all(observed_order(errs) >= 1.7), errs


def test_axis_regularity():
    gaps = []
    for N in (50, 100, 200, 400):
        fl = fields(perturbed_sphere_profile(1.0, 0.05, 2, 1.0, 2, N))
        gaps.append(abs(fl.kappa_rot[1] - fl.kappa_rot[0]) + abs(fl.kappa_prof[1] - fl.kappa_prof[0]))
    assert gaps[-1] < gaps[0] / 10


def test_convexity_lost_reports_node():
    # a dent deep enough to make the meridian concave
    prof = perturbed_sphere_profile(1.0, 0.2, 4, 1.0, 2, 100)
    with pytest.raises(ConvexityLost) as info:
        fields(prof)
    assert 0 <= info.value.node <= 100
    assert info.value.nodes is not None


def test_profile_validation():
    space = SpaceForm(3, 0.0)
    good = spheroid_profile(1.0, 1.0, 2, 20).nodes
    bad = good.copy()
    bad[0, 1] = 0.1
    with pytest.raises(ValueError):
        ProfileCurve(bad, space)
    bad = good.copy()
    bad[5, 1] = 0.0
    with pytest.raises(ResolutionError):
        ProfileCurve(bad, space)
    with pytest.raises(ValueError):
        ProfileCurve(good[:3], space)
    prof = ProfileCurve(good, space)
    with pytest.raises(ValueError):
        prof.nodes[0, 0] = 3.0


def test_coincident_nodes():
    nodes = spheroid_profile(1.0, 1.0, 2, 20).nodes.copy()
    nodes[6] = nodes[5]
    with pytest.raises((ResolutionError, ConvexityLost)):
        fields(ProfileCurve(nodes, SpaceForm(3, 0.0)))


def test_laplacian_of_constant():
    prof = perturbed_sphere_profile(1.0, 0.05, 2, 1.0, 2, 80)
    assert np.max(np.abs(laplacian_scalar(prof, np.full(81, 3.7)))) <= 1e-9


@pytest.mark.parametrize("K,r,n", [(1.0, 0.9, 2), (1.0, 0.7, 3), (0.0, 1.3, 2)])
def test_laplacian_eigenfunction(K, r, n):
    # cos(theta) on a geodesic sphere of intrinsic radius rho is an eigenfunction with eigenvalue n / rho^2
    rho = r if K == 0 else math.sin(r)
    lam = n / rho**2
    errs = []
    for N in (50, 100, 200):
        prof = geodesic_sphere_profile(r, K, n, N)
        psi = np.cos(np.linspace(0, math.pi, N + 1))
        errs.append(np.max(np.abs(laplacian_scalar(prof, psi) + lam * psi)))
    assert errs[-1] <= 1e-3 * lam
    orders = observed_order(errs)
    assert np.all((orders >= 1.7) & (orders <= 2.3)), orders


def test_laplacian_axis_guard():
    prof = geodesic_sphere_profile(1.0, 1.0, 2, 50)
    with pytest.raises(ResolutionError):
        laplacian_scalar(prof, np.ones(51), w_min=0.5)


def test_regrid_uniform_is_identity():
    prof = geodesic_sphere_profile(1.0, 1.0, 2, 100)
    new = regrid(prof)
    assert np.max(np.abs(new.nodes - prof.nodes)) <= 1e-12


def test_regrid_sphere_stays_sphere():
    space = SpaceForm(3, 1.0)
    theta = np.linspace(0, 1, 61) ** 1.6 * math.pi
    prof = profile_from_polar(lambda th: np.full_like(th, 1.1), space, 60)
    nodes = OrbitSpace(1.0).from_coords(np.column_stack([np.full(61, 1.1), theta]))
    nodes[[0, -1], 1] = 0
    new = regrid(ProfileCurve(nodes, space))
    assert np.allclose(new.coords()[:, 0], 1.1, atol=1e-10)
    assert prof.N == new.N


def test_regrid_spacing_ratio_and_length():
    base = perturbed_sphere_profile(1.0, 0.05, 2, 1.0, 2, 90)
    # smooth reparametrization whose node spacing varies by a factor of three
    x = np.linspace(0, 1, 91)
    u = math.pi * (x - 0.55 * np.sin(2 * math.pi * x) / (2 * math.pi))
    coords = np.column_stack([1.0 + 0.05 * np.cos(2 * u), u])
    nodes = OrbitSpace(1.0).from_coords(coords)
    nodes[[0, -1], 1] = 0
    prof = ProfileCurve(nodes, base.space)
    sp = prof.spacing()
    assert sp.max() / sp.min() >= 3.0
    new = regrid(prof)
    sp = new.spacing()
    assert sp.max() / sp.min() <= 1.05
    L0, L1 = arclength(prof), arclength(new)
    assert abs(L1 - L0) <= 1e-10 * L0
    # length of the meridian phi = 1 + 0.05 cos 2 theta on the unit sphere
    from scipy.integrate import quad

    def ds(th):
        phi = 1 + 0.05 * math.cos(2 * th)
        return math.hypot(-0.1 * math.sin(2 * th), math.sin(phi))

    assert L1 == pytest.approx(quad(ds, 0, math.pi, epsabs=1e-13)[0], rel=1e-8)


def test_arclength_of_sphere():
    for K, r in ((0.0, 1.3), (1.0, 1.0)):
        prof = geodesic_sphere_profile(r, K, 2, 64)
        rho = r if K == 0 else math.sin(r)
        assert arclength(prof) == pytest.approx(math.pi * rho, rel=1e-12)
