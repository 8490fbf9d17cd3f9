import math

import numpy as np
import pytest

from lsi_lab import errors
from lsi_lab.bg import compute_bg
from lsi_lab.highdim import (
    ProbeSpec,
    bakry_emery_certificate,
    build_measure_nd,
    gross_compose,
    hessian_neg_log_p,
    log_density_nd,
    measure_nd_from_dict,
    threshold_check,
)
from lsi_lab.measure import point_mass, two_point
from lsi_lab.mollify import MollifiedDensity, log_density


def two_atoms_2d():
    return build_measure_nd([[1.0, 0.0], [-1.0, 0.0]], [0.5, 0.5])


def five_atom_cloud_3d():
    rng = np.random.default_rng(21)
    pts = rng.uniform(-1.0, 1.0, size=(5, 3))
    w = rng.uniform(0.5, 1.5, size=5)
    return build_measure_nd(pts, w / w.sum())


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_build_defaults_center_and_radius():
    m = two_atoms_2d()
    assert np.allclose(m.center, [0.0, 0.0])
    assert m.radius == pytest.approx(1.0)
    assert m.dimension == 2


def test_build_rejects_bad_weights():
    with pytest.raises(errors.ValidationError):
        build_measure_nd([[0.0]], [0.5])
    with pytest.raises(errors.ValidationError):
        build_measure_nd([[0.0], [1.0]], [-0.2, 1.2])


def test_build_rejects_atom_outside_ball():
    with pytest.raises(errors.ValidationError):
        build_measure_nd([[0.0, 0.0], [3.0, 0.0]], [0.5, 0.5],
                         center=[0.0, 0.0], radius=1.0)


def test_measure_nd_from_dict():
    m = measure_nd_from_dict({
        "dimension": 2,
        "atoms": [{"point": [1.0, 0.0], "w": 0.5}, {"point": [-1.0, 0.0], "w": 0.5}],
    })
    assert m.dimension == 2
    with pytest.raises(errors.ValidationError):
        measure_nd_from_dict({"atoms": [{"point": [0.0], "w": 1.0}], "shape": "x"})


# ---------------------------------------------------------------------------
# log density
# ---------------------------------------------------------------------------

def test_single_atom_log_density():
    m = build_measure_nd([[0.0, 0.0]], [1.0])
    assert log_density_nd(m, 1.0, [0.0, 0.0]) == pytest.approx(-math.log(2 * math.pi), abs=1e-14)


def test_dimension_one_matches_mollify():
    m1 = build_measure_nd([[0.4]], [1.0])
    d = MollifiedDensity(point_mass(0.4), 0.7)
    for x in (-2.0, 0.0, 3.5):
        assert log_density_nd(m1, 0.7, [x]) == pytest.approx(log_density(d, x), abs=1e-12)


def test_four_atom_square_against_sorted_sum():
    pts = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
    w = [0.25] * 4
    m = build_measure_nd(pts, w)
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.uniform(-3, 3, size=2)
        # independent re-implementation: sorted summation of exact terms
        terms = sorted(
            0.25 * math.exp(-float(np.sum((x - np.array(p)) ** 2)) / 2.0)
            for p in pts
        )
        expected = math.log(math.fsum(terms)) - math.log(2 * math.pi)
        assert log_density_nd(m, 1.0, x) == pytest.approx(expected, abs=1e-12)


def test_log_density_requires_positive_delta():
    with pytest.raises(errors.NonPositiveDelta):
        log_density_nd(two_atoms_2d(), 0.0, [0.0, 0.0])


# ---------------------------------------------------------------------------
# hessian
# ---------------------------------------------------------------------------

def test_single_atom_hessian_exact():
    m = build_measure_nd([[0.3, -0.7, 0.1]], [1.0])
    for delta in (0.2, 1.0, 5.0):
        h = hessian_neg_log_p(m, delta, [2.0, 0.0, -1.0])
        assert np.allclose(h, np.eye(3) / delta, atol=1e-15)


def test_two_atom_hessian_at_midpoint():
    h = hessian_neg_log_p(two_atoms_2d(), 1.0, [0.0, 0.0])
    assert np.allclose(h, np.diag([0.0, 1.0]), atol=1e-14)


def test_hessian_symmetric_exactly():
    m = five_atom_cloud_3d()
    rng = np.random.default_rng(10)
    for _ in range(10):
        h = hessian_neg_log_p(m, 0.8, rng.uniform(-2, 2, size=3))
        assert np.array_equal(h, h.T)


def _fd_hessian(m, delta, x, h=1e-4):
    n = m.dimension
    out = np.empty((n, n))
    f = lambda p: log_density_nd(m, delta, p)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        out[i, i] = -(f(x + ei) - 2 * f(x) + f(x - ei)) / (h * h)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            val = -(f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
            out[i, j] = out[j, i] = val
    return out


def test_hessian_matches_finite_differences():
    m = five_atom_cloud_3d()
    rng = np.random.default_rng(12)
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0, size=3)
        exact = hessian_neg_log_p(m, 1.0, x)
        approx = _fd_hessian(m, 1.0, x)
        assert np.max(np.abs(exact - approx)) <= 1e-5


def test_two_atom_fd_agreement_at_spec_delta():
    m = two_atoms_2d()
    rng = np.random.default_rng(13)
    for _ in range(20):
        x = rng.uniform(-2.5, 2.5, size=2)
        exact = hessian_neg_log_p(m, 4.4, x)
        approx = _fd_hessian(m, 4.4, x)
        assert np.max(np.abs(exact - approx)) <= 1e-5


def test_identity_limit_bound():
    # || delta Hess(-log p) - I ||_max <= 2 R^2 / delta over probes
    for m in (two_atoms_2d(), five_atom_cloud_3d()):
        for delta in (0.5, 2.0, 10.0):
            bound = 2.0 * m.radius ** 2 / delta
            pts = ProbeSpec(grid_points_per_axis=5, random_points=40, seed=7).generate(m, delta)
            for x in pts:
                dev = np.max(np.abs(delta * hessian_neg_log_p(m, delta, x) - np.eye(m.dimension)))
                assert dev <= bound + 1e-12


def test_eigenvalue_floor_above_threshold():
    for m in (two_atoms_2d(), five_atom_cloud_3d()):
        n = m.dimension
        delta = 2.2 * m.radius ** 2 * n
        cert = bakry_emery_certificate(m, delta)
        assert cert.threshold_satisfied
        assert cert.min_eigenvalue >= cert.analytic_floor - 1e-9


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def test_single_atom_certificate():
    m = build_measure_nd([[0.0, 0.0]], [1.0])
    for delta in (0.5, 1.0, 3.0):
        cert = bakry_emery_certificate(m, delta)
        assert cert.min_eigenvalue == pytest.approx(1.0 / delta, rel=1e-12)
        assert cert.c_candidate == pytest.approx(delta, rel=1e-12)


def test_two_atom_certificate_above_threshold():
    cert = bakry_emery_certificate(two_atoms_2d(), 4.4)
    floor = (4.4 - 4.0) / 4.4 ** 2
    assert cert.threshold_satisfied
    assert cert.min_eigenvalue >= floor - 1e-9
    assert floor == pytest.approx(0.0206611570, abs=1e-9)
    assert cert.c_candidate is not None
    assert cert.perturbation_bound == pytest.approx(2.0 / 4.4)


def test_two_atom_certificate_small_delta_fails():
    cert = bakry_emery_certificate(two_atoms_2d(), 0.05)
    assert not cert.threshold_satisfied
    assert cert.min_eigenvalue < 0.0
    assert cert.c_candidate is None
    # the midpoint probe is the witness: Hess_11 = 1/delta - 1/delta^2
    mid = hessian_neg_log_p(two_atoms_2d(), 0.05, [0.0, 0.0])
    assert np.linalg.eigvalsh(mid)[0] == pytest.approx((0.05 - 1.0) / 0.05 ** 2, rel=1e-9)


def test_certificate_requires_positive_delta():
    with pytest.raises(errors.NonPositiveDelta):
        bakry_emery_certificate(two_atoms_2d(), 0.0)


def test_certificate_probe_grid_contains_midpoint():
    cert = bakry_emery_certificate(two_atoms_2d(), 0.05,
                                   ProbeSpec(grid_points_per_axis=7, random_points=0))
    assert cert.min_eigenvalue == pytest.approx((0.05 - 1.0) / 0.05 ** 2, rel=1e-9)


# ---------------------------------------------------------------------------
# threshold and Gross composition
# ---------------------------------------------------------------------------

def test_threshold_examples():
    assert threshold_check(0.0, 5, 1e-9)
    assert not threshold_check(1.0, 2, 4.0)   # boundary excluded
    assert threshold_check(1.0, 2, 4.4)


def test_gross_compose():
    assert gross_compose(1.0, 2.0) == 2.0
    assert gross_compose(3.0, 3.0) == 3.0
    with pytest.raises(errors.ValidationError):
        gross_compose(0.0, 1.0)


def test_gross_compose_with_bg_brackets():
    r1 = compute_bg(MollifiedDensity(point_mass(0.0), 1.0))
    r2 = compute_bg(MollifiedDensity(point_mass(0.0), 2.0))
    assert gross_compose(r1.c_upper, r2.c_upper) == max(r1.c_upper, r2.c_upper)


def test_dimension_one_cross_check_with_bg():
    # both bound the same constant from opposite sides when the
    # curvature criterion applies: c_candidate >= bg lower bound
    m1 = build_measure_nd([[-1.0], [1.0]], [0.5, 0.5])
    delta = 4.4  # above 2 R^2 n = 2
    cert = bakry_emery_certificate(m1, delta)
    assert cert.threshold_satisfied and cert.c_candidate is not None
    report = compute_bg(MollifiedDensity(two_point(), delta))
    assert cert.c_candidate >= report.c_lower
