import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moebiusgeom.errors import VerdictDisagreementError
from moebiusgeom.moebius import SpectralData
from moebiusgeom.pipeline import analyze
from moebiusgeom.verify import (
    ALL_CHECKS,
    CHECK_NAMES,
    aggregate,
    check_classify,
    check_codazzi,
    check_gauss,
    check_identities,
    check_ode,
    check_parallel,
    check_ricci,
    check_semiparallel,
    check_semiparallel_criterion,
    codazzi_residuals,
    gauss_residual,
    pairwise_criterion,
    point_record,
    run_points,
    sample_grid,
    sample_random,
)

from conftest import FAMILY_TABLE, family

ALL = sorted(FAMILY_TABLE)


def test_check_names_are_stable():
    assert CHECK_NAMES["gauss"] == "conformal_gauss"
    assert CHECK_NAMES["semiparallel"] == "semi_parallel"
    assert set(ALL_CHECKS) == {"gauss", "codazzi", "ricci", "semiparallel", "parallel",
                               "identities", "classify", "ode"}


def test_gauss_on_standard_cylinder_many_points():
    spec = family("standard_cylinder")
    rep = check_gauss(spec, sample_random(spec, 50, seed=1), tol=1e-8)
    assert rep.passed and rep.max_residual < 1e-8
    assert len(rep.residuals) == 50


def test_gauss_on_cone():
    spec = family("exp_cone")
    assert check_gauss(spec, sample_random(spec, 10, seed=2)).passed


def test_corrupted_blaschke_tensor_fails_gauss():
    spec = family("standard_cylinder")
    pa = analyze(spec, [0.2, 0.1, 0.3])
    shift = np.zeros((3, 3))
    shift[0, 0] = 0.01
    assert gauss_residual(pa) < 1e-12
    assert gauss_residual(pa, shift) > 5e-3


def test_corrupted_moebius_form_fails_codazzi():
    spec = family("perturbed_cylinder")
    pa = analyze(spec, [0.6, 0.0, 0.1])
    assert max(codazzi_residuals(pa)) < 1e-10
    bad = pa.moebius.omega + 0.05
    assert max(codazzi_residuals(pa, bad)) > 1e-3


def test_standard_cylinder_codazzi_sides_vanish():
    pa = analyze(family("standard_cylinder"), [0.2, 0.1, 0.3])
    assert max(codazzi_residuals(pa)) < 1e-14


@pytest.mark.parametrize("name", ALL)
def test_structure_equations_everywhere(name):
    spec = family(name)
    pts = sample_random(spec, 5, seed=7)
    for check in (check_gauss, check_codazzi, check_ricci, check_identities):
        rep = check(spec, pts)
        assert rep.passed, (check.__name__, rep.max_residual)


def test_cylinder_pairwise_value():
    sd = analyze(family("standard_cylinder"), [0.2, 0.1, 0.3]).spectral()
    r = pairwise_criterion(sd)
    assert abs(r[0, 1]) < 1e-12


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_perturbed_pairwise_value(s):
    # substituting the tables into the criterion leaves -k_ss/k^3 + k_s^2/k^4
    spec = family("perturbed_cylinder")
    sd = analyze(spec, [s, 0.0, 0.0]).spectral()
    k = np.exp(s) + 0.1 * s * s
    ks = np.exp(s) + 0.2 * s
    kss = np.exp(s) + 0.2
    expected = abs(-kss / k**3 + ks**2 / k**4)
    assert np.max(np.abs(pairwise_criterion(sd))) == pytest.approx(expected, rel=1e-8)


def test_verdict_disagreement_raises():
    sd = SpectralData(k=2, eta_bar=[np.array([1.0]), np.array([-0.5])], theta=[0.0, 0.0],
                      mult=[1, 2], h=[1.0, 0.25], eigenframe=np.eye(3), labels=np.array([0, 1, 1]))
    with pytest.raises(VerdictDisagreementError):
        check_semiparallel_criterion(sd, tensor_residual=0.0)
    assert not check_semiparallel_criterion(sd, tensor_residual=1.0).passed


def test_semiparallel_split():
    good, bad = family("log_spiral_cylinder"), family("perturbed_cylinder")
    assert check_semiparallel(good, sample_random(good, 10, seed=3)).passed
    rep = check_semiparallel(bad, sample_random(bad, 10, seed=3))
    assert not rep.passed and rep.max_residual > 1e-4


def test_parallel_split():
    spec = family("standard_torus")
    assert check_parallel(spec, sample_random(spec, 5, seed=4)).passed
    spiral = family("log_spiral_cylinder")
    assert not check_parallel(spiral, sample_random(spiral, 5, seed=4)).passed


def test_ode_check_reads_curve():
    spec = family("log_spiral_cylinder")
    assert check_ode(spec, sample_random(spec, 5, seed=5)).max_residual < 1e-10
    std = family("standard_cylinder")
    rep = check_ode(std, sample_random(std, 3, seed=5))
    assert rep.residuals == [] and rep.passed


def test_classification_of_circles():
    spec = family("circles_r12_l2")
    recs = run_points(spec, sample_random(spec, 5, seed=6), ["classify"])
    for r in recs:
        c = r["classification"]
        assert c["k"] >= 3
        assert c["vanishing_h_ok"]
        assert c["isoparametric"]
    assert check_classify(spec, sample_random(spec, 5, seed=6)).passed


def test_skipped_points_are_reported():
    spec = family("standard_cylinder")
    rec = point_record(spec, spec.hi + 1.0, ["gauss"])
    assert rec["skipped"].startswith("PointOutsideDomainError")
    rep = aggregate([rec], ["gauss"])["gauss"]
    assert rep.skipped and rep.residuals == []


def test_grid_sampling():
    spec = family("log_spiral_cylinder")
    pts = sample_grid(spec, [10, 10, 10])
    assert pts.shape == (1000, 3)
    assert all(spec.contains(p) for p in pts)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sampling_reproducible(seed):
    spec = family("standard_cone")
    a, b = sample_random(spec, 4, seed), sample_random(spec, 4, seed)
    assert np.array_equal(a, b)
    assert all(spec.contains(p) for p in a)
