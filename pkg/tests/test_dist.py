import numpy as np
import pytest

from wiequiv import DistributionSpec, QuadratureError

UNI = DistributionSpec.uniform(0.0, 1.0)
TLN = DistributionSpec.truncated_lognormal(0.0, 0.5, 0.2, 5.0)
BETA = DistributionSpec.scaled_beta(2.0, 3.0, 0.5, 2.0)
ALL = [UNI, TLN, BETA]


def test_uniform_eval():
    assert UNI.eval(0.25) == (0.25, 1.0)
    assert UNI.eval(-1.0) == (0.0, 0.0)
    assert UNI.eval(2.0) == (1.0, 0.0)


def test_tln_cdf_against_monte_carlo():
    # frozen estimate from 1e7 inverse-window lognormal draws (Philox key
    # 987654321); standard error 1.6e-4
    assert TLN.cdf(1.0) == pytest.approx(0.49993, abs=8e-4)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        DistributionSpec.uniform(1.0, 1.0)
    with pytest.raises(ValueError):
        DistributionSpec.truncated_lognormal(0.0, -0.5, 0.2, 5.0)
    with pytest.raises(ValueError):
        DistributionSpec.truncated_lognormal(0.0, 0.5, -0.1, 5.0)
    with pytest.raises(ValueError):
        DistributionSpec.scaled_beta(0.0, 1.0, 0.0, 1.0)


def test_upper_partial_moment_uniform_examples():
    assert UNI.upper_partial_moment(0.5, 0) == pytest.approx(0.5, abs=1e-15)
    assert UNI.upper_partial_moment(0.5, 1) == pytest.approx(0.125, abs=1e-15)
    assert UNI.upper_partial_moment(1.2, 1) == 0.0


def test_upper_integral_uniform_examples():
    assert UNI.upper_integral(0.0, lambda w: w) == pytest.approx(0.5, abs=1e-12)
    kinked = UNI.upper_integral(0.0, lambda w: np.maximum(0.5 - w, 0.0), kinks=(0.5,))
    assert kinked == pytest.approx(0.125, abs=1e-12)
    assert UNI.upper_integral(0.25, lambda w: np.ones_like(w)) == pytest.approx(0.75, abs=1e-12)


def test_pdf_integrates_to_one():
    for d in ALL:
        total = d.upper_integral(d.lo, lambda w: np.ones_like(w))
        assert total == pytest.approx(1.0, abs=1e-9), d.family


def test_sample_examples():
    assert DistributionSpec.uniform(2.0, 4.0).sample(0.5) == pytest.approx(3.0)
    for d in ALL:
        assert d.sample(0.0) == d.lo
        assert d.sample(1.0) == d.hi
    med = TLN.sample(0.5)
    assert abs(TLN.cdf(med) - 0.5) < 1e-10


@pytest.mark.parametrize("d", ALL, ids=lambda d: d.family.value)
def test_quantile_round_trip(d):
    u = np.linspace(0.0, 1.0, 101)
    assert np.max(np.abs(d.cdf(d.ppf(u)) - u)) < 1e-9


@pytest.mark.parametrize("d", ALL, ids=lambda d: d.family.value)
def test_partial_moments_match_quadrature(d):
    rng = np.random.default_rng(42)
    xs = d.lo + (d.hi - d.lo) * rng.random(20)
    for x in xs:
        for k in (0, 1, 2):
            closed = d.upper_partial_moment(x, k)
            quad = d.upper_integral(x, lambda w, x=x, k=k: (w - x) ** k)
            assert abs(closed - quad) < 1e-9, (d.family, x, k)


@pytest.mark.parametrize("d", ALL, ids=lambda d: d.family.value)
def test_partial_moments_monotone_and_continuous(d):
    xs = np.linspace(d.lo - 0.5, d.hi + 0.5, 301)
    for k in (0, 1, 2):
        vals = d.upper_partial_moment(xs, k)
        assert np.all(np.diff(vals) <= 1e-14)
        # continuity across the support endpoints
        eps = 1e-9
        for edge in (d.lo, d.hi):
            lo_val = d.upper_partial_moment(edge - eps, k)
            hi_val = d.upper_partial_moment(edge + eps, k)
            assert abs(lo_val - hi_val) < 1e-6


def test_cdf_strictly_increasing_inside_support():
    for d in ALL:
        w = np.linspace(d.lo, d.hi, 200)
        c = d.cdf(w)
        assert np.all(np.diff(c) > 0.0), d.family


def test_survival_complements_cdf():
    for d in ALL:
        w = np.linspace(d.lo, d.hi, 57)
        assert np.max(np.abs(d.survival(w) + d.cdf(w) - 1.0)) < 1e-12


def test_quadrature_error_carries_residual():
    # an integrand with an undeclared discontinuity defeats the subdivision cap
    nasty = DistributionSpec.uniform(0.0, 1.0)
    with pytest.raises(QuadratureError) as err:
        nasty.upper_integral(0.0, lambda w: np.sign(np.sin(1.0 / (w + 1e-12))),
                             tol=1e-14)
    assert np.isfinite(err.value.residual)


def test_serialization_round_trip():
    for d in ALL:
        again = DistributionSpec.from_dict(d.to_dict())
        assert again == d
    with pytest.raises(ValueError, match="unknown key"):
        DistributionSpec.from_dict({"family": "uniform", "lo": 0, "hi": 1, "mu": 3})
    with pytest.raises(ValueError, match="family"):
        DistributionSpec.from_dict({"family": "cauchy", "lo": 0, "hi": 1})
