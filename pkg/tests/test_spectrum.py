import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from ductwave.dispersion import eval_F, eval_N
from ductwave.errors import SpectrumIncompleteError
from ductwave.profile import PiecewiseLinearProfile
from ductwave.spectrum import (
    Spectrum,
    analyze_spectrum,
    certify_stability,
    default_region,
    find_exterior_poles,
    find_interior_poles,
    pl_polynomial,
)

PL_PROFILES = [
    ((-1.0, 0.0, 1.0), (0.0, 1.0, 3.0)),
    ((-1.0, -0.2, 0.5, 1.0), (0.0, 0.4, 1.9, 2.2)),
    ((-1.0, -0.5, 0.0, 0.5, 1.0), (-1.0, -0.2, 0.1, 1.4, 1.6)),
]


def richardson_residue(profile, lam, h=1e-3, levels=4):
    """Limit of e N(lam + e) as e -> 0 by repeated Richardson halving."""
    table = [[(h / 2**j) * eval_N(profile, lam + h / 2**j).real for j in range(levels)]]
    for order in range(1, levels):
        prev = table[-1]
        table.append([(2**order * prev[j + 1] - prev[j]) / (2**order - 1) for j in range(len(prev) - 1)])
    return table[-1][0]


# --- exterior poles


def test_linear_closed_forms(lin_spec):
    # F = 2/(lam^2 - 1) for M = y, so lam = +-sqrt 2 and res = +-1/(4 sqrt 2)
    (lm, rm), (lp, rp) = lin_spec.exterior()
    assert lp == pytest.approx(np.sqrt(2), abs=1e-12)
    assert lm == pytest.approx(-np.sqrt(2), abs=1e-12)
    assert rp == pytest.approx(1 / (4 * np.sqrt(2)), abs=1e-12)
    assert rm == pytest.approx(-1 / (4 * np.sqrt(2)), abs=1e-12)


def test_exp_plus_pole_bracket(exp_spec, exp_prof):
    assert np.e < exp_spec.lambda_plus < 3.0
    assert exp_spec.lambda_minus < np.exp(-1.0)
    assert eval_F(exp_prof, exp_spec.lambda_plus).real == pytest.approx(2.0, abs=1e-12)
    assert eval_F(exp_prof, exp_spec.lambda_minus).real == pytest.approx(2.0, abs=1e-12)


def test_pl_poles(pl_spec):
    assert pl_spec.lambda_minus == pytest.approx(-0.39929532, abs=1e-8)
    assert pl_spec.lambda_plus == pytest.approx(3.23975909, abs=1e-8)
    assert pl_spec.res_minus == pytest.approx(-0.16740744, abs=1e-8)
    assert pl_spec.res_plus == pytest.approx(0.11491076, abs=1e-8)
    assert pl_spec.interior_lambdas == pytest.approx([1.15953623], abs=1e-8)
    assert pl_spec.interior_residues == pytest.approx([0.0524967], abs=1e-7)


def test_pl_polynomial_roots_match(pl_prof, pl_spec):
    # F = 2 with denominators cleared is 2 lam^3 - 8 lam^2 + 4 lam + 3 = 0
    assert np.allclose(pl_polynomial(pl_prof), [3.0, 4.0, -8.0, 2.0])
    roots = np.sort(P.polyroots(pl_polynomial(pl_prof)).real)
    found = np.sort([pl_spec.lambda_minus, *pl_spec.interior_lambdas, pl_spec.lambda_plus])
    assert np.allclose(roots, found, atol=1e-12)


@pytest.mark.parametrize("name", ["exp_prof", "quad_prof", "lin_prof"])
def test_exterior_poles_exist_for_smooth(request, name):
    lm, rm, lp, rp = find_exterior_poles(request.getfixturevalue(name))
    assert lm is not None and lp is not None
    assert rm < 0 < rp


# --- interior poles


def test_linear_has_no_interior_poles(lin_prof):
    assert find_interior_poles(lin_prof) == []


@pytest.mark.parametrize("spec", PL_PROFILES)
def test_pl_root_count_and_simplicity(spec):
    prof = PiecewiseLinearProfile(*spec)
    coeffs = pl_polynomial(prof)
    roots = P.polyroots(coeffs)
    assert roots.size == len(prof.values)
    # simple roots: the derivative does not vanish there
    assert np.all(np.abs(P.polyval(roots, P.polyder(coeffs))) > 1e-6)
    sp = analyze_spectrum(prof)
    if sp.stable:
        assert 2 + len(sp.interior) == roots.size


@pytest.mark.parametrize("spec", PL_PROFILES)
def test_residue_sum_vanishes(spec):
    # N tends to 1/2 like 1/lam^2, so the residues of a rational N add up to zero
    sp = analyze_spectrum(PiecewiseLinearProfile(*spec))
    assert sp.stable
    total = sp.res_minus + sp.res_plus + sp.interior_residues.sum()
    assert abs(total) <= 1e-10


# --- residues and localization


@pytest.mark.parametrize("name", ["exp", "quad", "pl", "lin"])
def test_residue_matches_richardson_limit(request, name):
    prof = request.getfixturevalue(f"{name}_prof")
    sp = request.getfixturevalue(f"{name}_spec")
    assert richardson_residue(prof, sp.lambda_plus) == pytest.approx(sp.res_plus, abs=1e-8)
    assert richardson_residue(prof, sp.lambda_minus, h=-1e-3) == pytest.approx(sp.res_minus, abs=1e-8)


@pytest.mark.parametrize("name", ["exp", "quad", "pl", "lin"])
def test_poles_within_unit_distance(request, name):
    prof = request.getfixturevalue(f"{name}_prof")
    sp = request.getfixturevalue(f"{name}_spec")
    assert prof.m_plus < sp.lambda_plus <= prof.m_plus + 1.0
    assert prof.m_minus - 1.0 <= sp.lambda_minus < prof.m_minus


# --- stability


@pytest.mark.parametrize("name", ["exp_spec", "quad_spec", "lin_spec", "pl_spec"])
def test_stable_verdicts(request, name):
    assert request.getfixturevalue(name).verdict == "Stable"


def test_unstable_pl_detected(unstable_prof):
    sp = analyze_spectrum(unstable_prof)
    assert sp.verdict == "Unstable" and not sp.stable
    roots = np.array(sp.complex_roots)
    assert roots.size == 2
    assert np.allclose(sorted(roots.imag), [-0.17592324, 0.17592324], atol=1e-7)
    assert np.allclose(eval_F(unstable_prof, roots), 2.0, atol=1e-10)


@pytest.mark.parametrize("name", ["exp_prof", "quad_prof"])
def test_larger_box_adds_no_roots(request, name):
    prof = request.getfixturevalue(name)
    cert = certify_stability(prof, default_region(prof, scale=2.0))
    assert cert.verdict == "Stable" and cert.winding == (0, 0)


def test_missing_exterior_pole_reported():
    sp = Spectrum(None, None, 2.0, 0.1)
    with pytest.raises(SpectrumIncompleteError):
        sp.exterior()


def test_spectrum_to_dict(pl_spec):
    d = pl_spec.to_dict()
    assert d["verdict"] == "Stable"
    assert d["interior"][0]["lambda"] == pytest.approx(1.15953623, abs=1e-8)
