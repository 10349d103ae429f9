import numpy as np
import pytest

from ductwave.dispersion import boundary_N, eval_N, eval_N_prime, pv_cauchy
from ductwave.errors import ContractError, EndpointError, PoleCollisionError, ResolutionError
from ductwave.kernels import (
    MAX_KT,
    assemble_mean_hat,
    cut_kernel_pl,
    cut_kernel_smooth,
    evaluate_kernels,
    kernel,
    line_kernel,
    make_kernel_set,
    osc_pv,
    phi,
    pole_kernel,
    regularized_kernel,
)
from ductwave.oracle import ModeState, evolve_fourier, step_bound
from ductwave.profile import y_quadrature


# --- pole part


def test_pole_kernel_linear_midpoint(lin_spec, lin_prof):
    val = pole_kernel(lin_spec, lin_prof, 0, 0.0, 0.0)[0]
    assert val == pytest.approx(-2j * np.pi * 0.25, abs=1e-12)
    assert val.real == 0.0


@pytest.mark.parametrize("kt", [0.0, 1.0, 37.0, 1e3])
def test_pole_kernel_bounded(exp_spec, exp_prof, kt):
    y = np.linspace(-1, 1, 9)
    m = exp_prof.evaluate(y)
    bound = 2 * np.pi * sum(abs(r) / abs(lam - m) for lam, r in exp_spec.exterior())
    assert np.all(np.abs(pole_kernel(exp_spec, exp_prof, 0, kt, y)) <= bound + 1e-12)


# --- smooth cut part


def test_cut_kernel_at_rest_matches_direct_pv(exp_table, exp_prof):
    y = np.array([-0.6, 0.1, 0.7])
    got = cut_kernel_smooth(exp_table, 0, 0.0, y)
    a, b = exp_prof.m_minus, exp_prof.m_plus
    for yi, g in zip(y, got):
        m = exp_prof.evaluate(yi)
        dens = lambda lam: boundary_N(exp_prof, lam, 1).imag
        ref = 2j * pv_cauchy(dens, m, a, b) - 2j * np.pi * boundary_N(exp_prof, m, 1).real
        assert g == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("name", ["exp", "quad", "pl"])
def test_kernel_at_rest_identities(request, name):
    # at kt = 0 the line contour closes upward: I0 = -i pi, I1 = 0 for every y
    prof = request.getfixturevalue(f"{name}_prof")
    sp = request.getfixturevalue(f"{name}_spec")
    src = prof if prof.kind == "pl" else request.getfixturevalue(f"{name}_table")
    y, _ = y_quadrature(prof, 64)
    assert np.max(np.abs(kernel(sp, src, 0, 0.0, y) + 1j * np.pi)) <= 1e-6
    assert np.max(np.abs(kernel(sp, src, 1, 0.0, y))) <= 1e-6


def test_kernel_finite_at_range_ends(exp_spec, exp_table):
    y = np.array([-1.0, 1.0])
    for ell in (0, 1):
        assert np.all(np.isfinite(kernel(exp_spec, exp_table, ell, 3.0, y)))


@pytest.mark.parametrize("name", ["exp", "quad"])
def test_cut_kernel_saturates(request, name):
    table = request.getfixturevalue(f"{name}_table")
    y = np.array([-0.8, 0.0, 0.8])
    i0 = [np.abs(cut_kernel_smooth(table, 0, kt, y)).max() for kt in (0.0, 1.0, 10.0, 100.0)]
    i1 = [np.abs(cut_kernel_smooth(table, 1, kt, y)).max() / (1 + kt) for kt in (1.0, 10.0, 100.0)]
    # the running maximum stops growing once kt passes the transit scale
    assert max(i0[2:]) <= 1.5 * max(i0[:2])
    assert i1[-1] <= 1.5 * max(i1[:-1])


def test_osc_pv_rejects_large_kt():
    with pytest.raises(ResolutionError):
        osc_pv(np.cos, np.array([0.5]), 0.0, 1.0, 2 * MAX_KT)


def test_osc_pv_rejects_nonvanishing_density_at_end():
    with pytest.raises(EndpointError):
        osc_pv(lambda lam: np.ones_like(lam), np.array([1.0]), 0.0, 1.0, 1.0)


def test_osc_pv_against_plain_pv():
    c = np.array([0.2, 0.55])
    for kappa in (0.0, 3.0, 40.0):
        got = osc_pv(np.cos, c, 0.0, 1.0, kappa)
        for ci, g in zip(c, got):
            ref = pv_cauchy(lambda z: np.exp(-1j * kappa * z) * np.cos(z), ci, 0.0, 1.0)
            assert g == pytest.approx(ref, abs=1e-10)


# --- piecewise-linear cut part


def test_pl_cut_linear_profile(lin_spec, lin_prof):
    # no interior poles: I0,c = -2 pi i exp(-i kt M) N(M)
    y = np.array([-0.7, 0.0, 0.4])
    for kt in (0.0, 2.5):
        ref = -2j * np.pi * np.exp(-1j * kt * y) * eval_N(lin_prof, y.astype(complex))
        assert np.allclose(cut_kernel_pl(lin_spec, lin_prof, 0, kt, y), ref, atol=1e-14)
    assert cut_kernel_pl(lin_spec, lin_prof, 0, 0.0, 0.0)[0] == pytest.approx(-2j * np.pi / 4, abs=1e-14)


def pl_i1_series(spec, prof, kt, y):
    """Second-order Taylor expansion in kt of the piecewise-linear I1,c."""
    m = prof.evaluate(np.atleast_1d(y)).astype(complex)
    N, dN = eval_N(prof, m), eval_N_prime(prof, m)
    lam, res = spec.interior_lambdas[None, :], spec.interior_residues[None, :]
    w = res / (lam - m[:, None]) ** 2
    poles = (w * (1 - 1j * kt * lam - 0.5 * (kt * lam) ** 2)).sum(axis=1)
    # exp(-i kt m)(N' - i kt N) to second order
    local = dN - 1j * kt * (m * dN + N) - kt**2 * (0.5 * m**2 * dN + m * N)
    return -2j * np.pi * (poles + local)


def test_pl_cut_taylor_order(pl_spec, pl_prof):
    y = np.array([-0.5, 0.6])
    errs = []
    for kt in (0.02, 0.01):
        errs.append(np.max(np.abs(cut_kernel_pl(pl_spec, pl_prof, 1, kt, y) - pl_i1_series(pl_spec, pl_prof, kt, y))))
    assert errs[0] <= 1e-4
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.05)


def test_pl_pole_collision(pl_spec, pl_prof):
    lam = pl_spec.interior_lambdas[0]
    # M = 1 + 2y on the second segment
    y = (lam - 1.0) / 2.0
    with pytest.raises(PoleCollisionError):
        cut_kernel_pl(pl_spec, pl_prof, 0, 1.0, y)


# --- contour deformation


CONTOUR_SAMPLES = [(0.3, -0.8), (0.7, -0.35), (1.1, 0.05), (1.6, 0.45), (2.0, 0.9)]


@pytest.mark.parametrize("name", ["exp", "pl"])
@pytest.mark.parametrize("ell", [0, 1])
def test_contour_deformation(request, name, ell):
    prof = request.getfixturevalue(f"{name}_prof")
    sp = request.getfixturevalue(f"{name}_spec")
    src = prof if prof.kind == "pl" else request.getfixturevalue(f"{name}_table")
    for kt, y in CONTOUR_SAMPLES:
        assert kernel(sp, src, ell, kt, y)[0] == pytest.approx(line_kernel(prof, ell, kt, y), abs=1e-6)


# --- regularized kernel


@pytest.mark.parametrize("name", ["exp", "pl"])
def test_regularized_kernel_properties(request, name):
    prof = request.getfixturevalue(f"{name}_prof")
    sp = request.getfixturevalue(f"{name}_spec")
    src = prof if prof.kind == "pl" else request.getfixturevalue(f"{name}_table")
    y = np.linspace(-0.95, 0.95, 7)
    assert np.all(regularized_kernel(sp, src, 1.3, 0.0, y) == 0)
    # k -> 0 is continuous
    at_zero = regularized_kernel(sp, src, 0.0, 2.0, y)
    assert np.all(np.isfinite(at_zero))
    assert np.allclose(regularized_kernel(sp, src, 1e-7, 2.0, y), at_zero, atol=1e-6)
    # away from k = 0 it is I1/(2 pi k)
    k, t = 0.8, 1.5
    assert np.allclose(regularized_kernel(sp, src, k, t, y), kernel(sp, src, 1, k * t, y) / (2 * np.pi * k),
                       atol=1e-8)
    ratios = {t: max(np.abs(regularized_kernel(sp, src, kk, t, y)).max() for kk in (0.0, 0.5, 2.0)) / (1 + t)
              for t in (1.0, 4.0, 16.0, 64.0)}
    assert ratios[64.0] <= 1.1 * ratios[16.0]


def test_phi_limit():
    lam = np.array([0.3, -1.2])
    assert np.allclose(phi(lam, 0.0, 2.0), -2j * lam)
    assert np.allclose(phi(lam, 1e-3, 2.0), (np.exp(-1e-3j * lam * 2.0) - 1) / 1e-3, rtol=1e-12)


def test_evaluate_kernels_parts(exp_spec, exp_table):
    ev = evaluate_kernels(exp_spec, exp_table, 0.7, 2.0, np.array([0.2]))
    assert ev.I0 == pytest.approx(kernel(exp_spec, exp_table, 0, 1.4, 0.2), abs=1e-14)
    assert ev.I1 == pytest.approx(kernel(exp_spec, exp_table, 1, 1.4, 0.2), abs=1e-14)
    assert ev.I == pytest.approx(ev.I_p + ev.I_c)


# --- assembly


@pytest.fixture(scope="module")
def exp_kernels(exp_spec, exp_table):
    return make_kernel_set(exp_spec, exp_table, 64)


@pytest.fixture(scope="module")
def pl_kernels(pl_spec, pl_prof):
    return make_kernel_set(pl_spec, pl_prof, 64)


def mode_data(y):
    return np.exp(-y**2) * (1 + 0.3j * y), 0.5 * np.cos(y)


def test_assembly_at_start(exp_kernels):
    u0, u1 = mode_data(exp_kernels.y_nodes)
    ref = 0.5 * np.sum(exp_kernels.y_weights * u0)
    assert assemble_mean_hat(exp_kernels, u0, u1, 1.7, 0.0) == pytest.approx(ref, abs=1e-6)


def test_assembly_linear(exp_kernels):
    u0, u1 = mode_data(exp_kernels.y_nodes)
    k, t = 1.2, 0.9
    whole = assemble_mean_hat(exp_kernels, 2 * u0, -3 * u1, k, t)
    parts = 2 * assemble_mean_hat(exp_kernels, u0, 0 * u1, k, t) - 3 * assemble_mean_hat(exp_kernels, 0 * u0, u1, k, t)
    assert whole == pytest.approx(parts, abs=1e-12)


def test_assembly_velocity_only(exp_kernels):
    y = exp_kernels.y_nodes
    _, u1 = mode_data(y)
    k, t = 1.2, 0.9
    ev = evaluate_kernels(exp_kernels.spectrum, exp_kernels.source, k, t, y)
    ref = -2.0 * 0.5 * np.sum(exp_kernels.y_weights * ev.I * u1)
    assert assemble_mean_hat(exp_kernels, np.zeros_like(u1), u1, k, t) == pytest.approx(ref, abs=1e-14)


@pytest.mark.parametrize("which", ["exp", "pl"])
def test_assembly_matches_time_stepping(request, which):
    ks = request.getfixturevalue(f"{which}_kernels")
    prof = ks.profile
    u0, u1 = mode_data(ks.y_nodes)
    k = 1.5
    dt = float(step_bound(prof, k)) / 8
    state = ModeState(k, 0.0, u0, u1)
    for t in (0.5, 1.0, 2.0):
        state = evolve_fourier(prof, state, t, dt)
        ref = 0.5 * np.sum(ks.y_weights * state.u)
        assert abs(assemble_mean_hat(ks, u0, u1, k, t) - ref) <= 1e-4 * abs(ref)


def test_assembly_negative_wavenumber(exp_kernels):
    u0, u1 = mode_data(exp_kernels.y_nodes)
    a_neg = assemble_mean_hat(exp_kernels, u0, u1, -0.9, 1.1)
    a_pos = assemble_mean_hat(exp_kernels, np.conj(u0), np.conj(u1), 0.9, 1.1)
    assert a_neg == pytest.approx(np.conj(a_pos), abs=1e-15)


def test_assembled_field_is_real(pl_kernels):
    # a real field sampled on a small periodic grid keeps a real mean
    n, L = 16, 8.0
    x = np.arange(n) * L / n
    y = pl_kernels.y_nodes
    u0 = np.exp(-((x[:, None] - 4.0) ** 2)) * (1 + y[None, :])
    u1 = 0.2 * np.cos(2 * np.pi * x[:, None] / L) * np.ones_like(y)[None, :]
    k = 2 * np.pi * np.fft.fftfreq(n, L / n)
    u0h, u1h = np.fft.fft(u0, axis=0), np.fft.fft(u1, axis=0)
    # the Nyquist mode has no partner of opposite sign
    u0h[n // 2] = u1h[n // 2] = 0
    ah = np.array([assemble_mean_hat(pl_kernels, u0h[j], u1h[j], k[j], 0.7) for j in range(n)])
    a = np.fft.ifft(ah)
    assert np.linalg.norm(a.imag) <= 1e-10 * np.linalg.norm(a.real)


def test_assembly_grid_mismatch(exp_kernels):
    with pytest.raises(ContractError):
        assemble_mean_hat(exp_kernels, np.ones(10), np.ones(10), 1.0, 1.0)
