from dataclasses import dataclass

import numpy as np
import pytest

from ductwave.errors import StepSizeError
from ductwave.oracle import (
    ModeState,
    evolve_fourier,
    evolve_modes,
    growth_probe,
    reference_run,
    solve_reference,
    step_bound,
)
from ductwave.profile import y_quadrature
from ductwave.solution import AnalyticFamily, GaussianPacket, XGrid

from conftest import rel_l2

GRID = XGrid(256, 20.0)
PACKET = AnalyticFamily(GaussianPacket(1.0, 0.0, 1.0, 1.0, "cos"), GaussianPacket(0.5, 0.5, 1.2, 0.0, "linear"))


@dataclass(frozen=True)
class UniformFlow:
    """Constant velocity across the duct; bypasses profile validation."""

    speed: float
    kind: str = "smooth"

    @property
    def m_minus(self):
        return self.speed

    @property
    def m_plus(self):
        return self.speed

    def evaluate(self, y):
        return np.full(np.shape(y), self.speed)


def mode(prof, k, n=16):
    y, w = y_quadrature(prof, n)
    return y, w, ModeState(k, 0.0, np.exp(-(y**2)) * (1 + 0.5j * y), np.cos(y) + 0j)


# --- single mode


def test_zero_wavenumber_is_exact(exp_prof):
    y, w, m0 = mode(exp_prof, 0.0)
    out = evolve_fourier(exp_prof, m0, 3.7, 0.9)
    assert np.allclose(out.u, m0.u + 3.7 * m0.v, atol=1e-14)
    assert np.allclose(out.v, m0.v, atol=1e-14)


def test_uniform_flow_closed_form():
    # (d/dt + ikc)^2 u = -k^2 u with u1 = 0: u = exp(-ikct)(cos kt + i c sin kt) u0
    prof = UniformFlow(0.7)
    y, w = np.polynomial.legendre.leggauss(8)
    k, t = 2.3, 3.1
    state = ModeState(k, 0.0, np.ones(8, dtype=complex), np.zeros(8, dtype=complex))
    out = evolve_fourier(prof, state, t, float(step_bound(prof, k)) / 16, y=y, w=w)
    ref = np.exp(-1j * k * 0.7 * t) * (np.cos(k * t) + 1j * 0.7 * np.sin(k * t))
    assert np.allclose(out.u, ref, atol=1e-8)


def test_fourth_order_convergence(exp_prof):
    y, w, m0 = mode(exp_prof, 1.7)
    bound = float(step_bound(exp_prof, 1.7))
    ref = evolve_fourier(exp_prof, m0, 2.0, bound / 64).u
    e1 = np.abs(evolve_fourier(exp_prof, m0, 2.0, bound / 2).u - ref).max()
    e2 = np.abs(evolve_fourier(exp_prof, m0, 2.0, bound / 4).u - ref).max()
    assert 14.0 <= e1 / e2 <= 18.0


def test_step_bound_enforced(exp_prof):
    _, _, m0 = mode(exp_prof, 3.0)
    bound = float(step_bound(exp_prof, 3.0))
    assert bound == pytest.approx(0.5 / (3.0 * (np.e - np.exp(-1) + 2)))
    with pytest.raises(StepSizeError) as err:
        evolve_fourier(exp_prof, m0, 1.0, 1.01 * bound)
    assert err.value.bound == pytest.approx(bound)


# --- reference solution


@pytest.mark.parametrize("name", ["exp_prof", "pl_prof"])
def test_round_trip_at_start(request, name):
    prof = request.getfixturevalue(name)
    snap = solve_reference(prof, PACKET, GRID, 0.0)
    u0, _ = PACKET.samples(GRID, snap.y)
    assert np.max(np.abs(snap.u - u0)) <= 1e-12


def test_linear_profile_stays_bounded(lin_prof):
    snaps = solve_reference(lin_prof, PACKET, GRID, [0.0, 1.0, 2.0, 4.0])
    norms = [np.sqrt(np.sum(s.u**2 @ s.y_weights) * GRID.dx) for s in snaps]
    assert np.all(np.isfinite(norms))
    assert norms[-1] <= 10 * (1 + 4.0) ** 4 * norms[0]


def test_mode_order_is_irrelevant(exp_prof):
    run = reference_run(exp_prof, PACKET, GRID, 32)
    U, V = run.initial(PACKET)
    k = GRID.k[run.active]
    Ua, Va = evolve_modes(exp_prof, k, run.y, run.w, U, V, 0.0, 1.0)
    perm = np.random.default_rng(3).permutation(k.size)
    Ub, Vb = evolve_modes(exp_prof, k[perm], run.y, run.w, U[perm], V[perm], 0.0, 1.0)
    assert np.array_equal(Ua[perm], Ub) and np.array_equal(Va[perm], Vb)


def test_reference_is_real(pl_prof):
    run = reference_run(pl_prof, PACKET, GRID, 32)
    U, V = run.initial(PACKET)
    U, V = run.advance(U, V, 0.0, 1.5)
    full = np.zeros((GRID.n, run.y.size), dtype=complex)
    full[run.active] = U
    u = np.fft.ifft(full, axis=0)
    assert np.linalg.norm(u.imag) <= 1e-12 * np.linalg.norm(u.real)


@pytest.mark.parametrize("name", ["exp_prof", "quad_prof", "pl_prof"])
def test_cross_section_refinement(request, name):
    prof = request.getfixturevalue(name)
    coarse = solve_reference(prof, PACKET, GRID, 1.0, n_y=64)
    fine = solve_reference(prof, PACKET, GRID, 1.0, n_y=128)
    assert np.max(np.abs(coarse.a_u - fine.a_u)) <= 1e-6 * np.max(np.abs(fine.a_u))


def test_times_must_ascend(exp_prof):
    with pytest.raises(ValueError):
        solve_reference(exp_prof, PACKET, GRID, [1.0, 0.5])


def test_snapshot_mean_is_average(exp_prof):
    snap = solve_reference(exp_prof, PACKET, GRID, 0.7)
    assert rel_l2(0.5 * snap.u @ snap.y_weights, snap.a_u) <= 1e-12


# --- growth


def test_growth_probe_stable_profile(lin_prof):
    data = AnalyticFamily(GaussianPacket(1.0, 0.0, 2.0, 0.0, "cos"))
    rep = growth_probe(lin_prof, data, T=16.0, samples=8, fit_from=4.0)
    assert rep.mean_power == 2 and rep.full_power == 4
    assert np.all(np.isfinite(rep.norm_full))
    assert rep.rate_mean < 0.01 and rep.rate_full < 0.01
    assert rep.slope_mean <= 2.3 and rep.slope_full <= 4.3


def test_growth_probe_sees_instability(unstable_prof):
    data = AnalyticFamily(GaussianPacket(1.0, 0.0, 2.0, 0.0, "cos"))
    rep = growth_probe(unstable_prof, data, T=30.0, samples=16)
    # the complex pair has growth rate k Im(lambda); exponential growth shows in the fit
    assert rep.rate_full > 0.01
