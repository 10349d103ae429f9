"""Reference solver: Fourier modes in x, explicit time stepping in t.

For each wavenumber k the transform u_hat(k, y, t) obeys

    (d/dt + i k M(y))^2 u_hat = -k^2 a(u_hat),

which is integrated on cross-section Gauss nodes as a first-order system in
(u_hat, d/dt u_hat) with the classical fourth-order Runge-Kutta scheme. The
computation runs in the frame moving with the mid-range speed c0, where the
transported phase is slower; the result is shifted back exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepSizeError
from .profile import y_quadrature
from .solution import FieldSnapshot, XGrid, y_average

C_CFL = 0.5
_STEP_BUCKET = 16
_MODE_CUTOFF = 1e-15


@dataclass(frozen=True, eq=False)
class ModeState:
    """u_hat and its time derivative at one wavenumber on the cross-section nodes."""

    k: float
    t: float
    u: np.ndarray
    v: np.ndarray


def step_bound(profile, k, c_cfl=C_CFL):
    """Largest admissible step c_cfl/(|k| (M+ - M- + 2)); infinite at k = 0."""
    k = np.abs(np.asarray(k, dtype=float))
    width = profile.m_plus - profile.m_minus
    with np.errstate(divide="ignore"):
        return np.where(k > 0, c_cfl / (k * (width + 2.0)), np.inf)


def _frame_speed(profile):
    return 0.5 * (profile.m_plus + profile.m_minus)


def _rk4(k, m, w, U, V, dt, n_steps):
    """n_steps RK4 steps for rows of (U, V) with wavenumbers k (moving frame)."""
    k = k[:, None]
    ikm = 1j * k * m[None, :]
    k2 = k * k

    # (d/dt + ikm)^2 u = -k^2 a  <=>  u'' = -2 ikm u' - (ikm)^2 u - k^2 a
    def f(u, v):
        a = 0.5 * (u * w).sum(axis=1, keepdims=True)
        return v, -2.0 * ikm * v - (ikm * ikm) * u - k2 * a

    for _ in range(n_steps):
        a1, b1 = f(U, V)
        a2, b2 = f(U + 0.5 * dt * a1, V + 0.5 * dt * b1)
        a3, b3 = f(U + 0.5 * dt * a2, V + 0.5 * dt * b2)
        a4, b4 = f(U + dt * a3, V + dt * b3)
        U = U + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        V = V + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    return U, V


def _to_frame(k, c0, t, U, V):
    # u = exp(-i k c0 t) u~,  v = exp(-i k c0 t) (v~ - i k c0 u~)
    e = np.exp(1j * k * c0 * t)[:, None]
    return e * U, e * (V + 1j * k[:, None] * c0 * U)


def _from_frame(k, c0, t, U, V):
    e = np.exp(-1j * k * c0 * t)[:, None]
    return e * U, e * (V - 1j * k[:, None] * c0 * U)


def _evolve_rows(profile, y, w, k, t0, U, V, t_end, dt):
    c0 = _frame_speed(profile)
    m = profile.evaluate(y) - c0
    span = t_end - t0
    if span < 0:
        raise ValueError("t_end precedes the current time")
    n = int(np.ceil(span / dt - 1e-12)) if span > 0 else 0
    if n == 0:
        return U, V
    Uf, Vf = _to_frame(k, c0, t0, U, V)
    Uf, Vf = _rk4(k, m, w, Uf, Vf, span / n, n)
    return _from_frame(k, c0, t_end, Uf, Vf)


def evolve_fourier(profile, mode, t_end, dt, n_y=None, c_cfl=C_CFL, y=None, w=None):
    """Advance one ModeState to ``t_end`` with steps no larger than ``dt``.

    The cross-section nodes are those of ``y_quadrature(profile, len(mode.u))``
    unless (y, w) are given. Raises StepSizeError if dt exceeds the bound.
    """
    bound = float(step_bound(profile, mode.k, c_cfl))
    if dt <= 0 or dt > bound:
        raise StepSizeError(f"dt = {dt:g} violates the step bound {bound:g} at k = {mode.k:g}", bound)
    if y is None:
        y, w = y_quadrature(profile, n_y or np.size(mode.u))
    U = np.asarray(mode.u, dtype=complex)[None, :]
    V = np.asarray(mode.v, dtype=complex)[None, :]
    if U.shape[1] != y.size:
        raise ValueError("mode values must be sampled on the cross-section nodes")
    U, V = _evolve_rows(profile, y, w, np.array([float(mode.k)]), mode.t, U, V, t_end, dt)
    return ModeState(float(mode.k), float(t_end), U[0], V[0])


def _steps_for(profile, k, span, c_cfl):
    """Per-mode step count, rounded up to a bucket so equal counts can be batched."""
    bound = step_bound(profile, k, c_cfl)
    n = np.where(np.isfinite(bound), np.ceil(span / np.where(np.isfinite(bound), bound, 1.0)), 1)
    return (np.ceil(np.maximum(n, 1) / _STEP_BUCKET) * _STEP_BUCKET).astype(int)


def evolve_modes(profile, k, y, w, U, V, t0, t_end, c_cfl=C_CFL):
    """Advance many modes; each uses its own step from its own wavenumber."""
    span = t_end - t0
    if span == 0:
        return U, V
    counts = _steps_for(profile, k, span, c_cfl)
    U_out, V_out = np.empty_like(U), np.empty_like(V)
    for n in np.unique(counts):
        rows = counts == n
        # dt = span/n never exceeds the bound since n >= span/bound
        U_out[rows], V_out[rows] = _evolve_rows(profile, y, w, k[rows], t0, U[rows], V[rows], t_end, span / n)
    return U_out, V_out


@dataclass(frozen=True, eq=False)
class ReferenceRun:
    """Mode states of a reference solution on a grid; advanced in place by ``advance``."""

    profile: object
    grid: XGrid
    y: np.ndarray
    w: np.ndarray
    active: np.ndarray
    c_cfl: float = C_CFL

    def initial(self, data):
        u0, u1 = data.samples(self.grid, self.y)
        return np.fft.fft(u0, axis=0)[self.active], np.fft.fft(u1, axis=0)[self.active]

    def advance(self, U, V, t0, t1):
        return evolve_modes(self.profile, self.grid.k[self.active], self.y, self.w, U, V, t0, t1, self.c_cfl)

    def snapshot(self, U, t):
        full = np.zeros((self.grid.n, self.y.size), dtype=complex)
        full[self.active] = U
        u = np.real(np.fft.ifft(full, axis=0))
        ah = y_average(U, self.w)
        fa = np.zeros(self.grid.n, dtype=complex)
        fa[self.active] = ah
        a_u = np.real(np.fft.ifft(fa))
        fa[self.active] = -1j * self.grid.k[self.active] * ah
        p = np.real(np.fft.ifft(fa))
        return FieldSnapshot(float(t), self.grid.x, self.y, self.w, u, a_u, p)

    def norms(self, U):
        """(||a(u)||, ||u||) in L2 over the period (and over y for u), by Parseval."""
        scale = self.grid.extent / self.grid.n**2
        ah = y_average(U, self.w)
        mean = np.sqrt(scale * np.sum(np.abs(ah) ** 2))
        full = np.sqrt(scale * np.sum((np.abs(U) ** 2) @ self.w))
        return float(mean), float(full)


def reference_run(profile, data, grid, n_y=64, c_cfl=C_CFL):
    y, w = y_quadrature(profile, n_y)
    u0, u1 = data.samples(grid, y)
    h = np.maximum(np.abs(np.fft.fft(u0, axis=0)).max(axis=1), np.abs(np.fft.fft(u1, axis=0)).max(axis=1))
    active = np.nonzero(h > _MODE_CUTOFF * max(h.max(), 1e-300))[0]
    return ReferenceRun(profile, grid, y, w, active, c_cfl)


def solve_reference(profile, data, grid, t, n_y=64, c_cfl=0.25):
    """Reference snapshot(s) of u, a(u), p at the times ``t`` (ascending)."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0) or np.any(np.diff(ts) < 0):
        raise ValueError("times must be non-negative and ascending")
    run = reference_run(profile, data, grid, n_y, c_cfl)
    U, V = run.initial(data)
    now = 0.0
    snaps = []
    for s in ts:
        U, V = run.advance(U, V, now, s)
        now = s
        snaps.append(run.snapshot(U, s))
    return snaps[0] if np.ndim(t) == 0 else snaps


@dataclass(frozen=True)
class GrowthReport:
    times: np.ndarray
    norm_mean: np.ndarray
    norm_full: np.ndarray
    slope_mean: float
    slope_full: float
    rate_mean: float
    rate_full: float
    normalized_mean: np.ndarray
    normalized_full: np.ndarray
    mean_power: int
    full_power: int
    fit_window: tuple


def _fit(times, values, lo):
    sel = times >= lo
    lt, lv = np.log(times[sel]), np.log(values[sel])
    slope = np.polyfit(lt, lv, 1)[0]
    # log v = c + p log t + beta t; beta > 0 signals exponential growth
    X = np.column_stack([np.ones(lt.size), lt, times[sel]])
    beta = np.linalg.lstsq(X, lv, rcond=None)[0][2]
    return float(slope), float(beta)


def growth_probe(profile, data, T=50.0, samples=32, grid=None, n_y=None, fit_from=8.0, c_cfl=C_CFL):
    """Norms of a(u) and u on times up to T with fitted growth exponents.

    Times are the dyadic values 1, 2, 4, ... below T, T itself, and
    ``samples`` geometrically spaced points in [1, T]. The log-log slope is
    fitted on [fit_from, T]; an added linear-in-t term in the fit measures
    exponential growth. Normalizations use (1 + t)^p with p = 1, 3 for
    smooth profiles and p = 2, 4 for piecewise-linear ones.
    """
    width = profile.m_plus - profile.m_minus
    sigma = _packet_width(data)
    if grid is None:
        # every speed lies within distance 1 of the velocity range, so this
        # extent keeps the spreading packet from meeting its periodic copies
        extent = 2.0 ** np.ceil(np.log2((width + 2.0) * T + 8.0 * sigma))
        n = int(2 ** np.ceil(np.log2(8.0 * extent / sigma)))
        grid = XGrid(n, extent)
        data = _with_extent(data, extent)
    if n_y is None:
        # the Nystrom discretization resolves |k| t (M+ - M-) up to a few times n_y
        k_eff = 6.0 / sigma
        n_y = 64
        while n_y < 0.5 * k_eff * T * width:
            n_y *= 2
    dyadic = 2.0 ** np.arange(0, int(np.floor(np.log2(T))) + 1)
    times = np.unique(np.concatenate([dyadic, [T], np.geomspace(1.0, T, samples)]))
    run = reference_run(profile, data, grid, n_y, c_cfl)
    U, V = run.initial(data)
    now = 0.0
    nm, nf = [], []
    for s in times:
        U, V = run.advance(U, V, now, s)
        now = s
        a, b = run.norms(U)
        nm.append(a)
        nf.append(b)
    nm, nf = np.array(nm), np.array(nf)
    slope_m, beta_m = _fit(times, nm, fit_from)
    slope_f, beta_f = _fit(times, nf, fit_from)
    pm, pf = (2, 4) if profile.kind == "pl" else (1, 3)
    return GrowthReport(times, nm, nf, slope_m, slope_f, beta_m, beta_f, nm / (1 + times) ** pm,
                        nf / (1 + times) ** pf, pm, pf, (float(fit_from), float(T)))


def _packet_width(data):
    widths = [pk.sigma for pk in (getattr(data, "u0", None), getattr(data, "u1", None))
              if pk is not None and hasattr(pk, "sigma")]
    return min(widths) if widths else 1.0


def _with_extent(data, extent):
    from dataclasses import replace

    if not hasattr(data, "u0") or not hasattr(data, "velocity_free") or hasattr(data, "grid"):
        return data
    return replace(
        data,
        u0=None if data.u0 is None else replace(data.u0, extent=extent),
        u1=None if data.u1 is None else replace(data.u1, extent=extent),
    )
