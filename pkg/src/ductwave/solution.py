"""Quasi-explicit solution: mean field a(u), its rate, and the full field u.

The mean field is a finite superposition of transported data. Every term has
the form  W(y) * op[u](x - c t, y)  for a speed c, where op is one of

    A: u0(x - c t)                 B: t d/dx u0(x - c t)
    G: int_0^{c t} u1(x - s) ds    D: t u1(x - c t)

Speeds are the exterior poles, the interior poles (piecewise-linear
profiles), M(y) at the cross-section nodes (local terms), and a Gauss grid of
the velocity range (principal-value terms, smooth profiles). The weights are
independent of t, so a ``MeanFieldOperator`` is built once and evaluated at
any number of times through phase factors in Fourier space.

The full field adds to the transported data the memory integral
int_0^t (t - s) d^2/dx^2 a(u)(x - (t - s) M(y), s) ds, evaluated by Simpson's
rule on a shared history of the mean field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.special import erf

from ._quad import composite_nodes, graded_breaks
from .dispersion import DispersionTable, _pl_N, boundary_N, boundary_N_prime, build_table, pv_rule
from .errors import ContractError, DomainError, InstabilityError, ResolutionError, UnsupportedDecompositionError
from .profile import y_quadrature

# speed labels
POLE, PV, SUBTRACT, LOCAL, INTERIOR = 0, 1, 2, 3, 4
_GRADE = 4
_MODE_CUTOFF = 1e-15


# ----------------------------------------------------------------------------
# grids and data


def _is_pow2(n):
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class XGrid:
    """Uniform periodic grid of ``n`` points on [center - X/2, center + X/2)."""

    n: int = 1024
    extent: float = 40.0
    center: float = 0.0

    def __post_init__(self):
        if not _is_pow2(int(self.n)):
            raise DomainError(f"x-grid size must be a power of two, got {self.n}")
        if not self.extent > 0:
            raise DomainError("x-domain extent must be positive")

    @property
    def dx(self):
        return self.extent / self.n

    @property
    def x(self):
        return self.center - 0.5 * self.extent + self.dx * np.arange(self.n)

    @property
    def k(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)


_SHAPES = {
    "one": lambda y: np.ones_like(y),
    "linear": lambda y: y,
    "cos": lambda y: np.cos(0.5 * np.pi * y),
    "quadratic": lambda y: y * y,
    "exp": lambda y: np.exp(y),
}


@dataclass(frozen=True)
class GaussianPacket:
    """A exp(-(x - x0)^2/sigma^2) cos(k0 x) phi(y), repeated with period ``extent``."""

    amplitude: float = 1.0
    x0: float = 0.0
    sigma: float = 1.0
    k0: float = 0.0
    shape: str = "one"
    extent: float = 40.0

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise DomainError(f"unknown cross-section shape {self.shape!r}; choose from {sorted(_SHAPES)}")
        if not self.sigma > 0:
            raise DomainError("packet width sigma must be positive")

    def _wrap(self, x):
        lo = self.x0 - 0.5 * self.extent
        return lo + np.mod(np.asarray(x, dtype=float) - lo, self.extent)

    def phi(self, y):
        return _SHAPES[self.shape](np.asarray(y, dtype=float))

    def profile_x(self, x, order=0):
        """x-dependence and its first two derivatives (one period copy)."""
        s = self._wrap(x) - self.x0
        g = self.amplitude * np.exp(-(s * s) / self.sigma**2)
        xw = s + self.x0
        c, sn = np.cos(self.k0 * xw), np.sin(self.k0 * xw)
        if order == 0:
            return g * c
        dg = -2.0 * s / self.sigma**2
        if order == 1:
            return g * (dg * c - self.k0 * sn)
        if order == 2:
            d2g = dg * dg - 2.0 / self.sigma**2
            return g * ((d2g - self.k0**2) * c - 2.0 * self.k0 * dg * sn)
        raise ValueError("derivatives up to order 2 are available")

    def _antiderivative(self, x):
        """int_{x0 - X/2}^{x} of the x-profile, counting full periods."""
        x = np.asarray(x, dtype=float)
        lo = self.x0 - 0.5 * self.extent
        periods = np.floor((x - lo) / self.extent)
        xi = self._wrap(x)
        shift = 0.5j * self.k0 * self.sigma**2
        pref = 0.5 * self.amplitude * self.sigma * np.sqrt(np.pi)
        pref = pref * np.exp(1j * self.k0 * self.x0 - 0.25 * (self.k0 * self.sigma) ** 2)

        def G(v):
            return np.real(pref * erf((v - self.x0 - shift) / self.sigma))

        mass = G(lo + self.extent) - G(lo)
        return G(xi) - G(lo) + periods * mass

    def __call__(self, x, y):
        return self.profile_x(x)[:, None] * self.phi(y)[None, :]

    def window(self, x, T, y):
        """int_0^T f(x - s, y) ds on the (x, y) product grid."""
        val = self._antiderivative(x) - self._antiderivative(np.asarray(x) - T)
        return val[:, None] * self.phi(y)[None, :]


@dataclass(frozen=True)
class AnalyticFamily:
    """Initial data built from Gaussian packets; a missing packet means zero."""

    u0: GaussianPacket | None = None
    u1: GaussianPacket | None = None

    @property
    def velocity_free(self):
        return self.u1 is None or self.u1.amplitude == 0.0

    def samples(self, grid, y):
        y = np.asarray(y, dtype=float)
        x = grid.x
        z = np.zeros((x.size, y.size))
        a = self.u0(x, y) if self.u0 is not None else z
        b = self.u1(x, y) if self.u1 is not None else z
        return a, b

    def derivative(self, which, x, y, order):
        pk = self.u0 if which == 0 else self.u1
        if pk is None:
            return np.zeros((np.size(x), np.size(y)))
        return pk.profile_x(x, order)[:, None] * pk.phi(y)[None, :]


@dataclass(frozen=True, eq=False)
class GridSampled:
    """Samples of u0, u1 on a periodic x-grid and at cross-section nodes.

    Values at other y are obtained by barycentric interpolation through the
    given nodes, so the nodes should suit the profile (one global rule for
    smooth profiles, the same per-segment rule otherwise).
    """

    grid: XGrid
    y: np.ndarray
    u0: np.ndarray
    u1: np.ndarray

    def __post_init__(self):
        shape = (self.grid.n, np.size(self.y))
        if np.shape(self.u0) != shape or np.shape(self.u1) != shape:
            raise ContractError(f"samples must have shape {shape}")

    @property
    def velocity_free(self):
        return not np.any(self.u1)

    def _at(self, values, y):
        y = np.asarray(y, dtype=float)
        if y.shape == np.shape(self.y) and np.array_equal(y, self.y):
            return np.asarray(values, dtype=float)
        return BarycentricInterpolator(self.y, np.asarray(values).T)(y).T

    def samples(self, grid, y):
        if grid != self.grid:
            raise ContractError("grid-sampled data must be used on its own x-grid")
        return self._at(self.u0, y), self._at(self.u1, y)


def sample_data(data, grid, y):
    """Grid-sampled copy of any initial data on ``grid`` and nodes ``y``."""
    u0, u1 = data.samples(grid, y)
    return GridSampled(grid, np.asarray(y, dtype=float), u0, u1)


@dataclass(frozen=True)
class FieldSnapshot:
    t: float
    x: np.ndarray
    y: np.ndarray
    y_weights: np.ndarray
    u: np.ndarray
    a_u: np.ndarray
    p: np.ndarray


def y_average(values, weights):
    """(1/2) int_{-1}^{1} dy along the last axis."""
    return 0.5 * (values @ weights)


# ----------------------------------------------------------------------------
# speed/weight representation of the mean field


@dataclass(frozen=True, eq=False)
class MeanFieldOperator:
    """Speeds c_j with weight rows over the cross-section nodes.

    ``A, B, G, D`` have shape (n_speeds, n_y) and already contain the
    averaging weights w_y/2.
    """

    profile: object
    spectrum: object
    y: np.ndarray
    y_weights: np.ndarray
    speeds: np.ndarray
    labels: np.ndarray
    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    D: np.ndarray
    t_max: float
    k_max: float

    def select(self, labels):
        keep = np.isin(self.labels, labels)
        return MeanFieldOperator(
            self.profile, self.spectrum, self.y, self.y_weights, self.speeds[keep], self.labels[keep],
            self.A[keep], self.B[keep], self.G[keep], self.D[keep], self.t_max, self.k_max,
        )


def _check_stable(spectrum):
    if not spectrum.stable:
        raise InstabilityError(
            f"stability verdict is {spectrum.verdict}; the quasi-explicit solution is refused",
            tuple(spectrum.complex_roots),
        )


def _pole_rows(lam, res, m, avg):
    d = lam - m
    A = -2.0 * res * (2.0 * m - lam) / d**2
    G = 2.0 * res / d**2
    z = np.zeros_like(m)
    return A * avg, z, G * avg, z


def _local_rows(N, dN, m, avg):
    return 2.0 * (N - m * dN) * avg, 2.0 * m * N * avg, 2.0 * dN * avg, 2.0 * N * avg


def _cut_grid(profile, t_max, k_max):
    a, b = profile.m_minus, profile.m_plus
    width = (b - a) / 8.0
    if t_max > 0 and k_max > 0:
        width = min(width, np.pi / (k_max * t_max))
    breaks = graded_breaks(a, b, width, _GRADE, _GRADE)
    return composite_nodes(breaks, 16)


def build_operator(spectrum, source, t_max, k_max, n_y=64):
    """Speeds and weights of the mean field, resolved for |k| t <= k_max t_max."""
    _check_stable(spectrum)
    prof = source.profile if isinstance(source, DispersionTable) else source
    y, wy = y_quadrature(prof, n_y)
    m = prof.evaluate(y)
    avg = 0.5 * wy
    speeds, labels, rows = [], [], []

    def add(c, label, block):
        speeds.append(c)
        labels.append(label)
        rows.append(block)

    for lam, res in spectrum.exterior():
        add(lam, POLE, _pole_rows(lam, res, m, avg))
    if prof.kind == "pl":
        for lam, res in spectrum.interior:
            add(lam, INTERIOR, _pole_rows(lam, res, m, avg))
        N, dN = _pl_N(prof, m.astype(complex))
        loc = _local_rows(N.real, dN.real, m, avg)
    else:
        table = source if isinstance(source, DispersionTable) else build_table(prof)
        nm, dnm = boundary_N(prof, m, 1), boundary_N_prime(prof, m, 1)
        loc = _local_rows(nm.real, dnm.real, m, avg)
        lam, wl = _cut_grid(prof, t_max, k_max)
        im_n, im_dn = table.im_N(lam), table.im_Nprime(lam)
        inv = wl[:, None] / (lam[:, None] - m[None, :])
        c2 = 2.0 / np.pi
        for q in range(lam.size):
            add(lam[q], PV, (
                c2 * (m * im_dn[q] - im_n[q]) * inv[q] * avg,
                -c2 * m * im_n[q] * inv[q] * avg,
                -c2 * im_dn[q] * inv[q] * avg,
                -c2 * im_n[q] * inv[q] * avg,
            ))
        # subtracted density at lambda = M(y), integrated against 1/(lambda - M) exactly
        a, b = prof.m_minus, prof.m_plus
        S = np.log((b - m) / (m - a)) - inv.sum(axis=0)
        sub = (
            c2 * (m * dnm.imag - nm.imag) * S * avg,
            -c2 * m * nm.imag * S * avg,
            -c2 * dnm.imag * S * avg,
            -c2 * nm.imag * S * avg,
        )
        for j in range(m.size):
            mask = np.zeros_like(m)
            mask[j] = 1.0
            add(m[j], SUBTRACT, tuple(r * mask for r in sub))
    for j in range(m.size):
        mask = np.zeros_like(m)
        mask[j] = 1.0
        add(m[j], LOCAL, tuple(r * mask for r in loc))
    A, B, G, D = (np.array([r[i] for r in rows]) for i in range(4))
    return MeanFieldOperator(prof, spectrum, y, wy, np.array(speeds), np.array(labels), A, B, G, D,
                             float(t_max), float(k_max))


# ----------------------------------------------------------------------------
# evaluation in Fourier space


def _phases(k, c, t):
    theta = np.outer(k, c) * t
    E = np.exp(-1j * theta)
    # (1 - E)/(ik), continuous at k = 0
    W = (c * t)[None, :] * np.sinc(theta / (2.0 * np.pi)) * np.exp(-0.5j * theta)
    return theta, E, W


@dataclass(frozen=True, eq=False)
class ModeAmplitudes:
    """Data transforms contracted with the operator weights, on active modes."""

    k: np.ndarray
    active: np.ndarray
    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    D: np.ndarray


def mode_amplitudes(op, grid, data):
    u0, u1 = data.samples(grid, op.y)
    h0 = np.fft.fft(u0, axis=0)
    h1 = np.fft.fft(u1, axis=0)
    scale = max(np.abs(h0).max(), np.abs(h1).max(), 1e-300)
    active = np.nonzero(np.maximum(np.abs(h0).max(axis=1), np.abs(h1).max(axis=1)) > _MODE_CUTOFF * scale)[0]
    k = grid.k[active]
    h0, h1 = h0[active], h1[active]
    return ModeAmplitudes(k, active, h0 @ op.A.T, h0 @ op.B.T, h1 @ op.G.T, h1 @ op.D.T)


def _check_resolution(op, amps, t):
    if amps.k.size and t > 0:
        need = np.abs(amps.k).max() * t
        have = op.k_max * op.t_max
        if need > have * (1 + 1e-12) and np.any(op.labels == PV):
            raise ResolutionError(
                f"operator resolved for |k| t <= {have:g} but {need:g} is requested; rebuild with larger t_max"
            )


def mean_hat(op, amps, t):
    """Transform of a(u)(., t) on the active modes."""
    _check_resolution(op, amps, t)
    theta, E, W = _phases(amps.k, op.speeds, t)
    ik = 1j * amps.k[:, None]
    return np.sum(E * (amps.A + t * ik * amps.B + t * amps.D) + W * amps.G, axis=1)


def rate_hat(op, amps, t):
    """Transform of the time derivative of a(u)(., t) on the active modes."""
    _check_resolution(op, amps, t)
    theta, E, _ = _phases(amps.k, op.speeds, t)
    ik = 1j * amps.k[:, None]
    c = op.speeds[None, :]
    body = -ik * c * amps.A + ik * (1.0 - 1j * theta) * amps.B + (1.0 - 1j * theta) * amps.D + c * amps.G
    return np.sum(E * body, axis=1)


def _to_grid(grid, amps, values):
    full = np.zeros(grid.n, dtype=complex)
    full[amps.active] = values
    return np.real(np.fft.ifft(full))


def _max_active_k(grid, data, y):
    u0, u1 = data.samples(grid, y)
    h = np.maximum(np.abs(np.fft.fft(u0, axis=0)).max(axis=1), np.abs(np.fft.fft(u1, axis=0)).max(axis=1))
    active = h > _MODE_CUTOFF * max(h.max(), 1e-300)
    return float(np.abs(grid.k[active]).max()) if np.any(active) else 0.0


def _prepare(spectrum, source, data, grid, t_max, n_y):
    prof = source.profile if isinstance(source, DispersionTable) else source
    y, _ = y_quadrature(prof, n_y)
    k_max = _max_active_k(grid, data, y)
    op = build_operator(spectrum, source, t_max, k_max, n_y)
    return op, mode_amplitudes(op, grid, data)


def _times(t):
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise DomainError("times must be non-negative")
    return ts


def mean_field(spectrum, source, data, grid, t, n_y=64):
    """a(u)(x, t) on the grid; ``t`` may be a scalar or a sequence of times."""
    ts = _times(t)
    op, amps = _prepare(spectrum, source, data, grid, ts.max(), n_y)
    out = np.array([_to_grid(grid, amps, mean_hat(op, amps, s)) for s in ts])
    return out[0] if np.ndim(t) == 0 else out


def mean_field_rate(spectrum, source, data, grid, t, n_y=64):
    """d/dt a(u)(x, t) on the grid."""
    ts = _times(t)
    op, amps = _prepare(spectrum, source, data, grid, ts.max(), n_y)
    out = np.array([_to_grid(grid, amps, rate_hat(op, amps, s)) for s in ts])
    return out[0] if np.ndim(t) == 0 else out


def mean_field_direct(op, data, x, t):
    """a(u)(x, t) by evaluating every translated term in physical space.

    Needs analytic data with closed-form translates and windows; used to
    cross-check the Fourier evaluation.
    """
    if not isinstance(data, AnalyticFamily):
        raise ContractError("direct evaluation needs analytic data")
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.size)
    for j, c in enumerate(op.speeds):
        xs = x - c * t
        if data.u0 is not None:
            v0 = data.derivative(0, xs, op.y, 0)
            d0 = data.derivative(0, xs, op.y, 1)
            total += v0 @ op.A[j] + t * (d0 @ op.B[j])
        if data.u1 is not None:
            total += t * (data.derivative(1, xs, op.y, 0) @ op.D[j])
            total += data.u1.window(x, c * t, op.y) @ op.G[j]
    return total


# ----------------------------------------------------------------------------
# full field


def _simpson_weights(n_intervals, t):
    if n_intervals % 2:
        raise ValueError("Simpson's rule needs an even number of intervals")
    w = np.ones(n_intervals + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (t / n_intervals) / 3.0


def _memory(op, amps, m, t, n_intervals):
    s = np.linspace(0.0, t, n_intervals + 1)
    w = _simpson_weights(n_intervals, t)
    k = amps.k
    out = np.zeros((k.size, m.size), dtype=complex)
    for sj, wj in zip(s, w):
        lag = t - sj
        if lag == 0.0 or wj == 0.0:
            continue
        ah = mean_hat(op, amps, sj)
        out += (wj * lag) * (-(k * k) * ah)[:, None] * np.exp(-1j * lag * np.outer(k, m))
    return out


def full_field(spectrum, source, data, grid, t, n_y=64, n_time=64, tol=1e-4, memory=True):
    """Snapshot(s) of u, a(u) and p = -d/dx a(u) at the times ``t``.

    The memory integral uses Simpson's rule with ``n_time`` and 2*``n_time``
    intervals; a relative disagreement above ``tol`` raises ResolutionError,
    otherwise the finer result is returned. ``memory=False`` keeps only the
    transported data.
    """
    ts = _times(t)
    op, amps = _prepare(spectrum, source, data, grid, ts.max(), n_y)
    m = op.profile.evaluate(op.y)
    u0, u1 = data.samples(grid, op.y)
    h0 = np.fft.fft(u0, axis=0)[amps.active]
    h1 = np.fft.fft(u1, axis=0)[amps.active]
    k = amps.k[:, None]
    snaps = []
    for s in ts:
        ph = np.exp(-1j * s * k * m[None, :])
        uh = ph * (h0 + s * (h1 + 1j * k * m[None, :] * h0))
        if memory and s > 0:
            coarse = _memory(op, amps, m, s, n_time)
            fine = _memory(op, amps, m, s, 2 * n_time)
            scale = max(np.abs(uh).max(), np.abs(fine).max(), 1e-300)
            gap = np.abs(fine - coarse).max() / scale
            if gap > tol:
                raise ResolutionError(
                    f"memory integral at t={s:g}: {n_time} and {2 * n_time} Simpson intervals differ by {gap:.3g}"
                )
            uh = uh + fine
        full = np.zeros((grid.n, m.size), dtype=complex)
        full[amps.active] = uh
        u = np.real(np.fft.ifft(full, axis=0))
        ah = mean_hat(op, amps, s)
        a_u = _to_grid(grid, amps, ah)
        p = _to_grid(grid, amps, -1j * amps.k * ah)
        snaps.append(FieldSnapshot(float(s), grid.x, op.y, op.y_weights, u, a_u, p))
    return snaps[0] if np.ndim(t) == 0 else snaps


# ----------------------------------------------------------------------------
# transport decomposition (u1 = 0)


@dataclass(frozen=True)
class Decomposition:
    t: float
    x: np.ndarray
    components: dict = field(default_factory=dict)

    def total(self):
        return sum(self.components.values())


def _component_labels(profile):
    if profile.kind == "pl":
        return {"a_p": [POLE], "a_c": [INTERIOR, LOCAL]}
    return {"a_p": [POLE], "a_c1": [PV, SUBTRACT], "a_c2": [LOCAL]}


def transport_decomposition(spectrum, source, data, grid, t, n_y=64):
    """Mean field split into its transport components at the times ``t``.

    Smooth profiles give a_p (exterior poles), a_c1 (jump of N across the
    velocity range) and a_c2 (local terms at M(y)); piecewise-linear profiles
    give a_p and a_c (interior poles with the local terms).
    """
    if not data.velocity_free:
        raise UnsupportedDecompositionError("the transport decomposition is available for u1 = 0 only")
    ts = _times(t)
    op, amps = _prepare(spectrum, source, data, grid, ts.max(), n_y)
    out = []
    for s in ts:
        comps = {}
        for name, labels in _component_labels(op.profile).items():
            sub = op.select(labels)
            keep = np.isin(op.labels, labels)
            part = ModeAmplitudes(amps.k, amps.active, amps.A[:, keep], amps.B[:, keep], amps.G[:, keep],
                                  amps.D[:, keep])
            comps[name] = _to_grid(grid, amps, mean_hat(sub, part, s))
        out.append(Decomposition(float(s), grid.x, comps))
    return out[0] if np.ndim(t) == 0 else out


def _u0_at(data, grid, lam, ymu, t):
    """u0(x - lam t, y) and t d/dx u0(x - lam t, y) on the grid, spectrally."""
    u0, _ = data.samples(grid, ymu)
    h = np.fft.fft(u0, axis=0) * np.exp(-1j * lam * t * grid.k)[:, None]
    val = np.real(np.fft.ifft(h, axis=0))
    der = np.real(np.fft.ifft(1j * grid.k[:, None] * h, axis=0))
    return val, t * der


def cut_component_density(spectrum, source, data, grid, lam, t, which):
    """Per-speed density of a cut component at fixed lam in (M-, M+).

    ``which`` is "a_c1" or "a_c2" for smooth profiles and "a_c" for
    piecewise-linear ones. Integrating the density over lam recovers the
    component returned by ``transport_decomposition``.
    """
    if not data.velocity_free:
        raise UnsupportedDecompositionError("the transport decomposition is available for u1 = 0 only")
    prof = source.profile if isinstance(source, DispersionTable) else source
    a, b = prof.m_minus, prof.m_plus
    if not a < lam < b:
        raise DomainError("lam must lie strictly inside the velocity range")
    if prof.kind == "pl":
        if which != "a_c":
            raise DomainError("piecewise-linear profiles have the single cut component 'a_c'")
        mu, dmu = prof.pl_inverse(np.array([lam]))
        N, dN = _pl_N(prof, np.array([lam], dtype=complex))
        N, dN = N.real[0], dN.real[0]
        jac = abs(float(dmu[0] if np.ndim(dmu) else dmu))
        total = np.zeros(grid.n)
        for lj, rj in spectrum.interior:
            val, _ = _u0_at(data, grid, lj, mu, t)
            total += (-2.0 * rj * (2.0 * lam - lj) / (lj - lam) ** 2) * val[:, 0]
        val, der = _u0_at(data, grid, lam, mu, t)
        total += 2.0 * (N - lam * dN) * val[:, 0] + 2.0 * lam * N * der[:, 0]
        return 0.5 * jac * total
    mu, dmu = prof.inverse_calculus(np.array([lam]))[:2]
    if which == "a_c2":
        N = boundary_N(prof, np.array([lam]), 1)[0].real
        dN = boundary_N_prime(prof, np.array([lam]), 1)[0].real
        val, der = _u0_at(data, grid, lam, mu, t)
        return 0.5 * abs(dmu[0]) * (2.0 * (N - lam * dN) * val[:, 0] + 2.0 * lam * N * der[:, 0])
    if which != "a_c1":
        raise DomainError("smooth profiles have cut components 'a_c1' and 'a_c2'")
    nl = boundary_N(prof, np.array([lam]), 1)[0]
    dnl = boundary_N_prime(prof, np.array([lam]), 1)[0]
    im_n, im_dn = nl.imag, dnl.imag
    # principal value in y of h(y)/(lam - M(y)), written in z = M(y)
    z, w, lg = pv_rule(np.array([lam]), a, b, n_sub=4)
    z, w = z[0], w[0]
    zz = np.concatenate([z, [lam]])
    ymu, dmu_z = prof.inverse_calculus(zz)[:2]
    val, der = _u0_at(data, grid, lam, ymu, t)
    c2 = 2.0 / np.pi
    h = c2 * ((zz * im_dn - im_n) * val + (-zz * im_n) * der) * np.abs(dmu_z)
    # 1/(lam - z) = -1/(z - lam)
    hz, hc = h[:, :-1], h[:, -1]
    pv = np.sum(w * (hz - hc[:, None]) / (z - lam), axis=1) + hc * lg[0]
    return -0.5 * pv
