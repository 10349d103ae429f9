"""Fourier-space kernels of the mean field and their assembly.

For k > 0 the transform of the mean field is built from

    I_l(kt, y) = int_{Im lambda = const > 0} exp(-ik lambda t) N(lambda) / (lambda - M(y))^{l+1} dlambda

(l = 0, 1) and the regularized kernel I(k, t, y) = I_1(kt, y)/(2 pi k), which
stays finite at k = 0. Each is split into a contribution of the real poles
of N outside the velocity range and a contribution of the velocity range
itself: a principal-value integral with the jump of N across the range for
smooth profiles, or residues at the interior poles and at M(y) for
piecewise-linear ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import sici

from ._quad import _gl
from .dispersion import DispersionTable, boundary_N, boundary_N_prime, build_table, _pl_N
from .errors import (
    ContractError,
    DomainError,
    EndpointError,
    PoleCollisionError,
    ResolutionError,
    UnsupportedProfileError,
)
from .profile import y_quadrature

MAX_KT = 1e4
_ORDER = 16
_ENDPOINT_LEVELS = 3


def phi(lam, k, t):
    """(exp(-i k lam t) - 1)/k, continued to -i lam t at k = 0."""
    theta = k * lam * t
    return -1j * lam * t * np.sinc(theta / (2.0 * np.pi)) * np.exp(-0.5j * theta)


# ----------------------------------------------------------------------------
# principal values with an oscillatory factor


def _side_pattern(kappa, length, near=1.0, n_min=4):
    """Normalized panel breaks on [0, 1] for a side of length ``length``.

    Panels are at most pi/(4 kappa) wide in absolute terms and are graded
    geometrically toward t = 1, the end of the velocity range. ``near`` is the
    smallest ratio of the opposite side to this one; the end behind c sits at
    that normalized distance, so panels are also graded toward t = 0 down to it.
    """
    if length <= 0:
        return np.array([0.0, 1.0])
    h = length / n_min
    if kappa > 0:
        h = min(h, np.pi / (4.0 * kappa))
    n = max(n_min, int(np.ceil(length / h)))
    t = np.linspace(0.0, 1.0, n + 1)
    last = t[-1] - t[-2]
    extra = 1.0 - last * 0.25 ** np.arange(1, _ENDPOINT_LEVELS + 1)
    first = t[1]
    levels = int(np.ceil(np.log(first / max(near, 1e-8)) / np.log(4.0))) + 1 if near < first else 0
    start = first * 0.25 ** np.arange(1, levels + 1)
    return np.unique(np.concatenate([t, extra, start]))


def _pv_nodes(c, a, b, kappa):
    """Nodes (m, K) and weights on both sides of each c in (a, b)."""
    x, w = _gl(_ORDER)
    out_nodes, out_weights = [], []
    left, right = c - a, b - c
    for sgn, lengths, other in ((-1.0, left, right), (1.0, right, left)):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where((lengths > 0) & (other > 0), other / lengths, np.inf)
        brk = _side_pattern(kappa, float(np.max(lengths)), float(np.min(ratio)))
        lo, hi = brk[:-1], brk[1:]
        t = (0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * x).ravel()
        wt = (0.5 * (hi - lo)[:, None] * w).ravel()
        out_nodes.append(c[:, None] + sgn * lengths[:, None] * t)
        out_weights.append(lengths[:, None] * wt)
    return np.concatenate(out_nodes, axis=1), np.concatenate(out_weights, axis=1)


def _end_rows(c, a, b, dc):
    """Rows with c on an end of [a, b]; the density must vanish there."""
    at_end = (c <= a) | (c >= b)
    if np.any(np.abs(dc[at_end]) > 1e-6):
        raise EndpointError("principal value at an interval end with a nonzero density")
    return at_end


def _exp_pv(kappa, a, b):
    """PV int_a^b exp(-i kappa nu)/nu dnu for a < 0 < b and kappa >= 0."""
    a = np.abs(a)
    out = np.log(b / a).astype(complex)
    if kappa > 0:
        sb, cb = sici(kappa * b)
        sa, ca = sici(kappa * a)
        out = out + (cb - np.log(kappa * b)) - (ca - np.log(kappa * a)) - 1j * (sb + sa)
    return out


def osc_pv(density, c, a, b, kappa):
    """PV int_a^b exp(-i kappa lam) density(lam)/(lam - c) dlam for each c.

    The density value at c is subtracted; its integral against the
    oscillatory Cauchy kernel is added back in closed form with sine and
    cosine integrals. At an end of [a, b] the density must vanish and the
    integral is an ordinary one.
    """
    if kappa < 0:
        raise DomainError("kappa must be non-negative")
    if kappa > MAX_KT:
        raise ResolutionError(f"|kt| = {kappa:g} exceeds the oscillation budget {MAX_KT:g}; raise MAX_KT")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    lam, w = _pv_nodes(c, a, b, kappa)
    dc = density(c)
    end = _end_rows(c, a, b, dc)
    nu = lam - c[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        rem = np.where(w > 0, (density(lam.ravel()).reshape(lam.shape) - dc[:, None]) / nu, 0.0)
    body = np.sum(w * np.exp(-1j * kappa * nu) * rem, axis=1)
    inner = ~end
    body[inner] += dc[inner] * _exp_pv(kappa, a - c[inner], b - c[inner])
    return np.exp(-1j * kappa * c) * body


def plain_pv(values_at, c, a, b, kappa):
    """PV int_a^b h(lam)/(lam - c) dlam for a density h oscillating at rate kappa.

    ``values_at(lam, c)`` returns h at the nodes (m, K) for the rows c.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    lam, w = _pv_nodes(c, a, b, kappa)
    hc = values_at(c[:, None], c)[:, 0]
    end = _end_rows(c, a, b, hc)
    h = values_at(lam, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sum(np.where(w > 0, w * (h - hc[:, None]) / (lam - c[:, None]), 0.0), axis=1)
    inner = ~end
    out[inner] += hc[inner] * np.log((b - c[inner]) / (c[inner] - a))
    return out


# ----------------------------------------------------------------------------
# kernel evaluations


@dataclass(frozen=True)
class KernelEvaluation:
    kt: float
    y: np.ndarray
    I0_p: np.ndarray
    I0_c: np.ndarray
    I1_p: np.ndarray
    I1_c: np.ndarray
    I_p: np.ndarray | None = None
    I_c: np.ndarray | None = None

    @property
    def I0(self):
        return self.I0_p + self.I0_c

    @property
    def I1(self):
        return self.I1_p + self.I1_c

    @property
    def I(self):
        return None if self.I_p is None else self.I_p + self.I_c


def _m_of(profile, y):
    return profile.evaluate(np.atleast_1d(np.asarray(y, dtype=float)))


def pole_kernel(spectrum, profile, ell, kt, y):
    """Exterior-pole part -2 pi i sum exp(-i kt lam) res/(lam - M(y))^{l+1}."""
    if ell not in (0, 1):
        raise ValueError("ell must be 0 or 1")
    m = _m_of(profile, y)
    out = np.zeros(m.shape, dtype=complex)
    for lam, res in spectrum.exterior():
        out += np.exp(-1j * kt * lam) * res / (lam - m) ** (ell + 1)
    return -2j * np.pi * out


def _table_for(source):
    if isinstance(source, DispersionTable):
        return source
    if source.kind == "pl":
        raise UnsupportedProfileError("cut_kernel_smooth needs a smooth profile")
    return build_table(source)


def _local_values(table, m):
    """Direct Re N(m), Re N'(m) on the cut (table interpolation of the real
    parts is too coarse next to the ends)."""
    N, dN = boundary_N(table.profile, m, 1), boundary_N_prime(table.profile, m, 1)
    return np.real(N), np.real(dN)


def cut_kernel_smooth(table, ell, kt, y):
    """Contribution of the velocity range to I_l for a smooth profile."""
    if ell not in (0, 1):
        raise ValueError("ell must be 0 or 1")
    if kt < 0:
        raise DomainError("kernels are defined for kt >= 0; use conjugate symmetry for k < 0")
    table = _table_for(table)
    prof = table.profile
    a, b = prof.m_minus, prof.m_plus
    m = _m_of(prof, y)
    re_n, re_dn = _local_values(table, m)
    phase = np.exp(-1j * kt * m)
    i0 = 2j * osc_pv(table.im_N, m, a, b, kt) - 2j * np.pi * re_n * phase
    if ell == 0:
        return i0
    return -1j * kt * i0 + 2j * osc_pv(table.im_Nprime, m, a, b, kt) - 2j * np.pi * re_dn * phase


def _pl_local(spectrum, profile, m):
    lams = spectrum.interior_lambdas
    if lams.size:
        gap = np.abs(m[:, None] - lams[None, :])
        if np.any(gap <= 1e-9):
            i, j = np.argwhere(gap <= 1e-9)[0]
            raise PoleCollisionError(f"M(y) at node {i} coincides with interior pole {j}")
    N, dN = _pl_N(profile, m.astype(complex))
    return np.real(N), np.real(dN), lams, spectrum.interior_residues


def cut_kernel_pl(spectrum, profile, ell, kt, y):
    """Residues at the interior poles and at M(y) for a piecewise-linear profile."""
    if ell not in (0, 1):
        raise ValueError("ell must be 0 or 1")
    m = _m_of(profile, y)
    N, dN, lams, res = _pl_local(spectrum, profile, m)
    diff = lams[None, :] - m[:, None]
    ej = np.exp(-1j * kt * lams)[None, :]
    phase = np.exp(-1j * kt * m)
    if ell == 0:
        return -2j * np.pi * ((ej * res / diff).sum(axis=1) + phase * N)
    return -2j * np.pi * ((ej * res / diff**2).sum(axis=1) - 1j * kt * phase * N + phase * dN)


def _regularized_pole(spectrum, m, k, t):
    out = np.zeros(m.shape, dtype=complex)
    for lam, res in spectrum.exterior():
        out += -1j * phi(lam, k, t) * res / (lam - m) ** 2
    return out


def _regularized_cut(spectrum, source, m, k, t):
    if not isinstance(source, DispersionTable) and source.kind == "pl":
        N, dN, lams, res = _pl_local(spectrum, source, m)
        part = (-1j * phi(lams, k, t)[None, :] * res / (lams[None, :] - m[:, None]) ** 2).sum(axis=1)
        return part - t * np.exp(-1j * k * m * t) * N - 1j * phi(m, k, t) * dN
    table = _table_for(source)
    prof = table.profile
    a, b = prof.m_minus, prof.m_plus
    kappa = abs(k) * t
    re_n, re_dn = _local_values(table, m)
    first = (t / np.pi) * osc_pv(table.im_N, m, a, b, kappa)
    second = (1j / np.pi) * plain_pv(lambda lam, c: phi(lam, k, t) * table.im_Nprime(lam), m, a, b, kappa)
    return first + second - t * np.exp(-1j * k * m * t) * re_n - 1j * phi(m, k, t) * re_dn


def regularized_kernel(spectrum, source, k, t, y):
    """I(k, t, y) = I_1(kt, y)/(2 pi k), finite at k = 0 (k >= 0, t >= 0)."""
    if t < 0:
        raise DomainError("t must be non-negative")
    if k < 0:
        raise DomainError("the regularized kernel is evaluated for k >= 0; use conjugate symmetry")
    prof = source.profile if isinstance(source, DispersionTable) else source
    m = _m_of(prof, y)
    return _regularized_pole(spectrum, m, k, t) + _regularized_cut(spectrum, source, m, k, t)


def _cut(spectrum, source, ell, kt, y):
    if isinstance(source, DispersionTable):
        return cut_kernel_smooth(source, ell, kt, y)
    if source.kind == "pl":
        return cut_kernel_pl(spectrum, source, ell, kt, y)
    return cut_kernel_smooth(source, ell, kt, y)


def kernel(spectrum, source, ell, kt, y):
    """I_l(kt, y) = pole part + cut part."""
    prof = source.profile if isinstance(source, DispersionTable) else source
    return pole_kernel(spectrum, prof, ell, kt, y) + _cut(spectrum, source, ell, kt, y)


def evaluate_kernels(spectrum, source, k, t, y):
    """All kernels at one (k, t) on the points y, with their parts kept apart."""
    prof = source.profile if isinstance(source, DispersionTable) else source
    kt = k * t
    m = _m_of(prof, y)
    return KernelEvaluation(
        kt=kt,
        y=np.atleast_1d(np.asarray(y, dtype=float)),
        I0_p=pole_kernel(spectrum, prof, 0, kt, y),
        I0_c=_cut(spectrum, source, 0, kt, y),
        I1_p=pole_kernel(spectrum, prof, 1, kt, y),
        I1_c=_cut(spectrum, source, 1, kt, y),
        I_p=_regularized_pole(spectrum, m, k, t),
        I_c=_regularized_cut(spectrum, source, m, k, t),
    )


# ----------------------------------------------------------------------------
# line-contour reference


def line_kernel(profile, ell, kt, y, lam_imag=0.25, reach=3000.0):
    """I_l(kt, y) by direct quadrature along Im lambda = lam_imag.

    N is split as 1/2 + (N - 1/2); the constant part is integrated in closed
    form and the remainder, which decays like |lambda|^{-3-l}, numerically
    on |Re lambda - centre| <= reach. N is evaluated from its defining
    cross-section integral, independently of the cut machinery.
    """
    from .dispersion import _yform

    if kt <= 0:
        raise DomainError("the line reference is used for kt > 0")
    m = float(_m_of(profile, y)[0])
    centre = 0.5 * (profile.m_minus + profile.m_plus)
    inner = 2.0 * profile.width + 2.0
    fine = min(0.05, lam_imag / 5)
    coarse = np.pi / (4.0 * kt)
    breaks = [centre + s for s in np.arange(-inner, inner + 1e-12, fine)]
    x = inner
    outer = []
    while x < reach:
        step = min(max(fine, 0.2 * x), coarse)
        x = min(x + step, reach)
        outer.append(x)
    outer = np.array(outer)
    breaks = np.unique(np.concatenate([centre - outer[::-1], breaks, centre + outer]))
    xr, wr = _gl(_ORDER)
    lo, hi = breaks[:-1], breaks[1:]
    xs = (0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * xr).ravel()
    ws = (0.5 * (hi - lo)[:, None] * wr).ravel()
    lam = xs + 1j * lam_imag
    if profile.kind == "pl":
        N = _pl_N(profile, lam)[0]
    else:
        N = np.empty(lam.shape, dtype=complex)
        for chunk in np.array_split(np.arange(lam.size), max(1, lam.size // 4000)):
            N[chunk] = 1.0 / (2.0 - _yform(profile, lam[chunk], 2, rtol=1e-12))
    rem = np.sum(ws * np.exp(-1j * kt * lam) * (N - 0.5) / (lam - m) ** (ell + 1))
    closed = -1j * np.pi * np.exp(-1j * kt * m) if ell == 0 else -np.pi * kt * np.exp(-1j * kt * m)
    return closed + rem


# ----------------------------------------------------------------------------
# assembly of the mean field transform


@dataclass(frozen=True, eq=False)
class KernelSet:
    """Spectrum, dispersion data and the fixed cross-section quadrature."""

    spectrum: object
    source: object
    y_nodes: np.ndarray
    y_weights: np.ndarray

    @property
    def profile(self):
        return self.source.profile if isinstance(self.source, DispersionTable) else self.source


def make_kernel_set(spectrum, source, n_y=64):
    prof = source.profile if isinstance(source, DispersionTable) else source
    if prof.kind != "pl" and not isinstance(source, DispersionTable):
        source = build_table(prof)
    y, w = y_quadrature(prof, n_y)
    return KernelSet(spectrum, source, y, w)


def assemble_mean_hat(kernels, u0_hat, u1_hat, k, t):
    """Fourier transform of the mean field at wavenumber k and time t.

    u0_hat, u1_hat are the data transforms on ``kernels.y_nodes``. Negative k
    is reduced to positive k by conjugating data and result.
    """
    u0_hat = np.asarray(u0_hat, dtype=complex)
    u1_hat = np.asarray(u1_hat, dtype=complex)
    n = kernels.y_nodes.size
    if u0_hat.shape != (n,) or u1_hat.shape != (n,):
        raise ContractError(f"data must be sampled on the {n} kernel nodes")
    if k < 0:
        return np.conj(assemble_mean_hat(kernels, np.conj(u0_hat), np.conj(u1_hat), -k, t))
    ev = evaluate_kernels(kernels.spectrum, kernels.source, k, t, kernels.y_nodes)
    m = kernels.profile.evaluate(kernels.y_nodes)
    avg = lambda f: 0.5 * np.sum(kernels.y_weights * f)
    a0 = (-1j / np.pi) * avg((m * ev.I1 - ev.I0) * u0_hat)
    a1 = -2.0 * avg(ev.I * u1_hat)
    return a0 + a1
