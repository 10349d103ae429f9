"""The function F(lambda), the norming factor N = 1/(2 - F) and their boundary values.

F(lambda) is the cross-section integral of (M(y) - lambda)^{-2}. Off the
velocity range [M-, M+] it is analytic; for smooth profiles it has one-sided
limits on that range (the cut) given by Cauchy principal values. For
piecewise-linear profiles F is a rational function and has no cut.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._quad import (
    _gl,
    barycentric_eval,
    barycentric_weights_cheb1,
    chebyshev_points,
    composite_nodes,
)
from .errors import (
    AtPoleError,
    CutEvaluationError,
    DomainError,
    EndpointError,
    ResolutionError,
    SingularCutError,
)

OFFCUT_RTOL = 1e-10
_POLE_TOL = 1e-12
# fraction of the cut width beyond which the cross-section form of F is used
_FAR = 0.25

# normalized panel pattern for one side of a principal-value point, graded
# toward the point (t = 0) and toward the far end (t = 1)
_PV_PATTERN = np.array([0.0, 1 / 64, 1 / 16, 1 / 4, 1 / 2, 3 / 4, 15 / 16, 1.0])


# ----------------------------------------------------------------------------
# principal values


def pv_rule(c, a, b, n_sub=1, order=16):
    """Quadrature rule for principal values on [a, b] at the points c.

    Returns (nodes, weights, log_term) with nodes and weights of shape
    (len(c), K) such that for a smooth density g

        PV int_a^b g(z)/(z - c) dz
            ~= sum_k w_k (g(z_k) - g(c)) / (z_k - c) + g(c) * log_term.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    guard = 1e-12 * max(1.0, abs(a), abs(b))
    if np.any(c - a <= guard) or np.any(b - c <= guard):
        raise EndpointError("principal-value point within 1e-12 of an interval end")
    breaks = np.unique(np.concatenate([np.linspace(p, q, n_sub + 1) for p, q in zip(_PV_PATTERN[:-1], _PV_PATTERN[1:])]))
    t, wt = composite_nodes(breaks, order)
    left = (c - a)[:, None]
    right = (b - c)[:, None]
    nodes = np.concatenate([c[:, None] - left * t, c[:, None] + right * t], axis=1)
    weights = np.concatenate([left * wt, right * wt], axis=1)
    return nodes, weights, np.log((b - c) / (c - a))


def pv_cauchy(g, c, a, b, *, tol=1e-12, max_sub=64):
    """Principal value of int_a^b g(z)/(z - c) dz by singularity subtraction.

    ``g`` is a vectorized density; ``c`` may be a scalar or an array of
    points strictly inside (a, b). The panel count is doubled until two
    successive answers agree to ``tol`` (relative to the density scale).
    """
    scalar = np.ndim(c) == 0
    c = np.atleast_1d(np.asarray(c, dtype=float))
    gc = np.asarray(g(c))
    prev = None
    n_sub = 1
    while True:
        z, w, lg = pv_rule(c, a, b, n_sub)
        gz = np.asarray(g(z))
        val = np.sum(w * (gz - gc[:, None]) / (z - c[:, None]), axis=1) + gc * lg
        if prev is not None:
            scale = max(np.max(np.abs(gz)), 1e-300) * (b - a)
            if np.max(np.abs(val - prev)) <= tol * scale:
                break
            if n_sub >= max_sub:
                raise ResolutionError("principal-value quadrature did not converge")
        prev = val
        n_sub *= 2
    return val[0] if scalar else val


# ----------------------------------------------------------------------------
# smooth profiles: Cauchy integrals off the cut


def _sinh_side(p, delta, length, n):
    """Nodes s >= 0 and weights on [0, length] clustered at 0 with scale delta."""
    x, w = _gl(n)
    umax = np.arcsinh(length / delta)
    u = 0.5 * umax[:, None] * (x + 1.0)
    s = delta[:, None] * np.sinh(u)
    ws = 0.5 * umax[:, None] * w * delta[:, None] * np.cosh(u)
    return s, ws


def _cauchy_offcut(g, lam, a, b, rtol=OFFCUT_RTOL):
    """int_a^b g(z)/(z - lam) dz for complex lam off [a, b].

    The density value at the nearest cut point p is subtracted and its
    integral added back exactly; the remainder is integrated with Gauss
    rules in sinh-stretched variables centred at p, doubled until converged.
    """
    lam = np.asarray(lam, dtype=complex)
    p = np.clip(lam.real, a, b)
    delta = np.abs(lam - p)
    gp = g(p)
    exact = gp * np.log((b - lam) / (a - lam))
    ll, lr = p - a, b - p
    out = None
    n = 32
    while n <= 4096:
        total = np.zeros(lam.shape, dtype=complex)
        for length, sgn in ((ll, -1.0), (lr, 1.0)):
            live = length > 0
            if not np.any(live):
                continue
            s, ws = _sinh_side(p[live], delta[live], length[live], n)
            z = p[live][:, None] + sgn * s
            rem = (g(z) - gp[live][:, None]) / (z - lam[live][:, None])
            total[live] += np.sum(ws * rem, axis=1)
        if out is not None:
            scale = np.abs(total) + np.abs(gp) * (b - a) + 1e-300
            if np.all(np.abs(total - out) <= rtol * scale):
                return total + exact
        out = total
        n *= 2
    raise ResolutionError("off-cut Cauchy integral did not converge")


def _yform(profile, lam, power, rtol=OFFCUT_RTOL, n_panels=8):
    """int_{-1}^{1} (M(y) - lam)^{-power} dy by composite Gauss rules."""
    lam = np.asarray(lam, dtype=complex)
    out = None
    while n_panels <= 4096:
        y, w = composite_nodes(np.linspace(-1.0, 1.0, n_panels + 1), 16)
        m = profile.evaluate(y)
        val = (w[None, :] / (m[None, :] - lam[:, None]) ** power).sum(axis=1)
        if out is not None and np.all(np.abs(val - out) <= rtol * (np.abs(val) + 1e-300)):
            return val
        out = val
        n_panels *= 2
    raise ResolutionError("cross-section quadrature did not converge")


def _endpoint_terms(profile, lam):
    """Boundary terms of the integrated-by-parts forms of F and F'."""
    r, r1, _ = profile.density(np.array([profile.m_minus, profile.m_plus]))
    dm = profile.m_minus - lam
    dp = profile.m_plus - lam
    bF = -(r[1] / dp - r[0] / dm)
    bF1 = -(r[1] / dp**2 - r[0] / dm**2) - (r1[1] / dp - r1[0] / dm)
    return bF, bF1


def _smooth_F(profile, lam, derivative):
    lam = np.asarray(lam, dtype=complex)
    a, b = profile.m_minus, profile.m_plus
    dist = np.abs(lam - np.clip(lam.real, a, b))
    far = dist >= _FAR * (b - a)
    out = np.empty(lam.shape, dtype=complex)
    if np.any(far):
        if derivative:
            out[far] = 2.0 * _yform(profile, lam[far], 3)
        else:
            out[far] = _yform(profile, lam[far], 2)
    near = ~far
    if np.any(near):
        ln = lam[near]
        bF, bF1 = _endpoint_terms(profile, ln)
        k = 2 if derivative else 1
        dens = lambda z: profile.density(z)[k]
        out[near] = (bF1 if derivative else bF) + _cauchy_offcut(dens, ln, a, b)
    return out


# ----------------------------------------------------------------------------
# piecewise-linear profiles: rational closed forms


def _pl_data(profile):
    nodes = np.asarray(profile.values, dtype=float)
    c = 1.0 / profile.slopes
    d = np.concatenate([c, [0.0]]) - np.concatenate([[0.0], c])
    return nodes, d


def _prod_except(D):
    """Products of each row of D with one column left out, without division."""
    ones = np.ones(D.shape[:-1] + (1,), dtype=D.dtype)
    pre = np.cumprod(np.concatenate([ones, D[..., :-1]], axis=-1), axis=-1)
    suf = np.cumprod(np.concatenate([ones, D[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return pre * suf


def _pl_parts(profile, lam):
    """Q = prod(M_j - lam), its derivative, P = F*Q - 2Q and its derivative."""
    nodes, d = _pl_data(profile)
    D = nodes[None, :] - lam[:, None]
    pe = _prod_except(D)
    Q = pe[:, 0] * D[:, 0]
    R = pe @ d
    dQ = -pe.sum(axis=1)
    n = nodes.size
    dR = np.zeros(lam.shape, dtype=lam.dtype)
    for j in range(n):
        Dj = np.delete(D, j, axis=1)
        dR -= d[j] * _prod_except(Dj).sum(axis=1)
    P = R - 2.0 * Q
    dP = dR - 2.0 * dQ
    return Q, dQ, P, dP


def _pl_F(profile, lam, derivative):
    nodes, d = _pl_data(profile)
    diff = nodes[None, :] - lam[:, None]
    if np.any(diff == 0):
        raise CutEvaluationError("F is infinite at a breakpoint value of a piecewise-linear profile")
    return (d / diff**2).sum(axis=1) if derivative else (d / diff).sum(axis=1)


# ----------------------------------------------------------------------------
# public evaluators


def _on_cut(profile, lam):
    return (lam.imag == 0) & (lam.real >= profile.m_minus) & (lam.real <= profile.m_plus)


def _prepare(profile, lam):
    arr = np.asarray(lam, dtype=complex)
    flat = np.atleast_1d(arr).ravel()
    if profile.kind != "pl" and np.any(_on_cut(profile, flat)):
        raise CutEvaluationError("lambda lies on the cut [M-, M+]; use boundary_N / boundary_N_prime")
    return arr, flat


def _finish(arr, vals):
    vals = vals.reshape(np.shape(arr))
    return complex(vals) if vals.ndim == 0 else vals


def eval_F(profile, lam):
    """F(lambda) = int (M(y) - lambda)^{-2} dy off the cut."""
    arr, flat = _prepare(profile, lam)
    vals = _pl_F(profile, flat, False) if profile.kind == "pl" else _smooth_F(profile, flat, False)
    return _finish(arr, vals)


def eval_F_prime(profile, lam):
    """dF/dlambda = 2 int (M(y) - lambda)^{-3} dy off the cut."""
    arr, flat = _prepare(profile, lam)
    vals = _pl_F(profile, flat, True) if profile.kind == "pl" else _smooth_F(profile, flat, True)
    return _finish(arr, vals)


def _pl_N(profile, lam):
    Q, dQ, P, dP = _pl_parts(profile, lam)
    scale = np.abs(Q) + np.abs(P)
    if np.any(np.abs(P) <= _POLE_TOL * scale):
        raise AtPoleError("lambda is at a pole of N")
    N = -Q / P
    dN = -(dQ * P - Q * dP) / P**2
    return N, dN


def eval_N(profile, lam):
    """Norming factor N = 1/(2 - F)."""
    arr, flat = _prepare(profile, lam)
    if profile.kind == "pl":
        return _finish(arr, _pl_N(profile, flat)[0])
    g = 2.0 - _smooth_F(profile, flat, False)
    if np.any(np.abs(g) < _POLE_TOL):
        raise AtPoleError("lambda is at a pole of N")
    return _finish(arr, 1.0 / g)


def eval_N_prime(profile, lam):
    """dN/dlambda = F' N^2."""
    arr, flat = _prepare(profile, lam)
    if profile.kind == "pl":
        return _finish(arr, _pl_N(profile, flat)[1])
    g = 2.0 - _smooth_F(profile, flat, False)
    if np.any(np.abs(g) < _POLE_TOL):
        raise AtPoleError("lambda is at a pole of N")
    return _finish(arr, _smooth_F(profile, flat, True) / g**2)


# ----------------------------------------------------------------------------
# boundary values on the cut


def endpoint_N_prime(profile):
    """Limits of N' at (M-, M+) along the cut.

    Near an end N behaves like (lambda - M-)/|mu'(M-)| and
    (M+ - lambda)/|mu'(M+)| respectively, so the limits are
    1/|mu'(M-)| and -1/|mu'(M+)|.
    """
    r, _, _ = profile.density(np.array([profile.m_minus, profile.m_plus]))
    return 1.0 / r[0], -1.0 / r[1]


def _boundary_F(profile, lam, side):
    a, b = profile.m_minus, profile.m_plus
    bF, bF1 = _endpoint_terms(profile, lam)
    _, r1, r2 = profile.density(lam)
    pv1 = pv_cauchy(lambda z: profile.density(z)[1], lam, a, b)
    pv2 = pv_cauchy(lambda z: profile.density(z)[2], lam, a, b)
    F = bF + pv1 + side * 1j * np.pi * r1
    F1 = bF1 + pv2 + side * 1j * np.pi * r2
    return F, F1


def _boundary(profile, lam, side, want_prime):
    if side not in (1, -1, "+", "-"):
        raise ValueError("side must be +1 or -1")
    side = 1 if side in (1, "+") else -1
    arr = np.asarray(lam, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    if profile.kind == "pl":
        N, dN = _pl_N(profile, flat.astype(complex))
        return _finish(arr, dN if want_prime else N)
    a, b = profile.m_minus, profile.m_plus
    if np.any(flat < a) or np.any(flat > b):
        raise DomainError(f"lambda outside the cut [{a}, {b}]")
    out = np.zeros(flat.shape, dtype=complex)
    lo, hi = flat == a, flat == b
    if want_prime:
        e_lo, e_hi = endpoint_N_prime(profile)
        out[lo], out[hi] = e_lo, e_hi
    inner = ~(lo | hi)
    if np.any(inner):
        li = flat[inner]
        F, F1 = _boundary_F(profile, li, side)
        g = 2.0 - F
        if np.any(np.abs(g) < _POLE_TOL):
            raise SingularCutError("2 - F vanishes on the cut; the profile has a real interior pole")
        out[inner] = F1 / g**2 if want_prime else 1.0 / g
    return _finish(arr, out)


def boundary_N(profile, lam, side=1):
    """One-sided limit N(lambda +/- i0) for lambda in [M-, M+] (zero at the ends)."""
    return _boundary(profile, lam, side, False)


def boundary_N_prime(profile, lam, side=1):
    """One-sided limit of N' for lambda in [M-, M+], extended continuously to the ends."""
    return _boundary(profile, lam, side, True)


# ----------------------------------------------------------------------------
# tabulated boundary values


@dataclass(frozen=True, eq=False)
class DispersionTable:
    """Boundary values N+ and N+' sampled at Chebyshev points of the cut.

    The imaginary parts (the densities of the cut integrals) and the real
    parts are available between nodes through barycentric interpolation.
    """

    profile: object
    nodes: np.ndarray
    N_plus: np.ndarray
    Nprime_plus: np.ndarray
    end_N: tuple
    end_Nprime: tuple

    def __post_init__(self):
        object.__setattr__(self, "_bw", barycentric_weights_cheb1(self.nodes.size))

    @property
    def size(self):
        return self.nodes.size

    def _interp(self, values, lam):
        return barycentric_eval(self.nodes, self._bw, values, lam)

    def im_N(self, lam):
        return self._interp(self.N_plus.imag, lam)

    def re_N(self, lam):
        return self._interp(self.N_plus.real, lam)

    def im_Nprime(self, lam):
        return self._interp(self.Nprime_plus.imag, lam)

    def re_Nprime(self, lam):
        return self._interp(self.Nprime_plus.real, lam)

    def exact(self, lam):
        """Direct (N+, N+') at points of the cut, bypassing the table."""
        return boundary_N(self.profile, lam, 1), boundary_N_prime(self.profile, lam, 1)

    def rows(self):
        """(lambda, N+, N+') including both endpoints, in increasing lambda."""
        lam = np.concatenate([[self.profile.m_minus], self.nodes, [self.profile.m_plus]])
        N = np.concatenate([[self.end_N[0]], self.N_plus, [self.end_N[1]]])
        dN = np.concatenate([[self.end_Nprime[0]], self.Nprime_plus, [self.end_Nprime[1]]])
        return lam, N, dN


def build_table(profile, Q=513):
    """Tabulate N+ and N+' at Q Chebyshev points of the cut."""
    if Q < 3:
        raise ValueError("the cut grid needs at least 3 nodes")
    nodes = chebyshev_points(Q, profile.m_minus, profile.m_plus)
    if profile.kind == "pl":
        N, dN = _pl_N(profile, nodes.astype(complex))
        ends = _pl_N(profile, np.array([profile.m_minus, profile.m_plus], dtype=complex))
        return DispersionTable(profile, nodes, N, dN, tuple(ends[0]), tuple(ends[1]))
    N = boundary_N(profile, nodes, 1)
    dN = boundary_N_prime(profile, nodes, 1)
    return DispersionTable(profile, nodes, N, dN, (0j, 0j), tuple(complex(v) for v in endpoint_N_prime(profile)))
