"""Poles of the norming factor and the stability certificate.

The poles of N are the roots of F(lambda) = 2. Real roots outside the
velocity range carry pure transport at their own speed; for piecewise-linear
profiles further real roots may sit inside the range. A root with nonzero
imaginary part would grow exponentially in time, so the quasi-explicit
solution is only offered when none exists.

Any root satisfies dist(lambda, [M-, M+]) <= 1 because |F| <= 2/d^2, which
fixes the default search region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from ._quad import _gl
from .dispersion import _pl_data, eval_F, eval_F_prime
from .errors import DegenerateRootError, SpectrumIncompleteError

REAL_TOL = 1e-9
_BOX_MARGIN = 1.1
_CUT_GAP = 1e-6
_INTEGER_GUARD = 0.25


@dataclass(frozen=True)
class Spectrum:
    """Real poles of N with residues, and the stability verdict."""

    lambda_minus: float | None
    res_minus: float | None
    lambda_plus: float | None
    res_plus: float | None
    interior: tuple = ()
    verdict: str = "Undetermined"
    complex_roots: tuple = ()
    region: tuple = ()
    tol: float = REAL_TOL
    diagnostics: dict = field(default_factory=dict)

    @property
    def stable(self):
        return self.verdict == "Stable"

    @property
    def interior_lambdas(self):
        return np.array([lam for lam, _ in self.interior], dtype=float)

    @property
    def interior_residues(self):
        return np.array([r for _, r in self.interior], dtype=float)

    def exterior(self):
        """((lambda-, res-), (lambda+, res+)), raising if either is missing."""
        if self.lambda_minus is None or self.lambda_plus is None:
            raise SpectrumIncompleteError("an exterior pole is missing")
        return (self.lambda_minus, self.res_minus), (self.lambda_plus, self.res_plus)

    def to_dict(self):
        return {
            "lambda_minus": self.lambda_minus,
            "res_minus": self.res_minus,
            "lambda_plus": self.lambda_plus,
            "res_plus": self.res_plus,
            "interior": [{"lambda": lam, "res": r} for lam, r in self.interior],
            "verdict": self.verdict,
            "complex_roots": [[z.real, z.imag] for z in self.complex_roots],
            "region": list(self.region),
            "tol": self.tol,
            "diagnostics": self.diagnostics,
        }


def _real_F(profile, lam):
    return float(np.real(eval_F(profile, complex(lam))))


def _polish(profile, lam, steps=6):
    for _ in range(steps):
        step = (eval_F(profile, lam) - 2.0) / eval_F_prime(profile, lam)
        lam = lam - step
        if abs(step) <= 1e-15 * max(1.0, abs(lam)):
            break
    return lam


def _exterior_root(profile, side):
    width = profile.width
    edge = profile.m_plus if side > 0 else profile.m_minus
    delta = 1e-8 * width
    near = edge + side * delta
    if _real_F(profile, near) < 2.0:
        return None
    reach = width
    while _real_F(profile, edge + side * reach) >= 2.0:
        reach *= 2.0
        if reach > 1e8 * max(1.0, width):
            return None
    lo, hi = sorted((near, edge + side * reach))
    lam = brentq(lambda s: _real_F(profile, s) - 2.0, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    lam = float(np.real(_polish(profile, complex(lam))))
    return lam, float(-1.0 / np.real(eval_F_prime(profile, complex(lam))))


def find_exterior_poles(profile):
    """(lambda-, res-, lambda+, res+); a missing pole is reported as None."""
    left = _exterior_root(profile, -1)
    right = _exterior_root(profile, 1)
    lm, rm = left if left else (None, None)
    lp, rp = right if right else (None, None)
    return lm, rm, lp, rp


def pl_polynomial(profile):
    """Coefficients (low to high) of P with P = 0 exactly where F = 2.

    P(lambda) = sum_j d_j prod_{i != j}(M_i - lambda) - 2 prod_i (M_i - lambda)
    where F = sum_j d_j/(M_j - lambda).
    """
    nodes, d = _pl_data(profile)
    n = nodes.size
    # prod (M_i - lambda) = (-1)^n prod (lambda - M_i)
    full = (-1.0) ** n * P.polyfromroots(nodes)
    coeffs = -2.0 * full
    for j in range(n):
        others = np.delete(nodes, j)
        coeffs = P.polyadd(coeffs, d[j] * (-1.0) ** (n - 1) * P.polyfromroots(others))
    return coeffs


def _pl_roots(profile):
    roots = P.polyroots(pl_polynomial(profile))
    return np.array([_polish(profile, complex(z)) for z in roots])


def find_interior_poles(profile):
    """Real poles of N inside (M-, M+) with residues, for piecewise-linear profiles."""
    info = _classify_pl(profile)
    return info["interior"]


def _classify_pl(profile):
    roots = _pl_roots(profile)
    nodes = np.asarray(profile.values)
    real, cplx = [], []
    for z in roots:
        if abs(z.imag) <= REAL_TOL * (1.0 + abs(z)):
            real.append(z.real)
        else:
            cplx.append(z)
    real = np.sort(np.array(real))
    for lam in real:
        if np.min(np.abs(nodes - lam)) <= 1e-9:
            raise DegenerateRootError(f"root {lam!r} collides with a breakpoint value")
    multiple = bool(np.any(np.diff(real) <= 1e-7 * (1.0 + np.abs(real[1:])))) if real.size > 1 else False
    interior = []
    for lam in real:
        if profile.m_minus < lam < profile.m_plus:
            interior.append((float(lam), float(-1.0 / np.real(eval_F_prime(profile, complex(lam))))))
    exterior = real[(real < profile.m_minus) | (real > profile.m_plus)]
    return {
        "interior": interior,
        "exterior": exterior,
        "complex": sorted(cplx, key=lambda z: (z.real, z.imag)),
        "multiple": multiple,
    }


@dataclass(frozen=True)
class StabilityCertificate:
    verdict: str
    complex_roots: tuple
    region: tuple
    tol: float
    winding: tuple = ()
    notes: tuple = ()


def default_region(profile, scale=1.0):
    m = _BOX_MARGIN * scale
    return (profile.m_minus - m, profile.m_plus + m, -m, m)


def _log_derivative(profile, z):
    g = eval_F(profile, z) - 2.0
    return eval_F_prime(profile, z) / g, np.abs(g)


def _edge_integral(profile, a, b, abs_tol=1e-9, max_rounds=80):
    """Adaptive Gauss integral of F'/(F - 2) along the segment [a, b]."""
    x, w = _gl(8)
    segs = [(a, b)]
    total = 0.0 + 0.0j
    min_abs = np.inf
    for _ in range(max_rounds):
        if not segs:
            return total, min_abs
        s0 = np.array([s[0] for s in segs])
        s1 = np.array([s[1] for s in segs])
        mid = 0.5 * (s0 + s1)
        pts = []
        for lo, hi in ((s0, s1), (s0, mid), (mid, s1)):
            h = 0.5 * (hi - lo)
            pts.append(((lo + hi) * 0.5)[:, None] + h[:, None] * x[None, :])
        allpts = np.concatenate(pts, axis=1)
        vals, mags = _log_derivative(profile, allpts.ravel())
        min_abs = min(min_abs, float(mags.min()))
        vals = vals.reshape(allpts.shape)
        k = x.size
        whole = 0.5 * (s1 - s0) * (vals[:, :k] @ w)
        halves = 0.25 * (s1 - s0) * (vals[:, k : 2 * k] @ w + vals[:, 2 * k :] @ w)
        err = np.abs(whole - halves)
        tiny = np.abs(s1 - s0) < 1e-13
        done = (err <= abs_tol) | tiny
        total += halves[done].sum()
        segs = [seg for seg, ok in zip(zip(s0, mid), done) if not ok] + [
            seg for seg, ok in zip(zip(mid, s1), done) if not ok
        ]
        # keep a deterministic order
        segs.sort(key=lambda s: (s[0].real, s[0].imag))
    return None, min_abs


def _winding(profile, x0, x1, y0, y1):
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    total = 0.0 + 0.0j
    min_abs = np.inf
    for a, b in zip(corners, corners[1:] + corners[:1]):
        part, m = _edge_integral(profile, a, b)
        min_abs = min(min_abs, m)
        if part is None:
            return None, min_abs
        total += part
    return total / (2j * np.pi), min_abs


def certify_stability(profile, region=None, gap=_CUT_GAP):
    """Decide whether F = 2 has roots off the real axis.

    Smooth profiles: the roots in the upper and lower halves of ``region``
    (x0, x1, y0, y1) are counted by the argument principle on rectangles that
    stay ``gap`` away from the real axis. Roots closer to the axis than
    ``gap`` are not seen, which is recorded as a caveat.
    Piecewise-linear profiles: the verdict is read off the polynomial roots.
    """
    region = tuple(float(v) for v in (region or default_region(profile)))
    x0, x1, y0, y1 = region
    if profile.kind == "pl":
        info = _classify_pl(profile)
        inside = [z for z in info["complex"] if x0 <= z.real <= x1 and y0 <= z.imag <= y1]
        verdict = "Stable" if not info["complex"] else "Unstable"
        notes = ("root of multiplicity > 1 on the real axis",) if info["multiple"] else ()
        if info["multiple"]:
            verdict = "Undetermined"
        return StabilityCertificate(verdict, tuple(info["complex"]), region, REAL_TOL, (), notes + (
            f"{len(inside)} complex roots inside the region",) if inside else notes)
    counts = []
    notes = [f"roots with |Im lambda| < {gap:g} are not resolved by the contour count"]
    for lo, hi in ((gap, y1), (y0, -gap)):
        w, min_abs = _winding(profile, x0, x1, lo, hi)
        if w is None:
            return StabilityCertificate("Undetermined", (), region, gap, tuple(counts),
                                        tuple(notes + ["edge quadrature did not converge; refine the region"]))
        n = round(w.real)
        if abs(w.real - n) > _INTEGER_GUARD or abs(w.imag) > _INTEGER_GUARD:
            return StabilityCertificate("Undetermined", (), region, gap, tuple(counts) + (complex(w),),
                                        tuple(notes + [f"winding integral {w:.4g} is not near an integer; refine"]))
        counts.append(int(n))
    verdict = "Stable" if counts == [0, 0] else "Unstable"
    return StabilityCertificate(verdict, (), region, gap, tuple(counts), tuple(notes))


def analyze_spectrum(profile):
    """Exterior poles, interior poles (piecewise-linear case) and the verdict."""
    lm, rm, lp, rp = find_exterior_poles(profile)
    diagnostics = {}
    interior = ()
    if lm is None or lp is None:
        diagnostics["exterior_pole_missing"] = [side for side, v in (("minus", lm), ("plus", lp)) if v is None]
    if profile.kind == "pl":
        info = _classify_pl(profile)
        interior = tuple(info["interior"])
        ext = info["exterior"]
        found = [v for v in (lm, lp) if v is not None]
        diagnostics["exterior_crosscheck"] = float(
            max((np.min(np.abs(ext - v)) for v in found), default=0.0)
        ) if ext.size else None
    cert = certify_stability(profile)
    diagnostics["notes"] = list(cert.notes)
    if cert.winding:
        diagnostics["winding"] = [c if isinstance(c, int) else [c.real, c.imag] for c in cert.winding]
    return Spectrum(lm, rm, lp, rp, interior, cert.verdict, cert.complex_roots, cert.region, cert.tol, diagnostics)
