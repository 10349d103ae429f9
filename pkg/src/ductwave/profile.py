"""Velocity profiles M(y) on the duct cross-section y in [-1, 1].

Two admissible classes are supported: smooth strictly monotone profiles with
a second derivative of one sign, and continuous piecewise-linear profiles with
strictly monotone breakpoint values. Smooth profiles also carry the calculus
of the inverse function mu = M^{-1}, which the boundary-value formulas use.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._quad import gauss_legendre
from .errors import DomainError, ProfileError, UnsupportedProfileError

_Y_SLACK = 1e-14
_VALIDATION_SAMPLES = 2049


def _check_y(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < -1.0 - _Y_SLACK) or np.any(y > 1.0 + _Y_SLACK):
        bad = y[(y < -1.0 - _Y_SLACK) | (y > 1.0 + _Y_SLACK)].ravel()[0]
        raise DomainError(f"y = {bad!r} lies outside [-1, 1]")
    return np.clip(y, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class SmoothProfile:
    """Smooth profile given by M and its first three derivatives.

    ``inverse`` optionally maps velocities z to the tuple
    (mu, mu', mu'', mu''') of the inverse function; without it the inverse
    is found by bisection and its derivatives by the chain rule.
    """

    M: Callable
    dM: Callable
    d2M: Callable
    d3M: Callable
    inverse: Optional[Callable] = None
    name: str = "smooth"
    params: dict = field(default_factory=dict)

    kind = "smooth"

    def __post_init__(self):
        ends = np.array([float(self.M(-1.0)), float(self.M(1.0))])
        object.__setattr__(self, "m_minus", float(ends.min()))
        object.__setattr__(self, "m_plus", float(ends.max()))
        object.__setattr__(self, "sign", 1.0 if ends[1] > ends[0] else -1.0)

    @property
    def width(self):
        return self.m_plus - self.m_minus

    def evaluate(self, y):
        y = _check_y(y)
        return np.asarray(self.M(y), dtype=float)

    def derivatives(self, y):
        """M, M', M'', M''' at y."""
        y = _check_y(y)
        return tuple(np.asarray(f(y), dtype=float) for f in (self.M, self.dM, self.d2M, self.d3M))

    def _bisect(self, z):
        lo = np.full(z.shape, -1.0)
        hi = np.full(z.shape, 1.0)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            above = (np.asarray(self.M(mid)) - z) * self.sign > 0
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        return 0.5 * (lo + hi)

    def inverse_calculus(self, z):
        """(mu, mu', mu'', mu''') at velocities z in [M-, M+]."""
        z = np.asarray(z, dtype=float)
        tol = 1e-13 * max(1.0, abs(self.m_plus), abs(self.m_minus))
        if np.any(z < self.m_minus - tol) or np.any(z > self.m_plus + tol):
            raise DomainError(f"velocity outside [{self.m_minus}, {self.m_plus}]")
        z = np.clip(z, self.m_minus, self.m_plus)
        if self.inverse is not None:
            return tuple(np.asarray(v, dtype=float) for v in self.inverse(z))
        mu = self._bisect(z)
        d1, d2, d3 = (np.asarray(f(mu), dtype=float) for f in (self.dM, self.d2M, self.d3M))
        return mu, 1.0 / d1, -d2 / d1**3, (3.0 * d2**2 - d1 * d3) / d1**5

    def density(self, z):
        """Oriented inverse derivatives (|mu'|, sign*mu'', sign*mu''').

        With these the cross-section integral of any g(M(y)) becomes
        the integral of g(z)*|mu'(z)| over [M-, M+] for either direction of
        monotonicity.
        """
        _, m1, m2, m3 = self.inverse_calculus(z)
        return self.sign * m1, self.sign * m2, self.sign * m3


@dataclass(frozen=True, eq=False)
class PiecewiseLinearProfile:
    """Continuous piecewise-linear profile through (breakpoints, values).

    Consecutive segments with equal slopes are merged with a warning.
    """

    breakpoints: tuple
    values: tuple
    name: str = "pl"

    kind = "pl"

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ProfileError("breakpoints and values must be 1-d sequences of equal length >= 2")
        if abs(x[0] + 1.0) > 1e-14 or abs(x[-1] - 1.0) > 1e-14:
            raise ProfileError("breakpoints must start at -1 and end at 1")
        if np.any(np.diff(x) <= 0):
            raise ProfileError("breakpoints must be strictly increasing")
        dv = np.diff(v)
        if not (np.all(dv > 0) or np.all(dv < 0)):
            i = int(np.argmax(dv * np.sign(dv[0]) <= 0)) if dv[0] != 0 else 0
            raise ProfileError(
                f"values are not strictly monotone (first violation between breakpoints {i} and {i + 1})"
            )
        slopes = dv / np.diff(x)
        keep = [0]
        for i in range(1, x.size - 1):
            if np.isclose(slopes[i - 1], slopes[i], rtol=1e-13, atol=0.0):
                continue
            keep.append(i)
        keep.append(x.size - 1)
        if len(keep) < x.size:
            warnings.warn("equal consecutive slopes were merged into single segments", stacklevel=3)
            x, v = x[keep], v[keep]
            slopes = np.diff(v) / np.diff(x)
        x[0], x[-1] = -1.0, 1.0
        object.__setattr__(self, "breakpoints", tuple(float(a) for a in x))
        object.__setattr__(self, "values", tuple(float(a) for a in v))
        object.__setattr__(self, "_x", x)
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "intercepts", v[:-1] - slopes * x[:-1])
        object.__setattr__(self, "m_minus", float(v.min()))
        object.__setattr__(self, "m_plus", float(v.max()))
        object.__setattr__(self, "sign", 1.0 if v[-1] > v[0] else -1.0)

    @property
    def width(self):
        return self.m_plus - self.m_minus

    @property
    def n_segments(self):
        return len(self.slopes)

    def segment(self, y):
        """Segment index of each y (right-continuous except at y = 1)."""
        idx = np.searchsorted(self._x, y, side="right") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def evaluate(self, y):
        y = _check_y(y)
        i = self.segment(y)
        out = self.slopes[i] * y + self.intercepts[i]
        # breakpoints evaluate to the stored value exactly
        at_node = np.isin(y, self._x)
        if np.any(at_node):
            out = np.where(at_node, self._v[np.searchsorted(self._x, y).clip(0, self._x.size - 1)], out)
        return out

    def derivatives(self, y):
        y = _check_y(y)
        i = self.segment(y)
        zero = np.zeros_like(y)
        return self.evaluate(y), self.slopes[i] + zero, zero, zero

    def inverse_calculus(self, z):
        raise UnsupportedProfileError(
            "piecewise-linear profiles have no smooth inverse calculus; use pl_inverse"
        )

    def pl_inverse(self, z):
        """Segment-local inverse (mu, mu') at velocities z in [M-, M+]."""
        z = np.asarray(z, dtype=float)
        tol = 1e-13 * max(1.0, abs(self.m_plus), abs(self.m_minus))
        if np.any(z < self.m_minus - tol) or np.any(z > self.m_plus + tol):
            raise DomainError(f"velocity outside [{self.m_minus}, {self.m_plus}]")
        v = self._v if self.sign > 0 else self._v[::-1]
        j = np.clip(np.searchsorted(v, z, side="right") - 1, 0, self.n_segments - 1)
        if self.sign < 0:
            j = self.n_segments - 1 - j
        mu = (z - self.intercepts[j]) / self.slopes[j]
        return mu, 1.0 / self.slopes[j]


@dataclass(frozen=True)
class ProfileReport:
    kind: str
    direction: int
    m_range: tuple
    violations: tuple
    accepted: bool


def evaluate(profile, y):
    """Velocity M(y) for y in [-1, 1]."""
    return profile.evaluate(y)


def inverse_calculus(profile, z):
    """(mu, mu', mu'', mu''') of a smooth profile at velocities z."""
    return profile.inverse_calculus(z)


def pl_inverse(profile, z):
    """(mu, mu') of a piecewise-linear profile at velocities z."""
    if profile.kind != "pl":
        raise UnsupportedProfileError("pl_inverse needs a piecewise-linear profile")
    return profile.pl_inverse(z)


def validate(profile):
    """Classify the profile and check the admissibility conditions.

    Raises ProfileError for a non-monotone profile, naming the first sample
    where the monotonicity fails. A second derivative that vanishes or
    changes sign is reported as a violation with ``accepted`` false.
    """
    direction = int(profile.sign)
    if profile.kind == "pl":
        return ProfileReport("PiecewiseLinear", direction, (profile.m_minus, profile.m_plus), (), True)
    y = np.linspace(-1.0, 1.0, _VALIDATION_SAMPLES)
    _, d1, d2, _ = profile.derivatives(y)
    bad = np.nonzero(d1 * direction <= 0)[0]
    if bad.size:
        j = bad[0]
        raise ProfileError(f"profile is not strictly monotone: M'({y[j]:.6g}) = {d1[j]:.6g}")
    violations = []
    s2 = np.sign(d2[0]) if d2[0] != 0 else np.sign(d2[np.argmax(d2 != 0)])
    bad2 = np.nonzero(d2 * s2 <= 0)[0]
    if bad2.size:
        j = bad2[0]
        violations.append(f"M''({y[j]:.6g}) = {d2[j]:.6g} breaks the one-sign condition")
    return ProfileReport(
        "SmoothMonotoneConvex",
        direction,
        (profile.m_minus, profile.m_plus),
        tuple(violations),
        not violations,
    )


def exp_profile(a=1.0, b=0.0):
    """M(y) = exp(a*y + b) with its closed-form inverse."""
    a, b = float(a), float(b)
    if a == 0:
        raise ProfileError("exp profile needs a != 0")

    def inverse(z):
        return (np.log(z) - b) / a, 1.0 / (a * z), -1.0 / (a * z**2), 2.0 / (a * z**3)

    return SmoothProfile(
        M=lambda y: np.exp(a * y + b),
        dM=lambda y: a * np.exp(a * y + b),
        d2M=lambda y: a**2 * np.exp(a * y + b),
        d3M=lambda y: a**3 * np.exp(a * y + b),
        inverse=inverse,
        name="exp",
        params={"a": a, "b": b},
    )


def quadratic_profile(c=2.0):
    """M(y) = (y + c)^2 with c > 1, so M is increasing on [-1, 1]."""
    c = float(c)
    if c <= 1.0:
        raise ProfileError("quadratic profile needs c > 1")

    def inverse(z):
        r = np.sqrt(z)
        return r - c, 0.5 / r, -0.25 / (z * r), 0.375 / (z * z * r)

    return SmoothProfile(
        M=lambda y: (y + c) ** 2,
        dM=lambda y: 2.0 * (y + c),
        d2M=lambda y: 2.0 + 0.0 * y,
        d3M=lambda y: 0.0 * y,
        inverse=inverse,
        name="quadratic",
        params={"c": c},
    )


def linear_profile():
    """M(y) = y as a one-segment piecewise-linear profile."""
    return PiecewiseLinearProfile((-1.0, 1.0), (-1.0, 1.0), name="linear")


def profile_from_spec(spec):
    """Build a profile from its JSON description."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ProfileError("profile spec must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "exp":
        return exp_profile(spec.get("a", 1.0), spec.get("b", 0.0))
    if kind == "quadratic":
        return quadratic_profile(spec.get("c", 2.0))
    if kind == "linear":
        return linear_profile()
    if kind == "pl":
        return PiecewiseLinearProfile(tuple(spec["breakpoints"]), tuple(spec["values"]))
    raise ProfileError(f"unknown profile type {kind!r}")


def profile_to_spec(profile):
    if profile.kind == "pl":
        return {"type": "pl", "breakpoints": list(profile.breakpoints), "values": list(profile.values)}
    return {"type": profile.name, **profile.params}


def y_quadrature(profile, n=64):
    """Cross-section quadrature nodes and weights (weights sum to 2).

    Smooth profiles use one global Gauss-Legendre rule. Piecewise-linear
    profiles use a rule per segment so each piece is integrated separately.
    """
    if profile.kind != "pl":
        return gauss_legendre(n)
    x = np.asarray(profile.breakpoints)
    lengths = np.diff(x)
    counts = np.maximum(4, np.round(n * lengths / 2.0).astype(int))
    nodes, weights = [], []
    for a, b, m in zip(x[:-1], x[1:], counts):
        yn, wn = gauss_legendre(int(m), a, b)
        nodes.append(yn)
        weights.append(wn)
    return np.concatenate(nodes), np.concatenate(weights)
