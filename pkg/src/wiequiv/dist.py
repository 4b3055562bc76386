"""Wage distributions with bounded support and the integration kernel built on them.

Three parametric families (uniform, truncated lognormal, scaled beta), each with
closed-form CDF, quantile, and upper partial moments, plus an adaptive
Gauss-Legendre kernel for integrals of arbitrary functions against the density.
Partial moments and the quadrature kernel are independent code paths so each can
be used to cross-check the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_MAX_DEPTH = 48
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class Family(str, Enum):
    UNIFORM = "uniform"
    TRUNCATED_LOGNORMAL = "truncated_lognormal"
    SCALED_BETA = "scaled_beta"


class QuadratureError(RuntimeError):
    """Adaptive quadrature hit the subdivision cap; carries the residual estimate."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class DistributionSpec:
    """A wage distribution on a finite interval [lo, hi].

    Construct through one of the factory methods (`uniform`,
    `truncated_lognormal`, `scaled_beta`); parameters irrelevant to the chosen
    family are ignored.  All evaluation methods accept scalars or 1-d arrays.
    """

    family: Family
    lo: float
    hi: float
    mu: float = 0.0      # truncated lognormal: location of log wage
    sigma: float = 1.0   # truncated lognormal: scale of log wage
    a: float = 1.0       # scaled beta shape parameters
    b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("support endpoints must be finite")
        if self.lo >= self.hi:
            raise ValueError(f"support requires lo < hi, got [{self.lo}, {self.hi}]")
        if self.family is Family.TRUNCATED_LOGNORMAL:
            if self.sigma <= 0.0:
                raise ValueError("sigma must be positive")
            if self.lo < 0.0:
                raise ValueError("truncated lognormal support must satisfy lo >= 0")
            phi_lo = special.ndtr(self._log_z(self.lo)) if self.lo > 0.0 else 0.0
            phi_hi = special.ndtr(self._log_z(self.hi))
            object.__setattr__(self, "_phi_lo", float(phi_lo))
            object.__setattr__(self, "_phi_hi", float(phi_hi))
            object.__setattr__(self, "_mass", float(phi_hi - phi_lo))
            if self._mass <= 0.0:
                raise ValueError("truncation window carries no lognormal mass")
        elif self.family is Family.SCALED_BETA:
            if self.a <= 0.0 or self.b <= 0.0:
                raise ValueError("beta shape parameters must be positive")

    # ------------------------------------------------------------------
    # factories / serialization
    # ------------------------------------------------------------------
    @staticmethod
    def uniform(lo, hi):
        return DistributionSpec(Family.UNIFORM, float(lo), float(hi))

    @staticmethod
    def truncated_lognormal(mu, sigma, lo, hi):
        return DistributionSpec(Family.TRUNCATED_LOGNORMAL, float(lo), float(hi),
                                mu=float(mu), sigma=float(sigma))

    @staticmethod
    def scaled_beta(a, b, lo, hi):
        return DistributionSpec(Family.SCALED_BETA, float(lo), float(hi),
                                a=float(a), b=float(b))

    def to_dict(self):
        d = {"family": self.family.value, "lo": self.lo, "hi": self.hi}
        if self.family is Family.TRUNCATED_LOGNORMAL:
            d["mu"] = self.mu
            d["sigma"] = self.sigma
        elif self.family is Family.SCALED_BETA:
            d["a"] = self.a
            d["b"] = self.b
        return d

    @staticmethod
    def from_dict(d):
        if "family" not in d:
            raise ValueError("distribution spec missing 'family'")
        try:
            family = Family(d["family"])
        except ValueError:
            raise ValueError(f"unknown distribution family {d['family']!r}") from None
        allowed = {Family.UNIFORM: {"family", "lo", "hi"},
                   Family.TRUNCATED_LOGNORMAL: {"family", "lo", "hi", "mu", "sigma"},
                   Family.SCALED_BETA: {"family", "lo", "hi", "a", "b"}}[family]
        for key in d:
            if key not in allowed:
                raise ValueError(f"unknown key {key!r} for family {family.value!r}")
        missing = allowed - set(d)
        if missing:
            raise ValueError(f"distribution spec missing keys {sorted(missing)}")
        kwargs = {k: float(v) for k, v in d.items() if k != "family"}
        return DistributionSpec(family, **kwargs)

    # ------------------------------------------------------------------
    # pointwise evaluation
    # ------------------------------------------------------------------
    def _log_z(self, w):
        # standardized log wage; -inf below zero so ndtr gives 0 mass there
        arr = np.asarray(w, dtype=float)
        out = np.full(arr.shape, -np.inf)
        pos = arr > 0.0
        with np.errstate(divide="ignore"):
            out[pos] = (np.log(arr[pos]) - self.mu) / self.sigma
        return out

    def _beta_t(self, w):
        return (np.asarray(w, dtype=float) - self.lo) / (self.hi - self.lo)

    def cdf(self, w):
        scalar = np.ndim(w) == 0
        x = np.atleast_1d(np.asarray(w, dtype=float))
        if self.family is Family.UNIFORM:
            out = (x - self.lo) / (self.hi - self.lo)
        elif self.family is Family.TRUNCATED_LOGNORMAL:
            out = (special.ndtr(self._log_z(x)) - self._phi_lo) / self._mass
        else:
            out = special.betainc(self.a, self.b, np.clip(self._beta_t(x), 0.0, 1.0))
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def survival(self, w):
        """1 - cdf(w), computed directly for accuracy in the upper tail."""
        scalar = np.ndim(w) == 0
        x = np.atleast_1d(np.asarray(w, dtype=float))
        if self.family is Family.UNIFORM:
            out = (self.hi - x) / (self.hi - self.lo)
        elif self.family is Family.TRUNCATED_LOGNORMAL:
            out = (self._phi_hi - special.ndtr(self._log_z(x))) / self._mass
        else:
            out = 1.0 - special.betainc(self.a, self.b, np.clip(self._beta_t(x), 0.0, 1.0))
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def pdf(self, w):
        scalar = np.ndim(w) == 0
        x = np.atleast_1d(np.asarray(w, dtype=float))
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.zeros(x.shape)
        if self.family is Family.UNIFORM:
            out[inside] = 1.0 / (self.hi - self.lo)
        elif self.family is Family.TRUNCATED_LOGNORMAL:
            xi = x[inside & (x > 0.0)]
            z = (np.log(xi) - self.mu) / self.sigma
            dens = np.exp(-0.5 * z * z) / (xi * self.sigma * _SQRT_2PI) / self._mass
            out[inside & (x > 0.0)] = dens
        else:
            t = self._beta_t(x[inside])
            interior = (t > 0.0) & (t < 1.0)
            ln_norm = special.betaln(self.a, self.b)
            dens = np.zeros(t.shape)
            with np.errstate(divide="ignore"):
                dens[interior] = np.exp((self.a - 1.0) * np.log(t[interior])
                                        + (self.b - 1.0) * np.log1p(-t[interior])
                                        - ln_norm) / (self.hi - self.lo)
            # endpoint limits: finite for shape >= 1, infinite below
            at0 = t == 0.0
            at1 = t == 1.0
            dens[at0] = np.inf if self.a < 1.0 else (0.0 if self.a > 1.0 else
                                                     self.b / (self.hi - self.lo))
            dens[at1] = np.inf if self.b < 1.0 else (0.0 if self.b > 1.0 else
                                                     self.a / (self.hi - self.lo))
            out[inside] = dens
        return float(out[0]) if scalar else out

    def eval(self, w):
        """Return (cdf, pdf) at w; pdf is 0 and cdf clamped outside support."""
        return self.cdf(w), self.pdf(w)

    def ppf(self, u):
        scalar = np.ndim(u) == 0
        q = np.clip(np.atleast_1d(np.asarray(u, dtype=float)), 0.0, 1.0)
        if self.family is Family.UNIFORM:
            out = self.lo + q * (self.hi - self.lo)
        elif self.family is Family.TRUNCATED_LOGNORMAL:
            with np.errstate(over="ignore"):
                z = special.ndtri(self._phi_lo + q * self._mass)
                out = np.exp(self.mu + self.sigma * z)
            out[q <= 0.0] = self.lo
            out[q >= 1.0] = self.hi
        else:
            out = self.lo + (self.hi - self.lo) * special.betaincinv(self.a, self.b, q)
        out = np.clip(out, self.lo, self.hi)
        return float(out[0]) if scalar else out

    def sample(self, u):
        """Inverse-CDF draw: map a uniform variate in [0, 1] to a wage."""
        return self.ppf(u)

    def mean(self):
        return self.lo + self.upper_partial_moment(self.lo, 1)

    # ------------------------------------------------------------------
    # upper partial moments (closed forms, independent of the quadrature)
    # ------------------------------------------------------------------
    def upper_partial_moment(self, x, k):
        """Integral of (w - x)^k over [max(x, lo), hi] against the density.

        k = 0 gives the survival function, k = 1 the expected excess wage,
        k = 2 the second excess moment.  Zero for x >= hi; for x < lo the
        integrand keeps its offset but integration starts at lo.
        """
        if k not in (0, 1, 2):
            raise ValueError("k must be 0, 1 or 2")
        scalar = np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        xi = np.clip(xs, self.lo, self.hi)
        if self.family is Family.UNIFORM:
            span = self.hi - self.lo
            out = ((self.hi - xs) ** (k + 1) - (xi - xs) ** (k + 1)) / ((k + 1) * span)
        elif self.family is Family.TRUNCATED_LOGNORMAL:
            raws = [self._tln_upper_raw(xi, j) for j in range(k + 1)]
            if k == 0:
                out = raws[0]
            elif k == 1:
                out = raws[1] - xs * raws[0]
            else:
                out = raws[2] - 2.0 * xs * raws[1] + xs * xs * raws[0]
        else:
            t = np.clip(self._beta_t(xi), 0.0, 1.0)
            d = xs - self.lo
            s = self.hi - self.lo
            j0 = 1.0 - special.betainc(self.a, self.b, t)
            if k == 0:
                out = j0
            else:
                ab = self.a + self.b
                j1 = (self.a / ab) * (1.0 - special.betainc(self.a + 1.0, self.b, t))
                if k == 1:
                    out = s * j1 - d * j0
                else:
                    j2 = (self.a * (self.a + 1.0) / (ab * (ab + 1.0))) \
                        * (1.0 - special.betainc(self.a + 2.0, self.b, t))
                    out = s * s * j2 - 2.0 * s * d * j1 + d * d * j0
        out = np.maximum(out, 0.0)
        return float(out[0]) if scalar else out

    def _tln_upper_raw(self, xi, j):
        # integral of w^j dF over [xi, hi] for the truncated lognormal
        z = self._log_z(xi)
        shift = j * self.sigma
        scale = math.exp(j * self.mu + 0.5 * j * j * self.sigma * self.sigma)
        top = special.ndtr(shift - z)
        bot = special.ndtr(shift - self._log_z(np.asarray([self.hi]))[0])
        return scale * np.maximum(top - bot, 0.0) / self._mass

    # ------------------------------------------------------------------
    # adaptive Gauss-Legendre quadrature against the density
    # ------------------------------------------------------------------
    def upper_integral(self, x, h, kinks=(), tol=1e-10):
        """Integrate h(w) dF(w) over [max(x, lo), hi].

        Parameters
        ----------
        x : float
            Lower limit; clipped to the support from below.
        h : callable
            Vectorized integrand, ndarray in -> ndarray out.
        kinks : iterable of float
            Known kink locations; quadrature panels never straddle them.
        tol : float
            Absolute tolerance for the total integral.
        """
        a = max(float(x), self.lo)
        if a >= self.hi:
            return 0.0
        pts = [a] + sorted(float(c) for c in kinks if a < c < self.hi) + [self.hi]
        total = 0.0
        span = self.hi - a
        for left, right in zip(pts[:-1], pts[1:]):
            seg_tol = tol * (right - left) / span
            total += self._adaptive(left, right, h, seg_tol, 0)
        return total

    def _panel(self, a, b, h):
        half = 0.5 * (b - a)
        w = 0.5 * (a + b) + half * _GL_NODES
        return half * float(np.dot(_GL_WEIGHTS, h(w) * self.pdf(w)))

    def _adaptive(self, a, b, h, tol, depth):
        whole = self._panel(a, b, h)
        mid = 0.5 * (a + b)
        refined = self._panel(a, mid, h) + self._panel(mid, b, h)
        err = abs(refined - whole)
        if err <= tol or err <= 1e-15 * (1.0 + abs(refined)):
            return refined
        if depth >= _MAX_DEPTH:
            raise QuadratureError(
                f"quadrature failed to converge on [{a:.6g}, {b:.6g}]", residual=err)
        return (self._adaptive(a, mid, h, 0.5 * tol, depth + 1)
                + self._adaptive(mid, b, h, 0.5 * tol, depth + 1))
