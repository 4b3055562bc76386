"""Safeguarded scalar root finding on sign-changing brackets."""

from __future__ import annotations

import numpy as np


class BracketError(RuntimeError):
    """No usable sign change; carries the residuals seen while searching."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


def bracket_root(f, a, b, *, f_tol=1e-12, x_tol=0.0, max_iter=200, fa=None, fb=None):
    """Find a root of f on [a, b] by bisection with secant acceleration.

    Requires f(a) and f(b) of opposite sign (or zero).  Stops once the residual
    drops below `f_tol`; with `f_tol=0` the iteration instead runs until the
    bracket width falls below `x_tol`, which pins poorly conditioned roots to
    the limits of the sign information.

    Returns the best abscissa seen.  Raises BracketError when there is no sign
    change, RuntimeError when neither tolerance is met within `max_iter`.
    """
    a = float(a)
    b = float(b)
    if a > b:
        a, b = b, a
    fa = float(f(a)) if fa is None else float(fa)
    if f_tol > 0.0 and abs(fa) <= f_tol:
        return a
    fb = float(f(b)) if fb is None else float(fb)
    if f_tol > 0.0 and abs(fb) <= f_tol:
        return b
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise BracketError(
            f"no sign change on [{a:.6g}, {b:.6g}]: f(a)={fa:.3e}, f(b)={fb:.3e}",
            trace=[(a, fa), (b, fb)])

    best_x, best_f = (a, fa) if abs(fa) < abs(fb) else (b, fb)
    prefer_bisect = False
    for _ in range(max_iter):
        width = b - a
        if width <= x_tol:
            return best_x
        mid = 0.5 * (a + b)
        x = mid
        if not prefer_bisect:
            denom = fb - fa
            if denom != 0.0:
                secant = b - fb * (b - a) / denom
                if a + 0.01 * width < secant < b - 0.01 * width:
                    x = secant
        if x == a or x == b:
            return best_x  # interval exhausted at machine precision
        fx = float(f(x))
        if abs(fx) < abs(best_f):
            best_x, best_f = x, fx
        if fx == 0.0 or (f_tol > 0.0 and abs(fx) <= f_tol):
            return x
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b, fb = x, fx
        # force a bisection whenever the step failed to shrink the bracket much
        prefer_bisect = (b - a) > 0.6 * width
    if f_tol > 0.0:
        raise RuntimeError(
            f"root refinement stalled: best residual {best_f:.3e} > f_tol {f_tol:.1e}")
    return best_x


def expand_bracket(f, lo, hi, *, lo_limit, hi_limit, grow=2.0, max_expand=60):
    """Grow [lo, hi] geometrically until f changes sign; returns (a, b, fa, fb).

    Expansion never leaves [lo_limit, hi_limit]; failing to find a sign change
    within those bounds raises BracketError with the residual trace.
    """
    lo = max(float(lo), lo_limit)
    hi = min(float(hi), hi_limit)
    flo = float(f(lo))
    fhi = float(f(hi))
    trace = [(lo, flo), (hi, fhi)]
    for _ in range(max_expand):
        if flo == 0.0 or fhi == 0.0 or np.sign(flo) != np.sign(fhi):
            return lo, hi, flo, fhi
        width = hi - lo
        moved = False
        if lo > lo_limit:
            lo = max(lo_limit, lo - grow * width)
            flo = float(f(lo))
            trace.append((lo, flo))
            moved = True
        if np.sign(flo) != np.sign(fhi):
            return lo, hi, flo, fhi
        if hi < hi_limit:
            hi = min(hi_limit, hi + grow * width)
            fhi = float(f(hi))
            trace.append((hi, fhi))
            moved = True
        if not moved:
            break
    raise BracketError(
        f"no sign change within [{lo_limit:.6g}, {hi_limit:.6g}]", trace=trace)


def bracket_root_batch(f, a, b, fa, fb, *, f_tol=1e-12, x_tol=0.0, max_iter=200):
    """Row-wise safeguarded bisection/secant over a batch of brackets.

    `f` maps an abscissa array to a residual array (rows independent).  Each
    row must satisfy sign(fa) != sign(fb).  Semantics per row match
    `bracket_root`: stop on |f| <= f_tol, or on bracket width <= x_tol when
    f_tol is 0.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    fa = np.array(fa, dtype=float)
    fb = np.array(fb, dtype=float)
    if np.any(np.sign(fa) * np.sign(fb) > 0.0):
        bad = int(np.argmax(np.sign(fa) * np.sign(fb) > 0.0))
        raise BracketError(
            f"no sign change in batch row {bad}: f(a)={fa[bad]:.3e}, "
            f"f(b)={fb[bad]:.3e}")
    best_x = np.where(np.abs(fa) < np.abs(fb), a, b)
    best_f = np.where(np.abs(fa) < np.abs(fb), fa, fb)
    active = np.abs(best_f) > f_tol if f_tol > 0.0 else np.ones(a.shape, dtype=bool)
    prefer_bisect = np.zeros(a.shape, dtype=bool)
    for _ in range(max_iter):
        width = b - a
        active &= width > x_tol
        if not np.any(active):
            break
        mid = 0.5 * (a + b)
        x = mid.copy()
        denom = fb - fa
        with np.errstate(divide="ignore", invalid="ignore"):
            secant = b - fb * width / denom
        use = (~prefer_bisect) & (denom != 0.0) \
            & (secant > a + 0.01 * width) & (secant < b - 0.01 * width)
        x[use] = secant[use]
        stuck = active & ((x == a) | (x == b))
        active &= ~stuck  # interval exhausted at machine precision
        if not np.any(active):
            break
        fx = np.zeros_like(x)
        fx[active] = f(x[active], active)
        improved = active & (np.abs(fx) < np.abs(best_f))
        best_x[improved] = x[improved]
        best_f[improved] = fx[improved]
        solved = active & ((fx == 0.0) | ((f_tol > 0.0) & (np.abs(fx) <= f_tol)))
        active &= ~solved
        low_side = np.sign(fx) == np.sign(fa)
        upd = active & low_side
        a[upd] = x[upd]
        fa[upd] = fx[upd]
        upd = active & ~low_side
        b[upd] = x[upd]
        fb[upd] = fx[upd]
        prefer_bisect = (b - a) > 0.6 * width
    if f_tol > 0.0 and np.any(np.abs(best_f) > f_tol):
        bad = int(np.argmax(np.abs(best_f)))
        raise RuntimeError(
            f"batch root refinement stalled at row {bad}: residual "
            f"{best_f[bad]:.3e} > f_tol {f_tol:.1e}")
    return best_x


def sign_change_count(values):
    """Number of sign changes in a sequence of residuals (zeros count once)."""
    v = np.asarray(values, dtype=float)
    s = np.sign(v)
    nz = s[s != 0.0]
    if nz.size == 0:
        return 0
    return int(np.count_nonzero(np.diff(nz) != 0.0))
