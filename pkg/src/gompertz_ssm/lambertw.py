"""Principal-branch Lambert W solver with a log-argument entry point.

The optimal accept-reject proposal mean needs W0 of tau2 * exp(N* tau2 + mu),
whose argument overflows double precision for large counts; the log-argument
entry point solves w + log(w) = log(x) directly in that regime.
"""
from __future__ import annotations

import math

BRANCH_POINT = -1.0 / math.e
_LOG_SWITCH = 700.0  # below this, exp(log_x) is finite and the direct solver is used


def _halley(x: float, w: float) -> float:
    # Halley iteration on f(w) = w e^w - x.
    for _ in range(60):
        ew = math.exp(w)
        f = w * ew - x
        denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0)
        dw = f / denom
        w -= dw
        if abs(dw) <= 1e-16 * (1.0 + abs(w)):
            break
    return w


def lambert_w0(x: float) -> float:
    """Upper-branch Lambert W: returns w >= -1 with w * exp(w) = x, x >= -1/e."""
    if math.isnan(x):
        raise ValueError("lambert_w0: argument is NaN")
    if x < BRANCH_POINT:
        if x > BRANCH_POINT - 1e-14:  # tolerate roundoff at the branch point
            x = BRANCH_POINT
        else:
            raise ValueError(f"lambert_w0: argument {x} below -1/e")
    if x == 0.0:
        return 0.0
    if x == BRANCH_POINT:
        return -1.0
    if x < -0.25:
        # series about the branch point in p = sqrt(2 (e x + 1))
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p ** 3 / 72.0
        if w <= -1.0:
            w = -1.0 + 1e-12
    elif x < math.e:
        w = x / (1.0 + x) if x > 0.0 else x * math.exp(-x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    return _halley(x, w)


def lambert_w0_from_log(log_x: float) -> float:
    """W0(exp(log_x)) for arbitrary real log_x, stable when exp(log_x) overflows."""
    if log_x < _LOG_SWITCH:
        return lambert_w0(math.exp(log_x))
    # solve w + log(w) = log_x by Newton; w > 1 here so the map is well-behaved
    w = log_x - math.log(log_x)
    for _ in range(40):
        dw = (w + math.log(w) - log_x) * w / (w + 1.0)
        w -= dw
        if abs(dw) <= 1e-16 * w:
            break
    return w


def lambert_w0_from_log_vec(log_x):
    """Vectorized lambert_w0_from_log over a numpy array."""
    import numpy as np

    arr = np.atleast_1d(np.asarray(log_x, dtype=float))
    out = np.empty_like(arr)
    big = arr >= _LOG_SWITCH

    if np.any(big):
        L = arr[big]
        w = L - np.log(L)
        for _ in range(30):
            dw = (w + np.log(w) - L) * w / (w + 1.0)
            w -= dw
            if np.all(np.abs(dw) <= 1e-16 * w):
                break
        out[big] = w

    if np.any(~big):
        x = np.exp(arr[~big])  # > 0 by construction
        lx = arr[~big]
        w = np.where(x < math.e, x / (1.0 + x), lx - np.log(np.maximum(lx, 1e-300)))
        for _ in range(40):
            ew = np.exp(w)
            f = w * ew - x
            denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0)
            dw = f / denom
            w -= dw
            if np.all(np.abs(dw) <= 1e-16 * (1.0 + np.abs(w))):
                break
        out[~big] = w

    return out if np.ndim(log_x) else out.reshape(())
