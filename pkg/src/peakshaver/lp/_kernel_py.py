"""Pure-NumPy simplex iteration kernel.

Hot per-iteration primitives of the bounded-variable revised simplex:
eta-file FTRAN/BTRAN application, pricing, and the ratio test. The compiled
module peakshaver.lp._kernel implements the same algorithm; the driver in
simplex.py picks whichever is available.

Keep the two implementations in lockstep: same variable-status codes, same
tie-breaking (lowest index on pricing ties, largest pivot magnitude among
ratio ties, bound flips preferred on exact ties).
"""
import numpy as np

KERNEL_NAME = "python"

NB_LOWER = 0
NB_UPPER = 1
NB_FREE = 2
NB_FIXED = 3
BASIC = 4


def ftran_etas(eta_r, eta_w, count, v):
    """Apply eta transforms chronologically: v <- E_count^-1 ... E_1^-1 v."""
    for k in range(count):
        r = eta_r[k]
        w = eta_w[k]
        vr = v[r] / w[r]
        v -= w * vr
        v[r] = vr


def btran_etas(eta_r, eta_w, count, g):
    """Apply transposed eta inverses newest-first: g <- E_1^-T ... E_count^-T g."""
    for k in range(count - 1, -1, -1):
        r = eta_r[k]
        w = eta_w[k]
        dot = float(np.dot(w, g))
        g[r] = (g[r] - (dot - w[r] * g[r])) / w[r]


def update_xb(x_b, w, step):
    x_b -= step * w


def price_dantzig(d, vstat, tol):
    """Most negative effective reduced cost; lowest index wins ties. -1 if none."""
    score = np.zeros(len(d))
    lower = vstat == NB_LOWER
    upper = vstat == NB_UPPER
    free = vstat == NB_FREE
    score[lower] = -d[lower]
    score[upper] = d[upper]
    score[free] = np.abs(d[free])
    score[score <= tol] = 0.0
    if not np.any(score > 0.0):
        return -1
    return int(np.argmax(score))


def price_bland(d, vstat, tol):
    """Lowest-index eligible entering column (anti-cycling). -1 if none."""
    eligible = ((vstat == NB_LOWER) & (d < -tol)) \
        | ((vstat == NB_UPPER) & (d > tol)) \
        | ((vstat == NB_FREE) & (np.abs(d) > tol))
    idx = np.nonzero(eligible)[0]
    if len(idx) == 0:
        return -1
    return int(idx[0])


def ratio_test(x_b, lb_b, ub_b, w, sigma, own_gap, feas_tol, pivot_tol, phase1):
    """Step length along the entering direction before a basic hits a bound.

    Returns (t, r, to_upper): r is the blocking basis position, r == -1 for a
    bound flip of the entering variable, r == -2 for an unbounded ray.
    In phase 1, basics outside their bounds block at the violated bound when
    moving toward it and never block when moving away.
    """
    m = len(x_b)
    delta = (-sigma) * w
    moving = np.abs(w) > pivot_tol
    rising = moving & (delta > 0.0)
    falling = moving & (delta < 0.0)

    block = np.zeros(m, dtype=bool)
    target = np.zeros(m)
    if phase1:
        below = x_b < lb_b - feas_tol
        above = x_b > ub_b + feas_tol
        feas = ~(below | above)
        sel = rising & below
        block |= sel
        target[sel] = lb_b[sel]
        sel = falling & above
        block |= sel
        target[sel] = ub_b[sel]
    else:
        feas = np.ones(m, dtype=bool)
    sel = rising & feas & np.isfinite(ub_b)
    block |= sel
    target[sel] = ub_b[sel]
    sel = falling & feas & np.isfinite(lb_b)
    block |= sel
    target[sel] = lb_b[sel]

    ratio = np.full(m, np.inf)
    if np.any(block):
        ratio[block] = np.maximum((target[block] - x_b[block]) / delta[block], 0.0)
    t_block = float(ratio.min()) if m else np.inf

    if own_gap <= t_block:
        if np.isinf(own_gap):
            return np.inf, -2, False
        return float(own_gap), -1, False
    if np.isinf(t_block):
        return np.inf, -2, False

    cutoff = t_block + 1e-12 + 1e-12 * t_block
    cand = ratio <= cutoff
    w_mag = np.where(cand, np.abs(w), -1.0)
    r = int(np.argmax(w_mag))
    to_upper = bool(target[r] == ub_b[r])
    return t_block, r, to_upper
