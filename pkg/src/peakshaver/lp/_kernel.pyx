# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simplex iteration kernel.

Same algorithm and tie-breaking as _kernel_py; see that module for the
reference semantics. Keep the two in lockstep.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, isfinite, isinf, INFINITY

cnp.import_array()

KERNEL_NAME = "compiled"

NB_LOWER = 0
NB_UPPER = 1
NB_FREE = 2
NB_FIXED = 3
BASIC = 4


def ftran_etas(cnp.int64_t[::1] eta_r, double[:, ::1] eta_w, Py_ssize_t count,
               double[::1] v):
    """Apply eta transforms chronologically: v <- E_count^-1 ... E_1^-1 v."""
    cdef Py_ssize_t k, i, r, m = v.shape[0]
    cdef double vr
    for k in range(count):
        r = eta_r[k]
        vr = v[r] / eta_w[k, r]
        for i in range(m):
            v[i] = v[i] - eta_w[k, i] * vr
        v[r] = vr


def btran_etas(cnp.int64_t[::1] eta_r, double[:, ::1] eta_w, Py_ssize_t count,
               double[::1] g):
    """Apply transposed eta inverses newest-first: g <- E_1^-T ... E_count^-T g."""
    cdef Py_ssize_t k, i, r, m = g.shape[0]
    cdef double dot
    for k in range(count - 1, -1, -1):
        r = eta_r[k]
        dot = 0.0
        for i in range(m):
            dot += eta_w[k, i] * g[i]
        g[r] = (g[r] - (dot - eta_w[k, r] * g[r])) / eta_w[k, r]


def update_xb(double[::1] x_b, double[::1] w, double step):
    cdef Py_ssize_t i
    for i in range(x_b.shape[0]):
        x_b[i] = x_b[i] - step * w[i]


def price_dantzig(double[::1] d, signed char[::1] vstat, double tol):
    """Most negative effective reduced cost; lowest index wins ties. -1 if none."""
    cdef Py_ssize_t j, best_j = -1
    cdef double s, best = tol
    cdef signed char st
    for j in range(d.shape[0]):
        st = vstat[j]
        if st == 0:
            s = -d[j]
        elif st == 1:
            s = d[j]
        elif st == 2:
            s = fabs(d[j])
        else:
            continue
        if s > best:
            best = s
            best_j = j
    return best_j


def price_bland(double[::1] d, signed char[::1] vstat, double tol):
    """Lowest-index eligible entering column (anti-cycling). -1 if none."""
    cdef Py_ssize_t j
    cdef signed char st
    for j in range(d.shape[0]):
        st = vstat[j]
        if st == 0:
            if d[j] < -tol:
                return j
        elif st == 1:
            if d[j] > tol:
                return j
        elif st == 2:
            if fabs(d[j]) > tol:
                return j
    return -1


def ratio_test(double[::1] x_b, double[::1] lb_b, double[::1] ub_b,
               double[::1] w, double sigma, double own_gap,
               double feas_tol, double pivot_tol, bint phase1):
    """Step length along the entering direction before a basic hits a bound.

    Returns (t, r, to_upper): r is the blocking basis position, r == -1 for a
    bound flip of the entering variable, r == -2 for an unbounded ray.
    """
    cdef Py_ssize_t m = x_b.shape[0]
    cdef Py_ssize_t i, r = -1
    cdef double wi, delta_i, target_i, ratio_i
    cdef double t_block = INFINITY
    cdef double cutoff, w_best
    cdef bint has
    ratio_arr = np.full(m, np.inf)
    target_arr = np.zeros(m)
    cdef double[::1] ratio = ratio_arr
    cdef double[::1] target = target_arr

    for i in range(m):
        wi = w[i]
        if fabs(wi) <= pivot_tol:
            continue
        delta_i = -sigma * wi
        has = False
        if phase1 and x_b[i] < lb_b[i] - feas_tol:
            if delta_i > 0.0:
                target_i = lb_b[i]
                has = True
        elif phase1 and x_b[i] > ub_b[i] + feas_tol:
            if delta_i < 0.0:
                target_i = ub_b[i]
                has = True
        elif delta_i > 0.0:
            if isfinite(ub_b[i]):
                target_i = ub_b[i]
                has = True
        elif delta_i < 0.0:
            if isfinite(lb_b[i]):
                target_i = lb_b[i]
                has = True
        if not has:
            continue
        ratio_i = (target_i - x_b[i]) / delta_i
        if ratio_i < 0.0:
            ratio_i = 0.0
        ratio[i] = ratio_i
        target[i] = target_i
        if ratio_i < t_block:
            t_block = ratio_i

    if own_gap <= t_block:
        if isinf(own_gap):
            return INFINITY, -2, False
        return own_gap, -1, False
    if isinf(t_block):
        return INFINITY, -2, False

    cutoff = t_block + 1e-12 + 1e-12 * t_block
    w_best = -1.0
    for i in range(m):
        if ratio[i] <= cutoff and fabs(w[i]) > w_best:
            w_best = fabs(w[i])
            r = i
    return t_block, int(r), bool(target[r] == ub_b[r])
