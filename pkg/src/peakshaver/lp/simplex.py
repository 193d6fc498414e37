"""Bounded-variable revised simplex.

Two-phase method sharing one pivot loop: while any basic variable sits
outside its bounds the pricing objective is the total bound violation
(composite phase 1), otherwise it is the problem cost. The basis inverse is
kept as a sparse LU factorization (scipy splu) plus a product-form eta file,
refactorized every REFACTOR_EVERY pivots. Dantzig pricing with a switch to
Bland's rule after a degenerate stall keeps the method finite and the pivot
sequence deterministic.
"""
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import LpError
from .problem import SENSE_EQ, LpSolution, LpStatus
from . import _kernel_py

try:
    from . import _kernel as _kernel_c
except ImportError:
    _kernel_c = None

NB_LOWER = _kernel_py.NB_LOWER
NB_UPPER = _kernel_py.NB_UPPER
NB_FREE = _kernel_py.NB_FREE
NB_FIXED = _kernel_py.NB_FIXED
BASIC = _kernel_py.BASIC

TOL_FEAS = 1e-9
TOL_DUAL = 1e-9
TOL_PIVOT = 1e-10
REFACTOR_EVERY = 64
STALL_LIMIT = 300


def _pick_kernel(kernel):
    if kernel == "python":
        return _kernel_py
    if kernel == "compiled":
        if _kernel_c is None:
            raise LpError("compiled kernel requested but the extension is not built")
        return _kernel_c
    if kernel == "auto":
        return _kernel_c if _kernel_c is not None else _kernel_py
    raise LpError(f"unknown kernel {kernel!r}, expected auto, python or compiled")


def active_kernel_name(kernel="auto"):
    """Name of the iteration kernel solve() would use for this setting."""
    return _pick_kernel(kernel).KERNEL_NAME


def solve(problem, kernel="auto", max_iterations=None):
    """Minimize problem.obj over its rows and bounds.

    Returns an LpSolution whose status is Optimal, Infeasible or Unbounded;
    numerical breakdown raises LpError instead of guessing a status. For
    optimal solutions every row is satisfied within 1e-7 (scaled by the
    right-hand-side magnitude) and bounds hold exactly after dust clamping.
    """
    kern = _pick_kernel(kernel)
    if problem.m == 0:
        return _solve_unconstrained(problem, kern)
    if max_iterations is None:
        max_iterations = max(20000, 30 * (problem.n + problem.m))
    eng = _Simplex(problem, kern)
    status, iterations = eng.run(max_iterations)
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status=status, x=None, objective=float("nan"),
                          iterations=iterations, kernel=kern.KERNEL_NAME)
    x = eng.extract()
    return LpSolution(status=LpStatus.OPTIMAL, x=x,
                      objective=problem.objective_value(x),
                      iterations=iterations, kernel=kern.KERNEL_NAME)


def _solve_unconstrained(problem, kern):
    x = np.zeros(problem.n)
    for j in range(problem.n):
        c = problem.obj[j]
        lo, hi = problem.lb[j], problem.ub[j]
        if c > 0.0:
            pick = lo
        elif c < 0.0:
            pick = hi
        else:
            pick = lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0)
        if not np.isfinite(pick):
            return LpSolution(status=LpStatus.UNBOUNDED, x=None,
                              objective=float("nan"), kernel=kern.KERNEL_NAME)
        x[j] = pick
    return LpSolution(status=LpStatus.OPTIMAL, x=x,
                      objective=problem.objective_value(x),
                      kernel=kern.KERNEL_NAME)


class _Simplex:
    def __init__(self, problem, kern):
        self.prob = problem
        self.kern = kern
        n, m = problem.n, problem.m
        self.n, self.m = n, m
        eq = np.array([s == SENSE_EQ for s in problem.senses])
        self.c = np.concatenate([problem.obj, np.zeros(m)])
        self.lb = np.concatenate([problem.lb, np.zeros(m)])
        self.ub = np.concatenate([problem.ub, np.where(eq, 0.0, np.inf)])
        self.ab = sp.hstack([problem.a, sp.identity(m, format="csc")],
                            format="csc")
        self.abt = self.ab.T.tocsr()
        self.b = problem.rhs.copy()

        self.vstat = np.full(n + m, NB_FREE, dtype=np.int8)
        self.vstat[np.isfinite(self.ub)] = NB_UPPER
        self.vstat[np.isfinite(self.lb)] = NB_LOWER
        self.vstat[self.lb == self.ub] = NB_FIXED

        self.eta_r = np.zeros(REFACTOR_EVERY, dtype=np.int64)
        self.eta_w = np.zeros((REFACTOR_EVERY, m))
        self.eta_count = 0
        self.lu = None
        self.basis = None
        self._crash()

    # -- basis management ---------------------------------------------------

    def _crash(self):
        n, m = self.n, self.m
        logical = np.arange(n, n + m, dtype=np.int64)
        hint = self.prob.meta.get("crash_basis")
        if hint:
            cand = logical.copy()
            rows_seen, cols_seen = set(), set()
            usable = True
            for row, col in hint:
                if not (0 <= row < m and 0 <= col < n):
                    usable = False
                    break
                if row in rows_seen or col in cols_seen:
                    usable = False
                    break
                rows_seen.add(row)
                cols_seen.add(col)
                cand[row] = col
            if usable and self._install_basis(cand):
                return
        if not self._install_basis(logical):
            raise LpError("logical basis factorization failed")

    def _install_basis(self, basis):
        try:
            lu = splu(self.ab[:, basis].tocsc())
        except RuntimeError:
            return False
        self.lu = lu
        self.basis = basis
        self.eta_count = 0
        self.vstat[self.vstat == BASIC] = NB_LOWER  # provisional, fixed below
        for j in basis:
            self.vstat[j] = BASIC
        self._reset_nonbasic_statuses()
        self._recompute_xb()
        return True

    def _reset_nonbasic_statuses(self):
        # re-derive a legal status for anything demoted out of the basis
        nb = self.vstat != BASIC
        fixed = nb & (self.lb == self.ub)
        lower = nb & ~fixed & (self.vstat != NB_UPPER) & np.isfinite(self.lb)
        upper = nb & ~fixed & ~lower & np.isfinite(self.ub)
        free = nb & ~fixed & ~lower & ~upper
        self.vstat[fixed] = NB_FIXED
        self.vstat[lower] = NB_LOWER
        self.vstat[upper] = NB_UPPER
        self.vstat[free] = NB_FREE

    def _nonbasic_values(self):
        x = np.where(self.vstat == NB_UPPER, self.ub,
                     np.where(self.vstat == NB_FREE, 0.0, self.lb))
        x[self.vstat == BASIC] = 0.0
        return x

    def _recompute_xb(self):
        x = self._nonbasic_values()
        rhs = self.b - self.ab @ x
        self.x_b = self.lu.solve(rhs)

    def _refresh(self):
        if not self._install_basis(self.basis):
            raise LpError("basis refactorization failed")

    def _col(self, j):
        v = np.zeros(self.m)
        a = self.ab
        lo, hi = a.indptr[j], a.indptr[j + 1]
        v[a.indices[lo:hi]] = a.data[lo:hi]
        return v

    def _ftran(self, v):
        x = self.lu.solve(v)
        self.kern.ftran_etas(self.eta_r, self.eta_w, self.eta_count, x)
        return x

    def _btran(self, g):
        y = g.copy()
        self.kern.btran_etas(self.eta_r, self.eta_w, self.eta_count, y)
        return self.lu.solve(y, trans="T")

    # -- iteration ----------------------------------------------------------

    def _violations(self, lb_b, ub_b):
        tol_lo = TOL_FEAS * (1.0 + np.abs(lb_b))
        tol_hi = TOL_FEAS * (1.0 + np.abs(ub_b))
        below = self.x_b < lb_b - tol_lo
        above = self.x_b > ub_b + tol_hi
        return below, above

    def _entry_value(self, q):
        s = self.vstat[q]
        if s == NB_LOWER:
            return self.lb[q]
        if s == NB_UPPER:
            return self.ub[q]
        return 0.0

    def run(self, max_iterations):
        iters = 0
        stall = 0
        use_bland = False
        last_obj = np.inf
        last_phase = 0
        while True:
            lb_b = self.lb[self.basis]
            ub_b = self.ub[self.basis]
            below, above = self._violations(lb_b, ub_b)
            phase1 = bool(below.any() or above.any())
            if phase1:
                g = above.astype(float) - below.astype(float)
                obj = float(np.sum((lb_b - self.x_b)[below])
                            + np.sum((self.x_b - ub_b)[above]))
                y = self._btran(g)
                d = -(self.abt @ y)
            else:
                obj = float(np.dot(self.c[self.basis], self.x_b)
                            + np.dot(self.c, self._nonbasic_values()))
                y = self._btran(self.c[self.basis])
                d = self.c - self.abt @ y

            phase = 1 if phase1 else 2
            if phase != last_phase:
                stall, use_bland, last_obj = 0, False, np.inf
                last_phase = phase
            if obj < last_obj - 1e-10 * (1.0 + abs(last_obj)):
                stall = 0
                use_bland = False
            else:
                stall += 1
                if stall >= STALL_LIMIT:
                    use_bland = True
            last_obj = obj

            price = self.kern.price_bland if use_bland else self.kern.price_dantzig
            q = price(d, self.vstat, TOL_DUAL)
            if q < 0:
                if self.eta_count > 0:
                    self._refresh()  # confirm on fresh numbers
                    continue
                if phase1:
                    return LpStatus.INFEASIBLE, iters
                return LpStatus.OPTIMAL, iters

            if iters >= max_iterations:
                raise LpError(f"iteration limit {max_iterations} exceeded")
            iters += 1

            if self.vstat[q] == NB_LOWER:
                sigma = 1.0
            elif self.vstat[q] == NB_UPPER:
                sigma = -1.0
            else:
                sigma = 1.0 if d[q] < 0.0 else -1.0
            w = self._ftran(self._col(q))
            own_gap = self.ub[q] - self.lb[q]
            t, r, to_upper = self.kern.ratio_test(
                self.x_b, lb_b, ub_b, w, sigma, own_gap,
                TOL_FEAS, TOL_PIVOT, phase1)
            if r == -2:
                if phase1:
                    raise LpError("unbounded ray while restoring feasibility")
                return LpStatus.UNBOUNDED, iters
            if r == -1:
                self.kern.update_xb(self.x_b, w, sigma * t)
                self.vstat[q] = NB_UPPER if self.vstat[q] == NB_LOWER else NB_LOWER
                continue

            self.kern.update_xb(self.x_b, w, sigma * t)
            leave = self.basis[r]
            if self.lb[leave] == self.ub[leave]:
                self.vstat[leave] = NB_FIXED
            else:
                self.vstat[leave] = NB_UPPER if to_upper else NB_LOWER
            entry = self._entry_value(q) + sigma * t
            self.basis[r] = q
            self.vstat[q] = BASIC
            self.x_b[r] = entry
            k = self.eta_count
            self.eta_r[k] = r
            self.eta_w[k] = w
            self.eta_count = k + 1
            if self.eta_count >= REFACTOR_EVERY:
                self._refresh()

    # -- solution recovery --------------------------------------------------

    def extract(self):
        if self.eta_count > 0:
            self._refresh()
        x = self._nonbasic_values()
        x[self.basis] = self.x_b
        xs = x[:self.n]
        clipped = np.clip(xs, self.prob.lb, self.prob.ub)
        drift = float(np.max(np.abs(clipped - xs), initial=0.0))
        if drift > 1e-6:
            raise LpError(f"solution violates bounds by {drift:.3e}")
        scale = max(1.0, float(np.max(np.abs(self.b), initial=0.0)))
        resid = self.prob.max_violation(clipped)
        if resid > 1e-7 * scale:
            raise LpError(f"row residual {resid:.3e} exceeds tolerance")
        return clipped
