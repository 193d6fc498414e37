"""Sparse linear-program container, named-variable builder, and text dumps.

Problems are minimization problems over bounded variables with rows in <=
or = form. The plain-text dump is deterministic down to the byte (floats are
written with repr round-tripping) so construction code can be golden-file
diffed, and parse_text inverts it exactly.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import DomainError, LpError

SENSE_LE = "L"
SENSE_EQ = "E"

_INF = math.inf


def _fmt(value: float) -> str:
    # + 0.0 normalizes -0.0 so dumps are canonical
    return repr(float(value) + 0.0)


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    iterations: int = 0
    kernel: str = ""

    def value(self, problem: "LpProblem", name: str) -> float:
        if self.x is None:
            raise LpError(f"solution has status {self.status.value}, no values")
        return float(self.x[problem.name_index[name]])


@dataclass(frozen=True)
class LpProblem:
    """Immutable minimization LP: min c'x s.t. Ax (<=,=) b, lb <= x <= ub."""

    obj: np.ndarray
    a: sp.csr_matrix
    senses: tuple
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    names: tuple
    name_index: dict = field(compare=False)
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def m(self) -> int:
        return len(self.senses)

    def col(self, name: str) -> int:
        return self.name_index[name]

    def replace_meta(self, meta: dict) -> "LpProblem":
        """Copy of this problem with different solver hints."""
        return dataclasses.replace(self, meta=dict(meta))

    def objective_value(self, x) -> float:
        return float(np.dot(self.obj, x))

    def max_violation(self, x) -> float:
        """Largest constraint or bound violation of x (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        viol = 0.0
        if self.m:
            row_vals = self.a.dot(x)
            for i, sense in enumerate(self.senses):
                r = row_vals[i] - self.rhs[i]
                viol = max(viol, abs(r) if sense == SENSE_EQ else r)
        lb_viol = np.max(self.lb - x, initial=0.0)
        ub_viol = np.max(x - self.ub, initial=0.0)
        return max(viol, lb_viol, ub_viol, 0.0)

    def dump_text(self) -> str:
        lines = ["peakshaver-lp 1", f"vars {self.n}"]
        for j, name in enumerate(self.names):
            lines.append(f"{name} {_fmt(self.lb[j])} {_fmt(self.ub[j])} {_fmt(self.obj[j])}")
        lines.append(f"rows {self.m}")
        coo = self.a.tocoo()
        per_row = [[] for _ in range(self.m)]
        for i, j, v in zip(coo.row, coo.col, coo.data):
            per_row[i].append((j, v))
        for i in range(self.m):
            entries = sorted(per_row[i])
            parts = [self.senses[i], _fmt(self.rhs[i]), str(len(entries))]
            for j, v in entries:
                parts.append(self.names[j])
                parts.append(_fmt(v))
            lines.append(" ".join(parts))
        lines.append("end")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse_text(cls, text: str) -> "LpProblem":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "peakshaver-lp 1":
            raise LpError("not a peakshaver-lp v1 dump")
        if lines[-1] != "end":
            raise LpError("dump is truncated (missing end marker)")
        try:
            return cls._parse_body(lines)
        except LpError:
            raise
        except (IndexError, ValueError, KeyError) as exc:
            raise LpError(f"malformed dump: {exc}") from exc

    @classmethod
    def _parse_body(cls, lines) -> "LpProblem":
        pos = 1
        head = lines[pos].split()
        if head[0] != "vars":
            raise LpError("expected vars section")
        n = int(head[1])
        pos += 1
        builder = LpBuilder()
        for _ in range(n):
            name, lb, ub, cost = lines[pos].split()
            builder.add_var(name, float(lb), float(ub), float(cost))
            pos += 1
        head = lines[pos].split()
        if head[0] != "rows":
            raise LpError("expected rows section")
        m = int(head[1])
        pos += 1
        for _ in range(m):
            parts = lines[pos].split()
            sense, rhs, nnz = parts[0], float(parts[1]), int(parts[2])
            coeffs = []
            for k in range(nnz):
                vname = parts[3 + 2 * k]
                coef = float(parts[4 + 2 * k])
                coeffs.append((builder.index_of(vname), coef))
            if sense == SENSE_LE:
                builder.add_le(coeffs, rhs)
            elif sense == SENSE_EQ:
                builder.add_eq(coeffs, rhs)
            else:
                raise LpError(f"unknown row sense {sense!r}")
            pos += 1
        return builder.build()


class LpBuilder:
    """Accumulates named variables and rows, then freezes into an LpProblem."""

    def __init__(self):
        self._names = []
        self._index = {}
        self._lb = []
        self._ub = []
        self._cost = []
        self._senses = []
        self._rhs = []
        self._rows_j = []
        self._rows_v = []

    @property
    def n_rows(self) -> int:
        return len(self._senses)

    @property
    def n_vars(self) -> int:
        return len(self._names)

    def index_of(self, name: str) -> int:
        return self._index[name]

    def add_var(self, name: str, lb: float = 0.0, ub: float = _INF, cost: float = 0.0) -> int:
        if not name or any(c.isspace() for c in name):
            raise DomainError(f"bad variable name {name!r}")
        if name in self._index:
            raise DomainError(f"duplicate variable name {name!r}")
        if math.isnan(lb) or math.isnan(ub) or not math.isfinite(cost):
            raise DomainError(f"bad bounds/cost for {name!r}")
        if lb > ub:
            raise DomainError(f"variable {name!r} has lb {lb} > ub {ub}")
        j = len(self._names)
        self._names.append(name)
        self._index[name] = j
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._cost.append(float(cost))
        return j

    def add_cost(self, j: int, delta: float):
        if not math.isfinite(delta):
            raise DomainError("objective coefficient must be finite")
        self._cost[j] += delta

    def _add_row(self, sense: str, coeffs, rhs: float):
        if isinstance(coeffs, dict):
            coeffs = list(coeffs.items())
        merged = {}
        for j, v in coeffs:
            if not 0 <= j < len(self._names):
                raise DomainError(f"row references undeclared column {j}")
            if not math.isfinite(v):
                raise DomainError("row coefficient must be finite")
            merged[j] = merged.get(j, 0.0) + float(v)
        if not merged:
            raise DomainError("empty constraint row")
        if not math.isfinite(rhs):
            raise DomainError("right-hand side must be finite")
        items = sorted(merged.items())
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._rows_j.append([j for j, _ in items])
        self._rows_v.append([v for _, v in items])

    def add_le(self, coeffs, rhs: float):
        self._add_row(SENSE_LE, coeffs, rhs)

    def add_ge(self, coeffs, rhs: float):
        if isinstance(coeffs, dict):
            coeffs = list(coeffs.items())
        self._add_row(SENSE_LE, [(j, -v) for j, v in coeffs], -rhs)

    def add_eq(self, coeffs, rhs: float):
        self._add_row(SENSE_EQ, coeffs, rhs)

    def build(self, meta: dict | None = None) -> LpProblem:
        n = len(self._names)
        m = len(self._senses)
        indptr = [0]
        indices = []
        data = []
        for js, vs in zip(self._rows_j, self._rows_v):
            indices.extend(js)
            data.extend(vs)
            indptr.append(len(indices))
        a = sp.csr_matrix(
            (np.array(data, dtype=float), np.array(indices, dtype=np.int32),
             np.array(indptr, dtype=np.int32)),
            shape=(m, n))
        return LpProblem(
            obj=np.array(self._cost, dtype=float),
            a=a,
            senses=tuple(self._senses),
            rhs=np.array(self._rhs, dtype=float),
            lb=np.array(self._lb, dtype=float),
            ub=np.array(self._ub, dtype=float),
            names=tuple(self._names),
            name_index=dict(self._index),
            meta=dict(meta) if meta else {},
        )


def add_epigraph_max(builder: LpBuilder, target: int, terms) -> int:
    """Constrain variable `target` to dominate each of `terms` (target >= term).

    Each term is an affine expression: a list of (var, coef) pairs, or a
    (pairs, constant) tuple. With a positive objective weight on target this
    linearizes target = max(terms). Returns the number of rows added.
    """
    terms = list(terms)
    if not terms:
        raise DomainError("epigraph needs at least one term")
    for term in terms:
        if isinstance(term, tuple) and len(term) == 2 and not isinstance(term[0], int):
            coeffs, const = term
        else:
            coeffs, const = term, 0.0
        builder.add_le(list(coeffs) + [(target, -1.0)], -float(const))
    return len(terms)
