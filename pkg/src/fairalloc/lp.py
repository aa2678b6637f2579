"""Linear programs: a small modelling layer, the absolute-value linearization,
and a deterministic two-phase simplex solver using Bland's pivoting rule."""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LpInstance",
    "LpSolution",
    "InvalidWeightError",
    "linearize_abs",
    "solve_lp",
    "to_lp_format",
]

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
OPT_RTOL = 1e-11

_RELATIONS = ("<=", "=", ">=")


class InvalidWeightError(ValueError):
    """A negative weight on an absolute-value penalty (the linearization would be unsound)."""


@dataclass
class LpInstance:
    """Maximization LP over named variables.

    Constraints are stored densely, one row per constraint. Variables default
    to bounds ``[0, inf)``.
    """

    names: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    relations: list = field(default_factory=list)
    rhs: list = field(default_factory=list)

    def add_variable(self, name, obj=0.0, lb=0.0, ub=np.inf):
        if name in self._index():
            raise ValueError(f"duplicate variable {name!r}")
        self.names.append(name)
        self.objective.append(float(obj))
        self.lower.append(float(lb))
        self.upper.append(float(ub))
        self._idx = None
        return len(self.names) - 1

    def add_constraint(self, coeffs, relation, rhs):
        """Add ``coeffs . x  relation  rhs``.

        ``coeffs`` is either a mapping from variable name to coefficient or a
        dense vector over the variables declared so far.
        """
        if relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {_RELATIONS}, got {relation!r}")
        if isinstance(coeffs, dict):
            index = self._index()
            unknown = [k for k in coeffs if k not in index]
            if unknown:
                raise KeyError(f"constraint references undeclared variables {unknown}")
            row = {index[k]: float(v) for k, v in coeffs.items() if v != 0}
        else:
            dense = np.asarray(coeffs, dtype=float)
            if dense.ndim != 1 or dense.size > len(self.names):
                raise ValueError("dense constraint longer than the declared variables")
            nz = np.flatnonzero(dense)
            row = dict(zip(nz.tolist(), dense[nz].tolist()))
        self.rows.append(row)
        self.relations.append(relation)
        self.rhs.append(float(rhs))

    def _index(self):
        if getattr(self, "_idx", None) is None or len(self._idx) != len(self.names):
            self._idx = {n: i for i, n in enumerate(self.names)}
        return self._idx

    @property
    def n_vars(self):
        return len(self.names)

    @property
    def n_constraints(self):
        return len(self.rows)

    def matrix(self):
        A = np.zeros((len(self.rows), len(self.names)))
        for i, row in enumerate(self.rows):
            for j, v in row.items():
                A[i, j] = v
        return A

    def copy(self):
        return LpInstance(
            list(self.names), list(self.objective), list(self.lower), list(self.upper),
            [dict(r) for r in self.rows], list(self.relations), list(self.rhs),
        )


@dataclass(frozen=True)
class LpSolution:
    status: str
    values: dict
    objective_value: float
    x: np.ndarray = None
    pivots: int = 0

    @property
    def optimal(self):
        return self.status == "optimal"

    def __getitem__(self, name):
        return self.values[name]


def linearize_abs(alpha, abs_terms, names=None):
    """Build the LP maximizing ``alpha.v - sum_g lam_g |beta_g . v|``.

    Each absolute value gets a slack ``w_g >= 0`` with ``-w_g <= beta_g.v <= w_g``
    and objective coefficient ``-lam_g``. Returns the instance and the slack names.
    """
    alpha = np.asarray(alpha, dtype=float)
    n = alpha.size
    if names is None:
        names = [f"v{j}" for j in range(n)]
    lp = LpInstance()
    for name, a in zip(names, alpha):
        lp.add_variable(name, obj=a)
    slack_names = []
    for g, (lam, beta) in enumerate(abs_terms):
        lam = float(lam)
        if not np.isfinite(lam) or lam < 0:
            raise InvalidWeightError(f"abs-term weight must be finite and >= 0, got {lam}")
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (n,):
            raise ValueError(f"beta_{g} has shape {beta.shape}, expected ({n},)")
        w = f"w{g}"
        slack_names.append(w)
        lp.add_variable(w, obj=-lam)
        coeffs = dict(zip(names, beta))
        lp.add_constraint({**coeffs, w: -1.0}, "<=", 0.0)
        lp.add_constraint({**coeffs, w: 1.0}, ">=", 0.0)
    return lp, slack_names


def _standard_form(lp):
    """Rewrite as ``max c'y, A y = b, y >= 0, b >= 0`` plus the map back to x."""
    A0 = lp.matrix()
    m0, n = A0.shape
    lo = np.asarray(lp.lower, dtype=float)
    hi = np.asarray(lp.upper, dtype=float)
    c0 = np.asarray(lp.objective, dtype=float)
    b0 = np.asarray(lp.rhs, dtype=float)
    rel = list(lp.relations)
    if np.any(~np.isfinite(A0)) or np.any(~np.isfinite(c0)) or np.any(~np.isfinite(b0)):
        raise ValueError("LP coefficients must be finite")

    # x_j = shift_j + sum_t T[j, t] y_t
    cols, shift = [], np.zeros(n)
    extra_rows = []
    for j in range(n):
        if np.isfinite(lo[j]):
            shift[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(hi[j]):
                extra_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            shift[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.zeros((n, len(cols)))
    for t, (j, s) in enumerate(cols):
        T[j, t] = s

    A = A0 @ T
    b = b0 - A0 @ shift
    c = c0 @ T
    const = float(c0 @ shift)
    if extra_rows:
        E = np.zeros((len(extra_rows), len(cols)))
        for r, (t, ub) in enumerate(extra_rows):
            E[r, t] = 1.0
        A = np.vstack([A, E])
        b = np.concatenate([b, [ub for _, ub in extra_rows]])
        rel = rel + ["<="] * len(extra_rows)
    return A, b, rel, c, const, T, shift


class _Tableau:
    def __init__(self, T, basis):
        self.T = T
        self.basis = basis
        self.pivots = 0

    def pivot(self, i, j):
        T = self.T
        T[i] /= T[i, j]
        col = T[:, j].copy()
        col[i] = 0.0
        T -= np.outer(col, T[i])
        T[:, j] = 0.0
        T[i, j] = 1.0
        self.basis[i] = j
        self.pivots += 1

    def run(self, n_rows, n_cols, obj_row, allowed):
        """Bland's rule primal simplex maximizing the row ``obj_row``.

        ``obj_row`` holds reduced costs as ``z_j - c_j``; a column improves the
        objective when its entry is negative.
        """
        T = self.T
        scale = max(1.0, np.abs(T[obj_row, :n_cols]).max())
        while True:
            red = T[obj_row, :n_cols]
            cand = np.flatnonzero((red < -OPT_RTOL * scale) & allowed)
            if cand.size == 0:
                return "optimal"
            j = cand[0]
            col = T[:n_rows, j]
            pos = col > PIVOT_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(col.shape, np.inf)
            ratios[pos] = T[:n_rows, -1][pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + FEAS_TOL * 1e-3 * max(1.0, abs(best)))
            i = ties[np.argmin(self.basis[ties])]
            self.pivot(i, j)


def solve_lp(lp):
    """Solve a maximization :class:`LpInstance` with the two-phase simplex method.

    Pivoting follows Bland's rule (lowest-index entering column, lowest-index
    leaving basic variable on ratio ties), so the result is a deterministic
    function of the instance. Infeasible and unbounded problems are reported
    through ``status`` rather than raised.
    """
    A, b, rel, c, const, Tmap, shift = _standard_form(lp)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    rel = [
        {"<=": ">=", ">=": "<="}.get(r, r) if flip else r for r, flip in zip(rel, neg)
    ]

    n_slack = sum(r != "=" for r in rel)
    n_art = sum(r != "<=" for r in rel)
    width = n + n_slack + n_art
    T = np.zeros((m + 2, width + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    s = n
    a = n + n_slack
    art_cols = []
    for i, r in enumerate(rel):
        if r == "<=":
            T[i, s] = 1.0
            basis[i] = s
            s += 1
        elif r == ">=":
            T[i, s] = -1.0
            s += 1
            T[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1
        else:
            T[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1
    # row m: phase-2 objective (z - c), row m+1: phase-1 objective (max -sum art)
    T[m, :n] = -c
    T[m + 1, art_cols] = 1.0
    for i in range(m):
        if basis[i] in art_cols:
            T[m + 1] -= T[i]
    tab = _Tableau(T, basis)
    if art_cols:
        allowed = np.ones(width, dtype=bool)
        tab.run(m, width, m + 1, allowed)
        if -T[m + 1, -1] > FEAS_TOL * max(1.0, np.abs(b).max()):
            return LpSolution("infeasible", {}, float("nan"), None, tab.pivots)
        # drive zero-level artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if tab.basis[i] >= n + n_slack:
                row = T[i, : n + n_slack]
                nz = np.flatnonzero(np.abs(row) > 1e-9)
                if nz.size:
                    tab.pivot(i, nz[0])
                else:
                    keep[i] = False
        if not keep.all():
            rows = np.concatenate([np.flatnonzero(keep), [m, m + 1]])
            tab.T = T = T[rows]
            tab.basis = tab.basis[keep]
            m = int(keep.sum())
    allowed = np.zeros(width, dtype=bool)
    allowed[: n + n_slack] = True
    status = tab.run(m, width, m, allowed)
    if status == "unbounded":
        return LpSolution("unbounded", {}, float("inf"), None, tab.pivots)
    y = np.zeros(width)
    y[tab.basis] = T[:m, -1]
    x = shift + Tmap @ y[:n]
    obj = float(np.asarray(lp.objective) @ x) if lp.n_vars else 0.0
    values = dict(zip(lp.names, x.tolist()))
    return LpSolution("optimal", values, obj, x, tab.pivots)


def _fmt(v):
    return repr(float(v))


def to_lp_format(lp, name="fairalloc"):
    """Render the instance in CPLEX LP text format (for cross-checking with external solvers)."""
    def expr(coeffs):
        terms = []
        for j, v in coeffs:
            sign = "-" if v < 0 else "+"
            terms.append(f"{sign} {_fmt(abs(v))} {lp.names[j]}")
        if not terms:
            return "0 " + (lp.names[0] if lp.names else "")
        if terms[0].startswith("+ "):
            terms[0] = terms[0][2:]
        # the format caps line length, so long expressions continue on indented lines
        out, line = [], ""
        for t in terms:
            if line and len(line) + len(t) > 200:
                out.append(line)
                line = "   " + t
            else:
                line = f"{line} {t}" if line else t
        out.append(line)
        return "\n".join(out)

    lines = [f"\\ {name}", "Maximize", " obj: " + expr(
        [(j, v) for j, v in enumerate(lp.objective) if v != 0])]
    lines.append("Subject To")
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for i, (row, r, rhs) in enumerate(zip(lp.rows, lp.relations, lp.rhs)):
        lines.append(f" c{i}: {expr(sorted(row.items()))} {op[r]} {_fmt(rhs)}")
    lines.append("Bounds")
    for nm, lo, hi in zip(lp.names, lp.lower, lp.upper):
        if lo == 0 and hi == np.inf:
            continue
        if lo == -np.inf and hi == np.inf:
            lines.append(f" {nm} free")
            continue
        lo_s = "-inf" if lo == -np.inf else _fmt(lo)
        hi_s = "+inf" if hi == np.inf else _fmt(hi)
        lines.append(f" {lo_s} <= {nm} <= {hi_s}")
    lines.append("End")
    return "\n".join(lines) + "\n"
