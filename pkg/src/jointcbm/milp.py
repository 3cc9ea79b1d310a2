"""Small MILP modeling layer with pluggable HiGHS backends.

Model code only talks to :class:`LinearModel`: add variables, add linear
rows, set a linear objective, optimize. Backends translate the collected
sparse data into a solver call. Two backends ship:

* ``"highs"`` -- the ``highspy`` bindings (optional dependency)
* ``"scipy"`` -- :func:`scipy.optimize.milp`, which wraps the same HiGHS engine

Both minimize.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import sparse

CONTINUOUS = "continuous"
INTEGER = "integer"
BINARY = "binary"

OPTIMAL = "optimal"
FEASIBLE_GAP = "feasible-gap"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time-limit"
UNBOUNDED = "unbounded"
ERROR = "error"


class ConfigurationError(RuntimeError):
    """Requested solver backend is unknown or not installed."""


@dataclass
class SolveResult:
    status: str
    objective: float | None
    values: np.ndarray | None
    mip_gap: float | None
    runtime: float
    backend: str

    @property
    def has_solution(self) -> bool:
        return self.values is not None


@dataclass
class SolverOptions:
    backend: str = "auto"
    time_limit: float = 600.0
    mip_gap: float = 1e-6
    seed: int = 0
    verbose: bool = False


@dataclass
class LinearModel:
    """Sparse row-wise container for a minimization MILP."""

    name: str = "model"
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    kinds: list[str] = field(default_factory=list)
    var_names: list[str] = field(default_factory=list)
    obj: dict[int, float] = field(default_factory=dict)
    obj_offset: float = 0.0
    row_lb: list[float] = field(default_factory=list)
    row_ub: list[float] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    _rows: list[int] = field(default_factory=list)
    _cols: list[int] = field(default_factory=list)
    _vals: list[float] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.lb)

    @property
    def num_constrs(self) -> int:
        return len(self.row_lb)

    def add_var(self, lb: float = 0.0, ub: float = math.inf, kind: str = CONTINUOUS,
                name: str | None = None) -> int:
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        elif kind not in (CONTINUOUS, INTEGER):
            raise ValueError(f"unknown variable kind {kind!r}")
        if lb > ub:
            raise ValueError(f"variable {name}: lb {lb} > ub {ub}")
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.kinds.append(kind)
        self.var_names.append(name or f"v{len(self.lb) - 1}")
        return len(self.lb) - 1

    def add_constr(self, terms: Iterable[tuple[int, float]] | Mapping[int, float],
                   lb: float = -math.inf, ub: float = math.inf, name: str | None = None) -> int:
        """Add ``lb <= sum(coef * var) <= ub``. Duplicate indices are summed."""
        if isinstance(terms, Mapping):
            terms = terms.items()
        row = len(self.row_lb)
        for j, v in terms:
            if v != 0.0:
                self._rows.append(row)
                self._cols.append(j)
                self._vals.append(float(v))
        self.row_lb.append(float(lb))
        self.row_ub.append(float(ub))
        self.row_names.append(name or f"r{row}")
        return row

    def add_eq(self, terms, rhs: float, name: str | None = None) -> int:
        return self.add_constr(terms, rhs, rhs, name)

    def add_le(self, terms, rhs: float, name: str | None = None) -> int:
        return self.add_constr(terms, -math.inf, rhs, name)

    def add_ge(self, terms, rhs: float, name: str | None = None) -> int:
        return self.add_constr(terms, rhs, math.inf, name)

    def set_objective(self, terms: Iterable[tuple[int, float]] | Mapping[int, float],
                      offset: float = 0.0) -> None:
        if isinstance(terms, Mapping):
            terms = terms.items()
        self.obj = {}
        for j, v in terms:
            self.obj[j] = self.obj.get(j, 0.0) + float(v)
        self.obj_offset = float(offset)

    def counts(self) -> dict[str, int]:
        kinds = np.array(self.kinds)
        return {
            "continuous": int(np.sum(kinds == CONTINUOUS)),
            "integer": int(np.sum(kinds == INTEGER)),
            "binary": int(np.sum(kinds == BINARY)),
            "constraints": self.num_constrs,
            "nonzeros": len(self._vals),
        }

    # -- arrays ---------------------------------------------------------
    def matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self._vals, (self._rows, self._cols)),
            shape=(self.num_constrs, self.num_vars),
        )

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for j, v in self.obj.items():
            c[j] += v
        return c

    def integrality(self) -> np.ndarray:
        return np.array([0 if k == CONTINUOUS else 1 for k in self.kinds], dtype=np.uint8)

    def objective_value(self, values: np.ndarray) -> float:
        return float(self.cost_vector() @ values + self.obj_offset)

    # -- solve / export -------------------------------------------------
    def optimize(self, options: SolverOptions | None = None) -> SolveResult:
        options = options or SolverOptions()
        backend = get_backend(options.backend)
        return backend(self, options)

    def write_lp(self, path: str | Path) -> None:
        """Write the model in CPLEX LP text format."""
        Path(path).write_text(to_lp_string(self))


def _fmt_terms(pairs: Iterable[tuple[int, float]], names: list[str]) -> str:
    out = []
    for j, v in pairs:
        sign = "-" if v < 0 else "+"
        out.append(f"{sign} {abs(v):.12g} {names[j]}")
    text = " ".join(out)
    if text.startswith("+ "):
        text = text[2:]
    return text or "0"


def to_lp_string(model: LinearModel) -> str:
    names = [n.replace("[", "(").replace("]", ")").replace(" ", "") for n in model.var_names]
    lines = [f"\\ {model.name}", "Minimize", " obj: " + (_fmt_terms(sorted(model.obj.items()), names) or "0")]
    lines.append("Subject To")
    A = model.matrix().tocsr()
    for i in range(model.num_constrs):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        expr = _fmt_terms(zip(A.indices[lo:hi], A.data[lo:hi]), names)
        rl, ru = model.row_lb[i], model.row_ub[i]
        rname = model.row_names[i].replace(" ", "")
        if rl == ru:
            lines.append(f" {rname}: {expr} = {rl:.12g}")
        else:
            if rl > -math.inf:
                lines.append(f" {rname}_lo: {expr} >= {rl:.12g}")
            if ru < math.inf:
                lines.append(f" {rname}_up: {expr} <= {ru:.12g}")
    lines.append("Bounds")
    for j in range(model.num_vars):
        lo, hi = model.lb[j], model.ub[j]
        hi_s = "+inf" if hi == math.inf else f"{hi:.12g}"
        lo_s = "-inf" if lo == -math.inf else f"{lo:.12g}"
        lines.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    gen = [names[j] for j, k in enumerate(model.kinds) if k == INTEGER]
    binv = [names[j] for j, k in enumerate(model.kinds) if k == BINARY]
    if gen:
        lines.append("General")
        lines.extend(f" {n}" for n in gen)
    if binv:
        lines.append("Binary")
        lines.extend(f" {n}" for n in binv)
    lines.append("End")
    return "\n".join(lines) + "\n"


# -- backends -------------------------------------------------------------

def _solve_scipy(model: LinearModel, options: SolverOptions) -> SolveResult:
    from scipy.optimize import Bounds, LinearConstraint, milp

    t0 = time.perf_counter()
    constraints = []
    if model.num_constrs:
        constraints.append(LinearConstraint(model.matrix(), model.row_lb, model.row_ub))
    res = milp(
        model.cost_vector(),
        integrality=model.integrality(),
        bounds=Bounds(model.lb, model.ub),
        constraints=constraints,
        options={"time_limit": options.time_limit, "mip_rel_gap": options.mip_gap,
                 "disp": options.verbose},
    )
    runtime = time.perf_counter() - t0
    values = None if res.x is None else np.asarray(res.x)
    gap = getattr(res, "mip_gap", None)
    if res.status == 0:
        status = OPTIMAL if (gap is None or gap <= options.mip_gap + 1e-12) else FEASIBLE_GAP
    elif res.status == 1:
        status = TIME_LIMIT
    elif res.status == 2:
        status = INFEASIBLE
    elif res.status == 3:
        status = UNBOUNDED
    else:
        status = ERROR
    obj = None if values is None else model.objective_value(values)
    return SolveResult(status, obj, values, gap, runtime, "scipy")


def _solve_highspy(model: LinearModel, options: SolverOptions) -> SolveResult:
    try:
        import highspy
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise ConfigurationError("backend 'highs' needs the highspy package "
                                 "(pip install highspy) or use --backend scipy") from exc

    t0 = time.perf_counter()
    h = highspy.Highs()
    h.setOptionValue("output_flag", bool(options.verbose))
    h.setOptionValue("time_limit", float(options.time_limit))
    h.setOptionValue("mip_rel_gap", float(options.mip_gap))
    h.setOptionValue("random_seed", int(options.seed))
    h.setOptionValue("threads", 1)

    A = model.matrix().tocsc()
    lp = highspy.HighsLp()
    lp.num_col_ = model.num_vars
    lp.num_row_ = model.num_constrs
    lp.col_cost_ = model.cost_vector()
    lp.offset_ = model.obj_offset
    lp.col_lower_ = np.asarray(model.lb, dtype=float)
    lp.col_upper_ = np.asarray(model.ub, dtype=float)
    lp.row_lower_ = np.asarray(model.row_lb, dtype=float)
    lp.row_upper_ = np.asarray(model.row_ub, dtype=float)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr
    lp.a_matrix_.index_ = A.indices
    lp.a_matrix_.value_ = A.data
    integ = model.integrality()
    if integ.any():
        lp.integrality_ = [highspy.HighsVarType.kInteger if v else highspy.HighsVarType.kContinuous
                           for v in integ]
    h.passModel(lp)
    h.run()
    runtime = time.perf_counter() - t0

    ms = h.getModelStatus()
    info = h.getInfo()
    has_sol = info.primal_solution_status == 2  # kSolutionStatusFeasible
    values = np.asarray(h.getSolution().col_value) if has_sol else None
    gap = float(info.mip_gap) if integ.any() else 0.0
    MS = highspy.HighsModelStatus
    if ms == MS.kOptimal:
        status = OPTIMAL
    elif ms == MS.kInfeasible:
        status = INFEASIBLE
    elif ms in (MS.kUnbounded, MS.kUnboundedOrInfeasible):
        status = INFEASIBLE if ms == MS.kUnboundedOrInfeasible and not has_sol else UNBOUNDED
    elif ms == MS.kTimeLimit:
        status = TIME_LIMIT
    else:
        status = FEASIBLE_GAP if has_sol else ERROR
    if status == OPTIMAL and gap > options.mip_gap + 1e-12 and gap != math.inf:
        status = FEASIBLE_GAP
    obj = None if values is None else model.objective_value(values)
    return SolveResult(status, obj, values, gap, runtime, "highs")


_BACKENDS: dict[str, Callable[[LinearModel, SolverOptions], SolveResult]] = {
    "highs": _solve_highspy,
    "scipy": _solve_scipy,
}


def available_backends() -> list[str]:
    names = ["scipy"]
    try:
        import highspy  # noqa: F401
        names.insert(0, "highs")
    except ImportError:
        pass
    return names


def get_backend(name: str) -> Callable[[LinearModel, SolverOptions], SolveResult]:
    if name == "auto":
        name = available_backends()[0]
    if name not in _BACKENDS:
        raise ConfigurationError(f"unknown solver backend {name!r}; choose from {sorted(_BACKENDS)}")
    if name == "highs" and "highs" not in available_backends():
        raise ConfigurationError("backend 'highs' needs the highspy package "
                                 "(pip install highspy) or use backend 'scipy'")
    return _BACKENDS[name]
