"""Declarative LMI / determinant-maximization problems and their solve contract.

A problem is a set of matrix/scalar variables (``VarRef``), affine PSD block
constraints (``AffineBlock``), scalar linear constraints, and one objective.
Solving lowers the description to CVXPY and hands it to a conic backend
(CLARABEL first, SCS as fallback); any other backend can be registered via
``register_backend``.  Infeasibility is reported through ``SolveResult.status``,
never as an exception, because grid sweeps legitimately hit infeasible points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import matops
from .errors import ModelError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"

ACCEPTED_CVXPY = {"optimal": OPTIMAL, "optimal_inaccurate": OPTIMAL}
INFEASIBLE_CVXPY = {"infeasible", "infeasible_inaccurate"}


@dataclass(frozen=True)
class VarRef:
    """Reference to a decision variable.

    kind is one of ``symmetric`` (dim x dim), ``matrix`` (rows x cols) or
    ``scalar``.
    """

    id: str
    kind: str
    rows: int = 1
    cols: int = 1

    @staticmethod
    def symmetric(id: str, dim: int) -> "VarRef":
        if dim <= 0:
            raise ModelError(f"variable {id}: dimension must be positive")
        return VarRef(id, "symmetric", dim, dim)

    @staticmethod
    def matrix(id: str, rows: int, cols: int) -> "VarRef":
        if rows <= 0 or cols <= 0:
            raise ModelError(f"variable {id}: dimensions must be positive")
        return VarRef(id, "matrix", rows, cols)

    @staticmethod
    def scalar(id: str) -> "VarRef":
        return VarRef(id, "scalar")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)


@dataclass(frozen=True)
class Term:
    """One affine term  left @ V(^T) @ right  (matrix var) or  coeff * v (scalar var)."""

    var: VarRef
    left: np.ndarray
    right: np.ndarray
    transpose: bool = False

    def shape(self) -> tuple[int, int]:
        return (self.left.shape[0], self.right.shape[1])


@dataclass
class AffineBlock:
    """Affine symmetric matrix expression  constant + sum of terms (+ transposes)."""

    constant: np.ndarray
    terms: list[Term] = field(default_factory=list)
    name: str = ""

    @property
    def dim(self) -> int:
        return self.constant.shape[0]


@dataclass(frozen=True)
class ScalarTerm:
    """trace(weight^T V) for a matrix var, or coeff * v for a scalar var."""

    var: VarRef
    weight: np.ndarray  # 1x1 for scalars


@dataclass
class ScalarConstraint:
    """sum of scalar terms + constant  >= 0  (sense fixed as >=)."""

    terms: list[ScalarTerm]
    constant: float = 0.0
    name: str = ""


@dataclass
class Objective:
    kind: str  # feasibility | minimize-linear | minimize-neg-logdet | minimize-trace
    target: VarRef | None = None
    terms: list[ScalarTerm] = field(default_factory=list)


@dataclass
class LmiProblem:
    vars: dict[str, VarRef] = field(default_factory=dict)
    psd_constraints: list[AffineBlock] = field(default_factory=list)
    scalar_constraints: list[ScalarConstraint] = field(default_factory=list)
    objective: Objective = field(default_factory=lambda: Objective("feasibility"))
    pd_floor: dict[str, float] = field(default_factory=dict)  # var id -> eps for V >= eps I

    def add_var(self, ref: VarRef) -> VarRef:
        if ref.id in self.vars:
            raise ModelError(f"duplicate variable id {ref.id!r}")
        self.vars[ref.id] = ref
        return ref

    def require(self, ref: VarRef) -> None:
        if ref.id not in self.vars:
            raise ModelError(f"variable {ref.id!r} is not declared in this problem")

    def add_psd(self, block: AffineBlock) -> None:
        d = block.dim
        if block.constant.shape != (d, d):
            raise ModelError(f"block {block.name!r}: constant must be square")
        for t in block.terms:
            self.require(t.var)
            if t.shape() != (d, d):
                raise ModelError(
                    f"block {block.name!r}: term on {t.var.id} has shape {t.shape()}, "
                    f"expected {(d, d)}")
        self.psd_constraints.append(block)

    def add_scalar_ge(self, terms: list[ScalarTerm], constant: float = 0.0,
                      name: str = "") -> None:
        for t in terms:
            self.require(t.var)
        self.scalar_constraints.append(ScalarConstraint(list(terms), constant, name))

    def set_pd_floor(self, ref: VarRef, eps: float) -> None:
        """Model the strict inequality V > 0 as V >= eps I."""
        self.require(ref)
        if ref.kind != "symmetric":
            raise ModelError(f"pd floor only applies to symmetric vars, not {ref.id}")
        self.pd_floor[ref.id] = eps

    def to_json_dict(self) -> dict:
        """Documented debug dump (variables, blocks, objective) for cross-checking."""
        def arr(a):
            return np.asarray(a).tolist()

        return {
            "variables": [
                {"id": v.id, "kind": v.kind, "rows": v.rows, "cols": v.cols}
                for v in self.vars.values()
            ],
            "psd_constraints": [
                {
                    "name": b.name,
                    "constant": arr(b.constant),
                    "terms": [
                        {"var": t.var.id, "left": arr(t.left), "right": arr(t.right),
                         "transpose": t.transpose}
                        for t in b.terms
                    ],
                }
                for b in self.psd_constraints
            ],
            "scalar_constraints": [
                {
                    "name": c.name,
                    "constant": c.constant,
                    "terms": [{"var": t.var.id, "weight": arr(t.weight)} for t in c.terms],
                }
                for c in self.scalar_constraints
            ],
            "pd_floor": dict(self.pd_floor),
            "objective": {
                "kind": self.objective.kind,
                "target": self.objective.target.id if self.objective.target else None,
                "terms": [{"var": t.var.id, "weight": arr(t.weight)}
                          for t in self.objective.terms],
            },
        }

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)


@dataclass
class SolveResult:
    status: str
    assignments: dict[str, np.ndarray | float] = field(default_factory=dict)
    objective_value: float = float("nan")
    residuals: dict[str, float] = field(default_factory=dict)
    backend: str = ""


@dataclass
class SolveOptions:
    eps_pd: float = 1e-6          # strict-inequality floor when none set explicitly
    feas_tol: float = 1e-7        # post-hoc residual acceptance threshold
    max_iters: int = 100000
    backends: tuple[str, ...] = ("clarabel", "scs")
    verify: bool = True


# --- block-matrix assembly helper -------------------------------------------------

def block_psd(rows, name: str = "") -> AffineBlock:
    """Assemble an AffineBlock from a grid of cell expressions.

    Each cell is ``None`` (zeros), a numpy array (constant), a ``Term``, or a
    list of arrays/Terms to be summed.  Cell (i, j) with i != j is
    automatically mirrored: callers provide the full grid, and the assembler
    checks conformability.  Every Term is embedded with row/column selectors.
    """
    nr = len(rows)
    nc = len(rows[0])
    # infer block dimensions
    rdim = [0] * nr
    cdim = [0] * nc
    def cell_items(cell):
        if cell is None:
            return []
        if isinstance(cell, (list, tuple)):
            return list(cell)
        return [cell]

    for i, row in enumerate(rows):
        if len(row) != nc:
            raise ModelError(f"block {name!r}: ragged rows")
        for j, cell in enumerate(row):
            for item in cell_items(cell):
                if isinstance(item, Term):
                    r, c = item.shape()
                else:
                    item = np.atleast_2d(np.asarray(item, dtype=float))
                    r, c = item.shape
                for dim, k, what in ((rdim, i, r), (cdim, j, c)):
                    if dim[k] == 0:
                        dim[k] = what
                    elif dim[k] != what:
                        raise ModelError(
                            f"block {name!r}: cell ({i},{j}) dimension mismatch")
    if any(d == 0 for d in rdim) or any(d == 0 for d in cdim):
        raise ModelError(f"block {name!r}: could not infer all block dimensions")
    if rdim != cdim:
        raise ModelError(f"block {name!r}: block grid is not square: {rdim} vs {cdim}")
    total = sum(rdim)
    roff = np.concatenate([[0], np.cumsum(rdim)]).astype(int)

    constant = np.zeros((total, total))
    terms: list[Term] = []
    for i, row in enumerate(rows):
        for j, cell in enumerate(row):
            sel_r = np.zeros((total, rdim[i]))
            sel_r[roff[i]:roff[i + 1], :] = np.eye(rdim[i])
            sel_c = np.zeros((cdim[j], total))
            sel_c[:, roff[j]:roff[j + 1]] = np.eye(cdim[j])
            for item in cell_items(cell):
                if isinstance(item, Term):
                    terms.append(Term(item.var, sel_r @ item.left,
                                      item.right @ sel_c, item.transpose))
                else:
                    c = np.atleast_2d(np.asarray(item, dtype=float))
                    constant[roff[i]:roff[i + 1], roff[j]:roff[j + 1]] += c
    skew = np.abs(constant - constant.T).max()
    if skew > 1e-9 * max(1.0, np.abs(constant).max()):
        raise ModelError(f"block {name!r}: constant part not symmetric (skew {skew:.3g})")
    return AffineBlock(constant=0.5 * (constant + constant.T), terms=terms, name=name)


def term(var: VarRef, left=None, right=None, transpose: bool = False) -> Term:
    """Convenience Term constructor with identity defaults for left/right."""
    r, c = var.shape
    if transpose:
        r, c = c, r
    l = np.eye(r) if left is None else np.atleast_2d(np.asarray(left, dtype=float))
    rr = np.eye(c) if right is None else np.atleast_2d(np.asarray(right, dtype=float))
    return Term(var, l, rr, transpose)


# --- lowering to cvxpy -------------------------------------------------------------

def _cvx_vars(problem: LmiProblem) -> dict[str, cp.Variable]:
    out = {}
    for ref in problem.vars.values():
        if ref.kind == "symmetric":
            out[ref.id] = cp.Variable((ref.rows, ref.cols), symmetric=True, name=ref.id)
        elif ref.kind == "matrix":
            out[ref.id] = cp.Variable((ref.rows, ref.cols), name=ref.id)
        elif ref.kind == "scalar":
            out[ref.id] = cp.Variable(name=ref.id)
        else:
            raise ModelError(f"unknown variable kind {ref.kind!r}")
    return out


def _block_expr(block: AffineBlock, cv: dict[str, cp.Variable]):
    expr = cp.Constant(block.constant)
    for t in block.terms:
        v = cv[t.var.id]
        if t.var.kind == "scalar":
            expr = expr + cp.multiply(v, cp.Constant(t.left @ t.right))
        else:
            body = v.T if t.transpose else v
            expr = expr + cp.Constant(t.left) @ body @ cp.Constant(t.right)
    return expr


def _scalar_expr(terms, constant, cv):
    expr = cp.Constant(constant)
    for t in terms:
        v = cv[t.var.id]
        if t.var.kind == "scalar":
            expr = expr + float(t.weight) * v
        else:
            expr = expr + cp.trace(cp.Constant(np.asarray(t.weight, dtype=float).T) @ v)
    return expr


_BACKENDS: dict[str, dict] = {
    "clarabel": {"solver": "CLARABEL", "kwargs": {}},
    "scs": {"solver": "SCS", "kwargs": {"eps": 1e-8}},
}


def register_backend(name: str, solver: str, **kwargs) -> None:
    """Register an external conic solver usable via SolveOptions.backends."""
    _BACKENDS[name] = {"solver": solver, "kwargs": kwargs}


def _lower(problem: LmiProblem, opts: SolveOptions):
    cv = _cvx_vars(problem)
    cons = []
    for block in problem.psd_constraints:
        cons.append(_block_expr(block, cv) >> 0)
    for sc in problem.scalar_constraints:
        cons.append(_scalar_expr(sc.terms, sc.constant, cv) >= 0)
    for vid, eps in problem.pd_floor.items():
        ref = problem.vars[vid]
        cons.append(cv[vid] >> eps * np.eye(ref.rows))
    obj = problem.objective
    if obj.kind == "feasibility":
        objective = cp.Minimize(0)
    elif obj.kind == "minimize-linear":
        objective = cp.Minimize(_scalar_expr(obj.terms, 0.0, cv))
    elif obj.kind == "minimize-trace":
        objective = cp.Minimize(cp.trace(cv[obj.target.id]))
    elif obj.kind == "minimize-neg-logdet":
        if obj.target is None or problem.vars[obj.target.id].kind != "symmetric":
            raise ModelError("minimize-neg-logdet needs a symmetric target variable")
        objective = cp.Minimize(-cp.log_det(cv[obj.target.id]))
    else:
        raise ModelError(f"unknown objective kind {obj.kind!r}")
    return cv, cp.Problem(objective, cons)


def verify_assignment(problem: LmiProblem, assignments: dict, tol: float) -> dict[str, float]:
    """Re-substitute a solution into every constraint; return worst residuals.

    Residuals are negative eigenvalues (PSD blocks) and constraint slacks
    (scalar rows); all should be >= -tol for an accepted solution.
    """
    worst_psd = np.inf
    for block in problem.psd_constraints:
        val = np.array(block.constant, dtype=float, copy=True)
        for t in block.terms:
            v = assignments[t.var.id]
            if t.var.kind == "scalar":
                val += float(v) * (t.left @ t.right)
            else:
                body = np.asarray(v).T if t.transpose else np.asarray(v)
                val += t.left @ body @ t.right
        val = 0.5 * (val + val.T)
        scale = max(1.0, float(np.abs(val).max()))
        worst_psd = min(worst_psd, matops.min_eig(val) / scale)
    worst_lin = np.inf
    for sc in problem.scalar_constraints:
        s = sc.constant
        for t in sc.terms:
            v = assignments[t.var.id]
            if t.var.kind == "scalar":
                s += float(t.weight) * float(v)
            else:
                s += float(np.trace(np.asarray(t.weight).T @ np.asarray(v)))
        worst_lin = min(worst_lin, s)
    return {"psd": float(worst_psd), "linear": float(worst_lin)}


def solve(problem: LmiProblem, opts: SolveOptions | None = None) -> SolveResult:
    """Solve the problem; deterministic given identical inputs and options."""
    opts = opts or SolveOptions()
    cv, cp_problem = _lower(problem, opts)
    last_status = NUMERICAL_FAILURE
    for name in opts.backends:
        spec = _BACKENDS[name]
        kwargs = dict(spec["kwargs"])
        if spec["solver"] == "SCS":
            kwargs.setdefault("max_iters", opts.max_iters)
        try:
            cp_problem.solve(solver=spec["solver"], **kwargs)
        except (cp.SolverError, cp.error.DCPError, ValueError):
            continue
        if cp_problem.status in INFEASIBLE_CVXPY:
            return SolveResult(status=INFEASIBLE, backend=name)
        if cp_problem.status in ACCEPTED_CVXPY:
            assignments = {}
            ok = True
            for vid, var in cv.items():
                if var.value is None:
                    ok = False
                    break
                if problem.vars[vid].kind == "scalar":
                    assignments[vid] = float(var.value)
                elif problem.vars[vid].kind == "symmetric":
                    assignments[vid] = 0.5 * (np.asarray(var.value)
                                              + np.asarray(var.value).T)
                else:
                    assignments[vid] = np.asarray(var.value)
            if not ok:
                continue
            residuals = {}
            if opts.verify:
                residuals = verify_assignment(problem, assignments, opts.feas_tol)
                if min(residuals.values()) < -opts.feas_tol:
                    last_status = NUMERICAL_FAILURE
                    continue
            return SolveResult(
                status=OPTIMAL,
                assignments=assignments,
                objective_value=float(cp_problem.value),
                residuals=residuals,
                backend=name,
            )
    return SolveResult(status=last_status)


def minimize_neg_logdet(problem: LmiProblem, target: VarRef,
                        opts: SolveOptions | None = None) -> SolveResult:
    """Determinant maximization of ``target`` over the problem's feasible set."""
    problem.require(target)
    problem.objective = Objective("minimize-neg-logdet", target=target)
    if target.id not in problem.pd_floor:
        problem.set_pd_floor(target, (opts or SolveOptions()).eps_pd)
    return solve(problem, opts)
