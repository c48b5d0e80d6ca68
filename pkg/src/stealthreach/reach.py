"""Ellipsoidal outer approximations of reachable sets for LTI systems driven
by several peak-bounded inputs.

The certificate is a quadratic function V(xi) = xi^T P xi satisfying, for a
contraction rate a in (0, 1) and per-channel rates a_i in (0, 1) with
sum a_i >= a,

    V(xi+) - a V(xi) - sum_i (1 - a_i) w_i^T W_i w_i <= 0,

which bounds V along trajectories by the geometric schedule
alpha_k = a^(k-1) V(xi_1) + (N - a)(1 - a^(k-1))/(1 - a) with ultimate bound
(N - a)/(1 - a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lmi, matops
from .errors import InvalidRate, ModelError, NoContractiveRate, SingularBlock


@dataclass
class MultiInputSystem:
    """xi+ = A xi + sum_i B_i w_i with w_i^T W_i w_i <= 1."""

    a: np.ndarray
    inputs: list[tuple[np.ndarray, np.ndarray]]  # (B_i, W_i) pairs

    def __post_init__(self):
        self.a = matops.as_matrix(self.a, "A")
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise ModelError("A must be square")
        if not self.inputs:
            raise ModelError("at least one input channel is required")
        checked = []
        for i, (b, w) in enumerate(self.inputs):
            b = matops.as_matrix(b, f"B_{i + 1}")
            w = matops.sym(w)
            if b.shape[0] != n:
                raise ModelError(f"B_{i + 1} must have {n} rows")
            if w.shape != (b.shape[1], b.shape[1]):
                raise ModelError(f"W_{i + 1} must be {b.shape[1]}x{b.shape[1]}")
            if not matops.is_pd(w, 0.0):
                raise ModelError(f"W_{i + 1} must be positive definite")
            checked.append((b, w))
        self.inputs = checked

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    def normalized(self) -> "MultiInputSystem":
        """Equivalent system with unit input weights (B_i <- B_i W_i^{-1/2}).

        The feasible (P, a_i) set of the rate LMI is unchanged (congruence),
        so certificates transfer verbatim; only conditioning improves.
        """
        new = []
        for b, w in self.inputs:
            w_m12 = np.linalg.inv(matops.sqrtm_psd(w))
            new.append((b @ w_m12, np.eye(b.shape[1])))
        return MultiInputSystem(self.a, new)


@dataclass
class Ellipsoid:
    """Shape matrix plus the geometric level schedule of the ultimate bound."""

    p: np.ndarray
    a: float
    n_inputs: int
    level_initial: float

    def __post_init__(self):
        self.p = matops.sym(self.p)
        if not 0.0 < self.a < 1.0:
            raise InvalidRate(f"rate a={self.a} outside (0, 1)")

    @property
    def level_asymptotic(self) -> float:
        return (self.n_inputs - self.a) / (1.0 - self.a)

    def level_at(self, k: int) -> float:
        return level_at(self, k)

    def volume(self, level: float | None = None) -> float:
        lev = self.level_asymptotic if level is None else level
        return matops.ellipsoid_volume(self.p, lev)

    def projected(self, keep: int) -> "Ellipsoid":
        q, _ = project_ellipsoid(self.p, 1.0, keep)
        out = Ellipsoid(q, self.a, self.n_inputs, self.level_initial)
        return out

    def contains(self, x, k: int | None = None, slack: float = 1e-6) -> bool:
        lev = self.level_asymptotic if k is None else self.level_at(k)
        x = np.asarray(x, dtype=float)
        return float(x @ self.p @ x) <= lev + slack


@dataclass
class LineSearchSpec:
    """Grid over the contraction rate a in (0, 1)."""

    count: int = 49
    lo: float = 0.02
    hi: float = 0.98
    extra: tuple[float, ...] = ()   # rates appended to the grid (e.g. a known-feasible one)

    def __post_init__(self):
        if not (0.0 < self.lo <= self.hi < 1.0):
            raise InvalidRate("grid endpoints must satisfy 0 < lo <= hi < 1")
        if self.count < 1:
            raise InvalidRate("grid needs at least one point")

    def grid(self) -> np.ndarray:
        pts = np.linspace(self.lo, self.hi, self.count)
        if self.extra:
            pts = np.unique(np.concatenate([pts, np.asarray(self.extra, dtype=float)]))
        return pts


def prop1_lmi(system: MultiInputSystem, a: float,
              eps_pd: float = 1e-6) -> tuple[lmi.LmiProblem, lmi.VarRef, list[lmi.VarRef]]:
    """Rate-a feasibility program: P > 0, a_i in (0,1), sum a_i >= a, and

        [[a P, A^T P, 0], [P A, P, P B], [0, B^T P, diag((1-a_i) W_i)]] >= 0.

    Returns the problem together with the P variable and the a_i variables.
    """
    if not 0.0 < a < 1.0:
        raise InvalidRate(f"rate a={a} outside (0, 1)")
    n = system.n
    nn = system.n_inputs
    bs = [b for b, _ in system.inputs]
    ws = [w for _, w in system.inputs]

    prob = lmi.LmiProblem()
    p = prob.add_var(lmi.VarRef.symmetric("P", n))
    rates = [prob.add_var(lmi.VarRef.scalar(f"a{i + 1}")) for i in range(nn)]

    rows = [
        [lmi.term(p, left=a * np.eye(n)), lmi.term(p, left=system.a.T)]
        + [np.zeros((n, w.shape[0])) for w in ws],
        [lmi.term(p, right=system.a), lmi.term(p)]
        + [lmi.term(p, right=bs[k]) for k in range(nn)],
    ]
    for i, wi in enumerate(ws):
        row = [np.zeros((wi.shape[0], n)), lmi.term(p, left=bs[i].T)]
        for j, wj in enumerate(ws):
            if i == j:
                # (1 - a_i) W_i, affine in the scalar rate a_i
                row.append([wi, lmi.Term(rates[i], -wi, np.eye(wi.shape[0]))])
            else:
                row.append(np.zeros((wi.shape[0], wj.shape[0])))
        rows.append(row)
    block = lmi.block_psd(rows, name=f"rate-lmi(a={a:.4g})")
    prob.add_psd(block)
    prob.set_pd_floor(p, eps_pd)
    for r in rates:
        prob.add_scalar_ge([lmi.ScalarTerm(r, np.array([[1.0]]))], -eps_pd,
                           name=f"{r.id} >= eps")
        prob.add_scalar_ge([lmi.ScalarTerm(r, np.array([[-1.0]]))], 1.0 - eps_pd,
                           name=f"{r.id} <= 1 - eps")
    prob.add_scalar_ge([lmi.ScalarTerm(r, np.array([[1.0]])) for r in rates], -a,
                       name="sum a_i >= a")
    return prob, p, rates


def _solve_min_volume_at(system: MultiInputSystem, a: float, keep: int | None,
                         objective: str, opts: lmi.SolveOptions):
    """Determinant maximization at a fixed rate; returns P or None."""
    prob, p, _ = prop1_lmi(system, a, eps_pd=opts.eps_pd)
    if objective == "projected-det" and keep is not None and keep < system.n:
        # maximize logdet Z with Z below the Schur complement of the trailing block
        z = prob.add_var(lmi.VarRef.symmetric("Zproj", keep))
        n = system.n
        i_keep = np.eye(n)[:, :keep]
        i_rest = np.eye(n)[:, keep:]
        rows = [
            [[lmi.Term(p, i_keep.T, i_keep), lmi.term(z, left=-np.eye(keep))],
             lmi.Term(p, i_keep.T, i_rest)],
            [lmi.Term(p, i_rest.T, i_keep), lmi.Term(p, i_rest.T, i_rest)],
        ]
        prob.add_psd(lmi.block_psd(rows, name="projection-dominates-Z"))
        res = lmi.minimize_neg_logdet(prob, z, opts)
    else:
        res = lmi.minimize_neg_logdet(prob, p, opts)
    if res.status != lmi.OPTIMAL:
        return None
    return matops.sym(res.assignments["P"])


def min_volume_ellipsoid(system: MultiInputSystem, search: LineSearchSpec | None = None,
                         xi1=None, keep: int | None = None, objective: str = "det",
                         opts: lmi.SolveOptions | None = None) -> Ellipsoid:
    """Line search over a; per rate solve the det-maximization; keep the rate whose
    asymptotic ellipsoid (optionally its leading-``keep`` projection) has least volume.

    ``objective`` selects what the inner solve maximizes: the full determinant
    ("det", the printed program) or the determinant of the leading-``keep``
    projection ("projected-det").  Ties break toward the smaller rate.
    """
    search = search or LineSearchSpec()
    opts = opts or lmi.SolveOptions()
    norm_sys = system.normalized()
    rho2 = matops.spectral_radius(system.a) ** 2
    best = None
    for a in search.grid():
        if a < rho2 - 1e-12:
            continue  # A^T P A <= a P is impossible below the squared spectral radius
        p = _solve_min_volume_at(norm_sys, float(a), keep, objective, opts)
        if p is None:
            continue
        lev = (system.n_inputs - a) / (1.0 - a)
        shape = p if keep is None else matops.schur_reduce(p, keep)
        try:
            vol = matops.ellipsoid_volume(shape, lev)
        except Exception:
            continue
        if best is None or vol < best[0]:
            best = (vol, float(a), p)
    if best is None:
        raise NoContractiveRate(
            "no grid rate admits a feasible contractive certificate "
            f"(spectral radius {math.sqrt(rho2):.4f})")
    _, a_star, p_star = best
    level_initial = 0.0
    if xi1 is not None:
        xi1 = np.asarray(xi1, dtype=float)
        level_initial = float(xi1 @ p_star @ xi1)
    else:
        level_initial = (system.n_inputs - a_star) / (1.0 - a_star)
    return Ellipsoid(p_star, a_star, system.n_inputs, level_initial)


def project_ellipsoid(q, level: float, keep: int) -> tuple[np.ndarray, float]:
    """Project {x : x^T Q x <= level} onto the leading ``keep`` coordinates.

    The projected set is the ellipsoid of the Schur complement of the trailing
    block, at the same level.
    """
    qq = matops.sym(q)
    if not matops.is_pd(qq, 0.0):
        raise SingularBlock("projection requires a positive definite shape matrix")
    if keep == qq.shape[0]:
        return qq, level
    return matops.schur_reduce(qq, keep), level


def level_at(ell: Ellipsoid, k: int) -> float:
    """Closed-form alpha_k; k counts steps since the schedule start (k = 1 first)."""
    if k < 1:
        raise ModelError("step index must be >= 1")
    a = ell.a
    geom = a ** (k - 1)
    return geom * ell.level_initial + (ell.n_inputs - a) * (1.0 - geom) / (1.0 - a)
