"""Attack-free monitor design.

Pipeline: bound the attack-free estimation error by a minimum-volume
ellipsoid, pick the convergence time k* at which transients have shrunk to a
chosen tightness eps, then maximize det(Pi) subject to the S-procedure
condition that every admissible (e, eta) keeps the residual inside
r^T Pi r <= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lmi, matops, reach
from .errors import MonitorInfeasible, ModelError
from .model import Monitor, Observer, Plant


@dataclass
class MonitorDesign:
    p_e: np.ndarray         # estimation-error ellipsoid shape
    a: float                # its contraction rate
    pi: np.ndarray          # monitor weight, det-maximal
    tau1: float             # S-procedure multiplier on the error ellipsoid
    tau2: float             # S-procedure multiplier on the eta ball
    eps: float
    k_star: int

    @property
    def alpha_e_asymptotic(self) -> float:
        return (2.0 - self.a) / (1.0 - self.a)

    def as_monitor(self) -> Monitor:
        return Monitor(self.pi, self.eps, self.k_star)


def error_reach_ellipsoid(plant: Plant, observer: Observer,
                          search: reach.LineSearchSpec | None = None,
                          opts: lmi.SolveOptions | None = None) -> reach.Ellipsoid:
    """Minimum-volume ellipsoid bounding the attack-free estimation error.

    Error dynamics: e+ = (A - L C) e - L F eta + E v with the two peak-bounded
    channels, so the asymptotic level is (2 - a)/(1 - a).
    """
    a_e = plant.a - observer.l @ plant.c
    system = reach.MultiInputSystem(a_e, [
        (-observer.l @ plant.f, (1.0 / plant.eta_bar) * np.eye(plant.m)),
        (plant.e, (1.0 / plant.v_bar) * np.eye(plant.q)),
    ])
    return reach.min_volume_ellipsoid(system, search, xi1=None, opts=opts)


def convergence_time(e1, ell: reach.Ellipsoid, eps: float) -> int:
    """Least k with a^(k-1) (e_1^T P_e e_1 - alpha_inf) <= eps."""
    if eps <= 0:
        raise ModelError("eps must be positive")
    e1 = np.asarray(e1, dtype=float)
    gap = float(e1 @ ell.p @ e1) - ell.level_asymptotic
    if gap <= eps:
        return 1
    k = 1 + int(math.ceil(math.log(eps / gap) / math.log(ell.a) - 1e-12))
    return max(k, 1)


def design_monitor(plant: Plant, ell: reach.Ellipsoid, eps: float,
                   e1=None, opts: lmi.SolveOptions | None = None) -> MonitorDesign:
    """Determinant-maximal Pi certified by the S-procedure.

    Certifies (C e + F eta)^T Pi (C e + F eta) <= 1 on the intersection of
    e^T P_e e <= alpha_inf + eps and eta^T eta <= eta_bar.  The printed
    condition has F = I; a general sensor matrix F is absorbed into the
    eta-quadratic blocks.
    """
    if eps <= 0:
        raise ModelError("eps must be positive")
    n, m = plant.n, plant.m
    c, f = plant.c, plant.f
    alpha = ell.level_asymptotic + eps
    p_e = ell.p

    prob = lmi.LmiProblem()
    pi = prob.add_var(lmi.VarRef.symmetric("Pi", m))
    t1 = prob.add_var(lmi.VarRef.scalar("tau1"))
    t2 = prob.add_var(lmi.VarRef.scalar("tau2"))

    rows = [
        [[lmi.Term(t1, p_e, np.eye(n)), lmi.Term(pi, -c.T, c)],
         lmi.Term(pi, -c.T, f), np.zeros((n, 1))],
        [lmi.Term(pi, -f.T, c),
         [lmi.Term(t2, np.eye(m), np.eye(m)), lmi.Term(pi, -f.T, f)],
         np.zeros((m, 1))],
        [np.zeros((1, n)), np.zeros((1, m)),
         [np.ones((1, 1)),
          lmi.Term(t1, -alpha * np.ones((1, 1)), np.ones((1, 1))),
          lmi.Term(t2, -plant.eta_bar * np.ones((1, 1)), np.ones((1, 1)))]],
    ]
    prob.add_psd(lmi.block_psd(rows, name="monitor-s-procedure"))
    one = np.array([[1.0]])
    prob.add_scalar_ge([lmi.ScalarTerm(t1, one)], 0.0, "tau1 >= 0")
    prob.add_scalar_ge([lmi.ScalarTerm(t2, one)], 0.0, "tau2 >= 0")

    res = lmi.minimize_neg_logdet(prob, pi, opts)
    if res.status != lmi.OPTIMAL:
        raise MonitorInfeasible(
            "no monitor matrix satisfies the S-procedure at this tightness "
            f"(status {res.status}); perturbation bounds may be too loose")
    pi_val = matops.sym(res.assignments["Pi"])
    k_star = 1
    if e1 is not None:
        k_star = convergence_time(e1, ell, eps)
    return MonitorDesign(
        p_e=p_e, a=ell.a, pi=pi_val,
        tau1=float(res.assignments["tau1"]), tau2=float(res.assignments["tau2"]),
        eps=eps, k_star=k_star)
