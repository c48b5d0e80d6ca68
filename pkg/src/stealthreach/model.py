"""Networked-control-system data model and closed-loop assembly.

Conventions: plant state x^p (n), controller state x^c (n), estimation error
e (n); extended state zeta = (x^p, x^c, e).  Peak bounds are on squared
norms: v^T v <= v_bar and eta^T eta <= eta_bar.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import matops
from .errors import InvalidSelection, ModelError


def _pbh_uncontrollable_modes(a: np.ndarray, b: np.ndarray, tol: float = 1e-8):
    """Eigenvalues with |lambda| >= 1 failing the PBH rank test for (a, b)."""
    n = a.shape[0]
    bad = []
    for lam in np.linalg.eigvals(a):
        if abs(lam) < 1.0 - 1e-12:
            continue
        m = np.hstack([a - lam * np.eye(n), b])
        sv = np.linalg.svd(m, compute_uv=False)
        if sv[n - 1] <= tol * max(1.0, sv[0]):
            bad.append(lam)
    return bad


@dataclass
class Plant:
    """Discrete LTI plant with peak-bounded process and sensor perturbations."""

    a: np.ndarray       # n x n
    b: np.ndarray       # n x l
    c: np.ndarray       # m x n
    e: np.ndarray       # n x q
    f: np.ndarray       # m x m
    eta_bar: float      # bound on eta^T eta
    v_bar: float        # bound on v^T v

    def __post_init__(self):
        self.a = matops.as_matrix(self.a, "A^p")
        self.b = matops.as_matrix(self.b, "B^p")
        self.c = matops.as_matrix(self.c, "C^p")
        self.e = matops.as_matrix(self.e, "E")
        self.f = matops.as_matrix(self.f, "F")
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise ModelError("A^p must be square")
        if self.b.shape[0] != n or self.c.shape[1] != n or self.e.shape[0] != n:
            raise ModelError("plant matrix row/column counts are inconsistent")
        m = self.c.shape[0]
        if self.f.shape != (m, m):
            raise ModelError(f"F must be {m}x{m}")
        if self.e.shape[1] > n:
            raise ModelError("E may have at most n columns")
        if self.eta_bar <= 0 or self.v_bar <= 0:
            raise ModelError("perturbation bounds must be positive")
        bad_c = _pbh_uncontrollable_modes(self.a, self.b)
        bad_o = _pbh_uncontrollable_modes(self.a.T, self.c.T)
        if bad_c:
            warnings.warn(f"(A^p, B^p) fails PBH stabilizability at {bad_c}",
                          stacklevel=2)
        if bad_o:
            warnings.warn(f"(A^p, C^p) fails PBH detectability at {bad_o}",
                          stacklevel=2)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @property
    def l(self) -> int:
        return self.b.shape[1]

    @property
    def q(self) -> int:
        return self.e.shape[1]

    def is_stabilizable(self) -> bool:
        return not _pbh_uncontrollable_modes(self.a, self.b)

    def is_detectable(self) -> bool:
        return not _pbh_uncontrollable_modes(self.a.T, self.c.T)


@dataclass
class Observer:
    l: np.ndarray  # n x m filter gain

    def __post_init__(self):
        self.l = matops.as_matrix(self.l, "L")

    def is_schur(self, plant: Plant) -> bool:
        return matops.spectral_radius(plant.a - self.l @ plant.c) < 1.0


@dataclass
class Monitor:
    pi: np.ndarray          # m x m PSD distance-measure weight
    eps: float = 0.1        # tightness constant used at design time
    k_star: int = 1         # convergence time of the attack-free residual bound

    def __post_init__(self):
        self.pi = matops.sym(self.pi)
        if not matops.is_psd(self.pi):
            raise ModelError("monitor matrix must be PSD")
        if self.eps <= 0:
            raise ModelError("monitor tightness eps must be positive")
        if self.k_star < 1:
            raise ModelError("k_star must be >= 1")


@dataclass
class Controller:
    """Dynamic output feedback controller of the same order as the plant."""

    a: np.ndarray  # n x n
    b: np.ndarray  # n x m
    c: np.ndarray  # l x n
    d: np.ndarray  # l x m

    def __post_init__(self):
        self.a = matops.as_matrix(self.a, "A^c")
        self.b = matops.as_matrix(self.b, "B^c")
        self.c = matops.as_matrix(self.c, "C^c")
        self.d = matops.as_matrix(self.d, "D^c")
        n = self.a.shape[0]
        if self.a.shape != (n, n) or self.b.shape[0] != n or self.c.shape[1] != n:
            raise ModelError("controller matrices are dimensionally inconsistent")
        if self.d.shape != (self.c.shape[0], self.b.shape[1]):
            raise ModelError("D^c shape inconsistent with B^c/C^c")


@dataclass(frozen=True)
class AttackSelection:
    """Sensors under attack; ``sensors`` empty encodes the attack-free sentinel."""

    sensors: tuple[int, ...]
    m: int

    @property
    def gamma(self) -> np.ndarray:
        """m x s matrix of canonical basis columns (m x 0 for the sentinel)."""
        g = np.zeros((self.m, len(self.sensors)))
        for j, i in enumerate(self.sensors):
            g[i - 1, j] = 1.0
        return g

    @property
    def projector(self) -> np.ndarray:
        """Gamma Gamma^+ : diagonal 0/1 projector onto attacked coordinates."""
        p = np.zeros((self.m, self.m))
        for i in self.sensors:
            p[i - 1, i - 1] = 1.0
        return p

    def label(self) -> str:
        return "{" + ",".join(str(i) for i in self.sensors) + "}"


def make_attack_selection(sensors, m: int) -> AttackSelection:
    """Build an AttackSelection from 1-based sensor indices."""
    idx = tuple(sorted(int(i) for i in sensors))
    if len(set(idx)) != len(idx):
        raise InvalidSelection(f"duplicate sensor indices in {sensors}")
    if any(i < 1 or i > m for i in idx):
        raise InvalidSelection(f"sensor indices {sensors} outside 1..{m}")
    return AttackSelection(idx, m)


def attack_free_selection(m: int) -> AttackSelection:
    """Sentinel selection with Gamma Gamma^+ = 0 (no attacked coordinates)."""
    return AttackSelection((), m)


@dataclass
class SecurityConfig:
    """Observer/monitor/controller bundle (the tunable part of the loop)."""

    observer: Observer
    monitor: Monitor
    controller: Controller


@dataclass
class ClosedLoop:
    """Extended attacked dynamics zeta+ = A zeta + B1 eta + B2 v + B3 r."""

    a: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    selection: AttackSelection

    @property
    def inputs(self):
        return [(self.b1, self.w1), (self.b2, self.w2), (self.b3, self.w3)]


@dataclass
class PerfSpec:
    """Attack-free performance targets: L2 gain and observer eigenvalue disk."""

    cs: np.ndarray               # g x n
    ds: np.ndarray               # g x l
    d1: np.ndarray               # g x m
    d2: np.ndarray               # g x q
    gamma: float = 3.0
    beta: float = 0.0
    tau: float = 0.9
    eps: float = 0.1

    def __post_init__(self):
        self.cs = matops.as_matrix(self.cs, "C^s")
        self.ds = matops.as_matrix(self.ds, "D^s")
        self.d1 = matops.as_matrix(self.d1, "D_1")
        self.d2 = matops.as_matrix(self.d2, "D_2")
        if self.gamma <= 0:
            raise ModelError("gamma must be positive")
        if not 0 <= self.tau < 1 or abs(self.beta) + self.tau >= 1:
            raise ModelError("eigenvalue disk must lie strictly inside the unit circle")
        if self.eps <= 0:
            raise ModelError("monitor tightness eps must be positive")


def residual_dynamics(plant: Plant, observer: Observer):
    """Attack-free residual generator: e+ = A_e e + B_eta eta + B_v v, r = C_r e + D_eta eta."""
    a_e = plant.a - observer.l @ plant.c
    b_eta = -observer.l @ plant.f
    b_v = plant.e
    c_r = plant.c
    d_eta = plant.f
    return a_e, b_eta, b_v, c_r, d_eta


def assemble_closed_loop(plant: Plant, observer: Observer, controller: Controller,
                         monitor: Monitor, selection: AttackSelection) -> ClosedLoop:
    """Closed loop under stealthy attack, driven by (eta, v, r)."""
    n, m = plant.n, plant.m
    if controller.a.shape[0] != n:
        raise ModelError("controller order must equal plant order")
    if controller.b.shape[1] != m or monitor.pi.shape != (m, m):
        raise ModelError("sensor counts disagree between plant, controller, monitor")
    if selection.m != m:
        raise ModelError("attack selection built for a different sensor count")
    ap, bp, cp, e, f = plant.a, plant.b, plant.c, plant.e, plant.f
    ac, bc, cc, dc = controller.a, controller.b, controller.c, controller.d
    lo = observer.l
    gg = selection.projector
    gc = np.eye(m) - gg

    a = np.block([
        [ap + bp @ dc @ cp, bp @ cc, -bp @ dc @ gg @ cp],
        [bc @ cp, ac, -bc @ gg @ cp],
        [np.zeros((n, 2 * n)), ap - lo @ gc @ cp],
    ])
    b1 = np.vstack([bp @ dc @ gc @ f, bc @ gc @ f, -lo @ gc @ f])
    b2 = np.vstack([e, np.zeros((n, plant.q)), e])
    b3 = np.vstack([bp @ dc @ gg, bc @ gg, -lo @ gg])
    w1 = (1.0 / plant.eta_bar) * np.eye(m)
    w2 = (1.0 / plant.v_bar) * np.eye(plant.q)
    w3 = matops.sym(monitor.pi)
    return ClosedLoop(a, b1, b2, b3, w1, w2, w3, selection)


def assemble_hinf_plant(plant: Plant, controller: Controller, spec: PerfSpec):
    """Attack-free closed loop from d = (eta, v) to the performance output."""
    n = plant.n
    if controller.a.shape[0] != n:
        raise ModelError("controller order must equal plant order")
    g = spec.cs.shape[0]
    if (spec.cs.shape[1] != n or spec.ds.shape != (g, plant.l)
            or spec.d1.shape != (g, plant.m) or spec.d2.shape != (g, plant.q)):
        raise ModelError("performance-output matrices are dimensionally inconsistent")
    ap, bp, cp, e, f = plant.a, plant.b, plant.c, plant.e, plant.f
    ac, bc, cc, dc = controller.a, controller.b, controller.c, controller.d
    a_t = np.block([[ap + bp @ dc @ cp, bp @ cc], [bc @ cp, ac]])
    b_t = np.block([[bp @ dc @ f, e], [bc @ f, np.zeros((n, plant.q))]])
    c_t = np.hstack([spec.cs + spec.ds @ dc @ cp, spec.ds @ cc])
    d_t = np.hstack([spec.d1 + spec.ds @ dc @ f, spec.d2])
    return a_t, b_t, c_t, d_t
