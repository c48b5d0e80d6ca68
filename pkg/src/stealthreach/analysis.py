"""Stealthy-attack reachable-set approximation and the two security metrics.

For a fixed loop (plant, observer, controller, monitor) and sensor subset,
the attacked extended dynamics driven by (eta, v, r) with r^T Pi r <= 1 is an
LTI system with three peak-bounded inputs; its minimum-volume ellipsoid is
projected onto the plant coordinates to give the reported shape, volume and
signed distance to the critical half-spaces.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import lmi, matops, reach
from .errors import ModelError, NoContractiveRate
from .model import (AttackSelection, ClosedLoop, Controller, Monitor, Observer,
                    Plant, assemble_closed_loop)


@dataclass
class CriticalStates:
    """Union of half-spaces c_i^T x >= b_i with priority weights."""

    halfspaces: list[tuple[np.ndarray, float]]
    weights: np.ndarray | None = None

    def __post_init__(self):
        if not self.halfspaces:
            raise ModelError("at least one half-space is required")
        hs = []
        for c, b in self.halfspaces:
            c = np.asarray(c, dtype=float).ravel()
            if not np.any(c):
                raise ModelError("half-space normal must be nonzero")
            hs.append((c, float(b)))
        self.halfspaces = hs
        if self.weights is None:
            self.weights = np.full(len(hs), 1.0 / len(hs))
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape[0] != len(hs) or np.any(w < 0) or w.sum() <= 0:
                raise ModelError("weights must be nonnegative, one per half-space")
            self.weights = w / w.sum()


@dataclass
class ReportRow:
    sensors: tuple[int, ...]
    status: str
    volume: float = float("nan")
    distance: float = float("nan")
    a: float = float("nan")
    level: float = float("nan")
    shape: np.ndarray | None = None


@dataclass
class SecurityReport:
    rows: list[ReportRow] = field(default_factory=list)

    def row(self, sensors) -> ReportRow:
        key = tuple(sorted(sensors))
        for r in self.rows:
            if r.sensors == key:
                return r
        raise KeyError(f"no row for sensors {key}")

    def to_json_dict(self) -> dict:
        return {
            "rows": [
                {
                    "sensors": list(r.sensors),
                    "status": r.status,
                    "volume": r.volume,
                    "distance": r.distance,
                    "a": r.a,
                    "level": r.level,
                }
                for r in self.rows
            ]
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sensors", "status", "volume", "distance", "a", "level"])
            for r in self.rows:
                w.writerow(["+".join(map(str, r.sensors)), r.status,
                            f"{r.volume:.6g}", f"{r.distance:.6g}",
                            f"{r.a:.6g}", f"{r.level:.6g}"])


def stealthy_reach_ellipsoid(cl: ClosedLoop, search: reach.LineSearchSpec | None = None,
                             zeta_kstar=None, objective: str = "det",
                             opts: lmi.SolveOptions | None = None) -> reach.Ellipsoid:
    """Minimum-volume ellipsoid for the attacked extended state (N = 3 channels).

    Volume is judged on the plant-coordinate projection, the quantity the
    security metric uses.  Raises NoContractiveRate when no grid rate admits a
    certificate (the closed loop has no common contraction).
    """
    n3 = cl.a.shape[0]
    n = n3 // 3
    system = reach.MultiInputSystem(cl.a, cl.inputs)
    return reach.min_volume_ellipsoid(system, search, xi1=zeta_kstar, keep=n,
                                      objective=objective, opts=opts)


def project_to_plant(ell: reach.Ellipsoid, n: int) -> reach.Ellipsoid:
    """Plant-coordinate shape: Schur complement of the trailing 2n block."""
    if ell.p.shape[0] == n:
        return ell
    q, _ = reach.project_ellipsoid(ell.p, 1.0, n)
    return reach.Ellipsoid(q, ell.a, ell.n_inputs, ell.level_initial)


def distance_to_critical(shape, level: float, cs: CriticalStates,
                         formula: str = "corrected") -> float:
    """Signed minimum distance from {x^T P x <= level} to the critical set.

    ``corrected`` (default): (|b| - sqrt(level * c^T P^{-1} c)) / (c^T c),
    the level-alpha substitution into the unit-level hyperplane-distance
    formula.  ``printed`` divides by the level inside the square root instead;
    ``euclidean`` normalizes by ||c|| for the true geometric distance.
    Negative values mean the approximation intersects the critical set.
    """
    p = matops.sym(shape)
    if level <= 0:
        raise ModelError("level must be positive")
    dists = []
    for c, b in cs.halfspaces:
        quad = float(c @ np.linalg.solve(p, c))
        if formula == "corrected":
            d = (abs(b) - np.sqrt(level * quad)) / float(c @ c)
        elif formula == "printed":
            d = (abs(b) - np.sqrt(quad / level)) / float(c @ c)
        elif formula == "euclidean":
            d = (abs(b) - np.sqrt(level * quad)) / float(np.linalg.norm(c))
        else:
            raise ModelError(f"unknown distance formula {formula!r}")
        dists.append(d)
    return float(min(dists))


def analyze_selection(plant: Plant, observer: Observer, controller: Controller,
                      mon: Monitor, selection: AttackSelection,
                      search: reach.LineSearchSpec | None = None,
                      cs: CriticalStates | None = None,
                      objective: str = "det",
                      opts: lmi.SolveOptions | None = None) -> ReportRow:
    """One Table-row analysis: ellipsoid, projected volume, distance."""
    cl = assemble_closed_loop(plant, observer, controller, mon, selection)
    try:
        ell = stealthy_reach_ellipsoid(cl, search, objective=objective, opts=opts)
    except NoContractiveRate:
        return ReportRow(selection.sensors, "no-contractive-rate")
    proj = project_to_plant(ell, plant.n)
    level = ell.level_asymptotic
    vol = matops.ellipsoid_volume(proj.p, level)
    dist = float("nan")
    if cs is not None:
        dist = distance_to_critical(proj.p, level, cs)
    return ReportRow(selection.sensors, "ok", vol, dist, ell.a, level, proj.p)


def security_report(plant: Plant, observer: Observer, controller: Controller,
                    mon: Monitor, cs: CriticalStates | None,
                    selections: list[AttackSelection],
                    search: reach.LineSearchSpec | None = None,
                    objective: str = "det",
                    opts: lmi.SolveOptions | None = None) -> SecurityReport:
    """Per-selection volumes and distances; failures recorded per row."""
    ordered = sorted(selections, key=lambda s: (len(s.sensors), s.sensors))
    report = SecurityReport()
    for sel in ordered:
        try:
            row = analyze_selection(plant, observer, controller, mon, sel,
                                    search, cs, objective, opts)
        except Exception as exc:  # per-row failure must not kill the sweep
            row = ReportRow(sel.sensors, f"error: {type(exc).__name__}")
        report.rows.append(row)
    return report


def boundary_points(shape, level: float, coords: tuple[int, int],
                    count: int = 256) -> np.ndarray:
    """2-D boundary point cloud of the (coords) projection, for plotting.

    Returns an array of shape (count, 2); columns follow ``coords`` order.
    """
    p = matops.sym(shape)
    n = p.shape[0]
    i, j = coords
    if not (0 <= i < n and 0 <= j < n and i != j):
        raise ModelError(f"invalid coordinate pair {coords}")
    order = [i, j] + [k for k in range(n) if k not in (i, j)]
    perm = np.eye(n)[:, order]
    q = perm.T @ p @ perm
    q2 = matops.schur_reduce(q, 2) if n > 2 else q
    theta = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    circle = np.vstack([np.cos(theta), np.sin(theta)])
    half = np.linalg.cholesky(np.linalg.inv(q2 / level))
    pts = (half @ circle).T
    return pts


def write_boundary_csv(path, shape, level: float, coords: tuple[int, int],
                       count: int = 256) -> None:
    pts = boundary_points(shape, level, coords, count)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{coords[0] + 1}", f"x{coords[1] + 1}"])
        for row in pts:
            w.writerow([f"{row[0]:.9g}", f"{row[1]:.9g}"])
