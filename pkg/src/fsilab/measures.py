"""Empirical measures over viscosity sequences and the comparison machinery.

A family of runs at decreasing viscosity gives, in every fixed cell, a
finite sample set of the state pair (lambda1, lambda') = (rho, sqrt(rho) u).
Pairings with nonlinear observables are sample means; the oscillation and
concentration content of the sequence is proxied by energy gaps between a
Richardson extrapolation toward zero viscosity and the energy of the sample
barycenter. The relative energy against a strong solution, the partition
constants that control its pressure part, and the Gronwall envelope fit
close the comparison loop.

The defect proxies are computable shadows of weak-* limit objects: they
vanish exactly for constant-in-viscosity sequences and reproduce the
closed-form energy gap of an injected two-value oscillation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import GasLaw
from .errors import MeasureError

__all__ = [
    "EmpiricalMeasure",
    "Observable",
    "DefectProxy",
    "RelativeEnergy",
    "PartitionReport",
    "GronwallReport",
    "measure_from_samples",
    "observable_average",
    "cellwise_average",
    "growth_certified",
    "dissipation_defect",
    "defect_proxy",
    "relative_energy",
    "pressure_potential_bregman",
    "partition_bound_check",
    "gronwall_fit",
    "vanishing_viscosity_terms",
]


# ---------------------------------------------------------------------------
# empirical measures
# ---------------------------------------------------------------------------

@dataclass
class EmpiricalMeasure:
    """Per-cell sample sets of (lambda1, lambda') across a viscosity sequence.

    lam1 has shape (n_cells, n_samples) and lamp (n_cells, n_samples, d);
    sample columns are ordered by decreasing viscosity so the tail columns
    are the levels closest to the limit. Binning metadata is carried for
    diagnostics only.
    """

    lam1: np.ndarray
    lamp: np.ndarray
    cell_volumes: np.ndarray
    bins: int = 16

    def __post_init__(self):
        self.lam1 = np.asarray(self.lam1, dtype=float)
        self.lamp = np.asarray(self.lamp, dtype=float)
        self.cell_volumes = np.asarray(self.cell_volumes, dtype=float)
        if self.lam1.ndim != 2:
            raise MeasureError("lam1 must be (n_cells, n_samples)")
        if self.lamp.shape[:2] != self.lam1.shape or self.lamp.ndim != 3:
            raise MeasureError("lamp must be (n_cells, n_samples, d)")
        if self.cell_volumes.shape != (self.lam1.shape[0],):
            raise MeasureError("cell_volumes must match the cell count")
        if np.any(self.lam1 < 0.0):
            raise MeasureError("density samples must be nonnegative")
        vacuum = self.lam1 == 0.0
        if np.any(vacuum) and np.any(self.lamp[vacuum] != 0.0):
            raise MeasureError("vacuum samples must carry zero weighted velocity")

    @property
    def n_cells(self) -> int:
        return self.lam1.shape[0]

    @property
    def n_samples(self) -> int:
        return self.lam1.shape[1]

    def lam1_histogram(self, cell: int, bins: int | None = None):
        """Counts and edges of the density samples in one cell."""
        return np.histogram(self.lam1[cell], bins=bins or self.bins)


def measure_from_samples(rho_list: Sequence[np.ndarray],
                         u_list: Sequence[np.ndarray],
                         cell_volumes: np.ndarray) -> EmpiricalMeasure:
    """Stack per-run cell fields into a measure; one sample column per run.

    u arrays may be (n,) in 1D or (n, d); the weighted velocity samples
    are sqrt(rho) * u, which vanish wherever rho does.
    """
    if len(rho_list) != len(u_list) or not rho_list:
        raise MeasureError("need matching, nonempty rho and u sequences")
    lam1 = np.stack([np.asarray(r, dtype=float) for r in rho_list], axis=1)
    us = []
    for u in u_list:
        u = np.asarray(u, dtype=float)
        us.append(u[:, None] if u.ndim == 1 else u)
    lamp = np.stack([np.sqrt(np.maximum(lam1[:, k], 0.0))[:, None] * us[k]
                     for k in range(len(us))], axis=1)
    return EmpiricalMeasure(lam1, lamp, cell_volumes)


@dataclass(frozen=True)
class Observable:
    """Named state function with a polynomial growth certificate.

    The certificate promises |fn| <= coeff * (1 + lam1^p + |lamp|^q) on the
    whole state space; growth_certified spot-checks it on a log lattice.
    """

    name: str
    fn: Callable
    coeff: float
    p: float
    q: float


def growth_certified(obs: Observable, lam1_max: float = 1e6,
                     lamp_max: float = 1e3, n: int = 41) -> bool:
    lam1 = np.geomspace(1e-6, lam1_max, n)
    lam1 = np.concatenate([[0.0], lam1])
    speeds = np.concatenate([[0.0], np.geomspace(1e-6, lamp_max, n)])
    L1, S = np.meshgrid(lam1, speeds, indexing="ij")
    lamp = np.stack([S, np.zeros_like(S)], axis=-1)
    vals = np.abs(obs.fn(L1, lamp))
    envelope = obs.coeff * (1.0 + L1 ** obs.p + S ** obs.q)
    return bool(np.all(vals <= envelope * (1.0 + 1e-12)))


def observable_average(m: EmpiricalMeasure, obs, cell: int) -> float:
    """Sample mean of an observable over one cell's sample set."""
    if m.n_samples == 0:
        raise MeasureError("cell has no samples")
    fn = obs.fn if isinstance(obs, Observable) else obs
    vals = np.asarray(fn(m.lam1[cell], m.lamp[cell]), dtype=float)
    return float(np.mean(vals, axis=0))


def cellwise_average(m: EmpiricalMeasure, fn) -> np.ndarray:
    """Sample mean of fn(lam1, lamp) in every cell; fn must broadcast."""
    if m.n_samples == 0:
        raise MeasureError("measure has no samples")
    vals = np.asarray(fn(m.lam1, m.lamp), dtype=float)
    return np.mean(vals, axis=1)


# ---------------------------------------------------------------------------
# defect proxies
# ---------------------------------------------------------------------------

def _richardson_tail(series: np.ndarray, eps: Sequence[float]) -> np.ndarray:
    """Linear-in-eps extrapolation to 0 through the two smallest levels.

    series has the viscosity level on its second axis in decreasing order;
    the result drops that axis.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.ndim != 1 or eps.shape[0] < 2:
        raise MeasureError("need at least two viscosity levels to extrapolate")
    if np.any(np.diff(eps) >= 0.0):
        raise MeasureError("viscosity levels must be strictly decreasing")
    e0, e1 = eps[-2], eps[-1]
    s0 = np.take(series, -2, axis=1)
    s1 = np.take(series, -1, axis=1)
    return s1 + (s1 - s0) * e1 / (e0 - e1)


def dissipation_defect(eps: Sequence[float], energies: np.ndarray,
                       mean_energy: np.ndarray) -> np.ndarray:
    """Energy concentration proxy D(t) >= 0 from a viscosity sweep.

    energies has shape (n_times, n_eps) with columns ordered by decreasing
    viscosity; mean_energy is the energy of the sample barycenter at each
    time. D is the extrapolated limit energy minus the barycenter energy,
    clamped at zero: exactly zero when the sweep is constant, and equal to
    the hand-computable oscillation energy for a two-value sequence.
    """
    energies = np.asarray(energies, dtype=float)
    mean_energy = np.asarray(mean_energy, dtype=float)
    if energies.ndim != 2 or energies.shape[0] != mean_energy.shape[0]:
        raise MeasureError("energies must be (n_times, n_eps) matching mean_energy")
    if energies.shape[1] != len(eps):
        raise MeasureError("one energy column per viscosity level required")
    limit = _richardson_tail(energies, eps)
    return np.maximum(limit - mean_energy, 0.0)


@dataclass
class DefectProxy:
    """Cellwise concentration proxies at one output time.

    d_cells is the clamped energy-density gap per cell, nuM the matrix gap
    of the momentum-flux observable projected back to positive
    semidefinite. total integrates d_cells against the cell volumes.
    """

    d_cells: np.ndarray
    nuM: np.ndarray
    total: float


def defect_proxy(m: EmpiricalMeasure, eps: Sequence[float], law: GasLaw) -> DefectProxy:
    """Cellwise D and nuM proxies from one time slice of the sweep."""
    if m.n_samples != len(eps):
        raise MeasureError("one sample column per viscosity level required")
    d = m.lamp.shape[2]
    energy = 0.5 * np.sum(m.lamp ** 2, axis=2) + m.lam1 ** law.gamma / (law.gamma - 1.0)
    flux = (m.lamp[:, :, :, None] * m.lamp[:, :, None, :]
            + (m.lam1 ** law.gamma)[:, :, None, None] * np.eye(d))

    lam1_bar = np.mean(m.lam1, axis=1)
    lamp_bar = np.mean(m.lamp, axis=1)
    e_bar = 0.5 * np.sum(lamp_bar ** 2, axis=1) + lam1_bar ** law.gamma / (law.gamma - 1.0)
    f_bar = (lamp_bar[:, :, None] * lamp_bar[:, None, :]
             + (lam1_bar ** law.gamma)[:, None, None] * np.eye(d))

    d_cells = np.maximum(_richardson_tail(energy, eps) - e_bar, 0.0)
    gap = _richardson_tail(flux.reshape(m.n_cells, m.n_samples, -1), eps)
    gap = gap.reshape(m.n_cells, d, d) - f_bar
    # the matrix gap of a limit of PSD observables; extrapolation can dip
    # below zero, so clamp the spectrum
    w, Q = np.linalg.eigh(0.5 * (gap + np.transpose(gap, (0, 2, 1))))
    nuM = np.einsum("nik,nk,njk->nij", Q, np.maximum(w, 0.0), Q)
    total = float(np.sum(m.cell_volumes * d_cells))
    return DefectProxy(d_cells, nuM, total)


# ---------------------------------------------------------------------------
# relative energy
# ---------------------------------------------------------------------------

def pressure_potential_bregman(lam1, R, law: GasLaw):
    """P(lam1) - P(R) - P'(R)(lam1 - R) for P(s) = s^gamma / (gamma - 1).

    The convexity gap of the pressure potential; nonnegative for lam1 >= 0
    and R > 0, zero exactly at lam1 = R.
    """
    g = law.gamma
    lam1 = np.asarray(lam1, dtype=float)
    R = np.asarray(R, dtype=float)
    return (lam1 ** g - g * R ** (g - 1.0) * lam1) / (g - 1.0) + R ** g


@dataclass
class RelativeEnergy:
    """Distance-to-strong-solution series split into its three parts."""

    times: np.ndarray
    kinetic: np.ndarray
    pressure: np.ndarray
    rigid: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.pressure + self.rigid


def relative_energy(times, measures: Sequence[EmpiricalMeasure], R_fields,
                    U_fields, law: GasLaw, body_terms=None) -> RelativeEnergy:
    """Assemble the relative energy series against strong reference fields.

    Per time slice: measures[k] samples the fluid state on cells whose
    volumes it carries, R_fields[k]/U_fields[k] give the strong density
    and velocity on the same cells, and body_terms[k] (optional) is a
    tuple (rho_vals, weights, u_B, tilde_u_B) of body quadrature data.
    The strong density must stay away from vacuum.
    """
    times = np.asarray(times, dtype=float)
    kin = np.zeros_like(times)
    press = np.zeros_like(times)
    rigid = np.zeros_like(times)
    for k, m in enumerate(measures):
        R = np.asarray(R_fields[k], dtype=float)
        U = np.asarray(U_fields[k], dtype=float)
        if U.ndim == 1:
            U = U[:, None]
        if np.min(R) <= 0.0:
            raise ValueError("strong-side density must be positive")

        def kinetic_gap(lam1, lamp, U=U):
            dv = lamp - np.sqrt(lam1)[..., None] * U[:, None, :]
            return 0.5 * np.sum(dv ** 2, axis=-1)

        def pressure_gap(lam1, lamp, R=R):
            return pressure_potential_bregman(lam1, R[:, None], law)

        kin[k] = float(np.sum(m.cell_volumes * cellwise_average(m, kinetic_gap)))
        press[k] = float(np.sum(m.cell_volumes * cellwise_average(m, pressure_gap)))
        if body_terms is not None and body_terms[k] is not None:
            rho_b, w, u_b, tu_b = body_terms[k]
            dv = np.asarray(u_b, dtype=float) - np.asarray(tu_b, dtype=float)
            if dv.ndim == 1:
                dv = dv[:, None]
            rigid[k] = float(0.5 * np.sum(np.asarray(w) * np.asarray(rho_b)
                                          * np.sum(dv ** 2, axis=1)))
    return RelativeEnergy(times, kin, press, rigid)


# ---------------------------------------------------------------------------
# partition constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionReport:
    """Smallest lattice constants for the partitioned pressure-gap bounds.

    C1 bounds (lam1 - R)^2 by the Bregman gap on the middle density band;
    C23 bounds 1 + lam1^gamma on the outer bands. Finite constants are the
    content of the estimate; their values depend on gamma and the density
    window.
    """

    C1: float
    C23: float
    gamma: float
    R_minus: float
    R_plus: float
    n_lattice: int
    all_finite: bool


def partition_bound_check(R_minus: float, R_plus: float, law: GasLaw,
                          n_lattice: int = 100_000,
                          n_R: int = 129) -> PartitionReport:
    """Maximize the partitioned bound ratios over a density lattice.

    The dummy density runs over a log lattice covering [0, 10 R_plus] and
    the reference density over [R_minus, R_plus]. The middle band is the
    open interval (R_minus/2, 2 R_plus); the outer bands are its
    complement, where the Bregman gap is bounded away from zero and the
    ratios cannot blow up.

    Within one percent of the reference density the Bregman gap cancels
    catastrophically in floating point, so that sliver is scored by the
    exact ratio limit 2 R^(2-gamma) / gamma instead of by lattice points.
    """
    if not 0.0 < R_minus <= R_plus:
        raise ValueError("need 0 < R_minus <= R_plus")
    g = law.gamma
    lam = np.concatenate([[0.0], np.geomspace(1e-8 * R_plus, 10.0 * R_plus,
                                              n_lattice - 1)])
    k1 = (lam > 0.5 * R_minus) & (lam < 2.0 * R_plus)
    k23 = ~k1
    c1 = 0.0
    c23 = 0.0
    for R in np.linspace(R_minus, R_plus, n_R):
        breg = pressure_potential_bregman(lam, R, law)
        m1 = k1 & (np.abs(lam - R) > 1e-2 * R)
        if np.any(m1):
            c1 = max(c1, float(np.max((lam[m1] - R) ** 2 / breg[m1])))
        c1 = max(c1, 2.0 * R ** (2.0 - g) / g)
        c23 = max(c23, float(np.max((1.0 + lam[k23] ** g) / breg[k23])))
    finite = bool(np.isfinite(c1) and np.isfinite(c23))
    return PartitionReport(c1, c23, law.gamma, R_minus, R_plus, n_lattice, finite)


# ---------------------------------------------------------------------------
# Gronwall envelope
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GronwallReport:
    C: float
    residual: float
    violated: bool


def gronwall_fit(times, E, D=None) -> GronwallReport:
    """Smallest C with E(t) <= E(0) exp(C t (1 + t/2)), plus the fit residual.

    The envelope exponent integrates the (1 + t) kernel of the closing
    inequality. A series that starts at zero and becomes positive cannot
    satisfy any envelope and is flagged instead (the comparison principle
    says it must be identically zero).
    """
    times = np.asarray(times, dtype=float)
    total = np.asarray(E, dtype=float)
    if D is not None:
        total = total + np.asarray(D, dtype=float)
    if times.shape != total.shape or times.ndim != 1:
        raise ValueError("times and series must be matching 1D arrays")
    if np.any(total < 0.0):
        raise ValueError("series must be nonnegative")

    if total[0] == 0.0:
        if np.any(total > 0.0):
            return GronwallReport(np.inf, np.inf, True)
        return GronwallReport(0.0, 0.0, False)

    mask = (times > 0.0) & (total > 0.0)
    if not np.any(mask):
        return GronwallReport(0.0, 0.0, False)
    kernel = times[mask] * (1.0 + 0.5 * times[mask])
    g = np.log(total[mask] / total[0])
    C = float(np.max(g / kernel))
    residual = float(np.sqrt(np.mean((g - C * kernel) ** 2)))
    return GronwallReport(C, residual, False)


# ---------------------------------------------------------------------------
# vanishing-viscosity boundary terms
# ---------------------------------------------------------------------------

def vanishing_viscosity_terms(eps, stress_sq, wall_slip_sq, body_slip_sq,
                              grad_phi: float, wall_phi: float,
                              body_phi: float) -> np.ndarray:
    """The three sqrt(eps)-scaled series whose decay removes the eps terms.

    Each entry is sqrt(eps) * ||sqrt(eps) q||_{L2} * ||test factor||: the
    squared-dissipation integrals are what the runs tally, so the level-k
    value is sqrt(eps_k) * sqrt(eps_k * integral_k) * norm. Returns an
    array of shape (3, n_eps).
    """
    eps = np.asarray(eps, dtype=float)
    rows = []
    for tally, norm in ((stress_sq, grad_phi), (wall_slip_sq, wall_phi),
                        (body_slip_sq, body_phi)):
        tally = np.asarray(tally, dtype=float)
        if tally.shape != eps.shape:
            raise MeasureError("one tally per viscosity level required")
        rows.append(np.sqrt(eps) * np.sqrt(eps * tally) * norm)
    return np.stack(rows)
