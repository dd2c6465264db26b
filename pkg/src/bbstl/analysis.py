"""Frequency-domain consumers: output spectra, response grids, cut-off
frequency detection and monitoring-safe compression reports.

The output spectrum of order n is the hyperplane sum over
w_1 + ... + w_n = w of H_n X(w_1)...X(w_n).  Because every stored GFRF term
factors per frequency slot, the sum reorganizes into an (n-1)-fold discrete
convolution of per-slot spectra, which is what this module computes (the
result equals the literal Riemann sum over the FFT grid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import BadRange, GridTooLarge, OrderTooHigh
from .logic import Formula, KernelTable
from .monitor import RobustnessSignal, robustness
from .signals import Signal, Spectrum, lowpass
from .volterra import Gfrf

MAX_SPECTRUM_ORDER = 4
MAX_GRID_ORDER = 3


@dataclass(frozen=True)
class GfrfGrid:
    """Dense evaluation of one response order on a uniform frequency grid."""

    order: int
    axis: np.ndarray
    values: np.ndarray

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


def _slot_spectrum(g: Gfrf, delay: float, factor: str,
                   spec: Spectrum) -> np.ndarray:
    om = spec.omegas
    return np.exp(-1j * delay * om) * g.factor_values(factor, om) * spec.bins


def output_spectrum(g: Gfrf, spec: Spectrum,
                    max_order: int = 2) -> Spectrum:
    """Predicted spectrum of the operator output for input spectrum X.

    Order 1 is the pointwise product H_1 X; order n >= 2 contributes the
    hyperplane sum evaluated as a chain of grid convolutions per term, each
    weighted by domega / (2*pi).
    """
    if not 1 <= max_order <= MAX_SPECTRUM_ORDER:
        raise OrderTooHigh(
            f"output spectrum supports orders 1..{MAX_SPECTRUM_ORDER}, "
            f"got {max_order}")
    n_bins = len(spec)
    zero_idx = n_bins // 2
    if abs(spec.omega0 + zero_idx * spec.domega) > 1e-9 * spec.domega + 1e-12:
        raise BadRange("spectrum grid must contain omega = 0")
    out = np.zeros(n_bins, dtype=complex)
    for order, terms in sorted(g.orders.items()):
        if order > max_order or not terms:
            continue
        for term in terms:
            acc = _slot_spectrum(g, term.delays[0], term.factors[0], spec)
            for d, fac in zip(term.delays[1:], term.factors[1:]):
                w = _slot_spectrum(g, d, fac, spec)
                acc = fftconvolve(acc, w)[zero_idx: zero_idx + n_bins]
                acc *= spec.domega / (2 * math.pi)
            out += term.coeff * acc
    return Spectrum(spec.omega0, spec.domega, out, t0=spec.t0)


def gfrf_grid(g: Gfrf, order: int, omega_max: float, num_points: int,
              budget: int = 10 ** 7) -> GfrfGrid:
    """Evaluate |H_order| on the dense grid [0, omega_max]^order."""
    if order < 1 or order > MAX_GRID_ORDER:
        raise OrderTooHigh(
            f"dense grids support orders 1..{MAX_GRID_ORDER}, got {order}")
    if num_points < 2:
        raise BadRange("grid needs at least two points")
    if num_points ** order > budget:
        raise GridTooLarge(
            f"{num_points}^{order} exceeds the evaluation budget {budget}")
    axis = np.linspace(0.0, omega_max, num_points)
    mesh = np.meshgrid(*([axis] * order), indexing="ij")
    values = g.evaluate(order, mesh)
    return GfrfGrid(order, axis, np.asarray(values))


@dataclass(frozen=True)
class CutoffScan:
    omega_star: float
    found: bool
    threshold: float
    axis: np.ndarray
    envelope: np.ndarray          # m(w): worst response magnitude at w

    def to_json(self) -> dict:
        return {
            "omega_star": self.omega_star,
            "omega_star_hz": self.omega_star / (2 * math.pi),
            "found": self.found,
            "threshold": self.threshold,
        }


def cutoff_scan(g: Gfrf, threshold: float, omega_max: float,
                num_points: int = 65, max_order: int = 2,
                budget: int = 10 ** 7) -> CutoffScan:
    """Smallest grid frequency above which every response stays under
    ``threshold``.

    The profile m(w) maximizes |H_n| over orders n <= max_order, the slot
    holding w, and grid choices of the other n-1 frequencies in
    [0, omega_max].  When no grid point qualifies, the scan reports
    omega_max with ``found=False``.
    """
    if threshold <= 0:
        raise BadRange("threshold must be positive")
    if max_order < 1 or max_order > MAX_GRID_ORDER:
        raise OrderTooHigh(
            f"cutoff scan supports orders 1..{MAX_GRID_ORDER}")
    axis = np.linspace(0.0, omega_max, num_points)
    envelope = np.zeros(num_points)
    for order in range(1, max_order + 1):
        if not g.orders.get(order):
            continue
        if num_points ** order > budget:
            raise GridTooLarge(
                f"{num_points}^{order} exceeds the evaluation budget")
        mesh = np.meshgrid(*([axis] * order), indexing="ij")
        mag = np.abs(np.asarray(g.evaluate(order, mesh)))
        for slot in range(order):
            other = tuple(ax for ax in range(order) if ax != slot)
            profile = mag.max(axis=other) if other else mag
            envelope = np.maximum(envelope, profile)
    below = envelope < threshold
    # smallest index i with below[i:] all true
    idx = num_points
    for i in range(num_points - 1, -1, -1):
        if not below[i]:
            break
        idx = i
    if idx == num_points:
        return CutoffScan(omega_max, False, threshold, axis, envelope)
    return CutoffScan(float(axis[idx]), True, threshold, axis, envelope)


def cutoff_frequency(g: Gfrf, threshold: float, omega_max: float,
                     num_points: int = 65, max_order: int = 2) -> float:
    """Cut-off frequency in rad/s (omega_max sentinel when none found)."""
    return cutoff_scan(g, threshold, omega_max, num_points, max_order).omega_star


# ---------------------------------------------------------------------------
# Monitoring-safe compression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tolerances:
    tol_rho: float = 0.05
    eps_tie: float = 1e-12


@dataclass(frozen=True)
class SafetyReport:
    cutoff: float
    signal_rel_diff: float
    rho_rel_diff: float
    rho_max_abs_diff: float
    truth_flip_count: int
    verdict: str                     # "safe" | "unsafe"
    tolerances: Tolerances = field(default=Tolerances())

    def to_json(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "cutoff_hz": self.cutoff / (2 * math.pi),
            "signal_rel_diff": self.signal_rel_diff,
            "rho_rel_diff": self.rho_rel_diff,
            "rho_max_abs_diff": self.rho_max_abs_diff,
            "truth_flip_count": self.truth_flip_count,
            "verdict": self.verdict,
            "tol_rho": self.tolerances.tol_rho,
            "eps_tie": self.tolerances.eps_tie,
        }


def _rel_rms(delta: np.ndarray, reference: np.ndarray) -> float:
    ref = float(np.sqrt(np.mean(reference ** 2)))
    if ref == 0.0:
        return 0.0 if not delta.any() else math.inf
    return float(np.sqrt(np.mean(delta ** 2))) / ref


def compression_safety_report(phi: Formula, x: Signal, cutoff: float,
                              kt: KernelTable,
                              tolerances: Tolerances | None = None,
                              ) -> tuple[SafetyReport, Signal, RobustnessSignal,
                                         RobustnessSignal]:
    """Monitor x and its low-passed version and compare the verdicts.

    Returns the report plus the compressed signal and both robustness
    signals so callers can export them.  The compression is safe when the
    relative robustness change stays within tolerance and no truth value
    flips (ties below ``eps_tie`` are ignored).
    """
    tol = tolerances or Tolerances()
    xc = lowpass(x, cutoff)
    rho = robustness(phi, x, kt)
    rho_c = robustness(phi, xc, kt)
    r, rc = rho.samples, rho_c.samples
    flips = int(np.count_nonzero(
        (np.sign(r) != np.sign(rc))
        & (np.abs(r) > tol.eps_tie) & (np.abs(rc) > tol.eps_tie)))
    rho_rel = _rel_rms(r - rc, r)
    report = SafetyReport(
        cutoff=cutoff,
        signal_rel_diff=_rel_rms(x.samples - xc.samples, x.samples),
        rho_rel_diff=rho_rel,
        rho_max_abs_diff=float(np.max(np.abs(r - rc))),
        truth_flip_count=flips,
        verdict="safe" if (rho_rel <= tol.tol_rho and flips == 0) else "unsafe",
        tolerances=tol,
    )
    return report, xc, rho, rho_c


def save_grid_csv(grid: GfrfGrid, path) -> None:
    """CSV export: omega1[,omega2[,omega3]],re,im,abs."""
    import csv
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        axes = [f"omega{i + 1}" for i in range(grid.order)]
        writer.writerow(axes + ["re", "im", "abs"])
        it = np.ndindex(*grid.values.shape)
        for idx in it:
            z = grid.values[idx]
            row = [repr(float(grid.axis[i])) for i in idx]
            writer.writerow(row + [repr(float(z.real)), repr(float(z.imag)),
                                   repr(float(abs(z)))])
