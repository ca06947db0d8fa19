"""Mode weights from intensity-difference scans.

Both inversions are equal-increment Riemann sums.  The detector reading is
``2 Re <.,.>``, twice the bare expectation value, so the projection constants
(1/(16 pi^2), 1/(8 pi^2) for the full range, 1/(8 pi^2), 1/(4 pi^2) for the
two-compensator window) are applied to half the measured signal.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .interferometer import IntensityScan, analytic_values, scan_angles
from .modes import CLAMP_THRESHOLD, ModeIndex, WeightSpectrum, mode_indices

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
TWO_PI = 2.0 * math.pi

#: residual above which a scan is not considered fully explained by its weights
RESIDUAL_TOL = 1e-3


class ReconstructionError(ValueError):
    pass


@dataclass(frozen=True)
class ReconstructionReport:
    weights: WeightSpectrum
    residual: float
    clamped_mass: float
    sampling_ok: bool
    k_plus: int
    k_minus: int
    max_order: int
    asymmetry: float = 0.0
    engines: tuple = ()
    raw: dict | None = None

    def to_json(self) -> str:
        return json.dumps({
            "residual": self.residual,
            "clamped_mass": self.clamped_mass,
            "sampling_ok": self.sampling_ok,
            "K_plus": self.k_plus,
            "K_minus": self.k_minus,
            "max_order": self.max_order,
        }, indent=2, sort_keys=True)


def _step(grid: np.ndarray, period: float, name: str) -> float:
    k = len(grid)
    step = period / k
    expected = grid[0] + step * np.arange(k)
    if not np.allclose(grid, expected, rtol=0, atol=1e-9):
        raise ReconstructionError(f"{name} samples must be {k} equal increments over a {period:.6g} window")
    return step


def _clamp(raw: dict) -> tuple[WeightSpectrum, float]:
    clamped = 0.0
    out = {}
    for k, v in raw.items():
        if v < 0:
            if v < -CLAMP_THRESHOLD:
                logger.warning("weight %.3e at %s is far below zero (aliasing or truncation)", v, tuple(k))
            clamped -= v
            v = 0.0
        out[k] = v
    return WeightSpectrum(out, clamped_mass=clamped), clamped


def _projection(values, tp, tm, idx, kind: str) -> np.ndarray:
    """Real projections of ``values`` onto ``trig((m+n) tp/2 + (m-n) tm/2)``."""
    return _design(idx, tp, tm, kind) @ np.asarray(values).ravel()


def reconstruct_full(scan: IntensityScan, max_order: int) -> ReconstructionReport:
    """Double Fourier inversion of a scan covering a full 4pi period per axis."""
    dp = _step(scan.phi_plus, FOUR_PI, "phi_plus")
    dm = _step(scan.phi_minus, FOUR_PI, "phi_minus")
    sp, sm = scan.compensator.shift
    tp, tm = scan.phi_plus - sp, scan.phi_minus - sm
    idx = mode_indices(max_order)
    proj = _projection(scan.values / 2.0, tp, tm, idx, "cos") * dp * dm
    const = np.array([1 / (16 * math.pi**2) if k.order == 0 else 1 / (8 * math.pi**2) for k in idx])
    raw = dict(zip(idx, (const * proj).tolist()))
    weights, clamped = _clamp(raw)
    residual = scan_residual(weights, [scan])
    ok = max_order <= brute_force_bound(min(scan.k_plus, scan.k_minus), full=True) and residual <= RESIDUAL_TOL
    return ReconstructionReport(weights, residual, clamped, ok, scan.k_plus, scan.k_minus, max_order,
                                engines=(scan.engine,), raw=raw)


def hg_transfer(phi_plus, phi_minus, values_a, values_b, max_order: int):
    """Raw two-compensator weights and the sine-projection diagnostic."""
    dp = _step(phi_plus, TWO_PI, "phi_plus")
    dm = _step(phi_minus, TWO_PI, "phi_minus")
    idx = mode_indices(max_order)
    sign = np.array([(-1) ** k.order for k in idx])
    const = np.array([1 / (8 * math.pi**2) if k.order == 0 else 1 / (4 * math.pi**2) for k in idx])
    cell = dp * dm / 2.0
    pa = _projection(values_a, phi_plus, phi_minus, idx, "cos")
    pb = _projection(values_b, phi_plus, phi_minus, idx, "cos")
    sa = _projection(values_a, phi_plus, phi_minus, idx, "sin")
    sb = _projection(values_b, phi_plus, phi_minus, idx, "sin")
    raw = const * (sign * pb + pa) * cell
    sine = const * (sign * sb + sa) * cell
    return idx, raw, sine


def reconstruct_hg(scan_a: IntensityScan, scan_b: IntensityScan, max_order: int) -> ReconstructionReport:
    """HG weights from identity- and minus-identity-compensated scans over a 2pi window."""
    if scan_a.compensator.kind != "identity" or scan_b.compensator.kind != "minus_identity":
        raise ReconstructionError("expected an identity-compensated and a minus-identity-compensated scan")
    if not scan_a.same_grid(scan_b):
        raise ReconstructionError("the two scans use different angle grids")
    engines = (scan_a.engine, scan_b.engine)
    if scan_a.engine != scan_b.engine:
        logger.warning("reconstructing from mixed engines %s", engines)
    idx, raw, sine = hg_transfer(scan_a.phi_plus, scan_a.phi_minus, scan_a.values, scan_b.values, max_order)
    raw_d = dict(zip(idx, raw.tolist()))
    weights, clamped = _clamp(raw_d)
    residual = scan_residual(weights, [scan_a, scan_b])
    k = min(scan_a.k_plus, scan_a.k_minus)
    ok = max_order <= sampling_bound(k) and residual <= RESIDUAL_TOL
    return ReconstructionReport(weights, residual, clamped, ok, scan_a.k_plus, scan_a.k_minus, max_order,
                                asymmetry=float(np.max(np.abs(sine))), engines=engines, raw=raw_d)


def scan_residual(weights: WeightSpectrum, scans) -> float:
    """RMS difference between the scans and the closed form fed with ``weights``."""
    sq, n = 0.0, 0
    for s in scans:
        model = analytic_values(weights.entries, s.phi_plus, s.phi_minus, s.compensator.shift)
        sq += float(np.sum((model - s.values) ** 2))
        n += s.values.size
    return math.sqrt(sq / n)


def _design(idx, tp, tm, kind="cos") -> np.ndarray:
    a = np.array([(k.nx + k.ny) / 2.0 for k in idx])
    b = np.array([(k.nx - k.ny) / 2.0 for k in idx])
    phase = a[:, None, None] * tp[None, :, None] + b[:, None, None] * tm[None, None, :]
    return (np.cos(phase) if kind == "cos" else np.sin(phase)).reshape(len(idx), -1)


def transfer_matrix(k: int, source_order: int, target_order: int, full: bool = False) -> np.ndarray:
    """Reconstructed target weights for every unit-weight pure source mode.

    Column ``j`` holds what the inversion at ``k`` samples per axis returns
    for the pure mode ``mode_indices(source_order)[j]`` (two-compensator
    window by default, full 4pi range with ``full=True``).  Exact
    reconstruction of every spectrum up to ``target_order`` means the
    leading square block is the identity.
    """
    src = mode_indices(source_order)
    tgt = mode_indices(target_order)
    if full:
        pp = pm = scan_angles((0.0, FOUR_PI), k)
        scans = 2.0 * _design(src, pp, pm)
        const = np.array([1 / (16 * math.pi**2) if t.order == 0 else 1 / (8 * math.pi**2) for t in tgt])
        return (const * (FOUR_PI / k) ** 2)[:, None] * (_design(tgt, pp, pm) @ (scans / 2.0).T)
    pp = pm = scan_angles((math.pi, 3 * math.pi), k)
    scan_a = 2.0 * _design(src, pp, pm)
    scan_b = 2.0 * _design(src, pp, pm - TWO_PI)
    sign = np.array([(-1) ** t.order for t in tgt])
    const = np.array([1 / (8 * math.pi**2) if t.order == 0 else 1 / (4 * math.pi**2) for t in tgt])
    cos_t = _design(tgt, pp, pm)
    proj = sign[:, None] * (cos_t @ scan_b.T) + cos_t @ scan_a.T
    return (const * (TWO_PI / k) ** 2 / 2.0)[:, None] * proj


@lru_cache(maxsize=None)
def brute_force_bound(k: int, full: bool = False, tol: float = 1e-9) -> int:
    """Largest order N with exact inversion of all spectra up to order N at k samples.

    Sweeps every pure source mode up to order 2k (mixtures, including all
    mode pairs, follow by linearity) and returns one less than the first
    order where some source leaks into, or is lost from, the retained modes.
    """
    limit = 2 * k
    t = transfer_matrix(k, limit, limit, full)
    idx = mode_indices(limit)
    for n in range(limit + 1):
        m = sum(1 for i in idx if i.order <= n)
        if np.max(np.abs(t[:m, :m] - np.eye(m))) > tol:
            return n - 1
    return limit


@lru_cache(maxsize=1)
def _golden_bounds() -> dict[int, int]:
    text = resources.files("modespec").joinpath("data/sampling_bound.csv").read_text()
    rows = csv.DictReader(text.splitlines())
    return {int(r["K"]): int(r["max_exact_order"]) for r in rows}


def sampling_bound(k: int) -> int:
    """Highest exactly reconstructible total order at ``k`` samples per axis."""
    if k < 1:
        raise ValueError("K must be >= 1")
    table = _golden_bounds()
    if k in table:
        return table[k]
    return brute_force_bound(k)


@dataclass(frozen=True)
class MisalignmentRow:
    delta: float
    error: float
    ground_weight: float


def misalignment_study(f, deltas, make_offsets, reference: WeightSpectrum, k: int = 10,
                       max_order: int | None = None, workers: int | None = None):
    """Reconstruction error of lens-train scans versus transverse offset.

    ``make_offsets(delta)`` returns a :class:`Misalignment`.  The error is the
    largest per-mode deviation from ``reference``.  Returns the rows and the
    least-squares slope of log(error) against log(delta) over positive deltas.
    """
    from .interferometer import IdentityC, MinusIdentityC, ScanConfig, scan_train

    max_order = min(k - 1, 9) if max_order is None else max_order
    rows = []
    for d in deltas:
        mis = make_offsets(d) if d else None
        a = scan_train(f, ScanConfig(k, k, compensator=IdentityC, engine="train"), mis, workers)
        b = scan_train(f, ScanConfig(k, k, compensator=MinusIdentityC, engine="train"), mis, workers)
        w = reconstruct_hg(a, b, max_order).weights
        err = max(abs(w[i] - reference[i]) for i in mode_indices(max_order))
        rows.append(MisalignmentRow(float(d), float(err), float(w[(0, 0)])))
    pos = [r for r in rows if r.delta > 0 and r.error > 0]
    slope = float("nan")
    if len(pos) >= 2:
        slope = float(np.polyfit(np.log([r.delta for r in pos]), np.log([r.error for r in pos]), 1)[0])
    return rows, slope
