"""Mach-Zehnder simulation producing intensity-difference scans.

The measurement arm applies ``exp(-i phi- Lx) exp(-i phi+ N)`` to the input,
the compensator arm applies a fixed reference, and the balanced detector
reads ``2 Re <compensated, measured>`` for a unit-power input.  Three engines
compute the same scan: the closed form over mode weights (``analytic``), the
sampled kernels (``kernel``) and wave propagation through the designed lens
trains (``train``).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import rays
from .modes import ComplexField, ModeSpectrum, eval_hg, inner
from .propagation import KernelKind, KernelPlan, apply_parity, apply_train
from .rays import DesignRangeError, OPERATING_RANGE, OpticalTrain

TWO_PI = 2.0 * math.pi
ENGINES = ("analytic", "kernel", "train")


@dataclass(frozen=True)
class CompensatorSetting:
    """Reference arm ``exp(-i phi-' Lx) exp(-i phi+' N)``."""

    kind: str = "identity"
    phi_plus: float = 0.0
    phi_minus: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "minus_identity", "custom"):
            raise ValueError(f"unknown compensator {self.kind!r}")
        if not (math.isfinite(self.phi_plus) and math.isfinite(self.phi_minus)):
            raise ValueError("compensator angles must be finite")
        if self.kind == "minus_identity":
            object.__setattr__(self, "phi_plus", 0.0)
            object.__setattr__(self, "phi_minus", TWO_PI)
        elif self.kind == "identity":
            object.__setattr__(self, "phi_plus", 0.0)
            object.__setattr__(self, "phi_minus", 0.0)

    @property
    def shift(self) -> tuple[float, float]:
        return self.phi_plus, self.phi_minus

    def tag(self) -> str:
        if self.kind == "custom":
            return f"custom({self.phi_plus!r},{self.phi_minus!r})"
        return self.kind

    @classmethod
    def from_tag(cls, tag: str) -> "CompensatorSetting":
        tag = tag.strip()
        if tag.startswith("custom(") and tag.endswith(")"):
            a, b = tag[7:-1].split(",")
            return cls("custom", float(a), float(b))
        return cls(tag)


IdentityC = CompensatorSetting("identity")
MinusIdentityC = CompensatorSetting("minus_identity")


def Custom(phi_plus: float, phi_minus: float) -> CompensatorSetting:
    return CompensatorSetting("custom", phi_plus, phi_minus)


@dataclass(frozen=True)
class ScanConfig:
    k_plus: int = 10
    k_minus: int = 10
    plus_range: tuple[float, float] = OPERATING_RANGE
    minus_range: tuple[float, float] = OPERATING_RANGE
    compensator: CompensatorSetting = IdentityC
    engine: str = "analytic"

    def __post_init__(self):
        if self.k_plus < 1 or self.k_minus < 1:
            raise ValueError("sample counts must be >= 1")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        for lo, hi in (self.plus_range, self.minus_range):
            if not hi > lo:
                raise ValueError("scan ranges must have positive length")

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        return scan_angles(self.plus_range, self.k_plus), scan_angles(self.minus_range, self.k_minus)


def scan_angles(rng: tuple[float, float], k: int) -> np.ndarray:
    """Equal increments from the range start (inclusive) to its end (exclusive)."""
    lo, hi = rng
    return lo + (hi - lo) * np.arange(k) / k


@dataclass(frozen=True, eq=False)
class IntensityScan:
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    values: np.ndarray  # shape (len(phi_plus), len(phi_minus))
    compensator: CompensatorSetting = IdentityC
    engine: str = "analytic"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.phi_plus), len(self.phi_minus)):
            raise ValueError("scan values do not match the angle grids")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "phi_plus", np.asarray(self.phi_plus, dtype=float))
        object.__setattr__(self, "phi_minus", np.asarray(self.phi_minus, dtype=float))

    @property
    def k_plus(self) -> int:
        return len(self.phi_plus)

    @property
    def k_minus(self) -> int:
        return len(self.phi_minus)

    def same_grid(self, other: "IntensityScan", tol: float = 1e-12) -> bool:
        return (self.phi_plus.shape == other.phi_plus.shape
                and self.phi_minus.shape == other.phi_minus.shape
                and np.allclose(self.phi_plus, other.phi_plus, rtol=0, atol=tol)
                and np.allclose(self.phi_minus, other.phi_minus, rtol=0, atol=tol))


def delta_i(measured: ComplexField, compensated: ComplexField) -> float:
    """Balanced-detector reading ``I_B - I_A = 2 Re <compensated, measured>``."""
    return 2.0 * inner(compensated, measured).real


def analytic_values(weights: Mapping, phi_plus, phi_minus, shift=(0.0, 0.0)) -> np.ndarray:
    """``2 sum P cos[(m+n)(phi+ - phi+')/2 + (m-n)(phi- - phi-')/2]`` on a grid."""
    tp = np.asarray(phi_plus, dtype=float)[:, None] - shift[0]
    tm = np.asarray(phi_minus, dtype=float)[None, :] - shift[1]
    out = np.zeros((tp.shape[0], tm.shape[1]))
    for (m, n), p in weights.items():
        if p:
            out += 2.0 * p * np.cos(0.5 * (m + n) * tp + 0.5 * (m - n) * tm)
    return out


def scan_analytic(spectrum: ModeSpectrum, cfg: ScanConfig) -> IntensityScan:
    pp, pm = cfg.angles()
    w = spectrum.weights().entries if isinstance(spectrum, ModeSpectrum) else dict(spectrum.entries)
    vals = analytic_values(w, pp, pm, cfg.compensator.shift)
    return IntensityScan(pp, pm, vals, cfg.compensator, "analytic")


def _map_rows(fn, items, workers: int | None):
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def scan_kernel(f: ComplexField, cfg: ScanConfig, workers: int | None = None) -> IntensityScan:
    """Scan using the sampled kernels, ground-mode phase removed per angle."""
    pp, pm = cfg.angles()
    comp = cfg.compensator
    if comp.kind == "identity":
        ref = f
    elif comp.kind == "minus_identity":
        ref = apply_parity(f)
    else:
        ref = KernelPlan(KernelKind.PLUS, comp.phi_plus, f.grid, f.frame, "mode").apply(f)
        ref = KernelPlan(KernelKind.MINUS, comp.phi_minus, f.grid, f.frame, "mode").apply(ref)
    minus_plans = [KernelPlan(KernelKind.MINUS, b, f.grid, f.frame, "mode") for b in pm]

    def row(a):
        half = KernelPlan(KernelKind.PLUS, a, f.grid, f.frame, "mode").apply(f)
        return [delta_i(plan.apply(half), ref) for plan in minus_plans]

    vals = np.array(_map_rows(row, pp, workers))
    return IntensityScan(pp, pm, vals, comp, "kernel")


def _check_train_range(cfg: ScanConfig):
    lo, hi = OPERATING_RANGE
    for name, (a, b) in (("phi_plus", cfg.plus_range), ("phi_minus", cfg.minus_range)):
        if a < lo - 1e-12 or b > hi + 1e-12:
            raise DesignRangeError(f"{name} range [{a:.4g}, {b:.4g}] exceeds the lens operating range [pi, 3pi]")


@dataclass(frozen=True)
class Misalignment:
    """Transverse offsets of measurement-arm elements.

    Keys are ``(arm, position)`` with arm ``"plus"`` or ``"minus"`` and
    position the element index inside that arm's designed train.
    """

    offsets: dict = field(default_factory=dict)

    def apply(self, arm: str, train: OpticalTrain) -> OpticalTrain:
        for (a, pos), off in self.offsets.items():
            if a == arm:
                train = train.with_offset(pos, off)
        return train

    @classmethod
    def middle_lens(cls, delta: float, arm: str = "plus") -> "Misalignment":
        """Shift the central lens (S+) or central scissor pair (S-) along x."""
        if arm == "plus":
            return cls({("plus", 2): (delta, 0.0)})
        return cls({("minus", 3): (delta, 0.0), ("minus", 4): (delta, 0.0)})


def measurement_arm_length(frame) -> float:
    return 2.0 * frame.z0 + frame.z0


def compensator_train(comp: CompensatorSetting, frame) -> OpticalTrain:
    arm = measurement_arm_length(frame)
    if comp.kind == "identity":
        return rays.solve_compensator("identity", 4, arm, frame=frame).train
    if comp.kind == "minus_identity":
        return rays.solve_compensator("minus_identity", 2, arm, frame=frame).train
    raise ValueError("the lens-train engine supports only the identity and minus-identity compensators")


def _locked(out: ComplexField, probe_out: ComplexField, probe: ComplexField) -> ComplexField:
    """Remove the phase the arm imprints on the ground-mode probe."""
    ph = inner(probe, probe_out)
    if abs(ph) == 0:
        raise ValueError("phase reference lost: ground-mode overlap vanished")
    return out.replace(out.amplitude * (abs(ph) / ph))


def scan_train(f: ComplexField, cfg: ScanConfig, misalignment: Misalignment | None = None,
               workers: int | None = None) -> IntensityScan:
    """Scan through the designed lens trains by wave propagation.

    Each arm is phase-locked on the HG ground mode: the probe is sent through
    the same (possibly misaligned) train and the phase of its overlap with
    the unpropagated ground mode is divided out.
    """
    _check_train_range(cfg)
    mis = misalignment or Misalignment()
    frame = f.frame
    pp, pm = cfg.angles()
    probe = eval_hg((0, 0), frame, f.grid)
    same = bool(np.array_equal(probe.amplitude, f.amplitude))
    ctrain = compensator_train(cfg.compensator, frame)
    ref = _locked(apply_train(f, ctrain), apply_train(probe, ctrain), probe)
    minus_trains = [mis.apply("minus", rays.design_s_minus(b, frame)) for b in pm]

    def row(a):
        plus = mis.apply("plus", rays.design_s_plus(a, frame))
        half = apply_train(f, plus)
        phalf = half if same else apply_train(probe, plus)
        out = []
        for tr in minus_trains:
            m = apply_train(half, tr)
            pm_ = m if same else apply_train(phalf, tr)
            out.append(delta_i(_locked(m, pm_, probe), ref))
        return out

    vals = np.array(_map_rows(row, pp, workers))
    return IntensityScan(pp, pm, vals, cfg.compensator, "train")


def run_scan(source, cfg: ScanConfig, **kw) -> IntensityScan:
    """Dispatch on ``cfg.engine``; the analytic engine takes a ModeSpectrum."""
    if cfg.engine == "analytic":
        return scan_analytic(source, cfg)
    if cfg.engine == "kernel":
        return scan_kernel(source, cfg, **kw)
    return scan_train(source, cfg, **kw)
