"""Sampled fields and the Hermite-Gaussian / Laguerre-Gaussian mode bases.

All mode functions are evaluated at the waist plane with Gaussian envelope
``exp(-(x**2 + y**2) / w0**2)``.  Grids are symmetric about the optical axis:
sample ``j`` of an axis with ``n`` samples sits at ``(j - (n - 1) / 2) * dx``,
so spatial inversion is an exact index reversal.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special

logger = logging.getLogger(__name__)

#: weights in [-CLAMP_THRESHOLD, 0) are treated as quadrature noise
CLAMP_THRESHOLD = 1e-6


class GridResolutionError(ValueError):
    """The sampling grid cannot represent the requested mode order."""


class FrameMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalFrame:
    """Beam waist ``w0`` and reduced wavelength ``lambdabar = 1/k``."""

    w0: float = 1.0
    lambdabar: float = 0.5

    def __post_init__(self):
        if not (self.w0 > 0 and self.lambdabar > 0):
            raise ValueError(f"w0 and lambdabar must be positive, got {self.w0}, {self.lambdabar}")

    @property
    def z0(self) -> float:
        """Rayleigh range."""
        return self.w0**2 / (2.0 * self.lambdabar)


@dataclass(frozen=True)
class GridSpec:
    samples_x: int = 512
    samples_y: int = 512
    half_window: float = 8.0  # in units of w0

    def __post_init__(self):
        if self.samples_x < 1 or self.samples_y < 1:
            raise ValueError("sample counts must be positive")
        if not self.half_window > 0:
            raise ValueError("half_window must be positive")

    def spacing(self, frame: PhysicalFrame) -> tuple[float, float]:
        w = 2.0 * self.half_window * frame.w0
        return w / self.samples_x, w / self.samples_y

    def axes(self, frame: PhysicalFrame) -> tuple[np.ndarray, np.ndarray]:
        dx, dy = self.spacing(frame)
        x = (np.arange(self.samples_x) - (self.samples_x - 1) / 2.0) * dx
        y = (np.arange(self.samples_y) - (self.samples_y - 1) / 2.0) * dy
        return x, y

    def mesh(self, frame: PhysicalFrame) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes(frame)
        return np.meshgrid(x, y, indexing="ij")

    def check_resolution(self, order: int, frame: PhysicalFrame) -> None:
        """Raise :class:`GridResolutionError` if a 1D Hermite function of
        index ``order`` is not representable on this grid.

        Two rules: the window must extend three waists past the classical
        turning point ``w0*sqrt(order + 1/2)``, and the spacing must resolve
        the mode's transverse momentum extent plus a margin,
        ``dx <= pi*w0 / (sqrt(2)*(sqrt(2*order + 1) + 4))``.
        """
        turning = math.sqrt(order + 0.5)
        if self.half_window < turning + 3.0:
            raise GridResolutionError(
                f"window rule violated: half_window={self.half_window} w0 < "
                f"turning point {turning:.3f} w0 + 3 w0 for order {order}"
            )
        limit = math.pi * frame.w0 / (math.sqrt(2.0) * (math.sqrt(2 * order + 1) + 4.0))
        dx, dy = self.spacing(frame)
        if max(dx, dy) > limit:
            raise GridResolutionError(
                f"sampling rule violated: spacing {max(dx, dy) / frame.w0:.4g} w0 > "
                f"{limit / frame.w0:.4g} w0 required for order {order}"
            )


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex amplitude sampled on ``grid``; ``amplitude[i, j] = psi(x_i, y_j)``."""

    grid: GridSpec
    frame: PhysicalFrame
    amplitude: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitude, dtype=np.complex128)
        if a.shape != (self.grid.samples_x, self.grid.samples_y):
            raise ValueError(f"amplitude shape {a.shape} does not match grid")
        a.flags.writeable = False
        object.__setattr__(self, "amplitude", a)

    @property
    def cell_area(self) -> float:
        dx, dy = self.grid.spacing(self.frame)
        return dx * dy

    def norm(self) -> float:
        """Grid quadrature of the integrated intensity."""
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.cell_area)

    def normalized(self) -> "ComplexField":
        n = self.norm()
        if not n > 0 or not np.isfinite(n):
            raise ValueError("cannot normalize a field with zero or non-finite power")
        return self.replace(self.amplitude / math.sqrt(n))

    def replace(self, amplitude: np.ndarray) -> "ComplexField":
        return ComplexField(self.grid, self.frame, amplitude)

    def same_grid(self, other: "ComplexField") -> bool:
        return self.grid == other.grid and self.frame == other.frame


def inner(a: ComplexField, b: ComplexField) -> complex:
    """Grid inner product <a, b>, antilinear in ``a``."""
    if not a.same_grid(b):
        raise FrameMismatchError("fields live on different grids or frames")
    return complex(np.vdot(a.amplitude, b.amplitude) * a.cell_area)


class ModeIndex(NamedTuple):
    nx: int
    ny: int

    @property
    def order(self) -> int:
        return self.nx + self.ny


def mode_indices(max_order: int) -> list[ModeIndex]:
    """All indices with ``nx + ny <= max_order`` sorted by (order, nx)."""
    return [ModeIndex(k - ny, ny)
            for k in range(max_order + 1)
            for ny in range(k, -1, -1)]


def _sort_key(idx) -> tuple[int, int]:
    return (idx[0] + idx[1], idx[0])


@dataclass(frozen=True)
class ModeSpectrum:
    """Complex HG coefficients ``C[nx, ny]``.

    ``residual`` is set by :func:`decompose` to the norm of the part of the
    field not captured by the retained modes.
    """

    frame: PhysicalFrame
    entries: dict = field(default_factory=dict)
    residual: float | None = None

    def __post_init__(self):
        clean = {}
        for k, v in self.entries.items():
            idx = ModeIndex(int(k[0]), int(k[1]))
            if idx.nx < 0 or idx.ny < 0:
                raise ValueError(f"negative mode index {k}")
            clean[idx] = complex(v)
        object.__setattr__(self, "entries", dict(sorted(clean.items(), key=lambda kv: _sort_key(kv[0]))))

    @property
    def max_order(self) -> int:
        return max((k.order for k in self.entries), default=0)

    def __getitem__(self, idx) -> complex:
        return self.entries.get(ModeIndex(*idx), 0j)

    def total_power(self) -> float:
        return float(sum(abs(c) ** 2 for c in self.entries.values()))

    def normalized(self) -> "ModeSpectrum":
        p = self.total_power()
        if p == 0:
            raise ValueError("cannot normalize an empty spectrum")
        s = 1.0 / math.sqrt(p)
        return ModeSpectrum(self.frame, {k: v * s for k, v in self.entries.items()})

    def vector(self, max_order: int | None = None) -> np.ndarray:
        """Coefficients in canonical order up to ``max_order``."""
        if max_order is None:
            max_order = self.max_order
        return np.array([self[k] for k in mode_indices(max_order)], dtype=np.complex128)

    @classmethod
    def from_vector(cls, frame: PhysicalFrame, vec, max_order: int) -> "ModeSpectrum":
        idx = mode_indices(max_order)
        if len(vec) != len(idx):
            raise ValueError(f"expected {len(idx)} coefficients for max_order {max_order}")
        return cls(frame, dict(zip(idx, vec)))

    def weights(self) -> "WeightSpectrum":
        return WeightSpectrum({k: abs(v) ** 2 for k, v in self.entries.items()})


@dataclass(frozen=True)
class WeightSpectrum:
    """Nonnegative mode weights.

    Values in ``[-1e-6, 0)`` are clamped to zero and the removed mass is kept
    in ``clamped_mass``; anything more negative raises ``ValueError``.
    """

    entries: dict = field(default_factory=dict)
    clamped_mass: float = 0.0

    def __post_init__(self):
        clean = {}
        clamped = 0.0
        for k, v in self.entries.items():
            idx = ModeIndex(int(k[0]), int(k[1]))
            w = float(v)
            if w < 0:
                if w < -CLAMP_THRESHOLD:
                    raise ValueError(f"weight {w:.3e} at {tuple(idx)} is below the clamp threshold")
                clamped -= w
                w = 0.0
            clean[idx] = w
        if clamped:
            logger.info("clamped %.3e of negative weight mass", clamped)
        object.__setattr__(self, "entries", dict(sorted(clean.items(), key=lambda kv: _sort_key(kv[0]))))
        object.__setattr__(self, "clamped_mass", self.clamped_mass + clamped)

    def __getitem__(self, idx) -> float:
        return self.entries.get(ModeIndex(*idx), 0.0)

    @property
    def max_order(self) -> int:
        return max((k.order for k in self.entries), default=0)

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def vector(self, max_order: int | None = None) -> np.ndarray:
        if max_order is None:
            max_order = self.max_order
        return np.array([self[k] for k in mode_indices(max_order)])


def hermite_functions(n_max: int, x: np.ndarray, w0: float) -> np.ndarray:
    """Normalized 1D Hermite-Gaussians ``u_n(x)`` for ``n = 0..n_max``.

    Uses the three-term recurrence on orthonormal Hermite functions, which
    never forms ``H_n`` or ``n!`` explicitly and so stays finite at high order.
    Returns an array of shape ``(n_max + 1, len(x))`` with unit L2 norm in x.
    """
    X = math.sqrt(2.0) * np.asarray(x, dtype=float) / w0
    out = np.empty((n_max + 1,) + X.shape)
    out[0] = math.pi**-0.25 * np.exp(-X**2 / 2.0)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * X * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * X * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    # dX = sqrt(2)/w0 dx
    return out * (2.0**0.25 / math.sqrt(w0))


def hg_value(nx: int, ny: int, x, y, frame: PhysicalFrame):
    """Pointwise HG mode value (no grid)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return hermite_functions(nx, x, frame.w0)[nx] * hermite_functions(ny, y, frame.w0)[ny]


def eval_hg(index, frame: PhysicalFrame, grid: GridSpec | None = None) -> ComplexField:
    grid = grid or GridSpec()
    nx, ny = index
    if nx < 0 or ny < 0:
        raise ValueError(f"invalid mode index {index}")
    grid.check_resolution(max(nx, ny), frame)
    x, y = grid.axes(frame)
    ux = hermite_functions(nx, x, frame.w0)[nx]
    uy = hermite_functions(ny, y, frame.w0)[ny]
    return ComplexField(grid, frame, np.outer(ux, uy))


def eval_lg(p: int, l: int, frame: PhysicalFrame, grid: GridSpec | None = None) -> ComplexField:
    """Laguerre-Gaussian mode with azimuthal factor ``exp(+i*l*phi)``.

    With this sign the mode is an eigenstate of the rotation generator with
    eigenvalue ``+l/2`` (that generator is half the orbital angular momentum).
    """
    grid = grid or GridSpec()
    if p < 0:
        raise ValueError("radial index p must be nonnegative")
    grid.check_resolution(2 * p + abs(l), frame)
    X, Y = grid.mesh(frame)
    w0 = frame.w0
    r2 = (X**2 + Y**2) / w0**2
    al = abs(l)
    lognorm = 0.5 * (math.log(2.0 / math.pi) + special.gammaln(p + 1) - special.gammaln(p + al + 1))
    radial = (np.exp(lognorm) / w0) * (2.0 * r2) ** (al / 2.0) * special.eval_genlaguerre(p, al, 2.0 * r2) * np.exp(-r2)
    amp = radial * np.exp(1j * l * np.arctan2(Y, X))
    return ComplexField(grid, frame, amp)


def _basis_1d(field_: ComplexField, max_order: int):
    x, y = field_.grid.axes(field_.frame)
    return (hermite_functions(max_order, x, field_.frame.w0),
            hermite_functions(max_order, y, field_.frame.w0))


def decompose(field_: ComplexField, max_order: int, frame: PhysicalFrame | None = None) -> ModeSpectrum:
    """Overlap integrals ``C[m, n] = <u_mn, psi>`` for all ``m + n <= max_order``.

    This is the reference (oracle) decomposition.  ``frame`` may be given to
    assert the expected mode frame.
    """
    if frame is not None and frame != field_.frame:
        raise FrameMismatchError(f"field frame {field_.frame} != requested {frame}")
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    field_.grid.check_resolution(max_order, field_.frame)
    ux, uy = _basis_1d(field_, max_order)
    dx, dy = field_.grid.spacing(field_.frame)
    # separable projection: ux @ psi @ uy.T, real basis so no conjugate needed
    table = ux @ field_.amplitude @ uy.T * (dx * dy)
    idx = mode_indices(max_order)
    coeffs = {k: table[k.nx, k.ny] for k in idx}
    recon = _synth_table(ux, uy, idx, coeffs)
    residual = math.sqrt(float(np.sum(np.abs(field_.amplitude - recon) ** 2) * dx * dy))
    return ModeSpectrum(field_.frame, coeffs, residual=residual)


def _synth_table(ux, uy, idx, coeffs) -> np.ndarray:
    n = ux.shape[0]
    table = np.zeros((n, n), dtype=np.complex128)
    for k in idx:
        table[k.nx, k.ny] = coeffs[k]
    return ux.T @ table @ uy


def synthesize(spectrum: ModeSpectrum, grid: GridSpec | None = None) -> ComplexField:
    grid = grid or GridSpec()
    frame = spectrum.frame
    n = spectrum.max_order
    grid.check_resolution(n, frame)
    x, y = grid.axes(frame)
    ux = hermite_functions(n, x, frame.w0)
    uy = hermite_functions(n, y, frame.w0)
    amp = _synth_table(ux, uy, list(spectrum.entries), spectrum.entries)
    return ComplexField(grid, frame, amp)
