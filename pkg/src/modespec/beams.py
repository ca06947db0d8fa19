"""Test beams: parametric showcase profiles and beams read from files.

Recipe lengths are in units of the basis waist ``w0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from . import io
from .modes import ComplexField, GridSpec, ModeSpectrum, PhysicalFrame, synthesize


@dataclass(frozen=True)
class AstigmaticGaussian:
    """``exp(-u**2/wx**2 - v**2/wy**2)`` in axes rotated by ``tilt``."""

    wx: float = 1.6
    wy: float = 0.7
    tilt: float = 0.0

    def __post_init__(self):
        if not (self.wx > 0 and self.wy > 0):
            raise ValueError("widths must be positive")


@dataclass(frozen=True)
class Necklace:
    """``poles`` Gaussian beads of width ``lobe_width`` on a ring of radius ``r0``.

    Neighbouring beads have opposite sign, so the pattern resembles a ring
    modulated by ``cos(poles * phi / 2)``; ``poles=6`` is the hexapole.
    """

    poles: int = 6
    r0: float = 1.2
    lobe_width: float = 0.7

    def __post_init__(self):
        if self.poles < 2 or self.poles % 2:
            raise ValueError("poles must be an even integer >= 2")
        if not (self.r0 > 0 and self.lobe_width > 0):
            raise ValueError("ring radius and lobe width must be positive")


@dataclass(frozen=True)
class Multiring:
    """Concentric elliptical ring Gaussians.

    Ring ``i`` is ``a_i exp(-(rho - r_i)**2 / width**2)`` with the elliptical
    radius ``rho = sqrt((x/ellipticity)**2 + y**2)``; ``r_i = 0`` gives a
    central spot.
    """

    radii: tuple = (0.0, 1.4)
    amplitudes: tuple = (1.0, -0.6)
    ellipticity: float = 1.2
    width: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        if len(self.radii) != len(self.amplitudes) or not self.radii:
            raise ValueError("radii and amplitudes must be nonempty and of equal length")
        if any(r < 0 for r in self.radii) or not (self.ellipticity > 0 and self.width > 0):
            raise ValueError("radii must be >= 0 and ellipticity, width positive")


@dataclass(frozen=True)
class CoefficientList:
    spectrum: ModeSpectrum


@dataclass(frozen=True)
class SampledField:
    path: Path

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))


BeamRecipe = Union[AstigmaticGaussian, Necklace, Multiring, CoefficientList, SampledField]

SHOWCASE = {
    "astigmatic": AstigmaticGaussian(),
    "necklace": Necklace(),
    "multiring": Multiring(),
}


def realize(recipe: BeamRecipe, frame: PhysicalFrame, grid: GridSpec | None = None) -> ComplexField:
    """Sample a recipe and normalize it to unit power."""
    grid = grid or GridSpec()
    if isinstance(recipe, SampledField):
        f = _load_sampled(recipe.path, frame)
        if f.grid != grid or f.frame != frame:
            raise ValueError(f"{recipe.path}: stored grid/frame {f.grid}, {f.frame} differs from the requested one")
        return f.normalized()
    if isinstance(recipe, CoefficientList):
        spec = ModeSpectrum(frame, recipe.spectrum.entries)
        return synthesize(spec, grid).normalized()
    X, Y = grid.mesh(frame)
    x, y = X / frame.w0, Y / frame.w0
    if isinstance(recipe, AstigmaticGaussian):
        c, s = math.cos(recipe.tilt), math.sin(recipe.tilt)
        u, v = c * x + s * y, -s * x + c * y
        amp = np.exp(-(u / recipe.wx) ** 2 - (v / recipe.wy) ** 2)
    elif isinstance(recipe, Necklace):
        amp = np.zeros(x.shape)
        for k in range(recipe.poles):
            t = 2 * math.pi * k / recipe.poles
            cx, cy = recipe.r0 * math.cos(t), recipe.r0 * math.sin(t)
            amp += (-1) ** k * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / recipe.lobe_width**2)
    elif isinstance(recipe, Multiring):
        rho = np.hypot(x / recipe.ellipticity, y)
        amp = sum(a * np.exp(-((rho - r) / recipe.width) ** 2) for r, a in zip(recipe.radii, recipe.amplitudes))
    else:
        raise TypeError(f"unknown recipe {recipe!r}")
    return ComplexField(grid, frame, amp).normalized()


def _load_sampled(path: Path, frame: PhysicalFrame) -> ComplexField:
    if io.sniff_header(path) is None:
        return io.load_field(path)
    return io.load_field_csv(path, frame)


_RECIPE_KEYS = {
    "astigmatic": (AstigmaticGaussian, {"wx": float, "wy": float, "tilt": float}),
    "necklace": (Necklace, {"poles": int, "r0": float, "lobe_width": float}),
    "multiring": (Multiring, {"radii": lambda s: tuple(float(v) for v in s.split()),
                              "amplitudes": lambda s: tuple(float(v) for v in s.split()),
                              "ellipticity": float, "width": float}),
}


def parse_recipe(path) -> BeamRecipe:
    """Parse a ``key=value`` recipe file (``type=necklace``, ``poles=6``, ...)."""
    params, kind = {}, None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise io.ParseError("expected key=value", path, lineno, 1)
        key, value = (t.strip() for t in line.split("=", 1))
        if key == "type":
            kind = value
            if kind not in _RECIPE_KEYS:
                raise io.ParseError(f"unknown beam type {value!r}; expected one of {sorted(_RECIPE_KEYS)}",
                                    path, lineno, line.index("=") + 2)
            continue
        params[key] = (value, lineno)
    if kind is None:
        raise io.ParseError("recipe lacks a 'type=' line", path)
    cls, keys = _RECIPE_KEYS[kind]
    kwargs = {}
    for key, (value, lineno) in params.items():
        if key not in keys:
            raise io.ParseError(f"unknown key {key!r} for type {kind}", path, lineno, 1)
        try:
            kwargs[key] = keys[key](value)
        except ValueError:
            raise io.ParseError(f"cannot parse {key}={value!r}", path, lineno, len(key) + 2) from None
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise io.ParseError(str(exc), path) from None


def load_beam(path) -> BeamRecipe:
    """Detect the file format from its first bytes and return a recipe."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    header = io.sniff_header(path)
    if header is None:
        io.load_field(path)  # validates the container
        return SampledField(path)
    if header == io.SPECTRUM_HEADER:
        return CoefficientList(io.read_spectrum(path))
    if header == io.FIELD_CSV_HEADER:
        return SampledField(path)
    if header and "=" in header[0]:
        return parse_recipe(path)
    raise io.ParseError("unrecognized beam file; expected the MSPC binary field container, a field CSV "
                        "'x,y,re,im', a spectrum CSV 'nx,ny,re,im' or a key=value recipe", path, 1, 1)


def showcase_beams(frame: PhysicalFrame | None = None, grid: GridSpec | None = None) -> dict[str, ComplexField]:
    """The three reference beams, realized and normalized."""
    frame = frame or PhysicalFrame()
    return {name: realize(rec, frame, grid) for name, rec in SHOWCASE.items()}
