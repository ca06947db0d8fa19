"""SU(2) generators on the truncated Hermite-Gaussian mode space.

With ladder operators ``a`` (x axis) and ``b`` (y axis) the generators are

    N  = (a^+ a + b^+ b) / 2            (zero-point constant dropped)
    Lx = (a^+ a - b^+ b) / 2
    Ly = (a^+ b + b^+ a) / 2
    Lz = -i (a^+ b - b^+ a) / 2

so that ``[Lx, Ly] = i Lz`` cyclically and N commutes with all three.  Every
generator conserves the total order ``nx + ny``; matrices are stored over the
canonical index list of :func:`modespec.modes.mode_indices`.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .modes import ModeIndex, ModeSpectrum, PhysicalFrame, mode_indices


class Generator(str, Enum):
    LX = "Lx"
    LY = "Ly"
    LZ = "Lz"
    N = "N"


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    kind: Generator
    max_order: int
    matrix: np.ndarray

    @property
    def indices(self) -> list[ModeIndex]:
        return mode_indices(self.max_order)


def _ladder_terms(max_order: int):
    idx = mode_indices(max_order)
    pos = {k: i for i, k in enumerate(idx)}
    # a^+ b |nx, ny> = sqrt((nx + 1) ny) |nx + 1, ny - 1>
    hop = np.zeros((len(idx), len(idx)))
    for k, i in pos.items():
        if k.ny > 0:
            j = pos[ModeIndex(k.nx + 1, k.ny - 1)]
            hop[j, i] = np.sqrt((k.nx + 1) * k.ny)
    nx = np.array([k.nx for k in idx], dtype=float)
    ny = np.array([k.ny for k in idx], dtype=float)
    return nx, ny, hop


def generator_matrix(kind, max_order: int, frame: PhysicalFrame | None = None) -> OperatorMatrix:
    """Matrix elements of a generator in the HG basis.

    ``frame`` is accepted for symmetry with the ray-matrix constructors; the
    dimensionless matrices do not depend on it.
    """
    kind = Generator(kind)
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    nx, ny, hop = _ladder_terms(max_order)
    if kind is Generator.N:
        m = np.diag((nx + ny) / 2.0).astype(complex)
    elif kind is Generator.LX:
        m = np.diag((nx - ny) / 2.0).astype(complex)
    elif kind is Generator.LY:
        m = (hop + hop.T) / 2.0 + 0j
    else:
        m = -0.5j * (hop - hop.T)
    return OperatorMatrix(kind, max_order, m)


def axis_generator(theta: float, phi: float, max_order: int) -> np.ndarray:
    """``u_r . L`` with ``u_r = (cos(phi) sin(theta), sin(phi) sin(theta), cos(theta))``."""
    lx, ly, lz = (generator_matrix(g, max_order).matrix for g in (Generator.LX, Generator.LY, Generator.LZ))
    return (np.cos(phi) * np.sin(theta) * lx
            + np.sin(phi) * np.sin(theta) * ly
            + np.cos(theta) * lz)


def _order_blocks(max_order: int):
    idx = mode_indices(max_order)
    start = 0
    for k in range(max_order + 1):
        yield slice(start, start + k + 1)
        start += k + 1
    assert start == len(idx)


def rotate_spectrum(spectrum: ModeSpectrum, theta: float, phi: float, angle: float) -> ModeSpectrum:
    """Apply ``exp(-i * angle * L_{theta,phi})`` order block by order block."""
    n = spectrum.max_order
    gen = axis_generator(theta, phi, n)
    vec = spectrum.vector(n)
    out = np.empty_like(vec)
    for blk in _order_blocks(n):
        w, v = np.linalg.eigh(gen[blk, blk])
        out[blk] = v @ (np.exp(-1j * angle * w) * (v.conj().T @ vec[blk]))
    return ModeSpectrum.from_vector(spectrum.frame, out, n)


def gouy_advance(spectrum: ModeSpectrum, angle: float) -> ModeSpectrum:
    """Multiply each ``C[m, n]`` by ``exp(-i * angle * (m + n) / 2)``."""
    return ModeSpectrum(spectrum.frame, {
        k: c * np.exp(-0.5j * angle * k.order) for k, c in spectrum.entries.items()
    })


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a
