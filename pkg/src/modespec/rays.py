"""4x4 ray matrices on (x, y, px, py) and the lens trains realizing S+ and S-.

The momentum coordinate is the ray slope (``p = lambdabar * k_x``), so thin
lenses and free space take their textbook ABCD forms and the matrices S+(phi)
and S-(phi) come out with the Rayleigh range ``z0`` in the off-diagonal
blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from .modes import PhysicalFrame

J4 = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])

#: refractive index used by the lens designs; with n = 2 the focal length and
#: the plano-convex radius R = (n - 1) f coincide
DESIGN_INDEX = 2.0

OPERATING_RANGE = (math.pi, 3.0 * math.pi)


class DesignRangeError(ValueError):
    pass


class CompensatorError(RuntimeError):
    def __init__(self, message, bracket):
        super().__init__(f"{message} (searched focal lengths {bracket[0]:.4g}..{bracket[1]:.4g})")
        self.bracket = bracket


def s_plus(phi_plus: float, frame: PhysicalFrame) -> np.ndarray:
    c, s = math.cos(phi_plus / 2), math.sin(phi_plus / 2)
    z0 = frame.z0
    return np.array([[c, 0, z0 * s, 0],
                     [0, c, 0, z0 * s],
                     [-s / z0, 0, c, 0],
                     [0, -s / z0, 0, c]])


def s_minus(phi_minus: float, frame: PhysicalFrame) -> np.ndarray:
    c, s = math.cos(phi_minus / 2), math.sin(phi_minus / 2)
    z0 = frame.z0
    return np.array([[c, 0, z0 * s, 0],
                     [0, c, 0, -z0 * s],
                     [-s / z0, 0, c, 0],
                     [0, s / z0, 0, c]])


def is_symplectic(m: np.ndarray) -> float:
    """Largest entry of ``|M^T J M - J|``."""
    m = np.asarray(m, dtype=float)
    return float(np.max(np.abs(m.T @ J4 @ m - J4)))


def generator_flow(kind: str, angle: float, frame: PhysicalFrame) -> np.ndarray:
    """Ray matrix of ``exp(-i * angle * G)`` for a generator G in {N, Lx, Ly, Lz}.

    Built from the quadratic form of G: for ``G = v^T M v / 2`` the Heisenberg
    flow is ``v -> expm(angle * lambdabar * J M) v``.
    """
    w0, lb = frame.w0, frame.lambdabar
    a, b = 1.0 / w0**2, w0**2 / (4.0 * lb**2)
    # Hessians of each generator with respect to (x, y, px, py)
    forms = {
        "N": np.diag([a, a, b, b]),
        "Lx": np.diag([a, -a, b, -b]),
        "Ly": np.array([[0, a, 0, 0], [a, 0, 0, 0], [0, 0, 0, b], [0, 0, b, 0]]),
        "Lz": np.array([[0, 0, 0, 1], [0, 0, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]]) / (2.0 * lb),
    }
    return linalg.expm(angle * lb * J4 @ forms[kind])


class ElementKind(str, Enum):
    SPHERICAL = "spherical"
    CYLINDRICAL = "cylindrical"
    FREE = "free"
    PARITY = "parity"


@dataclass(frozen=True)
class OpticalElement:
    """One step of an optical train.

    Lenses carry a curvature radius (``math.inf`` marks a flat, powerless
    lens) and refractive index; focal length is ``radius / (index - 1)``.
    Cylindrical lenses focus along the direction ``(cos(angle), sin(angle))``.
    ``offset`` is a transverse displacement of the element; it is ignored by
    the ray matrices and only used by wave propagation.
    """

    kind: ElementKind
    radius: float = math.inf
    index: float = DESIGN_INDEX
    angle: float = 0.0
    distance: float = 0.0
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "kind", ElementKind(self.kind))
        if self.kind in (ElementKind.SPHERICAL, ElementKind.CYLINDRICAL):
            if self.radius == 0:
                raise ValueError("lens radius must be nonzero")
            if self.index == 1:
                raise ValueError("refractive index 1 gives no focal length")
        if self.kind is ElementKind.FREE and self.distance < 0:
            raise ValueError("free-space distance must be >= 0")

    @property
    def is_flat(self) -> bool:
        return math.isinf(self.radius)

    @property
    def power(self) -> float:
        """Inverse focal length (zero for a flat lens)."""
        if self.kind not in (ElementKind.SPHERICAL, ElementKind.CYLINDRICAL) or self.is_flat:
            return 0.0
        return (self.index - 1.0) / self.radius

    @property
    def focal_length(self) -> float:
        p = self.power
        return math.inf if p == 0 else 1.0 / p


def spherical_lens(focal_length: float, index: float = DESIGN_INDEX, offset=(0.0, 0.0)) -> OpticalElement:
    return OpticalElement(ElementKind.SPHERICAL, radius=(index - 1.0) * focal_length, index=index, offset=offset)


def cylindrical_lens(focal_length: float, angle: float, index: float = DESIGN_INDEX, offset=(0.0, 0.0)) -> OpticalElement:
    return OpticalElement(ElementKind.CYLINDRICAL, radius=(index - 1.0) * focal_length, index=index,
                          angle=angle, offset=offset)


def free_space(distance: float) -> OpticalElement:
    return OpticalElement(ElementKind.FREE, distance=distance)


PARITY = OpticalElement(ElementKind.PARITY)


@dataclass(frozen=True)
class OpticalTrain:
    elements: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def length(self) -> float:
        return sum(e.distance for e in self.elements if e.kind is ElementKind.FREE)

    def __add__(self, other: "OpticalTrain") -> "OpticalTrain":
        return OpticalTrain(self.elements + other.elements)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def with_offset(self, position: int, offset: tuple[float, float]) -> "OpticalTrain":
        els = list(self.elements)
        els[position] = replace(els[position], offset=tuple(offset))
        return OpticalTrain(els)

    def lens_positions(self) -> list[int]:
        return [i for i, e in enumerate(self.elements)
                if e.kind in (ElementKind.SPHERICAL, ElementKind.CYLINDRICAL)]


def element_matrix(e: OpticalElement) -> np.ndarray:
    m = np.eye(4)
    if e.kind is ElementKind.FREE:
        m[0, 2] = m[1, 3] = e.distance
    elif e.kind is ElementKind.SPHERICAL:
        m[2, 0] = m[3, 1] = -e.power
    elif e.kind is ElementKind.CYLINDRICAL:
        n = np.array([math.cos(e.angle), math.sin(e.angle)])
        m[2:, :2] = -e.power * np.outer(n, n)
    else:
        m = -m
    return m


def compose(train: OpticalTrain | Sequence[OpticalElement]) -> np.ndarray:
    """Ray matrix of a train, elements listed in propagation order."""
    els = list(train)
    if not els:
        raise ValueError("cannot compose an empty train")
    m = np.eye(4)
    for e in els:
        m = element_matrix(e) @ m
    return m


def _check_range(phi: float, name: str):
    lo, hi = OPERATING_RANGE
    if not (lo - 1e-12 <= phi <= hi + 1e-12):
        raise DesignRangeError(
            f"{name}={phi:.6g} is outside the lens operating range [pi, 3pi]; "
            "measure the rest of the period with the parity compensator and the "
            "2pi-shift symmetry of the intensity difference instead"
        )


def s_plus_focal_lengths(phi_plus: float, frame: PhysicalFrame) -> tuple[float, float]:
    """Focal lengths (f1 = f3, f2) of the three-lens S+ system; f1 may be inf."""
    _check_range(phi_plus, "phi_plus")
    z0 = frame.z0
    denom = 1.0 - 1.0 / math.tan(phi_plus / 4.0)
    f1 = math.inf if abs(denom) < 1e-13 else z0 / denom
    f2 = z0 / (2.0 - math.sin(phi_plus / 2.0))
    return f1, f2


def design_s_plus(phi_plus: float, frame: PhysicalFrame, index: float = DESIGN_INDEX) -> OpticalTrain:
    f1, f2 = s_plus_focal_lengths(phi_plus, frame)
    z0 = frame.z0
    outer = spherical_lens(f1, index)
    return OpticalTrain([outer, free_space(z0), spherical_lens(f2, index), free_space(z0), outer])


def scissor_constraint(omega: float, phi_minus: float) -> float:
    return 1.0 / math.tan(phi_minus / 4.0) + 2.0 * math.sin(omega / 2.0)


def solve_omega(phi_minus: float) -> float:
    """Root of ``cot(phi/4) = -2 sin(Omega/2)`` on ``[-pi/3, pi/3]`` by bisection."""
    _check_range(phi_minus, "phi_minus")
    lo, hi = -math.pi / 3.0, math.pi / 3.0
    flo, fhi = scissor_constraint(lo, phi_minus), scissor_constraint(hi, phi_minus)
    # endpoints may land on the root up to rounding
    if abs(flo) < 1e-14:
        return lo
    if abs(fhi) < 1e-14:
        return hi
    assert flo * fhi < 0, "scissor constraint has no root inside [-pi/3, pi/3]"
    return optimize.bisect(scissor_constraint, lo, hi, args=(phi_minus,), xtol=1e-14, rtol=4 * np.finfo(float).eps)


def scissor_angles(phi_minus: float) -> tuple[float, float, float]:
    """``(Omega, alpha1, alpha2)`` for the S- scissor pairs; alpha3 = alpha1."""
    omega = solve_omega(phi_minus)
    return omega, (math.pi - omega) / 4.0, (3.0 * math.pi - phi_minus) / 4.0


def scissor_pair(focal_length: float, alpha: float, index: float = DESIGN_INDEX, offset=(0.0, 0.0)):
    return [cylindrical_lens(focal_length, alpha, index, offset), cylindrical_lens(focal_length, -alpha, index, offset)]


def design_s_minus(phi_minus: float, frame: PhysicalFrame, index: float = DESIGN_INDEX) -> OpticalTrain:
    _, a1, a2 = scissor_angles(phi_minus)
    z0 = frame.z0
    els = (scissor_pair(z0 / 2.0, a1, index) + [free_space(z0 / 2.0)]
           + scissor_pair(z0 / 4.0, a2, index) + [free_space(z0 / 2.0)]
           + scissor_pair(z0 / 2.0, a1, index))
    return OpticalTrain(els)


class CompensatorTarget(str, Enum):
    IDENTITY = "identity"
    MINUS_IDENTITY = "minus_identity"


@dataclass(frozen=True)
class CompensatorDesign:
    train: OpticalTrain
    focal_length: float
    residual: float


def equally_spaced_train(focal_length: float, lens_count: int, arm_length: float, index: float = DESIGN_INDEX) -> OpticalTrain:
    """Identical lenses at the centres of ``lens_count`` equal cells of the arm."""
    cell = arm_length / lens_count
    els = [free_space(cell / 2.0)]
    for i in range(lens_count):
        els.append(spherical_lens(focal_length, index))
        els.append(free_space(cell if i < lens_count - 1 else cell / 2.0))
    return OpticalTrain(els)


def solve_compensator(target, lens_count: int, arm_length: float,
                      bracket: tuple[float, float] | None = None,
                      frame: PhysicalFrame | None = None, tol: float = 1e-9) -> CompensatorDesign:
    """Find the focal length making an equally spaced train equal ``target``.

    Roots of the x-to-slope entry B(f) of the train matrix are located on a
    log-spaced scan of the bracket and polished with Brent's method; the first
    root whose full matrix matches the target within ``tol`` is returned.
    """
    target = CompensatorTarget(target)
    goal = np.eye(4) if target is CompensatorTarget.IDENTITY else -np.eye(4)
    z0 = (frame or PhysicalFrame()).z0
    if bracket is None:
        bracket = (0.05 * z0, 20.0 * z0)
    if arm_length <= 0:
        raise ValueError("arm length must be positive")

    def mat(f):
        return compose(equally_spaced_train(f, lens_count, arm_length))

    def b_entry(logf):
        return mat(math.exp(logf))[0, 2]

    grid = np.linspace(math.log(bracket[0]), math.log(bracket[1]), 4001)
    vals = np.array([b_entry(g) for g in grid])
    best = None
    for i in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        root = optimize.brentq(b_entry, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        f = math.exp(root)
        res = float(np.max(np.abs(mat(f) - goal)))
        if best is None or res < best[1]:
            best = (f, res)
        if res < tol:
            return CompensatorDesign(equally_spaced_train(f, lens_count, arm_length), f, res)
    detail = "" if best is None else f"; closest root f={best[0]:.6g} leaves defect {best[1]:.3g}"
    raise CompensatorError(
        f"no {lens_count}-lens train of length {arm_length:.6g} realizes {target.value}{detail}", bracket)


def operation_curve_plus(phis, frame: PhysicalFrame) -> list[tuple[float, float, float]]:
    """Rows ``(phi, R1, R2)`` of the S+ operation curve with the design index."""
    rows = []
    for phi in phis:
        f1, f2 = s_plus_focal_lengths(phi, frame)
        rows.append((phi, (DESIGN_INDEX - 1) * f1, (DESIGN_INDEX - 1) * f2))
    return rows


def operation_curve_minus(phis) -> list[tuple[float, float, float, float]]:
    """Rows ``(phi, Omega, alpha1, alpha2)`` of the S- operation curve."""
    return [(phi, *scissor_angles(phi)) for phi in phis]
