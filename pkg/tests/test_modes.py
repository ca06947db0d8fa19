import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modespec.modes import (ComplexField, FrameMismatchError, GridResolutionError, GridSpec, ModeIndex,
                            ModeSpectrum, PhysicalFrame, WeightSpectrum, decompose, eval_hg, eval_lg,
                            hermite_functions, inner, mode_indices, synthesize)

from conftest import random_spectrum


def test_mode_indices_order():
    idx = mode_indices(2)
    assert idx == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
    assert len(mode_indices(10)) == 66
    assert all(isinstance(k, ModeIndex) for k in idx)


def test_frame_rejects_nonpositive():
    with pytest.raises(ValueError):
        PhysicalFrame(0.0, 1.0)
    assert PhysicalFrame(2.0, 0.5).z0 == pytest.approx(4.0)


def test_grid_is_symmetric(frame, grid):
    x, y = grid.axes(frame)
    np.testing.assert_array_equal(x, -x[::-1])
    np.testing.assert_array_equal(y, -y[::-1])


def test_hermite_functions_match_scipy(frame):
    from scipy.special import eval_hermite
    x = np.linspace(-4, 4, 41)
    table = hermite_functions(8, x, frame.w0)
    u = math.sqrt(2) * x
    for n in range(9):
        ref = (2 / math.pi) ** 0.25 / math.sqrt(2.0**n * math.factorial(n)) * eval_hermite(n, u) * np.exp(-x**2)
        np.testing.assert_allclose(table[n], ref, atol=1e-13)


def test_hermite_functions_high_order_finite(frame):
    x = np.linspace(-30, 30, 3001)
    t = hermite_functions(300, x, frame.w0)
    assert np.all(np.isfinite(t))
    dx = x[1] - x[0]
    assert np.sum(t[300] ** 2) * dx == pytest.approx(1.0, abs=1e-6)


def test_orthonormality_to_order_8(frame, grid):
    x, y = grid.axes(frame)
    dx, _ = grid.spacing(frame)
    u = hermite_functions(8, x, frame.w0)
    gram1 = u @ u.T * dx
    idx = mode_indices(8)
    gram = np.array([[gram1[a.nx, b.nx] * gram1[a.ny, b.ny] for b in idx] for a in idx])
    assert np.max(np.abs(gram - np.eye(len(idx)))) < 1e-6


def test_decompose_pure_mode(frame, grid):
    s = decompose(eval_hg((1, 0), frame, grid), 4)
    assert abs(s[(1, 0)] - 1) < 1e-8
    others = [abs(c) for k, c in s.entries.items() if k != (1, 0)]
    assert max(others) < 1e-8


def test_decompose_zero_field(frame, grid):
    f = ComplexField(grid, frame, np.zeros((grid.samples_x, grid.samples_y)))
    s = decompose(f, 3)
    assert all(c == 0 for c in s.entries.values())
    assert s.residual == 0


def test_decompose_astigmatic_even_only(frame, grid):
    X, Y = grid.mesh(frame)
    f = ComplexField(grid, frame, np.exp(-(X / 1.3) ** 2 - (Y / 0.8) ** 2)).normalized()
    s = decompose(f, 20)
    odd = [abs(c) for k, c in s.entries.items() if k.nx % 2 or k.ny % 2]
    assert max(odd) < 1e-12
    assert s.total_power() == pytest.approx(1.0, abs=1e-6)


def test_decompose_frame_mismatch(frame, grid):
    with pytest.raises(FrameMismatchError):
        decompose(eval_hg((0, 0), frame, grid), 2, PhysicalFrame(2.0, 0.5))


def test_resolution_rules(frame):
    with pytest.raises(GridResolutionError, match="window"):
        GridSpec(512, 512, 4.0).check_resolution(10, frame)
    with pytest.raises(GridResolutionError, match="sampling"):
        GridSpec(32, 32, 8.0).check_resolution(10, frame)
    GridSpec().check_resolution(20, frame)


def test_synthesize_ground_is_gaussian(frame, grid):
    f = synthesize(ModeSpectrum(frame, {(0, 0): 1.0}), grid)
    X, Y = grid.mesh(frame)
    ref = math.sqrt(2 / math.pi) * np.exp(-(X**2 + Y**2))
    np.testing.assert_allclose(f.amplitude, ref, atol=1e-14)


def test_diagonal_superposition_is_rotated_hg10(frame, grid):
    from modespec.propagation import apply_rotation
    f = synthesize(ModeSpectrum(frame, {(1, 0): 1 / math.sqrt(2), (0, 1): 1 / math.sqrt(2)}), grid)
    rotated = apply_rotation(eval_hg((1, 0), frame, grid), math.pi / 4)
    assert np.max(np.abs(f.amplitude - rotated.amplitude)) < 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_round_trip_order_10(frame, grid, seed):
    s = random_spectrum(frame, 10, seed)
    back = decompose(synthesize(s, grid), 10)
    assert np.max(np.abs(back.vector(10) - s.vector(10))) < 1e-8


def test_lg_is_normalized_and_decomposes_within_order(frame, grid):
    f = eval_lg(1, 2, frame, grid)
    assert f.norm() == pytest.approx(1.0, abs=1e-10)
    s = decompose(f, 4)
    assert s.total_power() == pytest.approx(1.0, abs=1e-10)
    assert all(abs(c) < 1e-10 for k, c in s.entries.items() if k.order != 4)


def test_field_is_immutable(frame, grid):
    f = eval_hg((0, 0), frame, grid)
    with pytest.raises(ValueError):
        f.amplitude[0, 0] = 1.0


def test_inner_conjugates_first(frame, grid):
    f = eval_hg((0, 0), frame, grid)
    g = f.replace(1j * f.amplitude)
    assert inner(f, g) == pytest.approx(1j, abs=1e-12)


def test_weight_clamping():
    w = WeightSpectrum({(0, 0): 1.0, (1, 0): -5e-7})
    assert w[(1, 0)] == 0.0
    assert w.clamped_mass == pytest.approx(5e-7)
    with pytest.raises(ValueError):
        WeightSpectrum({(0, 0): -1e-3})


@settings(max_examples=25, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=6, max_size=6))
def test_normalized_spectrum_has_unit_power(coeffs):
    if sum(abs(c) ** 2 for c in coeffs) < 1e-6:
        return
    s = ModeSpectrum.from_vector(PhysicalFrame(), coeffs, 2).normalized()
    assert s.total_power() == pytest.approx(1.0, abs=1e-12)
    assert s.weights().total() == pytest.approx(1.0, abs=1e-12)
