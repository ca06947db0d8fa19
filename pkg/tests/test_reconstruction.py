import csv
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modespec.interferometer import (Custom, IdentityC, IntensityScan, MinusIdentityC, ScanConfig,
                                     analytic_values, scan_analytic, scan_angles)
from modespec.modes import ModeSpectrum, PhysicalFrame, mode_indices
from modespec.reconstruction import (ReconstructionError, brute_force_bound, reconstruct_full, reconstruct_hg,
                                     sampling_bound, scan_residual, transfer_matrix)

from conftest import random_spectrum

FULL = (0.0, 4 * math.pi)


def hg_scans(spec, k=10):
    a = scan_analytic(spec, ScanConfig(k, k, compensator=IdentityC))
    b = scan_analytic(spec, ScanConfig(k, k, compensator=MinusIdentityC))
    return a, b


def full_scan(spec, k, comp=IdentityC):
    return scan_analytic(spec, ScanConfig(k, k, FULL, FULL, compensator=comp))


def err(report, spec, order):
    w = spec.weights()
    return max(abs(report.weights[k] - w[k]) for k in mode_indices(order))


def test_pure_ground_mode(frame):
    rep = reconstruct_hg(*hg_scans(ModeSpectrum(frame, {(0, 0): 1.0})), 9)
    assert rep.weights[(0, 0)] == pytest.approx(1.0, abs=1e-12)
    assert max(v for k, v in rep.weights.entries.items() if k != (0, 0)) < 1e-12
    rep = reconstruct_full(full_scan(ModeSpectrum(frame, {(0, 0): 1.0}), 4), 3)
    assert rep.weights[(0, 0)] == pytest.approx(1.0, abs=1e-12)


def test_full_pure_mode_k16(frame):
    rep = reconstruct_full(full_scan(ModeSpectrum(frame, {(1, 0): 1.0}), 16), 7)
    assert rep.weights[(1, 0)] == pytest.approx(1.0, abs=1e-12)


def test_full_random_k32(frame):
    spec = random_spectrum(frame, 6, 3, n_modes=6)
    assert err(reconstruct_full(full_scan(spec, 32), 6), spec, 6) < 1e-10


def test_full_absorbs_compensator_shift(frame):
    spec = random_spectrum(frame, 4, 4)
    rep = reconstruct_full(full_scan(spec, 16, Custom(0.4, -1.3)), 4)
    assert err(rep, spec, 4) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12))
def test_hg_round_trip_within_bound(seed, k):
    frame = PhysicalFrame()
    n = sampling_bound(k)
    spec = random_spectrum(frame, n, seed)
    rep = reconstruct_hg(*hg_scans(spec, k), n)
    assert err(rep, spec, n) < 1e-10
    assert rep.sampling_ok
    assert rep.weights.total() == pytest.approx(1.0, abs=1e-6)
    assert rep.residual < 1e-10


def test_no_mirror_mixing(frame):
    # (nx, ny) and (ny, nx) share the total order; they must not leak into each other
    for nx, ny in ((3, 1), (5, 2), (0, 9)):
        spec = ModeSpectrum(frame, {(nx, ny): 1.0})
        rep = reconstruct_hg(*hg_scans(spec, 10), 9)
        assert rep.weights[(nx, ny)] == pytest.approx(1.0, abs=1e-12)
        assert rep.weights[(ny, nx)] == pytest.approx(0.0, abs=1e-12)


def test_truncation_without_crosstalk(frame):
    spec = random_spectrum(frame, 9, 5)
    rep = reconstruct_hg(*hg_scans(spec, 10), 5)
    assert err(rep, spec, 5) < 1e-8


def test_aliasing_flags_sampling(frame):
    spec = random_spectrum(frame, 14, 6)
    rep = reconstruct_hg(*hg_scans(spec, 10), 14)
    assert not rep.sampling_ok
    assert err(rep, spec, 14) > 1e-3


def test_full_and_hg_agree(frame):
    spec = random_spectrum(frame, 8, 7)
    full = reconstruct_full(full_scan(spec, 32), 8)
    hg = reconstruct_hg(*hg_scans(spec, 10), 8)
    assert max(abs(full.weights[k] - hg.weights[k]) for k in mode_indices(8)) < 1e-8


def test_sine_diagnostic_vanishes(frame):
    rep = reconstruct_hg(*hg_scans(random_spectrum(frame, 7, 8), 10), 7)
    assert rep.asymmetry < 1e-10


def test_input_validation(frame):
    a, b = hg_scans(ModeSpectrum(frame, {(0, 0): 1.0}))
    with pytest.raises(ReconstructionError):
        reconstruct_hg(b, a, 3)
    c = scan_analytic(ModeSpectrum(frame, {(0, 0): 1.0}), ScanConfig(8, 8, compensator=MinusIdentityC))
    with pytest.raises(ReconstructionError, match="grids"):
        reconstruct_hg(a, c, 3)
    bad = IntensityScan(a.phi_plus[::-1], a.phi_minus, a.values)
    with pytest.raises(ReconstructionError, match="increments"):
        reconstruct_full(bad, 2)


def test_mixed_engines_flagged(frame, caplog):
    a, b = hg_scans(ModeSpectrum(frame, {(0, 0): 1.0}))
    b = IntensityScan(b.phi_plus, b.phi_minus, b.values, b.compensator, "kernel")
    rep = reconstruct_hg(a, b, 2)
    assert rep.engines == ("analytic", "kernel")
    assert "mixed engines" in caplog.text


def test_negative_weights_clamped(frame):
    a, b = hg_scans(ModeSpectrum(frame, {(0, 0): 1.0}))
    noisy = IntensityScan(a.phi_plus, a.phi_minus, a.values + 0.01 * np.cos(a.phi_plus)[:, None], IdentityC)
    rep = reconstruct_hg(noisy, b, 3)
    assert rep.clamped_mass >= 0
    assert all(v >= 0 for v in rep.weights.entries.values())
    assert rep.residual > 0


def test_report_json_keys(frame):
    import json
    rep = reconstruct_hg(*hg_scans(ModeSpectrum(frame, {(1, 0): 1.0})), 4)
    d = json.loads(rep.to_json())
    assert set(d) == {"residual", "clamped_mass", "sampling_ok", "K_plus", "K_minus", "max_order"}


def test_scan_residual_zero_for_exact(frame):
    spec = random_spectrum(frame, 4, 9)
    a, b = hg_scans(spec)
    assert scan_residual(spec.weights(), [a, b]) < 1e-14


def test_sampling_bound_small_k():
    assert sampling_bound(1) == 0
    assert sampling_bound(10) == 9
    with pytest.raises(ValueError):
        sampling_bound(0)


def test_golden_table_matches_brute_force():
    text = resources.files("modespec").joinpath("data/sampling_bound.csv").read_text()
    table = {int(r["K"]): int(r["max_exact_order"]) for r in csv.DictReader(text.splitlines())}
    for k in range(2, 17):
        assert table[k] == brute_force_bound(k)


def test_bound_is_tight():
    for k in (4, 10):
        n = sampling_bound(k)
        t = transfer_matrix(k, n + 1, n + 1)
        m = len(mode_indices(n))
        assert np.max(np.abs(t[:m, :m] - np.eye(m))) < 1e-9
        assert np.max(np.abs(t - np.eye(len(t)))) > 1e-3


def test_full_range_bound():
    assert [brute_force_bound(k, full=True) for k in (4, 8, 16, 32)] == [1, 3, 7, 15]
