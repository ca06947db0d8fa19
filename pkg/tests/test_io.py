import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modespec import io, rays
from modespec.interferometer import Custom, IdentityC, MinusIdentityC, ScanConfig, scan_analytic
from modespec.modes import GridSpec, ModeSpectrum, PhysicalFrame, WeightSpectrum, eval_hg

from conftest import random_spectrum


def test_spectrum_round_trip_bit_exact(tmp_path, frame):
    spec = random_spectrum(frame, 5, 1)
    p = tmp_path / "s.csv"
    io.write_spectrum(p, spec)
    back = io.read_spectrum(p)
    assert back.entries == spec.entries
    io.write_spectrum(tmp_path / "t.csv", back)
    assert (tmp_path / "t.csv").read_bytes() == p.read_bytes()
    lines = p.read_text().splitlines()
    assert lines[0] == "nx,ny,re,im" and lines[1].startswith("0,0,") and lines[2].startswith("0,1,")


@settings(max_examples=50, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(io.fmt(x)) == x


def test_weights_round_trip(tmp_path):
    w = WeightSpectrum({(1, 0): 0.25, (0, 0): 0.75})
    p = tmp_path / "w.csv"
    io.write_weights(p, w)
    assert p.read_text() == "nx,ny,weight\n0,0,0.75\n1,0,0.25\n"
    assert io.read_weights(p).entries == w.entries
    io.write_spectrum(tmp_path / "s.csv", ModeSpectrum(PhysicalFrame(), {(0, 0): 0.6, (1, 0): 0.8j}))
    assert io.read_any_weights(tmp_path / "s.csv")[(1, 0)] == pytest.approx(0.64)


@pytest.mark.parametrize("comp", [IdentityC, MinusIdentityC, Custom(0.5, 1.25)])
def test_scan_round_trip(tmp_path, frame, comp):
    s = scan_analytic(random_spectrum(frame, 3, 2), ScanConfig(3, 4, compensator=comp))
    p = tmp_path / "scan.csv"
    io.write_scan(p, s)
    text = p.read_text().splitlines()
    assert text[0] == f"# compensator={comp.tag()}" and text[4] == "phi_plus,phi_minus,delta_i"
    back = io.read_scan(p)
    assert np.array_equal(back.values, s.values)
    assert np.array_equal(back.phi_plus, s.phi_plus) and np.array_equal(back.phi_minus, s.phi_minus)
    assert back.compensator == comp and back.engine == "analytic"


def test_scan_errors(tmp_path):
    p = tmp_path / "scan.csv"
    p.write_text("phi_plus,phi_minus,delta_i\n1,2,3\n")
    with pytest.raises(io.ParseError, match="K_plus"):
        io.read_scan(p)
    p.write_text("# K_plus=1\n# K_minus=2\nphi_plus,phi_minus,delta_i\n1,2,3\n")
    with pytest.raises(io.ParseError, match="expected 2 rows"):
        io.read_scan(p)
    p.write_text("# K_plus=1\n# K_minus=1\nphi_plus,phi_minus,delta_i\n1,x,3\n")
    with pytest.raises(io.ParseError) as e:
        io.read_scan(p)
    assert (e.value.line, e.value.column) == (4, 2)


def test_header_and_column_errors(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("nx,ny,amp\n")
    with pytest.raises(io.ParseError, match="header"):
        io.read_spectrum(p)
    p.write_text("nx,ny,re,im\n0,0,1\n")
    with pytest.raises(io.ParseError, match="columns") as e:
        io.read_spectrum(p)
    assert e.value.line == 2
    p.write_text("")
    with pytest.raises(io.ParseError, match="missing header"):
        io.read_spectrum(p)


def test_train_round_trip(tmp_path, frame):
    t = rays.design_s_plus(math.pi, frame).with_offset(2, (0.01, -0.02)) + rays.OpticalTrain([rays.PARITY])
    p = tmp_path / "t.csv"
    io.write_train(p, t, frame)
    rows = p.read_text().splitlines()
    assert rows[0] == "kind,param1,param2,angle,offset_x,offset_y,position"
    assert rows[1].startswith("spherical,inf,")
    back = io.read_train(p)
    assert back == t
    assert np.array_equal(rays.compose(back), rays.compose(t))


def test_train_positions_in_z0(tmp_path):
    frame = PhysicalFrame(w0=2.0, lambdabar=0.5)
    rows = io.train_rows(rays.design_s_plus(2 * math.pi, frame), frame)
    assert [float(r[-1]) for r in rows if r[0] == "spherical"] == [0.0, 1.0, 2.0]


def test_unknown_element(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("kind,param1,param2,angle,offset_x,offset_y,position\nprism,1,1,0,0,0,0\n")
    with pytest.raises(io.ParseError, match="prism"):
        io.read_train(p)


def test_binary_layout(tmp_path, frame):
    g = GridSpec(4, 6, 8.0)
    amp = (np.arange(24) + 1j * np.arange(24)[::-1]).reshape(4, 6)
    from modespec.modes import ComplexField
    f = ComplexField(g, frame, amp)
    p = tmp_path / "f.mspc"
    io.save_field(p, f)
    raw = p.read_bytes()
    assert len(raw) == 64 + 24 * 16
    assert raw[:4] == b"MSPC"
    magic, version, nx, ny, hw, w0, lb = struct.unpack("<4sIqqddd", raw[:48])
    assert (version, nx, ny, hw, w0, lb) == (1, 4, 6, 8.0, 1.0, 0.5)
    assert struct.unpack("<dd", raw[64:80]) == (0.0, 23.0)
    assert np.array_equal(io.load_field(p).amplitude, amp)


def test_binary_truncated(tmp_path, frame, small_grid):
    p = tmp_path / "f.mspc"
    io.save_field(p, eval_hg((0, 0), frame, small_grid))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(io.ParseError, match="payload"):
        io.load_field(p)


def test_field_csv_rejects_incomplete_grid(tmp_path, frame):
    p = tmp_path / "f.csv"
    p.write_text("x,y,re,im\n0,0,1,0\n1,0,1,0\n0,1,1,0\n")
    with pytest.raises(io.ParseError, match="rectangular"):
        io.load_field_csv(p, frame)
