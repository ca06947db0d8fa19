"""File formats: spectrum/weight/scan/train CSVs and the binary field container."""
from __future__ import annotations

import csv
import io as _io
import math
import struct
from pathlib import Path

import numpy as np

from .interferometer import CompensatorSetting, IntensityScan
from .modes import ComplexField, GridSpec, ModeSpectrum, PhysicalFrame, WeightSpectrum
from .rays import ElementKind, OpticalElement, OpticalTrain

MAGIC = b"MSPC"
VERSION = 1
# magic, version, samples_x, samples_y, half_window, w0, lambdabar, 16 bytes padding
_HEADER = struct.Struct("<4sIqqddd16x")
assert _HEADER.size == 64

SPECTRUM_HEADER = ["nx", "ny", "re", "im"]
WEIGHT_HEADER = ["nx", "ny", "weight"]
SCAN_HEADER = ["phi_plus", "phi_minus", "delta_i"]
TRAIN_HEADER = ["kind", "param1", "param2", "angle", "offset_x", "offset_y", "position"]
FIELD_CSV_HEADER = ["x", "y", "re", "im"]


class ParseError(ValueError):
    def __init__(self, message, path=None, line=None, column=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
                if column is not None:
                    where += f":{column}"
            where += ": "
        super().__init__(where + message)
        self.path, self.line, self.column = path, line, column


def fmt(x: float) -> str:
    """Shortest decimal string that round-trips."""
    return repr(float(x))


def _rows(path, expected_header):
    """Yield (line_number, row) after checking the header; '#' lines skipped."""
    text = Path(path).read_text(encoding="utf-8")
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        row = next(csv.reader([line]))
        if not header_seen:
            if [c.strip() for c in row] != expected_header:
                raise ParseError(f"expected header {','.join(expected_header)!r}, got {line!r}", path, lineno, 1)
            header_seen = True
            continue
        if len(row) != len(expected_header):
            raise ParseError(f"expected {len(expected_header)} columns, got {len(row)}", path, lineno)
        yield lineno, row
    if not header_seen:
        raise ParseError("missing header", path)


def _num(cell, conv, path, lineno, col):
    try:
        return conv(cell)
    except ValueError:
        raise ParseError(f"cannot parse {cell!r}", path, lineno, col) from None


def _csv_text(header, rows, comments=()) -> str:
    buf = _io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_spectrum(path, spectrum: ModeSpectrum) -> None:
    rows = [(k.nx, k.ny, fmt(c.real), fmt(c.imag)) for k, c in spectrum.entries.items()]
    Path(path).write_text(_csv_text(SPECTRUM_HEADER, rows), encoding="utf-8")


def read_spectrum(path, frame: PhysicalFrame | None = None) -> ModeSpectrum:
    entries = {}
    for ln, row in _rows(path, SPECTRUM_HEADER):
        nx = _num(row[0], int, path, ln, 1)
        ny = _num(row[1], int, path, ln, 2)
        entries[(nx, ny)] = complex(_num(row[2], float, path, ln, 3), _num(row[3], float, path, ln, 4))
    return ModeSpectrum(frame or PhysicalFrame(), entries)


def write_weights(path, weights: WeightSpectrum) -> None:
    rows = [(k.nx, k.ny, fmt(w)) for k, w in weights.entries.items()]
    Path(path).write_text(_csv_text(WEIGHT_HEADER, rows), encoding="utf-8")


def read_weights(path) -> WeightSpectrum:
    entries = {}
    for ln, row in _rows(path, WEIGHT_HEADER):
        entries[(_num(row[0], int, path, ln, 1), _num(row[1], int, path, ln, 2))] = _num(row[2], float, path, ln, 3)
    return WeightSpectrum(entries)


def read_any_weights(path) -> WeightSpectrum:
    """Weights from either a weight CSV or a complex spectrum CSV."""
    first = sniff_header(path)
    if first == SPECTRUM_HEADER:
        return read_spectrum(path).weights()
    return read_weights(path)


def sniff_header(path) -> list[str] | None:
    with open(path, "rb") as fh:
        head = fh.read(4096)
    if head.startswith(MAGIC):
        return None
    for line in head.decode("utf-8", errors="replace").splitlines():
        if line.strip() and not line.startswith("#"):
            return [c.strip() for c in line.split(",")]
    return []


def write_scan(path, scan: IntensityScan) -> None:
    comments = [f"compensator={scan.compensator.tag()}", f"engine={scan.engine}",
                f"K_plus={scan.k_plus}", f"K_minus={scan.k_minus}"]
    rows = [(fmt(a), fmt(b), fmt(scan.values[i, j]))
            for i, a in enumerate(scan.phi_plus) for j, b in enumerate(scan.phi_minus)]
    Path(path).write_text(_csv_text(SCAN_HEADER, rows, comments), encoding="utf-8")


def read_scan(path) -> IntensityScan:
    meta = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#") and "=" in line:
            k, v = line[1:].split("=", 1)
            meta[k.strip()] = v.strip()
    try:
        kp, km = int(meta["K_plus"]), int(meta["K_minus"])
    except (KeyError, ValueError):
        raise ParseError("scan file lacks valid '# K_plus=' / '# K_minus=' comment lines", path) from None
    data = [(_num(r[0], float, path, ln, 1), _num(r[1], float, path, ln, 2), _num(r[2], float, path, ln, 3))
            for ln, r in _rows(path, SCAN_HEADER)]
    if len(data) != kp * km:
        raise ParseError(f"expected {kp * km} rows for K_plus={kp}, K_minus={km}, got {len(data)}", path)
    arr = np.array(data).reshape(kp, km, 3)
    comp = CompensatorSetting.from_tag(meta.get("compensator", "identity"))
    return IntensityScan(arr[:, 0, 0], arr[0, :, 1], arr[:, :, 2], comp, meta.get("engine", "unknown"))


def train_rows(train: OpticalTrain, frame: PhysicalFrame) -> list[tuple]:
    rows, z = [], 0.0
    for e in train:
        if e.kind is ElementKind.FREE:
            p1, p2 = fmt(e.distance), ""
        elif e.kind is ElementKind.PARITY:
            p1, p2 = "", ""
        else:
            p1, p2 = ("inf" if e.is_flat else fmt(e.radius)), fmt(e.index)
        rows.append((e.kind.value, p1, p2, fmt(e.angle), fmt(e.offset[0]), fmt(e.offset[1]), fmt(z / frame.z0)))
        if e.kind is ElementKind.FREE:
            z += e.distance
    return rows


def write_train(path, train: OpticalTrain, frame: PhysicalFrame) -> None:
    Path(path).write_text(_csv_text(TRAIN_HEADER, train_rows(train, frame)), encoding="utf-8")


def read_train(path) -> OpticalTrain:
    els = []
    for ln, row in _rows(path, TRAIN_HEADER):
        try:
            kind = ElementKind(row[0].strip())
        except ValueError:
            raise ParseError(f"unknown element kind {row[0]!r}", path, ln, 1) from None
        angle = _num(row[3], float, path, ln, 4)
        off = (_num(row[4], float, path, ln, 5), _num(row[5], float, path, ln, 6))
        if kind is ElementKind.FREE:
            els.append(OpticalElement(kind, distance=_num(row[1], float, path, ln, 2)))
        elif kind is ElementKind.PARITY:
            els.append(OpticalElement(kind))
        else:
            els.append(OpticalElement(kind, radius=_num(row[1], float, path, ln, 2),
                                      index=_num(row[2], float, path, ln, 3), angle=angle, offset=off))
    return OpticalTrain(els)


def save_field(path, f: ComplexField) -> None:
    g = f.grid
    header = _HEADER.pack(MAGIC, VERSION, g.samples_x, g.samples_y, g.half_window, f.frame.w0, f.frame.lambdabar)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.amplitude, dtype="<c16").tobytes())


def load_field(path) -> ComplexField:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size or not head.startswith(MAGIC):
            raise ParseError("not a field container (expected magic 'MSPC'); accepted formats are the "
                             "MSPC binary field, a field CSV 'x,y,re,im', a spectrum CSV 'nx,ny,re,im' "
                             "or a key=value beam recipe", path)
        magic, version, nx, ny, hw, w0, lb = _HEADER.unpack(head)
        if version != VERSION:
            raise ParseError(f"unsupported field container version {version}", path)
        data = fh.read()
    if len(data) != nx * ny * 16:
        raise ParseError(f"payload has {len(data)} bytes, expected {nx * ny * 16}", path)
    amp = np.frombuffer(data, dtype="<c16").reshape(nx, ny)
    return ComplexField(GridSpec(nx, ny, hw), PhysicalFrame(w0, lb), amp)


def load_field_csv(path, frame: PhysicalFrame) -> ComplexField:
    """Small fields given as ``x,y,re,im`` rows on a symmetric uniform grid."""
    rows = [tuple(_num(c, float, path, ln, i + 1) for i, c in enumerate(r)) for ln, r in _rows(path, FIELD_CSV_HEADER)]
    if not rows:
        raise ParseError("field CSV has no samples", path)
    arr = np.array(rows)
    xs, ys = np.unique(arr[:, 0]), np.unique(arr[:, 1])
    if len(xs) * len(ys) != len(rows):
        raise ParseError("samples do not form a complete rectangular grid", path)
    amp = np.zeros((len(xs), len(ys)), dtype=complex)
    ix = np.searchsorted(xs, arr[:, 0])
    iy = np.searchsorted(ys, arr[:, 1])
    amp[ix, iy] = arr[:, 2] + 1j * arr[:, 3]
    dx = (xs[-1] - xs[0]) / (len(xs) - 1) if len(xs) > 1 else None
    dy = (ys[-1] - ys[0]) / (len(ys) - 1) if len(ys) > 1 else None
    if dx is None or dy is None:
        raise ParseError("field CSV needs at least two samples per axis", path)
    hwx = len(xs) * dx / (2 * frame.w0)
    hwy = len(ys) * dy / (2 * frame.w0)
    if not math.isclose(hwx, hwy, rel_tol=1e-9):
        raise ParseError("x and y windows differ; only equal half-windows are supported", path)
    grid = GridSpec(len(xs), len(ys), hwx)
    gx, gy = grid.axes(frame)
    if not (np.allclose(gx, xs, atol=1e-9 * frame.w0) and np.allclose(gy, ys, atol=1e-9 * frame.w0)):
        raise ParseError("samples are not on a uniform grid centred on the axis", path)
    return ComplexField(grid, frame, amp)
