"""File formats.

CSV files are comma separated with ``.`` decimals and LF line endings.
Metadata precede the header row as ``# key=<json value>`` lines. Floats are
written with ``repr`` so that write -> read -> write is byte-identical.

Photon streams use a little-endian binary layout: an unsigned 64-bit count
followed by that many float64 arrival times in seconds.
"""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import DomainError
from .fitting import FitResult
from .overlap import LineRecord
from .photons import CorrelationHistogram, PhotonStream
from .spectra import Spectrum

AXIS_COLUMNS = {
    "PL": "frequency_offset_hz",
    "PLE": "frequency_offset_hz",
    "saturation": "power",
    "decay": "time_s",
}
LINE_RECORD_COLUMNS = ("id", "class", "position_hz", "fwhm_hz", "ci95_hz")


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj):
    """Canonical JSON used for every JSON output and digest."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default, allow_nan=True) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def write_table(path, columns, metadata=None):
    """Write named columns (equal length) under ``#`` metadata lines."""
    names = list(columns)
    cols = [list(columns[n]) for n in names]
    if len({len(c) for c in cols}) > 1:
        raise DomainError("columns must have equal length")
    lines = [f"# {k}={json.dumps(v, default=_json_default)}" for k, v in (metadata or {}).items()]
    lines.append(",".join(names))
    lines.extend(",".join(fmt(v) for v in row) for row in zip(*cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_table(path):
    """Return ``(metadata, {name: list of str})``."""
    meta, names, rows = {}, None, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = json.loads(value)
        elif names is None:
            names = line.split(",")
        elif line:
            rows.append(line.split(","))
    if names is None:
        raise DomainError(f"{path}: missing header row")
    cols = {n: [r[i] for r in rows] for i, n in enumerate(names)}
    return meta, cols


def write_spectrum(path, spectrum: Spectrum):
    meta = {"kind": spectrum.kind, **spectrum.metadata}
    write_table(path, {AXIS_COLUMNS[spectrum.kind]: spectrum.axis.tolist(),
                       "intensity": spectrum.values.tolist()}, meta)


def read_spectrum(path) -> Spectrum:
    meta, cols = read_table(path)
    kind = meta.pop("kind", None)
    if kind not in AXIS_COLUMNS:
        raise DomainError(f"{path}: unknown or missing spectrum kind")
    axis = np.array([float(v) for v in cols[AXIS_COLUMNS[kind]]])
    values = np.array([float(v) for v in cols["intensity"]])
    return Spectrum(kind, axis, values, meta)


def spectrum_to_dict(spectrum: Spectrum):
    return {"kind": spectrum.kind, "metadata": spectrum.metadata,
            "axis": spectrum.axis.tolist(), "values": spectrum.values.tolist()}


def write_line_records(path, records, metadata=None):
    records = list(records)
    write_table(path, {
        "id": [r.emitter_id for r in records],
        "class": [r.orientation_class for r in records],
        "position_hz": [float(r.position) for r in records],
        "fwhm_hz": [float(r.fwhm) for r in records],
        "ci95_hz": [float(r.position_ci95) for r in records],
    }, metadata)


def read_line_records(path):
    _, cols = read_table(path)
    missing = [c for c in LINE_RECORD_COLUMNS if c not in cols]
    if missing:
        raise DomainError(f"{path}: missing columns {missing}")
    return [LineRecord(i, c, float(p), float(w), float(e)) for i, c, p, w, e in
            zip(*(cols[n] for n in LINE_RECORD_COLUMNS))]


def write_photon_stream(path, stream: PhotonStream):
    t = np.ascontiguousarray(stream.arrival_times, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", t.size))
        fh.write(t.tobytes())


def read_photon_stream(path, duration=None) -> PhotonStream:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise DomainError(f"{path}: truncated photon stream")
    (n,) = struct.unpack_from("<Q", data)
    if len(data) != 8 + 8 * n:
        raise DomainError(f"{path}: expected {n} arrival times")
    t = np.frombuffer(data, dtype="<f8", offset=8).astype(float)
    if duration is None:
        duration = math.nextafter(float(t[-1]), math.inf) if n else 1.0
    return PhotonStream(t, float(duration))


def write_correlation(path, h: CorrelationHistogram, metadata=None):
    meta = {"bin_width": h.bin_width, "normalization": h.normalization,
            "one_sided": h.one_sided, "n_photons": h.n_photons, "duration": h.duration,
            **h.meta, **(metadata or {})}
    cols = {"lag_s": h.lags.tolist(), "g2": h.g2.tolist()}
    if h.counts is not None:
        cols["counts"] = [int(c) for c in h.counts]
    write_table(path, cols, meta)


def read_correlation(path) -> CorrelationHistogram:
    meta, cols = read_table(path)
    counts = np.array([int(c) for c in cols["counts"]]) if "counts" in cols else None
    extra = {k: v for k, v in meta.items()
             if k not in ("bin_width", "normalization", "one_sided", "n_photons", "duration")}
    return CorrelationHistogram(np.array([float(v) for v in cols["lag_s"]]),
                                np.array([float(v) for v in cols["g2"]]),
                                meta["bin_width"], meta["normalization"], counts,
                                meta["one_sided"], meta["n_photons"], meta["duration"], extra)


def write_fit_result(path, result: FitResult, extra=None):
    write_json(path, {**result.to_dict(), **(extra or {})})


def read_fit_result(path) -> FitResult:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    nan = float("nan")
    params = {k: nan if v is None else v for k, v in d["params"].items()}
    ci = {k: nan if v is None else v for k, v in d["ci95"].items()}
    cov = np.array([[nan if v is None else v for v in row] for row in d["covariance"]], dtype=float)
    return FitResult(params, ci, cov,
                     d["residual_rms"], d["converged"], d["iterations"], d["names"],
                     message=d.get("message", ""))
