import json
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sivsim import fitting as F
from sivsim import io
from sivsim import photons as P
from sivsim import spectra as S
from sivsim.errors import DomainError
from sivsim.overlap import LineRecord
from sivsim.structure import default_model

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


def rewrite(tmp_path, write, read, obj):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write(a, obj)
    write(b, read(a))
    return a.read_bytes(), b.read_bytes()


def test_spectrum_round_trip_byte_identical(tmp_path):
    x = np.linspace(-250e9, 250e9, 501)
    spec = S.pl_spectrum(default_model(), 4.0, 10e9, x)
    a, b = rewrite(tmp_path, io.write_spectrum, io.read_spectrum, spec)
    assert a == b
    assert b"\r" not in a
    back = io.read_spectrum(tmp_path / "a.csv")
    assert back.kind == "PL" and back.metadata["resolution"] == 10e9
    assert np.array_equal(back.values, spec.values) and np.array_equal(back.axis, spec.axis)
    header = a.decode().splitlines()
    assert header[0].startswith("# ")
    assert "frequency_offset_hz,intensity" in header


@given(st.lists(finite.filter(lambda v: v >= 0), min_size=1, max_size=40))
def test_values_survive_repr(tmp_path_factory, vals):
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    spec = S.Spectrum("saturation", np.arange(len(vals), dtype=float), np.array(vals))
    io.write_spectrum(path, spec)
    again = path.read_bytes()
    io.write_spectrum(path, io.read_spectrum(path))
    assert path.read_bytes() == again
    assert np.array_equal(io.read_spectrum(path).values, np.array(vals))


def test_line_records_round_trip(tmp_path):
    recs = [LineRecord("siv01", "set1", 1.25e9, 127e6, 3e6),
            LineRecord("siv02", "set2", 6.0100000001e9, 130e6, 0.0)]
    a, b = rewrite(tmp_path, io.write_line_records, io.read_line_records, recs)
    assert a == b
    assert io.read_line_records(tmp_path / "a.csv") == recs
    assert a.decode().splitlines()[0] == "id,class,position_hz,fwhm_hz,ci95_hz"
    (tmp_path / "bad.csv").write_text("id,class\nx,set1\n")
    with pytest.raises(DomainError):
        io.read_line_records(tmp_path / "bad.csv")


def test_photon_binary_layout(tmp_path):
    stream = P.PhotonStream(np.array([1e-9, 2.5e-9, 7e-6]), 1e-5)
    path = tmp_path / "s.bin"
    io.write_photon_stream(path, stream)
    raw = path.read_bytes()
    assert len(raw) == 8 + 3 * 8
    assert struct.unpack("<Q", raw[:8]) == (3,)
    assert struct.unpack("<3d", raw[8:]) == (1e-9, 2.5e-9, 7e-6)
    back = io.read_photon_stream(path, 1e-5)
    assert np.array_equal(back.arrival_times, stream.arrival_times)
    path.write_bytes(raw[:-4])
    with pytest.raises(DomainError):
        io.read_photon_stream(path)


def test_empty_stream_round_trip(tmp_path):
    path = tmp_path / "e.bin"
    io.write_photon_stream(path, P.PhotonStream(np.empty(0), 1.0))
    assert path.read_bytes() == b"\0" * 8
    assert len(io.read_photon_stream(path, 1.0)) == 0


def test_correlation_round_trip(tmp_path):
    s = P.simulate_stream(P.two_level_matrix(1e8, 1e8), 1e-4, seed=2)
    h = P.g2_estimate(s, 1e-9, 20e-9)
    a, b = rewrite(tmp_path, io.write_correlation, io.read_correlation, h)
    assert a == b
    back = io.read_correlation(tmp_path / "a.csv")
    assert np.array_equal(back.counts, h.counts) and back.bin_width == h.bin_width
    assert back.meta["estimator"] == "full"


def test_fit_result_json(tmp_path):
    x = np.linspace(-1, 1, 101)
    r = F.fit_multi_lorentzian(S.Spectrum("PLE", x, F.multi_lorentzian_model(x, [0, 0.1, 0.3, 1])), 1)
    io.write_fit_result(tmp_path / "f.json", r, {"source": "synthetic"})
    d = json.loads((tmp_path / "f.json").read_text())
    assert d["source"] == "synthetic" and d["converged"] is True
    back = io.read_fit_result(tmp_path / "f.json")
    assert back.params == r.params and back.names == r.names
    bad = F.fit_multi_lorentzian(S.Spectrum("PL", x, np.ones(101)), 1)
    io.write_fit_result(tmp_path / "g.json", bad)
    text = (tmp_path / "g.json").read_text()
    assert "NaN" not in text
    assert np.isnan(io.read_fit_result(tmp_path / "g.json").ci95["position0"])


def test_dumps_is_canonical():
    assert io.dumps({"b": 1, "a": np.float64(0.5), "c": np.arange(2)}) == (
        '{\n  "a": 0.5,\n  "b": 1,\n  "c": [\n    0,\n    1\n  ]\n}\n')
    assert io.fmt(0.1) == "0.1" and io.fmt(True) == "1" and io.fmt(np.int64(3)) == "3"


def test_table_errors(tmp_path):
    with pytest.raises(DomainError):
        io.write_table(tmp_path / "t.csv", {"a": [1], "b": [1, 2]})
    (tmp_path / "h.csv").write_text("# kind=\"PL\"\n")
    with pytest.raises(DomainError):
        io.read_table(tmp_path / "h.csv")
    (tmp_path / "k.csv").write_text("x,intensity\n1,2\n")
    with pytest.raises(DomainError):
        io.read_spectrum(tmp_path / "k.csv")
