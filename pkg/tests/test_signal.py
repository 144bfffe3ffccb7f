import math

import numpy as np
import pytest

from battgate import signal
from battgate.errors import ParseError, PreconditionError, SchemaError

import oracles


def _make_ts(n=50, rate=20.0, with_error=False, seed=0):
    rng = np.random.default_rng(seed)
    chans = {
        "current": rng.normal(0, 1, n),
        "temperature": 25.0 + rng.normal(0, 0.5, n),
        "soc": np.linspace(0.4, 0.6, n),
        "voltage": 3.7 + rng.normal(0, 0.01, n),
    }
    if with_error:
        chans["error"] = rng.normal(0, 0.001, n)
    return signal.TimeSeries(rate, chans)


# ---------------------------------------------------------------------------
# containers

class TestTimeSeries:
    def test_validation(self):
        with pytest.raises(PreconditionError):
            signal.TimeSeries(0.0, {"voltage": [1.0]})
        with pytest.raises(SchemaError):
            signal.TimeSeries(20.0, {})
        with pytest.raises(SchemaError):
            signal.TimeSeries(20.0, {"voltage": [1.0, 2.0], "current": [1.0]})
        with pytest.raises(SchemaError):
            signal.TimeSeries(20.0, {"voltage": [1.0, math.nan]})
        with pytest.raises(SchemaError):
            signal.TimeSeries(20.0, {"soc": [0.5, 1.2]})
        with pytest.raises(SchemaError):
            signal.TimeSeries(20.0, {"voltage": np.empty(0)})

    def test_accessors(self):
        ts = _make_ts(10)
        assert ts.length == 10
        assert ts.channel("soc")[0] == 0.4
        with pytest.raises(SchemaError):
            ts.channel("nope")
        ts2 = ts.with_channel("error", np.zeros(10))
        assert "error" in ts2.channels and "error" not in ts.channels
        assert ts.slice(2, 5).length == 3

    def test_dataset_schema_consistency(self):
        a, b = _make_ts(10), _make_ts(12)
        ds = signal.Dataset({"a": a, "b": b})
        assert ds.names() == ["a", "b"]
        assert ds.sample_rate_hz == 20.0
        with pytest.raises(SchemaError):
            signal.Dataset({"a": a, "b": _make_ts(10, with_error=True)})
        with pytest.raises(SchemaError):
            signal.Dataset({"a": a, "b": _make_ts(10, rate=10.0)})


# ---------------------------------------------------------------------------
# CSV io

class TestCsv:
    def test_round_trip_bitwise(self, tmp_path):
        ts = _make_ts(37, with_error=True)
        path = tmp_path / "cycle.csv"
        signal.save_csv(path, ts)
        back = signal.load_csv(path, sample_rate_hz=ts.sample_rate_hz)
        assert set(back.channels) == set(ts.channels)
        for name in ts.channels:
            assert np.array_equal(back.channel(name), ts.channel(name))

    def test_header_and_line_endings(self, tmp_path):
        path = tmp_path / "c.csv"
        signal.save_csv(path, _make_ts(3))
        raw = path.read_bytes()
        assert raw.startswith(b"t,i_a,temp_c,soc,v\n")
        assert b"\r" not in raw
        signal.save_csv(path, _make_ts(3, with_error=True))
        assert path.read_text().splitlines()[0] == "t,i_a,temp_c,soc,v,e"

    def test_save_twice_identical(self, tmp_path):
        ts = _make_ts(20)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        signal.save_csv(p1, ts)
        signal.save_csv(p2, ts)
        assert p1.read_bytes() == p2.read_bytes()

    def test_error_column_optional(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("t,i_a,temp_c,soc,v\n0.0,1.0,25.0,0.5,3.7\n")
        ts = signal.load_csv(path)
        assert "error" not in ts.channels

    def test_extra_columns_ignored(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("t,i_a,foo,temp_c,soc,v\n0.0,1.0,9,25.0,0.5,3.7\n")
        ts = signal.load_csv(path)
        assert ts.channel("temperature")[0] == 25.0

    def test_missing_required_column(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("t,i_a,temp_c,soc\n0.0,1.0,25.0,0.5\n")
        with pytest.raises(SchemaError):
            signal.load_csv(path)

    def test_parse_errors_carry_location(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("t,i_a,temp_c,soc,v\n0.0,1.0,25.0,0.5,3.7\n0.05,oops,25.0,0.5,3.7\n")
        with pytest.raises(ParseError, match=r"row 3.*i_a"):
            signal.load_csv(path)
        path.write_text("t,i_a,temp_c,soc,v\n0.0,1.0,25.0,0.5\n")
        with pytest.raises(ParseError, match="row 2"):
            signal.load_csv(path)
        path.write_text("t,i_a,temp_c,soc,v\n0.0,1.0,inf,0.5,3.7\n")
        with pytest.raises(ParseError, match="row 2"):
            signal.load_csv(path)

    def test_empty_inputs(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("")
        with pytest.raises(ParseError):
            signal.load_csv(path)
        path.write_text("t,i_a,temp_c,soc,v\n")
        with pytest.raises(ParseError):
            signal.load_csv(path)


# ---------------------------------------------------------------------------
# anti-alias decimation

class TestAntialias:
    def test_constant_passes_exactly(self):
        ts = signal.TimeSeries(100.0, {"voltage": np.full(1000, 3.7)})
        out = signal.antialias_downsample(ts, 10.0, 20.0)
        assert out.sample_rate_hz == 20.0
        assert out.length == 200
        np.testing.assert_allclose(out.channel("voltage"), 3.7, rtol=0, atol=1e-12)

    def test_stopband_tone_attenuated_40db(self):
        # 15 Hz is above the 10 Hz cutoff and aliases to 5 Hz at the 20 Hz
        # output rate; measure what survives in that bin, and the total AC
        # remnant away from the edge-padding transients.
        fs, f0, n = 100.0, 15.0, 2000
        t = np.arange(n) / fs
        x = np.sin(2 * np.pi * f0 * t)
        ts = signal.TimeSeries(fs, {"voltage": x})
        out = signal.antialias_downsample(ts, 10.0, 20.0).channel("voltage")
        p_in = oracles.tone_power(x, fs, f0)
        p_alias = oracles.tone_power(out, 20.0, 5.0)
        assert 10.0 * math.log10(p_in / p_alias) >= 40.0
        p_steady = oracles.total_ac_power(out[20:-20])
        assert 10.0 * math.log10(p_in / p_steady) >= 40.0

    def test_passband_tone_preserved(self):
        fs, f0, n = 100.0, 1.0, 4000
        t = np.arange(n) / fs
        x = np.sin(2 * np.pi * f0 * t)
        ts = signal.TimeSeries(fs, {"voltage": x})
        out = signal.antialias_downsample(ts, 10.0, 20.0).channel("voltage")
        p_out = oracles.tone_power(out, 20.0, f0)
        assert abs(10.0 * math.log10(p_out / 0.5)) < 0.1

    def test_group_delay_compensated_on_ramp(self):
        ramp = np.linspace(0.0, 1.0, 500)
        ts = signal.TimeSeries(100.0, {"current": ramp})
        out = signal.antialias_downsample(ts, 10.0, 20.0).channel("current")
        # away from the edges a linear-phase filter reproduces the ramp
        np.testing.assert_allclose(out[20:-20], ramp[::5][20:-20], atol=1e-6)

    def test_soc_reclipped(self):
        # the step response of the windowed sinc overshoots 1.0, so some
        # samples must land exactly on the clip rail
        soc = np.concatenate([np.full(200, 0.5), np.full(300, 1.0)])
        ts = signal.TimeSeries(100.0, {"soc": soc})
        out = signal.antialias_downsample(ts, 10.0, 20.0).channel("soc")
        assert out.max() <= 1.0 and out.min() >= 0.0
        assert np.sum(out == 1.0) >= 1
        assert out[-1] == pytest.approx(1.0, abs=1e-12)

    def test_rate_preconditions(self):
        ts = signal.TimeSeries(30.0, {"voltage": np.ones(100) + np.arange(100)})
        with pytest.raises(PreconditionError):
            signal.antialias_downsample(ts, 10.0, 20.0)  # 30 < 2*20
        ts = signal.TimeSeries(100.0, {"voltage": np.ones(100)})
        with pytest.raises(PreconditionError):
            signal.antialias_downsample(ts, 10.0, 15.0)  # 15 < 2*10
        ts = signal.TimeSeries(90.0, {"voltage": np.ones(100)})
        with pytest.raises(PreconditionError):
            signal.antialias_downsample(ts, 10.0, 20.0)  # 90/20 not integer


# ---------------------------------------------------------------------------
# noise injection

class TestAwgn:
    def test_infinite_snr_is_identity_copy(self):
        x = np.sin(np.linspace(0, 10, 100))
        out = signal.awgn(x, math.inf, np.random.default_rng(0))
        assert np.array_equal(out, x)
        assert out is not x

    def test_measured_snr_within_tolerance(self):
        n = 1_000_000
        t = np.arange(n) / 1000.0
        x = 2.0 * np.sin(2 * np.pi * 3.0 * t)
        noisy = signal.awgn(x, 40.0, np.random.default_rng(7))
        p_sig = oracles.total_ac_power(x)
        p_noise = float(np.mean((noisy - x) ** 2))
        snr_est = 10.0 * math.log10(p_sig / p_noise)
        assert abs(snr_est - 40.0) <= 0.2

    def test_zero_power_signal_rejected(self):
        with pytest.raises(PreconditionError):
            signal.awgn(np.full(10, 1.5), 40.0, np.random.default_rng(0))

    def test_add_awgn_deterministic_and_order_independent(self):
        ts = _make_ts(200)
        a = signal.add_awgn(ts, 30.0, ["voltage", "current"], seed=5)
        b = signal.add_awgn(ts, 30.0, ["current", "voltage"], seed=5)
        for name in ("current", "voltage"):
            assert np.array_equal(a.channel(name), b.channel(name))
            assert not np.array_equal(a.channel(name), ts.channel(name))
        assert np.array_equal(a.channel("temperature"), ts.channel("temperature"))
        c = signal.add_awgn(ts, 30.0, ["voltage", "current"], seed=6)
        assert not np.array_equal(a.channel("voltage"), c.channel("voltage"))


# ---------------------------------------------------------------------------
# scaling

class TestScaling:
    def test_endpoints_exact(self):
        x = np.array([[1.0, -3.0], [5.0, 7.0], [3.0, 4.0]])
        scaled, info = signal.normalize(x)
        assert scaled[0, 0] == -1.0 and scaled[1, 0] == 1.0
        assert scaled[0, 1] == -1.0 and scaled[1, 1] == 1.0
        assert np.all(scaled >= -1.0) and np.all(scaled <= 1.0)

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 10, size=(40, 3))
        scaled, info = signal.normalize(x)
        np.testing.assert_allclose(signal.denormalize(scaled, info), x, atol=1e-12)

    def test_constant_column_passthrough(self):
        x = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        scaled, info = signal.normalize(x)
        assert np.array_equal(scaled[:, 1], x[:, 1])
        assert info.constant[1] and not info.constant[0]
        back = signal.denormalize(scaled, info)
        np.testing.assert_allclose(back, x, atol=1e-12)
        assert info.half_span[1] == 1.0 and info.midpoint[1] == 0.0

    def test_payload_round_trip(self):
        info = signal.ScalingInfo.fit(np.array([[0.0, 2.0], [1.0, 2.0]]))
        back = signal.ScalingInfo.from_payload(info.to_payload())
        assert np.array_equal(back.col_min, info.col_min)
        assert np.array_equal(back.col_max, info.col_max)
        assert np.array_equal(back.constant, info.constant)

    def test_identity(self):
        info = signal.ScalingInfo.identity(3)
        x = np.array([[0.2, -0.5, 0.9]])
        np.testing.assert_allclose(info.transform(x), x, atol=1e-15)


# ---------------------------------------------------------------------------
# space-filling subset selection

def _naive_maximin(points, n):
    x = np.atleast_2d(np.asarray(points, dtype=float))
    xs, _ = signal.normalize(x)
    i0, j0 = oracles.brute_farthest_pair(xs)
    selected = [i0, j0]
    while len(selected) < n:
        best_k, best_d = None, -1.0
        for k in range(len(xs)):
            if k in selected:
                continue
            d = min(float(np.sum((xs[k] - xs[s]) ** 2)) for s in selected)
            if d > best_d:
                best_d, best_k = d, k
        selected.append(best_k)
    return selected


class TestSpaceFilling:
    def test_matches_naive_greedy(self):
        rng = np.random.default_rng(11)
        for trial in range(8):
            pts = rng.normal(0, 1, size=(rng.integers(10, 40), rng.integers(1, 4)))
            n = int(rng.integers(2, len(pts) + 1))
            got = signal.space_filling_subset(pts, n)
            assert list(got) == _naive_maximin(pts, n)

    def test_deterministic_and_unique(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(0, 1, size=(100, 5))
        a = signal.space_filling_subset(pts, 20)
        b = signal.space_filling_subset(pts, 20)
        assert np.array_equal(a, b)
        assert len(set(a.tolist())) == 20

    def test_full_subset_is_permutation(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(0, 1, size=(12, 2))
        got = signal.space_filling_subset(pts, 12)
        assert sorted(got.tolist()) == list(range(12))

    def test_size_bounds(self):
        pts = np.random.default_rng(0).normal(size=(10, 2))
        with pytest.raises(PreconditionError):
            signal.space_filling_subset(pts, 1)
        with pytest.raises(PreconditionError):
            signal.space_filling_subset(pts, 11)

    def test_duplicate_points_tolerated(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
        got = signal.space_filling_subset(pts, 3)
        assert len(got) == 3 and len(set(got.tolist())) == 3
