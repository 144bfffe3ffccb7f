"""Dataset ingestion, resampling, noise injection and subset selection.

Channel conventions used throughout the toolkit: ``current`` in A
(positive while charging), ``temperature`` in degC, ``soc`` as a fraction
in [0, 1], ``voltage`` in V and the optional ``error`` channel in V.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import firwin

from .errors import ParseError, PreconditionError, SchemaError

CHANNELS = ("current", "temperature", "soc", "voltage", "error")

#: Default CSV column -> channel mapping (the `t` column is informative only).
DEFAULT_CSV_SCHEMA = {
    "i_a": "current",
    "temp_c": "temperature",
    "soc": "soc",
    "v": "voltage",
    "e": "error",
}

# Columns that may be absent from a file without raising a schema error.
OPTIONAL_COLUMNS = ("e",)

# Above this row count the initial farthest-pair search of
# space_filling_subset switches to a seeded subsample (see docstring).
_EXACT_PAIR_LIMIT = 32768


@dataclass
class TimeSeries:
    """Uniformly sampled multichannel record."""

    sample_rate_hz: float
    channels: dict[str, np.ndarray]

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise PreconditionError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if not self.channels:
            raise SchemaError("TimeSeries needs at least one channel")
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) != 1:
            raise SchemaError(f"channel lengths differ: { {k: len(v) for k, v in self.channels.items()} }")
        n = lengths.pop()
        if n < 1:
            raise SchemaError("channels must hold at least one sample")
        for name, data in self.channels.items():
            if not np.all(np.isfinite(data)):
                raise SchemaError(f"channel {name!r} contains non-finite samples")
        soc = self.channels.get("soc")
        if soc is not None and (soc.min() < 0.0 or soc.max() > 1.0):
            raise SchemaError(f"soc outside [0, 1]: range [{soc.min()}, {soc.max()}]")

    @property
    def length(self) -> int:
        return len(next(iter(self.channels.values())))

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[name]
        except KeyError:
            raise SchemaError(f"missing channel {name!r}; have {sorted(self.channels)}") from None

    def with_channel(self, name: str, data) -> "TimeSeries":
        chans = dict(self.channels)
        chans[name] = np.asarray(data, dtype=float)
        return TimeSeries(self.sample_rate_hz, chans)

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.sample_rate_hz, {k: v[start:stop] for k, v in self.channels.items()})


@dataclass
class Dataset:
    """Ordered collection of cycles sharing one channel schema and rate."""

    cycles: dict[str, TimeSeries]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.cycles:
            first = next(iter(self.cycles.values()))
            schema = set(first.channels)
            for name, ts in self.cycles.items():
                if set(ts.channels) != schema:
                    raise SchemaError(f"cycle {name!r} channel schema differs from {sorted(schema)}")
                if ts.sample_rate_hz != first.sample_rate_hz:
                    raise SchemaError(f"cycle {name!r} sample rate differs")

    @property
    def sample_rate_hz(self) -> float:
        return next(iter(self.cycles.values())).sample_rate_hz

    def names(self) -> list[str]:
        return list(self.cycles)


def load_csv(path, schema: dict[str, str] | None = None, sample_rate_hz: float = 20.0,
             optional: tuple[str, ...] = OPTIONAL_COLUMNS) -> TimeSeries:
    """Parse a `t,i_a,temp_c,soc,v[,e]` style CSV into a TimeSeries.

    `schema` maps column names to channel names; columns listed in
    `optional` may be absent.  The sample rate is supplied out of band (the
    time column is not interpreted).
    """
    schema = dict(DEFAULT_CSV_SCHEMA if schema is None else schema)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        col_index: dict[str, int] = {}
        for col, chan in schema.items():
            if col in header:
                col_index[chan] = header.index(col)
            elif col not in optional:
                raise SchemaError(f"{path}: missing column {col!r} (header: {header})")
        data: dict[str, list[float]] = {chan: [] for chan in col_index}
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {row_no}: expected {len(header)} cells, got {len(row)}")
            for chan, idx in col_index.items():
                cell = row[idx].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: row {row_no}, column {header[idx]!r}: "
                                     f"non-numeric cell {cell!r}") from None
                if not math.isfinite(value):
                    raise ParseError(f"{path}: row {row_no}, column {header[idx]!r}: "
                                     f"non-finite cell {cell!r}")
                data[chan].append(value)
        if not data or not next(iter(data.values())):
            raise ParseError(f"{path}: no data rows")
    return TimeSeries(sample_rate_hz, {k: np.asarray(v) for k, v in data.items()})


def save_csv(path, ts: TimeSeries) -> None:
    """Write a TimeSeries as CSV with repr-precision floats (exact round trip)."""
    reverse = {chan: col for col, chan in DEFAULT_CSV_SCHEMA.items()}
    chans = [c for c in CHANNELS if c in ts.channels]
    header = ["t"] + [reverse[c] for c in chans]
    dt = 1.0 / ts.sample_rate_hz
    cols = [ts.channels[c] for c in chans]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(ts.length):
            row = [repr(k * dt)] + [repr(float(col[k])) for col in cols]
            fh.write(",".join(row) + "\n")


def _fir_taps(sample_rate_hz: float, cutoff_hz: float) -> np.ndarray:
    # Windowed-sinc (Hamming) low-pass; tap count sized so the transition
    # band ends by ~1.5x cutoff, which puts >50 dB of attenuation there.
    numtaps = int(math.ceil(3.3 * sample_rate_hz / (0.5 * cutoff_hz)))
    if numtaps % 2 == 0:
        numtaps += 1
    return firwin(numtaps, cutoff_hz, fs=sample_rate_hz)


def antialias_downsample(ts: TimeSeries, cutoff_hz: float = 10.0,
                         target_hz: float = 20.0) -> TimeSeries:
    """Low-pass filter (linear-phase FIR) and decimate to `target_hz`.

    The input rate must be an integer multiple of `target_hz`.  Group delay
    is compensated by symmetric edge padding, so constants pass through
    exactly.  A filtered `soc` channel is re-clipped to [0, 1] (windowed
    sincs overshoot slightly near the rails).
    """
    fs = ts.sample_rate_hz
    if fs < 2.0 * target_hz:
        raise PreconditionError(f"input rate {fs} Hz < 2 * target {target_hz} Hz")
    if target_hz < 2.0 * cutoff_hz:
        raise PreconditionError(f"target rate {target_hz} Hz < 2 * cutoff {cutoff_hz} Hz")
    factor = fs / target_hz
    if abs(factor - round(factor)) > 1e-9:
        raise PreconditionError(f"rate ratio {fs}/{target_hz} is not an integer decimation factor")
    m = int(round(factor))
    taps = _fir_taps(fs, cutoff_hz)
    pad = (len(taps) - 1) // 2
    out: dict[str, np.ndarray] = {}
    for name, x in ts.channels.items():
        xp = np.pad(x, pad, mode="edge")
        y = np.convolve(xp, taps, mode="valid")[::m]
        if name == "soc":
            y = np.clip(y, 0.0, 1.0)
        out[name] = y
    return TimeSeries(target_hz, out)


def awgn(x: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise at the given SNR (signal power = mean-removed)."""
    x = np.asarray(x, dtype=float)
    if math.isinf(snr_db) and snr_db > 0:
        return x.copy()
    power = float(np.mean((x - x.mean()) ** 2))
    if power <= 0.0:
        raise PreconditionError("channel has zero signal power; SNR undefined")
    sigma = math.sqrt(power * 10.0 ** (-snr_db / 10.0))
    return x + rng.normal(0.0, sigma, size=x.shape)


def add_awgn(ts: TimeSeries, snr_db: float, channels, seed: int) -> TimeSeries:
    """Noisy copy of `ts`: AWGN at `snr_db` added per channel, seeded.

    Channels are processed in sorted name order so the result is a
    deterministic function of (ts, snr_db, channels, seed).
    """
    rng = np.random.default_rng(seed)
    out = dict(ts.channels)
    for name in sorted(channels):
        out[name] = awgn(ts.channel(name), snr_db, rng)
    return TimeSeries(ts.sample_rate_hz, out)


@dataclass
class ScalingInfo:
    """Per-column min-max mapping onto [-1, 1]; constant columns pass through."""

    col_min: np.ndarray
    col_max: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, data) -> "ScalingInfo":
        x = np.atleast_2d(np.asarray(data, dtype=float))
        lo = x.min(axis=0)
        hi = x.max(axis=0)
        return cls(lo, hi, hi - lo <= 0.0)

    @classmethod
    def identity(cls, n_cols: int) -> "ScalingInfo":
        return cls(np.full(n_cols, -1.0), np.full(n_cols, 1.0), np.zeros(n_cols, dtype=bool))

    @property
    def n_cols(self) -> int:
        return len(self.col_min)

    @property
    def half_span(self) -> np.ndarray:
        """Raw-units change per unit of scaled coordinate (1 for constants)."""
        return np.where(self.constant, 1.0, (self.col_max - self.col_min) / 2.0)

    @property
    def midpoint(self) -> np.ndarray:
        """Raw value mapping to scaled 0 (0 for pass-through constant columns)."""
        return np.where(self.constant, 0.0, (self.col_max + self.col_min) / 2.0)

    def transform(self, data):
        x = np.asarray(data, dtype=float)
        span = np.where(self.constant, 1.0, self.col_max - self.col_min)
        scaled = 2.0 * (x - self.col_min) / span - 1.0
        return np.where(self.constant, x, scaled)

    def inverse(self, data):
        x = np.asarray(data, dtype=float)
        span = np.where(self.constant, 1.0, self.col_max - self.col_min)
        raw = (x + 1.0) / 2.0 * span + self.col_min
        return np.where(self.constant, x, raw)

    def to_payload(self) -> dict:
        return {"col_min": self.col_min, "col_max": self.col_max,
                "constant": [bool(c) for c in self.constant]}

    @classmethod
    def from_payload(cls, payload: dict) -> "ScalingInfo":
        return cls(np.asarray(payload["col_min"], dtype=float),
                   np.asarray(payload["col_max"], dtype=float),
                   np.asarray(payload["constant"], dtype=bool))


def normalize(data) -> tuple[np.ndarray, ScalingInfo]:
    """Min-max scale columns to [-1, 1]; constant columns are flagged, not scaled."""
    info = ScalingInfo.fit(data)
    return info.transform(np.atleast_2d(np.asarray(data, dtype=float))), info


def denormalize(scaled, info: ScalingInfo) -> np.ndarray:
    return info.inverse(scaled)


def _farthest_pair(x: np.ndarray, limit: int, seed: int) -> tuple[int, int]:
    """Indices (i, j), i < j, of the mutually farthest rows; ties take the
    lexicographically smallest pair.  Beyond `limit` rows the exact search
    runs on a seeded subsample (plus per-coordinate extremes)."""
    n = len(x)
    if n > limit:
        rng = np.random.default_rng(seed)
        cand = rng.choice(n, size=limit, replace=False)
        cand = np.union1d(cand, np.concatenate([x.argmin(axis=0), x.argmax(axis=0)]))
        cand.sort()
    else:
        cand = np.arange(n)
    pts = x[cand]
    best = (-1.0, 0, 0)
    chunk = 1024
    for a in range(0, len(pts), chunk):
        block = pts[a:a + chunk]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        # only look above the diagonal to keep i < j
        rows = np.arange(a, a + len(block))[:, None]
        d2[rows >= np.arange(len(pts))[None, :]] = -np.inf
        flat = int(np.argmax(d2))
        i, j = divmod(flat, len(pts))
        d = d2[i, j]
        if d > best[0]:
            best = (d, a + i, j)
    _, i, j = best
    return int(cand[i]), int(cand[j])


def space_filling_subset(points, n: int, seed: int = 0) -> np.ndarray:
    """Greedy maximin subset of `n` row indices, deterministic.

    Columns are min-max normalized first.  Selection starts from the two
    mutually farthest points and repeatedly adds the point with the largest
    minimum distance to the chosen set; all ties resolve to the lowest
    index.  `seed` only matters above the documented exact-search row limit.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    m = len(x)
    if n < 2 or n > m:
        raise PreconditionError(f"subset size {n} outside [2, {m}]")
    xs, _ = normalize(x)
    i0, j0 = _farthest_pair(xs, _EXACT_PAIR_LIMIT, seed)
    selected = [i0, j0]
    mind = np.minimum(((xs - xs[i0]) ** 2).sum(axis=1), ((xs - xs[j0]) ** 2).sum(axis=1))
    mind[i0] = mind[j0] = -np.inf
    while len(selected) < n:
        k = int(np.argmax(mind))
        selected.append(k)
        mind = np.minimum(mind, ((xs - xs[k]) ** 2).sum(axis=1))
        mind[k] = -np.inf
    return np.asarray(selected, dtype=int)
