"""Hybrid model assembly: analytical voltage + gated error compensator.

The compensator runs in free-run mode (its own previous output fed back
into the regressor); the envelope scores each regressor as it is formed,
so out-of-distribution excursions attenuate the compensation on the spot
rather than after the fact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .envelope import GateConfig, HullModel, OcsvmModel, gate, hull_contains, ocsvm_score
from .errors import PreconditionError, SchemaError
from .netdyn import (E_LAG_COL, MlpModel, NarxSpec, _feedback_affines, _forward_scaled,
                     narx_exog_matrix)
from .plant import EquivCircuitParams, simulate_am
from .signal import TimeSeries


def envelope_score(env, x):
    """Uniform score view of either envelope kind: OCSVM models give their
    real-valued score, hulls give +-1 (inside/outside)."""
    if isinstance(env, OcsvmModel):
        return ocsvm_score(env, x)
    member = hull_contains(env, x)
    if isinstance(member, (bool, np.bool_)):
        return 1.0 if member else -1.0
    return np.where(member, 1.0, -1.0)


def _envelope_dim(env) -> int:
    if isinstance(env, OcsvmModel):
        return env.support_vectors.shape[1]
    if isinstance(env, HullModel):
        return env.dim
    pts = np.atleast_2d(np.asarray(env, dtype=float))
    return pts.shape[1]


@dataclass
class HybridModel:
    am: EquivCircuitParams
    narx: MlpModel
    spec: NarxSpec
    envelope: OcsvmModel | HullModel | None = None
    gate: GateConfig = field(default_factory=GateConfig)

    def __post_init__(self):
        if self.narx.n_in != self.spec.width:
            raise SchemaError(f"net input width {self.narx.n_in} != regressor width {self.spec.width}")
        if self.envelope is not None and _envelope_dim(self.envelope) != self.spec.width:
            raise SchemaError(f"envelope dimension {_envelope_dim(self.envelope)} != "
                              f"regressor width {self.spec.width}")


def compute_error_channel(measured: TimeSeries, am_voltage) -> TimeSeries:
    """Append e(k) = y_measured(k) - y_am(k) as the 'error' channel."""
    v_am = np.asarray(am_voltage, dtype=float)
    if len(v_am) != measured.length:
        raise PreconditionError(f"model voltage length {len(v_am)} != series length {measured.length}")
    return measured.with_channel("error", measured.channel("voltage") - v_am)


@dataclass
class HybridResult:
    y_hat: np.ndarray
    e_dd: np.ndarray
    f_oc: np.ndarray
    am_voltage: np.ndarray
    soc: np.ndarray
    clamped: bool

    def __iter__(self):
        yield self.y_hat
        yield self.e_dd
        yield self.f_oc


def hybrid_simulate(h: HybridModel, current, temperature, soc0: float, dt: float,
                    e0: float = 0.0) -> HybridResult:
    """Free simulation of the full hybrid model over one drive.

    Per step: the analytical model supplies the prior voltage, the
    regressor [u1(k), u1(k-1), u2(k), u3(k), e_hat(k-1)] is scored by the
    envelope, the net output is gated by that score, and the gated value
    is what gets fed back.  f_oc(0) is NaN (no regressor exists there);
    without an envelope every score is +inf and the gate is the identity.
    """
    am = simulate_am(h.am, current, temperature, soc0, dt)
    i_arr = np.asarray(current, dtype=float)
    n = len(i_arr)
    e_dd = np.zeros(n)
    f_oc = np.full(n, math.nan)
    e_dd[0] = e0
    clamped = False
    if n > 1:
        ts = TimeSeries(1.0 / dt, {"current": i_arr,
                                   "temperature": np.asarray(temperature, dtype=float),
                                   "soc": am.soc})
        raw_exog = narx_exog_matrix(h.spec, ts)
        xs_exog = h.narx.input_scaling.transform(raw_exog)
        out_hs, out_mid, in_hs, in_mid = _feedback_affines(h.narx)
        bound = h.spec.sat_bound
        e_prev = float(e0)
        m = h.narx
        for k in range(1, n):
            xs = xs_exog[k - 1].copy()
            xs[E_LAG_COL] = (e_prev - in_mid) / in_hs
            ys, _ = _forward_scaled(m.w1, m.b1, m.w2, m.b2, xs[None, :])
            raw_out = float(ys[0]) * out_hs + out_mid
            if h.envelope is None:
                score = math.inf
                val = raw_out
            else:
                x_raw = raw_exog[k - 1].copy()
                x_raw[E_LAG_COL] = e_prev
                score = float(envelope_score(h.envelope, x_raw))
                val = gate(raw_out, score, h.gate)
            if bound is not None and abs(val) > bound:
                val = math.copysign(bound, val)
                clamped = True
            e_dd[k] = val
            f_oc[k] = score
            e_prev = val
    return HybridResult(y_hat=am.voltage + e_dd, e_dd=e_dd, f_oc=f_oc,
                        am_voltage=am.voltage, soc=am.soc, clamped=clamped)


@dataclass
class MetricsReport:
    rmse: float
    max_abs_error: float
    normalized_max_error: float | None = None
    inside_fraction: float | None = None
    degenerate_span: bool = False
    cycles: dict = field(default_factory=dict)


def evaluate(y_hat, y, hull=None, regressors=None) -> MetricsReport:
    """RMSE, max |error| and span-normalized max error of a prediction.

    The normalizer is the measured span max(y) - min(y); a zero span sets
    degenerate_span instead of dividing.  When both a hull and the
    regressor matrix are given, the fraction of regressors inside the
    hull is reported too.
    """
    yh = np.asarray(y_hat, dtype=float)
    ym = np.asarray(y, dtype=float)
    if yh.shape != ym.shape or yh.ndim != 1 or len(yh) < 1:
        raise PreconditionError(f"prediction/measurement must be equal-length 1-D >= 1, "
                                f"got {yh.shape} vs {ym.shape}")
    err = yh - ym
    rmse = float(np.sqrt(np.mean(err * err)))
    max_abs = float(np.max(np.abs(err)))
    span = float(np.max(ym) - np.min(ym))
    if span > 0.0:
        norm_max, degenerate = max_abs / span, False
    else:
        norm_max, degenerate = None, True
    inside = None
    if hull is not None and regressors is not None:
        member = hull_contains(hull, np.atleast_2d(np.asarray(regressors, dtype=float)))
        inside = float(np.mean(member))
    return MetricsReport(rmse=rmse, max_abs_error=max_abs, normalized_max_error=norm_max,
                         inside_fraction=inside, degenerate_span=degenerate)


def aggregate(per_cycle: dict[str, MetricsReport]) -> MetricsReport:
    """Mean metrics over cycles; the children stay attached for reporting."""
    if not per_cycle:
        raise PreconditionError("nothing to aggregate")
    reports = list(per_cycle.values())
    norms = [r.normalized_max_error for r in reports if r.normalized_max_error is not None]
    fracs = [r.inside_fraction for r in reports if r.inside_fraction is not None]
    return MetricsReport(
        rmse=float(np.mean([r.rmse for r in reports])),
        max_abs_error=float(np.mean([r.max_abs_error for r in reports])),
        normalized_max_error=float(np.mean(norms)) if norms else None,
        inside_fraction=float(np.mean(fracs)) if fracs else None,
        degenerate_span=any(r.degenerate_span for r in reports),
        cycles=dict(per_cycle),
    )


REPORT_COLUMNS = ("variant", "cycle", "rmse", "max_err", "max_err_norm", "inside_frac")


def report_rows(variant: str, agg: MetricsReport) -> list[dict]:
    """Flatten an aggregated report into CSV rows (cycles first, then 'mean')."""
    rows = []
    for cycle_name, rep in agg.cycles.items():
        rows.append({"variant": variant, "cycle": cycle_name, "rmse": rep.rmse,
                     "max_err": rep.max_abs_error, "max_err_norm": rep.normalized_max_error,
                     "inside_frac": rep.inside_fraction})
    rows.append({"variant": variant, "cycle": "mean", "rmse": agg.rmse,
                 "max_err": agg.max_abs_error, "max_err_norm": agg.normalized_max_error,
                 "inside_frac": agg.inside_fraction})
    return rows


def write_report_csv(path, rows: list[dict], columns=REPORT_COLUMNS) -> None:
    """Deterministic CSV: repr-precision floats, empty cell for None."""
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(cell(row.get(c)) for c in columns) + "\n")
