"""Experiment harness: polynomial gating study, synthetic battery study,
and deterministic plot rendering.

Both experiments are pure functions of (config, seed): report tables come
out byte-identical on reruns, which the CLI relies on.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from . import compose, envelope, netdyn, plant, signal
from .errors import BattgateError, DegenerateGeometryError, PreconditionError

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# polynomial target generator

@dataclass
class PolySpec:
    """Random 2-D target family: sums of monomials with optional sine
    modulation, exponents uniform on 0..2*avg_exponent (integer mean =
    avg_exponent)."""

    n_terms: int = 30
    avg_exponent: int = 5
    sine: bool = True
    # frequencies high enough that 20 samples cannot pin the target down;
    # the study is then about damage control away from the training points
    omega_range: tuple[float, float] = (5.0, 18.0)
    phase_range: tuple[float, float] = (0.0, TWO_PI)
    coeff_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_terms < 1:
            raise PreconditionError(f"n_terms must be >= 1, got {self.n_terms}")
        if self.avg_exponent < 0:
            raise PreconditionError(f"avg_exponent must be >= 0, got {self.avg_exponent}")


@dataclass
class PolyFunction:
    coeffs: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    omega: np.ndarray
    phase: np.ndarray
    sine: bool = True

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        total = np.zeros(np.broadcast(x1, x2).shape)
        for c, a, b, w, p in zip(self.coeffs, self.p1, self.p2, self.omega, self.phase):
            term = c * x1 ** a * x2 ** b
            if self.sine:
                term = term * np.sin(w * (x1 + x2) + p)
            total = total + term
        return float(total) if total.ndim == 0 else total


def gen_polynomial(spec: PolySpec) -> PolyFunction:
    """Draw a target function; deterministic per spec.seed.  Draw order:
    coefficients, exponent pairs, frequencies, phases."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_terms
    coeffs = rng.normal(0.0, spec.coeff_scale, size=n)
    powers = rng.integers(0, 2 * spec.avg_exponent + 1, size=(n, 2))
    omega = rng.uniform(spec.omega_range[0], spec.omega_range[1], size=n)
    phase = rng.uniform(spec.phase_range[0], spec.phase_range[1], size=n)
    return PolyFunction(coeffs=coeffs, p1=powers[:, 0].astype(float),
                        p2=powers[:, 1].astype(float), omega=omega, phase=phase,
                        sine=spec.sine)


# ---------------------------------------------------------------------------
# polynomial gating experiment

POLY_VARIANTS = ("fnn", "fnn_ocsvm", "fnn_hull")


@dataclass
class ExperimentConfig:
    """Configuration of the small-data gating study."""

    seeds: tuple = tuple(range(10))
    train_points: int = 20
    test_points: int = 20000
    snr_db: float = 40.0
    n_hidden: int = 10
    poly: PolySpec = field(default_factory=PolySpec)
    variants: tuple = POLY_VARIANTS
    nu_grid: tuple = (0.05, 0.1, 0.2)
    sigma_grid: tuple = (0.3, 0.5, 0.8, 1.2)
    # negative offset tightens the tuned boundary; sparse in-hull pockets,
    # where the net is unsupported, drop out of the acceptance region first
    bias_offset: float = -0.07
    probe_count: int = 2000
    gate_variant: str = "hard"
    gate_gamma: float = 2.0
    max_epochs: int = 300
    restarts: int = 3
    out_dir: str | None = None

    def __post_init__(self):
        if not self.seeds:
            raise PreconditionError("seed list must be non-empty")
        if self.train_points < 3 or self.test_points < 1:
            raise PreconditionError("need >= 3 training and >= 1 test points")


def _poly_single_seed(config: ExperimentConfig, seed: int) -> dict[str, float]:
    """One seed of the polynomial study; returns variant -> RMSE."""
    target = gen_polynomial(replace(config.poly, seed=seed))
    rng = np.random.default_rng(seed + 1)
    x_train = rng.uniform(0.0, 1.0, size=(config.train_points, 2))
    y_train = target(x_train[:, 0], x_train[:, 1])
    if math.isinf(config.snr_db):
        x_noisy, y_noisy = x_train.copy(), y_train.copy()
    else:
        noise_rng = np.random.default_rng(seed + 2)
        x_noisy = np.column_stack([signal.awgn(x_train[:, 0], config.snr_db, noise_rng),
                                   signal.awgn(x_train[:, 1], config.snr_db, noise_rng)])
        y_noisy = signal.awgn(y_train, config.snr_db, noise_rng)

    in_scale = signal.ScalingInfo.fit(x_noisy)
    out_scale = signal.ScalingInfo.fit(y_noisy[:, None])
    net0 = netdyn.init_mlp(2, config.n_hidden, seed + 3, in_scale, out_scale)
    opts = netdyn.TrainOptions(max_epochs=config.max_epochs, restarts=config.restarts,
                               seed=seed + 3)
    net = netdyn.train_lm(net0, x_noisy, y_noisy, opts).model

    hull = envelope.quickhull_2d(x_noisy)
    tuned = envelope.tune_ocsvm(x_noisy, config.nu_grid, config.sigma_grid, hull,
                                probe_count=config.probe_count, seed=seed + 4)
    ocsvm = envelope.train_ocsvm(x_noisy, tuned.nu, tuned.sigma)
    ocsvm.bias_offset = config.bias_offset

    cover = qmc.Halton(d=2, scramble=True, seed=seed + 5).random(config.test_points)
    y_true = target(cover[:, 0], cover[:, 1])
    raw_pred = netdyn.mlp_forward(net, cover)
    gate_cfg = envelope.GateConfig(gamma=config.gate_gamma, variant=config.gate_variant)

    out: dict[str, float] = {}
    for variant in config.variants:
        if variant == "fnn":
            pred = raw_pred
        elif variant == "fnn_ocsvm":
            pred = envelope.gate(raw_pred, envelope.ocsvm_score(ocsvm, cover), gate_cfg)
        elif variant == "fnn_hull":
            score = np.where(envelope.hull_contains(hull, cover), 1.0, -1.0)
            pred = envelope.gate(raw_pred, score, gate_cfg)
        else:
            raise PreconditionError(f"unknown variant {variant!r}")
        out[variant] = compose.evaluate(pred, y_true).rmse
    return out


def run_poly_experiment(config: ExperimentConfig) -> dict:
    """Per-seed RMSE of every variant plus means; failed seeds are counted
    and excluded from the means."""
    rows: list[dict] = []
    per_variant: dict[str, list[float]] = {v: [] for v in config.variants}
    failures: list[tuple[int, str]] = []
    for seed in config.seeds:
        try:
            scores = _poly_single_seed(config, int(seed))
        except (BattgateError, np.linalg.LinAlgError) as exc:
            failures.append((int(seed), f"{type(exc).__name__}: {exc}"))
            continue
        for variant in config.variants:
            rows.append({"variant": variant, "seed": str(seed), "rmse": scores[variant]})
            per_variant[variant].append(scores[variant])
    means = {v: (float(np.mean(vals)) if vals else math.nan)
             for v, vals in per_variant.items()}
    for variant in config.variants:
        rows.append({"variant": variant, "seed": "mean", "rmse": means[variant]})
    report = {"rows": rows, "means": means, "failures": failures,
              "n_failed": len(failures)}
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        path = os.path.join(config.out_dir, "poly_report.csv")
        compose.write_report_csv(path, rows, columns=("variant", "seed", "rmse"))
        report["csv_path"] = path
    return report


# ---------------------------------------------------------------------------
# synthetic drive cycles

def gen_drive_cycle(seed: int, seconds: float, rate_hz: float, amp_a: float,
                    temp_base_c: float, temp_drift_c: float,
                    burst_prob: float = 0.08, burst_scale: float = 2.5,
                    max_current_a: float = 8.0) -> tuple[np.ndarray, np.ndarray]:
    """Band-limited random load profile plus a slow temperature drift.

    Current is a piecewise-constant demand (new level every 3..12 s, zero
    mean, occasional larger bursts) smoothed over 0.5 s and clipped to
    +-max_current_a; most mass sits near zero so the corpus concentrates
    around equilibrium.
    """
    rng = np.random.default_rng(seed)
    n = int(round(seconds * rate_hz))
    if n < 2:
        raise PreconditionError("cycle too short")
    current = np.empty(n)
    k = 0
    while k < n:
        hold = int(rng.uniform(3.0, 12.0) * rate_hz)
        level = rng.normal(0.0, amp_a)
        if rng.random() < burst_prob:
            level *= burst_scale
        current[k:k + hold] = level
        k += hold
    w = max(1, int(round(0.5 * rate_hz)))
    current = np.convolve(current, np.ones(w) / w, mode="same")
    np.clip(current, -max_current_a, max_current_a, out=current)
    drift = temp_drift_c * np.linspace(0.0, 1.0, n)
    wobble = np.convolve(rng.normal(0.0, 1.0, n), np.ones(10 * w) / (10 * w), mode="same")
    std = float(np.std(wobble))
    if std > 0:
        wobble *= 0.3 / std
    temperature = temp_base_c + drift + wobble
    return current, temperature


# ---------------------------------------------------------------------------
# battery study

BATTERY_VARIANTS = ("am", "ecm", "ecm_ocsvm", "ecm_hull")


def _default_val_specs() -> list[dict]:
    return [
        {"amp_a": 1.6, "temp_base_c": 25.0, "temp_drift_c": 1.0, "soc0": 0.55},
        {"amp_a": 2.4, "temp_base_c": 27.0, "temp_drift_c": 2.0, "soc0": 0.5},
        {"amp_a": 3.6, "temp_base_c": 22.0, "temp_drift_c": -3.0, "soc0": 0.35},
        {"amp_a": 4.5, "temp_base_c": 36.0, "temp_drift_c": 4.0, "soc0": 0.6},
        {"amp_a": 6.0, "temp_base_c": 8.0, "temp_drift_c": -2.0, "soc0": 0.2},
    ]


# aliases: the BatteryConfig field named "plant" shadows the module inside
# the class body, so the factories must be bound beforehand
_default_plant = plant.default_plant_config
_default_am = plant.default_params


@dataclass
class BatteryConfig:
    plant: plant.PlantConfig = field(default_factory=_default_plant)
    am: plant.EquivCircuitParams = field(default_factory=_default_am)
    seed: int = 0
    n_train_cycles: int = 12
    cycle_seconds: float = 300.0
    gen_rate_hz: float = 100.0
    target_rate_hz: float = 20.0
    cutoff_hz: float = 10.0
    train_amp_a: float = 1.6
    burst_prob: float = 0.08
    burst_scale: float = 2.5
    max_c_rate: float = 2.0
    soc0_range: tuple[float, float] = (0.45, 0.7)
    temp_base_range_c: tuple[float, float] = (20.0, 30.0)
    temp_drift_range_c: tuple[float, float] = (-2.0, 2.0)
    val_specs: list = field(default_factory=_default_val_specs)
    grid_candidates: tuple = (11, 17, 23)
    grid_subset: int = 1500
    grid_epochs: int = 60
    lm_epochs: int = 150
    lm_restarts: int = 3
    rtrl_epochs: int = 30
    rtrl_restarts: int = 1
    envelope_subset: int = 1500
    tune_subset: int = 600
    nu_grid: tuple = (0.05, 0.1, 0.2)
    sigma_grid: tuple = (0.5, 0.8, 1.2, 1.8)
    probe_count: int = 2000
    bias_offset: float = 0.0
    gate_gamma: float = 2.0
    gate_variant: str = "sigmoid"
    out_dir: str | None = None


def _make_cycle(config: BatteryConfig, drive_seed: int, plant_seed: int,
                amp_a: float, temp_base_c: float, temp_drift_c: float,
                soc0: float) -> signal.TimeSeries:
    """Generate at the fast rate, push through the plant, decimate."""
    current, temperature = gen_drive_cycle(
        drive_seed, config.cycle_seconds, config.gen_rate_hz, amp_a,
        temp_base_c, temp_drift_c, config.burst_prob, config.burst_scale,
        max_current_a=config.max_c_rate * config.plant.base.capacity_ah)
    plant_cfg = replace(config.plant, seed=plant_seed)
    raw = plant.simulate_plant(plant_cfg, current, temperature, soc0,
                               1.0 / config.gen_rate_hz)
    return signal.antialias_downsample(raw, config.cutoff_hz, config.target_rate_hz)


def _with_error_channel(config: BatteryConfig, measured: signal.TimeSeries) -> signal.TimeSeries:
    dt = 1.0 / measured.sample_rate_hz
    am = plant.simulate_am(config.am, measured.channel("current"),
                           measured.channel("temperature"),
                           float(measured.channel("soc")[0]), dt)
    return compose.compute_error_channel(measured, am.voltage)


def _projection_3d(ts: signal.TimeSeries) -> np.ndarray:
    return np.column_stack([ts.channel("current"), ts.channel("temperature"),
                            ts.channel("soc")])


def select_edge_cycles(dataset: signal.Dataset, hull, k: int) -> list[tuple[str, float]]:
    """Rank cycles by the fraction of (current, temperature, soc) samples
    inside the hull; the k lowest fractions come first, ties by name."""
    if not dataset.cycles:
        raise PreconditionError("empty dataset")
    if k < 1 or k > len(dataset.cycles):
        raise PreconditionError(f"k={k} outside [1, {len(dataset.cycles)}]")
    ranked = []
    for name, ts in dataset.cycles.items():
        frac = float(np.mean(envelope.hull_contains(hull, _projection_3d(ts))))
        ranked.append((name, frac))
    ranked.sort(key=lambda item: (item[1], item[0]))
    return ranked[:k]


def run_battery_experiment(config: BatteryConfig) -> dict:
    """Full synthetic study: plant corpus, NARX training, envelopes, and
    the four-variant validation table."""
    master = np.random.default_rng(config.seed)
    dt = 1.0 / config.target_rate_hz
    spec = netdyn.NarxSpec()

    train_cycles: dict[str, signal.TimeSeries] = {}
    for idx in range(config.n_train_cycles):
        amp = config.train_amp_a
        temp_base = float(master.uniform(*config.temp_base_range_c))
        temp_drift = float(master.uniform(*config.temp_drift_range_c))
        soc0 = float(master.uniform(*config.soc0_range))
        measured = _make_cycle(config, config.seed + 100 + idx, config.seed + 500 + idx,
                               amp, temp_base, temp_drift, soc0)
        train_cycles[f"train{idx:02d}"] = _with_error_channel(config, measured)
    train_list = list(train_cycles.values())

    # hidden-size selection on a space-filling subset, then the two-stage fit
    grid_opts = netdyn.TrainOptions(max_epochs=config.grid_epochs, restarts=1,
                                    seed=config.seed + 11)
    grid = netdyn.grid_search_neurons(train_list, config.grid_subset,
                                      config.grid_candidates, grid_opts, spec)
    lm_opts = netdyn.TrainOptions(max_epochs=config.lm_epochs, restarts=config.lm_restarts,
                                  seed=config.seed + 12)
    X = np.vstack([netdyn.narx_regressors(spec, ts)[0] for ts in train_list])
    Y = np.concatenate([netdyn.narx_regressors(spec, ts)[1] for ts in train_list])
    net0 = netdyn.init_narx_model(spec, train_list, grid.best_hidden, config.seed + 12)
    lm_fit = netdyn.train_lm(net0, X, Y, lm_opts)
    rtrl_opts = netdyn.TrainOptions(max_epochs=config.rtrl_epochs, restarts=config.rtrl_restarts,
                                    seed=config.seed + 13)
    rtrl_fit = netdyn.train_rtrl(lm_fit.model, spec, train_list, rtrl_opts)
    net = rtrl_fit.model
    e_all = np.concatenate([ts.channel("error") for ts in train_list])
    spec = replace(spec, sat_bound=10.0 * float(np.max(np.abs(e_all))))

    # envelopes on the regressor space
    env_idx = signal.space_filling_subset(X, min(config.envelope_subset, len(X)),
                                          seed=config.seed + 14)
    x_env = X[env_idx]
    hull5 = envelope.build_hull(x_env)
    tune_idx = signal.space_filling_subset(x_env, min(config.tune_subset, len(x_env)),
                                           seed=config.seed + 15)
    tuned = envelope.tune_ocsvm(x_env[tune_idx], config.nu_grid, config.sigma_grid,
                                hull5, probe_count=config.probe_count,
                                seed=config.seed + 16, tol=1e-7)
    ocsvm = envelope.train_ocsvm(x_env, tuned.nu, tuned.sigma, tol=1e-7)
    ocsvm.bias_offset = config.bias_offset
    hull3 = envelope.hull_3d(np.vstack([_projection_3d(ts) for ts in train_list]))

    # validation cycles, edge-ranked
    val_cycles: dict[str, signal.TimeSeries] = {}
    for idx, vs in enumerate(config.val_specs):
        measured = _make_cycle(config, config.seed + 900 + idx, config.seed + 950 + idx,
                               vs["amp_a"], vs["temp_base_c"], vs["temp_drift_c"],
                               vs["soc0"])
        val_cycles[f"val{idx}"] = _with_error_channel(config, measured)
    val_ds = signal.Dataset(val_cycles, metadata={"role": "validation"})
    edge_rank = select_edge_cycles(val_ds, hull3, k=len(val_cycles))

    gate_cfg = envelope.GateConfig(gamma=config.gate_gamma, variant=config.gate_variant)
    hybrids = {
        "ecm": compose.HybridModel(config.am, net, spec, envelope=None, gate=gate_cfg),
        "ecm_ocsvm": compose.HybridModel(config.am, net, spec, envelope=ocsvm, gate=gate_cfg),
        "ecm_hull": compose.HybridModel(config.am, net, spec, envelope=hull5,
                                        gate=envelope.GateConfig(variant="hard")),
    }

    per_variant: dict[str, dict[str, compose.MetricsReport]] = {v: {} for v in BATTERY_VARIANTS}
    traces: list[dict] = []
    for name, _ in edge_rank:
        ts = val_cycles[name]
        cur = ts.channel("current")
        tmp = ts.channel("temperature")
        v_meas = ts.channel("voltage")
        soc0 = float(ts.channel("soc")[0])
        pts3 = _projection_3d(ts)
        am_res = plant.simulate_am(config.am, cur, tmp, soc0, dt)
        per_variant["am"][name] = compose.evaluate(am_res.voltage, v_meas,
                                                   hull=hull3, regressors=pts3)
        trace = {"name": name, "sample_rate_hz": ts.sample_rate_hz,
                 "columns": {"i_a": cur, "temp_c": tmp, "soc": ts.channel("soc"),
                             "v_meas": v_meas, "v_am": am_res.voltage}}
        for variant in ("ecm", "ecm_ocsvm", "ecm_hull"):
            sim = compose.hybrid_simulate(hybrids[variant], cur, tmp, soc0, dt)
            per_variant[variant][name] = compose.evaluate(sim.y_hat, v_meas,
                                                          hull=hull3, regressors=pts3)
            trace["columns"][f"v_{variant}"] = sim.y_hat
            trace["columns"][f"e_{variant}"] = sim.e_dd
            if variant == "ecm_ocsvm":
                trace["columns"]["f_oc"] = sim.f_oc
        traces.append(trace)

    rows: list[dict] = []
    aggregates: dict[str, compose.MetricsReport] = {}
    for variant in BATTERY_VARIANTS:
        agg = compose.aggregate(per_variant[variant])
        aggregates[variant] = agg
        rows.extend(compose.report_rows(variant, agg))

    scatter = np.vstack([_projection_3d(ts) for ts in train_list])[::20]
    report = {
        "rows": rows,
        "aggregates": aggregates,
        "edge_rank": edge_rank,
        "best_hidden": grid.best_hidden,
        "grid_scores": grid.scores,
        "nu": tuned.nu,
        "sigma": tuned.sigma,
        "lm_trace": lm_fit.trace,
        "rtrl_trace": rtrl_fit.trace,
        "sat_bound": spec.sat_bound,
        "train_scatter": scatter,
        "val_projections": {name: _projection_3d(ts) for name, ts in val_cycles.items()},
    }
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        path = os.path.join(config.out_dir, "battery_report.csv")
        compose.write_report_csv(path, rows)
        report["csv_path"] = path
        trace_paths = []
        for trace in traces:
            tp = os.path.join(config.out_dir, f"trace_{trace['name']}.csv")
            _write_trace_csv(tp, trace)
            trace_paths.append(tp)
        report["trace_paths"] = trace_paths
    report["traces"] = traces
    return report


def _write_trace_csv(path: str, trace: dict) -> None:
    cols = list(trace["columns"])
    arrays = [np.asarray(trace["columns"][c], dtype=float) for c in cols]
    dt = 1.0 / trace["sample_rate_hz"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["t"] + cols) + "\n")
        for k in range(len(arrays[0])):
            cells = [repr(k * dt)] + [repr(float(a[k])) for a in arrays]
            fh.write(",".join(cells) + "\n")


def load_trace_csv(path: str) -> dict:
    """Inverse of the trace writer (used by the standalone plot command)."""
    import csv as _csv
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        body = [[float(cell) for cell in row] for row in reader if row]
    data = np.asarray(body)
    if data.size == 0 or header[0] != "t":
        raise PreconditionError(f"{path}: not a trace file")
    columns = {name: data[:, i] for i, name in enumerate(header) if i > 0}
    rate = 1.0 / (data[1, 0] - data[0, 0]) if len(data) > 1 else 1.0
    name = os.path.splitext(os.path.basename(path))[0]
    if name.startswith("trace_"):
        name = name[len("trace_"):]
    return {"name": name, "sample_rate_hz": rate, "columns": columns}


# ---------------------------------------------------------------------------
# plotting

def _matplotlib():
    import matplotlib
    matplotlib.use("Agg", force=True)
    matplotlib.rcParams["svg.hashsalt"] = "battgate"
    matplotlib.rcParams["svg.fonttype"] = "path"
    import matplotlib.pyplot as plt
    return plt


def emit_plots(report: dict, traces: list[dict], out_dir: str) -> list[str]:
    """Render the scatter view (when projections are present) and one trace
    panel per cycle as deterministic SVG files."""
    if not traces:
        raise PreconditionError("empty trace list")
    plt = _matplotlib()
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    scatter = report.get("train_scatter") if report else None
    if scatter is not None:
        fig = plt.figure(figsize=(6.0, 5.0))
        ax = fig.add_subplot(projection="3d")
        sc = np.asarray(scatter)
        ax.scatter(sc[:, 0], sc[:, 1], sc[:, 2], s=4, c="0.55", label="training")
        for name, pts in (report.get("val_projections") or {}).items():
            p = np.asarray(pts)
            ax.plot(p[::10, 0], p[::10, 1], p[::10, 2], lw=0.8, label=name)
        ax.set_xlabel("current [A]")
        ax.set_ylabel("temperature [degC]")
        ax.set_zlabel("soc")
        ax.legend(loc="upper left", fontsize=7)
        path = os.path.join(out_dir, "scatter_3d.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)

    for trace in traces:
        cols = trace["columns"]
        n = len(next(iter(cols.values())))
        t = np.arange(n) / trace["sample_rate_hz"]
        fig, axes = plt.subplots(3, 1, figsize=(7.0, 6.5), sharex=True)
        if "i_a" in cols:
            axes[0].plot(t, cols["i_a"], lw=0.7, color="tab:blue")
        axes[0].set_ylabel("current [A]")
        for key, style in (("v_meas", {"color": "0.3", "lw": 0.9}),
                           ("v_hat", {"color": "tab:cyan", "lw": 0.7}),
                           ("v_am", {"color": "tab:orange", "lw": 0.7}),
                           ("v_ecm", {"color": "tab:green", "lw": 0.7}),
                           ("v_ecm_ocsvm", {"color": "tab:red", "lw": 0.7}),
                           ("v_ecm_hull", {"color": "tab:purple", "lw": 0.7})):
            if key in cols:
                axes[1].plot(t, cols[key], label=key, **style)
        axes[1].set_ylabel("voltage [V]")
        if axes[1].get_legend_handles_labels()[0]:
            axes[1].legend(loc="upper right", fontsize=6)
        for key in ("e_ecm", "e_ecm_ocsvm", "e_ecm_hull"):
            if key in cols:
                axes[2].plot(t, cols[key], lw=0.7, label=key)
        axes[2].set_ylabel("compensation [V]")
        axes[2].set_xlabel("time [s]")
        if axes[2].get_legend_handles_labels()[0]:
            axes[2].legend(loc="upper right", fontsize=6)
        fig.suptitle(trace["name"])
        path = os.path.join(out_dir, f"trace_{trace['name']}.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
