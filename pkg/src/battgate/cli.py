"""Command-line front end.

Every subcommand reads an optional YAML config, applies the explicit flag
overrides (--seed, --out, --gate, --variant), runs, and exits 0 on success.
Failures print a single machine-parsable ``error: <Type>: <message>`` line
on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields, replace

import numpy as np
import yaml

from . import bench, compose, envelope, netdyn, plant, signal, store
from .errors import BattgateError, PreconditionError, SchemaError


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: config must be a mapping")
    return data


def _build_dataclass(cls, cfg: dict, special: dict | None = None):
    """Instantiate a config dataclass from a YAML dict, rejecting unknown
    keys so typos fail loudly."""
    special = special or {}
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in cfg.items():
        if key not in names:
            raise SchemaError(f"unknown config key {key!r} for {cls.__name__}")
        kwargs[key] = special[key](value) if key in special else value
    return cls(**kwargs)


def _am_params(cfg: dict) -> plant.EquivCircuitParams:
    spec = cfg.get("am")
    if spec is None:
        return plant.default_params()
    if isinstance(spec, str):
        _, _, payload = store.load_document(spec, kind="ecm-params")
        return plant.params_from_payload(payload)
    return plant.params_from_payload(spec)


def _load_cycles(cfg: dict) -> list[signal.TimeSeries]:
    paths = cfg.get("data")
    if not paths:
        raise SchemaError("config must list input CSVs under 'data'")
    if isinstance(paths, str):
        paths = [paths]
    rate = float(cfg.get("sample_rate_hz", 20.0))
    return [signal.load_csv(p, sample_rate_hz=rate) for p in paths]


def _ensure_error_channel(cfg: dict, cycles: list[signal.TimeSeries]) -> list[signal.TimeSeries]:
    if all("error" in ts.channels for ts in cycles):
        return cycles
    params = _am_params(cfg)
    out = []
    for ts in cycles:
        if "error" in ts.channels:
            out.append(ts)
            continue
        dt = 1.0 / ts.sample_rate_hz
        am = plant.simulate_am(params, ts.channel("current"), ts.channel("temperature"),
                               float(ts.channel("soc")[0]), dt)
        out.append(compose.compute_error_channel(ts, am.voltage))
    return out


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommand bodies

def _cmd_gen_data(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = _out_dir(args)
    n_cycles = int(cfg.get("n_cycles", 2))
    seconds = float(cfg.get("seconds", 60.0))
    rate = float(cfg.get("rate_hz", 100.0))
    amp = float(cfg.get("amp_a", 1.6))
    plant_cfg = (plant.plant_from_payload(cfg["plant"]) if "plant" in cfg
                 else plant.default_plant_config())
    downsample = bool(cfg.get("downsample", True))
    cutoff = float(cfg.get("cutoff_hz", 10.0))
    target = float(cfg.get("target_hz", 20.0))
    rng = np.random.default_rng(seed)
    written = []
    for idx in range(n_cycles):
        temp_base = float(rng.uniform(20.0, 30.0))
        soc0 = float(rng.uniform(0.45, 0.7))
        current, temperature = bench.gen_drive_cycle(seed + 100 + idx, seconds, rate,
                                                     amp, temp_base, 1.0)
        ts = plant.simulate_plant(replace(plant_cfg, seed=seed + 500 + idx),
                                  current, temperature, soc0, 1.0 / rate)
        if downsample:
            ts = signal.antialias_downsample(ts, cutoff, target)
        path = os.path.join(out, f"cycle{idx:02d}.csv")
        signal.save_csv(path, ts)
        written.append(path)
    store.save_document(os.path.join(out, "gen_meta.yaml"), "dataset-meta",
                        {"seed": seed, "n_cycles": n_cycles,
                         "sample_rate_hz": target if downsample else rate,
                         "files": [os.path.basename(p) for p in written]})
    for p in written:
        print(p)
    return 0


def _cmd_train_fnn(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = _out_dir(args)
    cycles = _ensure_error_channel(cfg, _load_cycles(cfg))
    spec = netdyn.NarxSpec()
    if "candidates" in cfg:
        grid_opts = netdyn.TrainOptions(max_epochs=int(cfg.get("grid_epochs", 60)),
                                        restarts=1, seed=seed)
        grid = netdyn.grid_search_neurons(cycles, int(cfg.get("subset", 1500)),
                                          tuple(cfg["candidates"]), grid_opts, spec)
        hidden = grid.best_hidden
    else:
        hidden = int(cfg.get("hidden", 17))
    lm_opts = netdyn.TrainOptions(max_epochs=int(cfg.get("lm_epochs", 150)),
                                  restarts=int(cfg.get("lm_restarts", 3)), seed=seed)
    X = np.vstack([netdyn.narx_regressors(spec, ts)[0] for ts in cycles])
    Y = np.concatenate([netdyn.narx_regressors(spec, ts)[1] for ts in cycles])
    model = netdyn.init_narx_model(spec, cycles, hidden, seed)
    fit = netdyn.train_lm(model, X, Y, lm_opts)
    final_loss = fit.trace[-1]
    model = fit.model
    if bool(cfg.get("rtrl", True)):
        rtrl_opts = netdyn.TrainOptions(max_epochs=int(cfg.get("rtrl_epochs", 30)),
                                        restarts=int(cfg.get("rtrl_restarts", 1)),
                                        seed=seed + 1)
        fit = netdyn.train_rtrl(model, spec, cycles, rtrl_opts)
        model = fit.model
        final_loss = fit.trace[-1]
    e_all = np.concatenate([ts.channel("error") for ts in cycles])
    spec = replace(spec, sat_bound=float(cfg.get("sat_factor", 10.0)) * float(np.max(np.abs(e_all))))
    path = os.path.join(out, "fnn.yaml")
    store.save_document(path, "mlp-model",
                        netdyn.model_to_payload(model, spec, {"hidden": hidden,
                                                              "final_loss": final_loss}))
    print(f"{path} hidden={hidden} loss={final_loss:.6e}")
    return 0


def _regressor_matrix(cfg: dict, cycles: list[signal.TimeSeries]) -> np.ndarray:
    projection = cfg.get("projection", "regressor")
    if projection == "regressor":
        cycles = _ensure_error_channel(cfg, cycles)
        spec = netdyn.NarxSpec()
        return np.vstack([netdyn.narx_regressors(spec, ts)[0] for ts in cycles])
    if projection == "operating":
        return np.vstack([np.column_stack([ts.channel("current"),
                                           ts.channel("temperature"),
                                           ts.channel("soc")]) for ts in cycles])
    raise SchemaError(f"unknown projection {projection!r}")


def _cmd_train_ocsvm(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = _out_dir(args)
    X = _regressor_matrix(cfg, _load_cycles(cfg))
    subset = int(cfg.get("subset", 1500))
    if len(X) > subset:
        X = X[signal.space_filling_subset(X, subset, seed=seed)]
    if "nu" in cfg and "sigma" in cfg:
        nu, sigma = float(cfg["nu"]), float(cfg["sigma"])
    else:
        hull = envelope.build_hull(X)
        tune_subset = int(cfg.get("tune_subset", 600))
        x_tune = X if len(X) <= tune_subset else X[signal.space_filling_subset(X, tune_subset, seed=seed + 1)]
        nu, sigma, _ = envelope.tune_ocsvm(x_tune, tuple(cfg.get("nu_grid", (0.05, 0.1, 0.2))),
                                           tuple(cfg.get("sigma_grid", (0.5, 0.8, 1.2, 1.8))),
                                           hull, probe_count=int(cfg.get("probe_count", 2000)),
                                           seed=seed + 2, tol=1e-7)
    model = envelope.train_ocsvm(X, nu, sigma, tol=float(cfg.get("tol", 1e-7)))
    model.bias_offset = float(cfg.get("bias_offset", 0.0))
    path = os.path.join(out, "ocsvm.yaml")
    store.save_document(path, "ocsvm-model", envelope.ocsvm_to_payload(model))
    print(f"{path} nu={nu} sigma={sigma} sv={len(model.alphas)}")
    return 0


def _cmd_hull(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out = _out_dir(args)
    X = _regressor_matrix(cfg, _load_cycles(cfg))
    subset = int(cfg.get("subset", 1500))
    if len(X) > subset:
        X = X[signal.space_filling_subset(X, subset, seed=seed)]
    hull = envelope.build_hull(X)
    path = os.path.join(out, "hull.yaml")
    store.save_document(path, "hull-model", envelope.hull_to_payload(hull))
    n_facets = 0 if hull.facets is None else len(hull.facets)
    print(f"{path} dim={hull.dim} vertices={len(hull.vertices)} facets={n_facets}")
    return 0


def _load_envelope(path: str):
    kind, _, payload = store.load_document(path)
    if kind == "ocsvm-model":
        return envelope.ocsvm_from_payload(payload)
    if kind == "hull-model":
        return envelope.hull_from_payload(payload)
    raise SchemaError(f"{path}: expected an envelope model, got kind {kind!r}")


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    cycles = _load_cycles(cfg)
    if len(cycles) != 1:
        raise PreconditionError("simulate expects exactly one input cycle")
    ts = cycles[0]
    params = _am_params(cfg)
    variant = args.variant or cfg.get("variant", "gated" if "envelope" in cfg else "ecm")
    dt = 1.0 / ts.sample_rate_hz
    soc0 = float(ts.channel("soc")[0])
    if variant == "am":
        res = plant.simulate_am(params, ts.channel("current"), ts.channel("temperature"),
                                soc0, dt)
        columns = {"v_hat": res.voltage}
    elif variant in ("ecm", "gated"):
        if "fnn" not in cfg:
            raise SchemaError("config must point at a trained net under 'fnn'")
        _, _, payload = store.load_document(cfg["fnn"], kind="mlp-model")
        net, spec = netdyn.model_from_payload(payload)
        if spec is None:
            spec = netdyn.NarxSpec()
        env = None
        if variant == "gated":
            if "envelope" not in cfg:
                raise SchemaError("gated simulation needs an 'envelope' model path")
            env = _load_envelope(cfg["envelope"])
        gate_name = args.gate or cfg.get("gate", "sigmoid")
        gate_cfg = envelope.GateConfig(gamma=float(cfg.get("gamma", 2.0)), variant=gate_name)
        hybrid = compose.HybridModel(params, net, spec, envelope=env, gate=gate_cfg)
        res = compose.hybrid_simulate(hybrid, ts.channel("current"),
                                      ts.channel("temperature"), soc0, dt,
                                      e0=float(cfg.get("e0", 0.0)))
        columns = {"v_hat": res.y_hat, "e_dd": res.e_dd, "f_oc": res.f_oc}
    else:
        raise SchemaError(f"unknown variant {variant!r}")
    path = os.path.join(out, "sim.csv")
    trace = {"name": "sim", "sample_rate_hz": ts.sample_rate_hz,
             "columns": {"i_a": ts.channel("current"), "temp_c": ts.channel("temperature"),
                         "soc": ts.channel("soc"), **columns}}
    bench._write_trace_csv(path, trace)
    print(path)
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    if "data" not in cfg or "simulated" not in cfg:
        raise SchemaError("config needs 'data' (measured CSV) and 'simulated' (sim CSV)")
    measured = _load_cycles({"data": cfg["data"],
                             "sample_rate_hz": cfg.get("sample_rate_hz", 20.0)})[0]
    sim = bench.load_trace_csv(cfg["simulated"])
    if "v_hat" not in sim["columns"]:
        raise SchemaError(f"{cfg['simulated']}: no v_hat column")
    y_hat = sim["columns"]["v_hat"]
    y = measured.channel("voltage")
    if len(y_hat) != len(y):
        raise PreconditionError(f"length mismatch: measured {len(y)} vs simulated {len(y_hat)}")
    metrics = compose.evaluate(y_hat, y)
    rows = [{"variant": cfg.get("label", "sim"), "cycle": "all", "rmse": metrics.rmse,
             "max_err": metrics.max_abs_error, "max_err_norm": metrics.normalized_max_error,
             "inside_frac": None}]
    path = os.path.join(out, "metrics.csv")
    compose.write_report_csv(path, rows)
    print(f"{path} rmse={metrics.rmse:.6e} max={metrics.max_abs_error:.6e}")
    return 0


def _poly_config(cfg: dict, args) -> bench.ExperimentConfig:
    special = {"poly": lambda d: bench.PolySpec(**d)}
    config = _build_dataclass(bench.ExperimentConfig, cfg, special)
    if args.seed is not None:
        config = replace(config, seeds=tuple(range(args.seed, args.seed + len(config.seeds))))
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    if args.gate is not None:
        config = replace(config, gate_variant=args.gate)
    if config.out_dir is None:
        config = replace(config, out_dir=".")
    return config


def _cmd_poly(args) -> int:
    config = _poly_config(_load_config(args.config), args)
    report = bench.run_poly_experiment(config)
    for variant in config.variants:
        print(f"{variant} mean_rmse={report['means'][variant]:.6f}")
    if report["n_failed"]:
        print(f"failed_seeds={report['n_failed']}")
    print(report["csv_path"])
    return 0


def _battery_config(cfg: dict, args) -> bench.BatteryConfig:
    special = {"plant": plant.plant_from_payload, "am": plant.params_from_payload}
    config = _build_dataclass(bench.BatteryConfig, cfg, special)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    if args.gate is not None:
        config = replace(config, gate_variant=args.gate)
    if config.out_dir is None:
        config = replace(config, out_dir=".")
    return config


def _cmd_battery(args) -> int:
    cfg = _load_config(args.config)
    make_plots = bool(cfg.pop("plots", False))
    config = _battery_config(cfg, args)
    report = bench.run_battery_experiment(config)
    print(f"hidden={report['best_hidden']} nu={report['nu']} sigma={report['sigma']}")
    for name, frac in report["edge_rank"]:
        print(f"{name} inside_frac={frac:.4f}")
    for variant, agg in report["aggregates"].items():
        print(f"{variant} rmse={agg.rmse:.6e} max={agg.max_abs_error:.6e}")
    print(report["csv_path"])
    if make_plots:
        for p in bench.emit_plots(report, report["traces"], config.out_dir):
            print(p)
    return 0


def _cmd_plot(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    paths = cfg.get("traces")
    if not paths and cfg.get("trace_dir"):
        d = cfg["trace_dir"]
        paths = sorted(os.path.join(d, f) for f in os.listdir(d)
                       if f.startswith("trace_") and f.endswith(".csv"))
    if not paths:
        raise SchemaError("config needs 'traces' (list of CSVs) or 'trace_dir'")
    traces = [bench.load_trace_csv(p) for p in paths]
    for p in bench.emit_plots({}, traces, out):
        print(p)
    return 0


# ---------------------------------------------------------------------------

_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train-fnn": _cmd_train_fnn,
    "train-ocsvm": _cmd_train_ocsvm,
    "hull": _cmd_hull,
    "simulate": _cmd_simulate,
    "evaluate": _cmd_evaluate,
    "poly-experiment": _cmd_poly,
    "battery-experiment": _cmd_battery,
    "plot": _cmd_plot,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="battgate",
                                     description="battery hybrid-model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--variant", default=None, help="model variant selector")
        p.add_argument("--gate", default=None, choices=list(envelope.GATE_VARIANTS),
                       help="gate variant override")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BattgateError as exc:
        msg = str(exc).replace("\n", "; ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    except (OSError, yaml.YAMLError) as exc:
        msg = str(exc).replace("\n", "; ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
