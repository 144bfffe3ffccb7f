"""Feedforward net, NARX wrappers, and damped Gauss-Newton training.

Training always runs in scaled space: regressors and targets are min-max
mapped to [-1, 1] (the scalings live on the model), the training loss is
the mean squared error of the scaled residuals, and both the one-step
(series-parallel) and free-run (parallel) trainers share one damped
Gauss-Newton core.

Parameter vectors are ordered [W1 row-major, b1, W2, b2]; this order is
part of the serialization contract and of every Jacobian produced here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, PreconditionError, SchemaError
from .signal import Dataset, ScalingInfo, TimeSeries, space_filling_subset


@dataclass
class MlpModel:
    """Three-layer net: tanh hidden layer, identity output."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    input_scaling: ScalingInfo
    output_scaling: ScalingInfo

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.b2 = float(self.b2)
        if self.w1.ndim != 2:
            raise SchemaError(f"w1 must be 2-D (hidden, inputs), got shape {self.w1.shape}")
        h = self.w1.shape[0]
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise SchemaError(f"b1/w2 must have length {h}, got {self.b1.shape}, {self.w2.shape}")
        for name, arr in (("w1", self.w1), ("b1", self.b1), ("w2", self.w2)):
            if not np.all(np.isfinite(arr)):
                raise SchemaError(f"{name} contains non-finite parameters")
        if not math.isfinite(self.b2):
            raise SchemaError("b2 is non-finite")
        if self.input_scaling.n_cols != self.n_in:
            raise SchemaError(f"input scaling covers {self.input_scaling.n_cols} columns, net has {self.n_in}")
        if self.output_scaling.n_cols != 1:
            raise SchemaError("output scaling must cover exactly 1 column")

    @property
    def n_in(self) -> int:
        return self.w1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.n_in, self.n_hidden, 1]

    @property
    def n_params(self) -> int:
        return self.n_hidden * (self.n_in + 2) + 1


def pack_params(model: MlpModel) -> np.ndarray:
    return np.concatenate([model.w1.ravel(), model.b1, model.w2, [model.b2]])


def with_params(model: MlpModel, theta: np.ndarray) -> MlpModel:
    h, n_in = model.w1.shape
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n_params,):
        raise PreconditionError(f"parameter vector length {theta.shape} != {model.n_params}")
    w1 = theta[:h * n_in].reshape(h, n_in)
    b1 = theta[h * n_in:h * n_in + h]
    w2 = theta[h * n_in + h:h * n_in + 2 * h]
    return MlpModel(w1, b1, w2, float(theta[-1]), model.input_scaling, model.output_scaling)


def init_mlp(n_in: int, n_hidden: int, seed: int,
             input_scaling: ScalingInfo | None = None,
             output_scaling: ScalingInfo | None = None) -> MlpModel:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    if n_in < 1 or n_hidden < 1:
        raise PreconditionError(f"layer sizes must be >= 1, got n_in={n_in}, n_hidden={n_hidden}")
    rng = np.random.default_rng(seed)
    lim1 = 1.0 / math.sqrt(n_in)
    lim2 = 1.0 / math.sqrt(n_hidden)
    return MlpModel(
        w1=rng.uniform(-lim1, lim1, size=(n_hidden, n_in)),
        b1=rng.uniform(-lim1, lim1, size=n_hidden),
        w2=rng.uniform(-lim2, lim2, size=n_hidden),
        b2=float(rng.uniform(-lim2, lim2)),
        input_scaling=input_scaling or ScalingInfo.identity(n_in),
        output_scaling=output_scaling or ScalingInfo.identity(1),
    )


def _forward_scaled(w1, b1, w2, b2, xs):
    z = xs @ w1.T + b1
    h = np.tanh(z)
    return h @ w2 + b2, h


def _jacobian_scaled(w1, w2, xs, h):
    n, hid = h.shape
    g = (1.0 - h * h) * w2
    jw1 = (g[:, :, None] * xs[:, None, :]).reshape(n, hid * xs.shape[1])
    return np.hstack([jw1, g, h, np.ones((n, 1))])


def _as_batch(model: MlpModel, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    batch = np.atleast_2d(arr)
    if batch.shape[1] != model.n_in:
        raise PreconditionError(f"regressor width {batch.shape[1]} != model input width {model.n_in}")
    if not np.all(np.isfinite(batch)):
        raise PreconditionError("regressor contains non-finite values")
    return batch, single


def mlp_forward(model: MlpModel, x):
    """Descaled network output; a 1-D x gives a float, a matrix a vector."""
    batch, single = _as_batch(model, x)
    xs = model.input_scaling.transform(batch)
    ys, _ = _forward_scaled(model.w1, model.b1, model.w2, model.b2, xs)
    y = model.output_scaling.inverse(ys[:, None])[:, 0]
    return float(y[0]) if single else y


def mlp_jacobian(model: MlpModel, x):
    """Gradient of the raw (descaled) output w.r.t. [W1 row-major, b1, W2, b2]."""
    batch, single = _as_batch(model, x)
    xs = model.input_scaling.transform(batch)
    _, h = _forward_scaled(model.w1, model.b1, model.w2, model.b2, xs)
    j = _jacobian_scaled(model.w1, model.w2, xs, h) * float(model.output_scaling.half_span[0])
    return j[0] if single else j


@dataclass
class TrainOptions:
    max_epochs: int = 200
    stop_band: float = 1e-8
    stop_patience: int = 10
    lm_lambda0: float = 1e-2
    lm_lambda_up: float = 10.0
    lm_lambda_down: float = 0.5
    lm_lambda_max: float = 1e10
    restarts: int = 3
    sens_bound: float = 1e6
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise PreconditionError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not self.stop_band > 0:
            raise PreconditionError(f"stop_band must be > 0, got {self.stop_band}")
        if self.stop_patience < 1:
            raise PreconditionError(f"stop_patience must be >= 1, got {self.stop_patience}")
        if not self.lm_lambda_up > 1.0:
            raise PreconditionError(f"lm_lambda_up must be > 1, got {self.lm_lambda_up}")
        if not 0.0 < self.lm_lambda_down < 1.0:
            raise PreconditionError(f"lm_lambda_down must lie in (0, 1), got {self.lm_lambda_down}")
        if self.restarts < 1:
            raise PreconditionError(f"restarts must be >= 1, got {self.restarts}")


@dataclass
class TrainResult:
    model: MlpModel
    trace: list[float]
    restart_traces: list[list[float]] = field(default_factory=list)
    best_restart: int = 0
    halted: bool = False
    sensitivity_flag: bool = False

    def __iter__(self):
        # allows `model, trace = train_lm(...)`
        yield self.model
        yield self.trace


def _gauss_newton(theta0: np.ndarray, make_rj, loss_of, opts: TrainOptions):
    """Damped Gauss-Newton with non-strict step acceptance.

    make_rj(theta) -> (residuals, jacobian) in scaled space; loss_of(theta)
    is the cheap loss-only evaluation used while probing the damping
    factor.  Returns (best theta, accepted-loss trace, halted flag).
    """
    theta = np.array(theta0, dtype=float)
    loss = loss_of(theta)
    trace = [loss]
    lam = opts.lm_lambda0
    halted = False
    calm = 0
    eye = np.eye(len(theta))
    for _ in range(opts.max_epochs):
        r, jac = make_rj(theta)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        cand = None
        new_loss = math.inf
        while True:
            try:
                step = np.linalg.solve(jtj + lam * eye, jtr)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                trial = theta - step
                trial_loss = loss_of(trial)
                if math.isfinite(trial_loss) and trial_loss <= loss:
                    cand, new_loss = trial, trial_loss
                    break
            lam *= opts.lm_lambda_up
            if lam > opts.lm_lambda_max:
                break
        if cand is None:
            halted = True
            break
        change = loss - new_loss
        theta, loss = cand, new_loss
        lam = max(lam * opts.lm_lambda_down, 1e-14)
        trace.append(loss)
        calm = calm + 1 if change <= opts.stop_band else 0
        if calm >= opts.stop_patience:
            break
    return theta, trace, halted


def _restart_seeds(opts: TrainOptions) -> list[int]:
    return [opts.seed + 1000003 * r for r in range(opts.restarts)]


def _run_restarts(model: MlpModel, opts: TrainOptions, runner) -> TrainResult:
    """Shared restart policy: restart 0 keeps the given weights, later
    restarts re-draw them; the lowest final loss wins (ties:
    lowest restart index)."""
    outcomes = []
    for ridx, seed in enumerate(_restart_seeds(opts)):
        if ridx == 0:
            start = model
        else:
            start = init_mlp(model.n_in, model.n_hidden, seed,
                             model.input_scaling, model.output_scaling)
        theta, trace, halted = runner(start)
        outcomes.append((trace[-1], ridx, theta, trace, halted))
    best = min(outcomes, key=lambda o: (o[0], o[1]))
    _, ridx, theta, trace, halted = best
    return TrainResult(model=with_params(model, theta), trace=trace,
                       restart_traces=[o[3] for o in outcomes],
                       best_restart=ridx, halted=halted)


def train_lm(model: MlpModel, X, Y, opts: TrainOptions) -> TrainResult:
    """Levenberg-Marquardt fit of scaled targets; see _gauss_newton for the
    damping/stopping policy and TrainOptions for the band/patience rule."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    if len(X) != len(Y):
        raise PreconditionError(f"X rows {len(X)} != Y length {len(Y)}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise PreconditionError("training data contains non-finite values")
    xs = model.input_scaling.transform(X)
    ys_t = model.output_scaling.transform(Y[:, None])[:, 0]

    def make_rj(theta):
        m = with_params(model, theta)
        ys, h = _forward_scaled(m.w1, m.b1, m.w2, m.b2, xs)
        return ys - ys_t, _jacobian_scaled(m.w1, m.w2, xs, h)

    def loss_of(theta):
        m = with_params(model, theta)
        ys, _ = _forward_scaled(m.w1, m.b1, m.w2, m.b2, xs)
        return float(np.mean((ys - ys_t) ** 2))

    return _run_restarts(model, opts,
                         lambda start: _gauss_newton(pack_params(start), make_rj, loss_of, opts))


# ---------------------------------------------------------------------------
# NARX plumbing

#: Column order of the dynamic regressor (width 5, one output lag):
#: [u1(k), u1(k-1), u2(k), u3(k), e(k-1)] -> e(k)
REGRESSOR_COLUMNS = ("current", "current_lag1", "temperature", "soc", "error_lag1")
E_LAG_COL = 4


@dataclass
class NarxSpec:
    """First-order dynamic regressor wiring for the error channel."""

    exog_channels: tuple[str, str, str] = ("current", "temperature", "soc")
    lagged_exog: str = "current"
    sat_bound: float | None = None

    def __post_init__(self):
        if len(self.exog_channels) != 3 or self.lagged_exog not in self.exog_channels:
            raise SchemaError("regressor must use 3 exogenous channels with one of them lagged "
                              f"(width 5), got {self.exog_channels} / {self.lagged_exog}")
        if self.sat_bound is not None and not self.sat_bound > 0:
            raise SchemaError(f"sat_bound must be positive when set, got {self.sat_bound}")

    @property
    def width(self) -> int:
        return 5


def narx_regressors(spec: NarxSpec, ts: TimeSeries) -> tuple[np.ndarray, np.ndarray]:
    """Regressor matrix (rows k = 1..N-1) and one-step targets e(k) from a
    series with a measured error channel."""
    if ts.length < 2:
        raise PreconditionError("need at least 2 samples to form one regressor row")
    a, b, c = (ts.channel(ch) for ch in spec.exog_channels)
    lag = ts.channel(spec.lagged_exog)
    e = ts.channel("error")
    X = np.column_stack([a[1:], lag[:-1], b[1:], c[1:], e[:-1]])
    return X, e[1:].copy()


def narx_exog_matrix(spec: NarxSpec, ts: TimeSeries) -> np.ndarray:
    """Regressor matrix with the e(k-1) column zeroed; used by free-run
    simulation, which fills that column step by step."""
    if ts.length < 2:
        raise PreconditionError("need at least 2 samples")
    a, b, c = (ts.channel(ch) for ch in spec.exog_channels)
    lag = ts.channel(spec.lagged_exog)
    return np.column_stack([a[1:], lag[:-1], b[1:], c[1:], np.zeros(ts.length - 1)])


def narx_predict_series_parallel(model: MlpModel, spec: NarxSpec, ts: TimeSeries) -> np.ndarray:
    """One-step predictions e_hat(1..N-1) using the measured e(k-1) lags."""
    X, _ = narx_regressors(spec, ts)
    return mlp_forward(model, X)


@dataclass
class SimResult:
    errors: np.ndarray
    clamped: bool

    def __iter__(self):
        yield from self.errors


def narx_simulate_parallel(model: MlpModel, spec: NarxSpec, ts: TimeSeries,
                           e0: float = 0.0) -> SimResult:
    """Free-run simulation feeding back the model's own previous output.

    e_hat(0) := e0; output length equals the input length.  When
    spec.sat_bound is set, outputs exceeding it are clamped to +-bound and
    the run is flagged.
    """
    if ts.length == 1:
        return SimResult(np.array([float(e0)]), False)
    sims = _free_run_batch(model, spec, [ts], e0)
    return sims[0]


def _prep_cycle(model: MlpModel, spec: NarxSpec, ts: TimeSeries):
    """Scaled exog regressor block plus the affine feedback maps."""
    xs = model.input_scaling.transform(narx_exog_matrix(spec, ts))
    return xs


def _feedback_affines(model: MlpModel):
    """Affine maps between the scaled output, the raw error, and the scaled
    e(k-1) regressor slot (constant-column conventions: span 1, midpoint 0)."""
    out_hs = float(model.output_scaling.half_span[0])
    out_mid = float(model.output_scaling.midpoint[0])
    in_hs = float(model.input_scaling.half_span[E_LAG_COL])
    in_mid = float(model.input_scaling.midpoint[E_LAG_COL])
    return out_hs, out_mid, in_hs, in_mid


def _free_run_batch(model: MlpModel, spec: NarxSpec, cycles: list[TimeSeries],
                    e0: float) -> list[SimResult]:
    """Lockstep free-run over several cycles (scaled space internally)."""
    out_hs, out_mid, in_hs, in_mid = _feedback_affines(model)
    blocks = [_prep_cycle(model, spec, ts) for ts in cycles]
    lengths = [len(b) for b in blocks]
    m = max(lengths)
    nb = len(blocks)
    xs = np.zeros((nb, m, model.n_in))
    for i, b in enumerate(blocks):
        xs[i, :len(b), :] = b
    e_raw = np.full(nb, float(e0))
    outputs = np.zeros((nb, m))
    clamped = np.zeros(nb, dtype=bool)
    bound = spec.sat_bound
    for k in range(m):
        step = xs[:, k, :].copy()
        step[:, E_LAG_COL] = (e_raw - in_mid) / in_hs
        ys, _ = _forward_scaled(model.w1, model.b1, model.w2, model.b2, step)
        e_raw = ys * out_hs + out_mid
        if bound is not None:
            over = np.abs(e_raw) > bound
            if np.any(over):
                clamped |= over
                e_raw = np.clip(e_raw, -bound, bound)
        outputs[:, k] = e_raw
    results = []
    for i, n in enumerate(lengths):
        errors = np.concatenate([[float(e0)], outputs[i, :n]])
        results.append(SimResult(errors, bool(clamped[i])))
    return results


def _rtrl_pass(model: MlpModel, spec: NarxSpec, theta: np.ndarray,
               xs_pad: np.ndarray, lens: list[int], targets_pad: np.ndarray,
               e0: float, sens_bound: float, want_jac: bool):
    """Forward free-run over all cycles with (optionally) the sensitivity
    recursion S(k) = dF/dtheta + (dF/de_hat(k-1)) * S(k-1), S(0) = 0.

    Cycles run in lockstep (batch axis first); residuals are scaled-space
    (e_hat_s(k) - e_s(k)) for k = 1..N-1 and the fixed seed e_hat(0)
    carries no residual.  Returns (r, J or None, sens_flag) with rows
    ordered cycle by cycle, time-ascending.
    """
    m = with_params(model, theta)
    out_hs, out_mid, in_hs, in_mid = _feedback_affines(m)
    fb_slope = out_hs / in_hs
    bound = spec.sat_bound
    n_p = m.n_params
    nb, n_steps, _ = xs_pad.shape
    hid = m.n_hidden
    steps_left = np.asarray(lens)
    e_raw = np.full(nb, float(e0))
    sens = np.zeros((nb, n_p))
    r = np.zeros((nb, n_steps))
    jac = np.zeros((nb, n_steps, n_p)) if want_jac else None
    ones = np.ones((nb, 1))
    sens_flag = False
    for k in range(n_steps):
        x = xs_pad[:, k, :].copy()
        x[:, E_LAG_COL] = (e_raw - in_mid) / in_hs
        z = x @ m.w1.T + m.b1
        h = np.tanh(z)
        ys = h @ m.w2 + m.b2
        r[:, k] = ys - targets_pad[:, k]
        if want_jac:
            g = (1.0 - h * h) * m.w2
            rows = np.concatenate([
                (g[:, :, None] * x[:, None, :]).reshape(nb, hid * m.n_in),
                g, h, ones], axis=1)
            rows += ((g @ m.w1[:, E_LAG_COL]) * fb_slope)[:, None] * sens
            sens = rows
        e_raw = ys * out_hs + out_mid
        if bound is not None:
            over = np.abs(e_raw) > bound
            if np.any(over):
                e_raw = np.clip(e_raw, -bound, bound)
                r[over, k] = (e_raw[over] - out_mid) / out_hs - targets_pad[over, k]
                if want_jac:
                    sens[over] = 0.0
        if want_jac:
            jac[:, k, :] = sens
            active = k < steps_left
            if np.any(np.abs(sens[active]) > sens_bound):
                sens_flag = True
    r_all = np.concatenate([r[b, :n] for b, n in enumerate(lens)])
    j_all = np.vstack([jac[b, :n] for b, n in enumerate(lens)]) if want_jac else None
    return r_all, j_all, sens_flag


def _as_cycles(sequences) -> list[TimeSeries]:
    if isinstance(sequences, Dataset):
        return [sequences.cycles[name] for name in sequences.names()]
    if isinstance(sequences, TimeSeries):
        return [sequences]
    return list(sequences)


def train_rtrl(model: MlpModel, spec: NarxSpec, sequences, opts: TrainOptions,
               e0: float = 0.0) -> TrainResult:
    """Fit the free-run (parallel) simulation error over whole sequences.

    Gradients flow through the e_hat(k-1) feedback path via forward
    sensitivities, reset at each cycle start; the update and stopping
    rules are shared with train_lm.
    """
    cycles = _as_cycles(sequences)
    if not cycles:
        raise PreconditionError("no training cycles supplied")
    for ts in cycles:
        if ts.length < 2:
            raise PreconditionError("every cycle needs at least 2 samples")
    blocks = [_prep_cycle(model, spec, ts) for ts in cycles]
    targets = [model.output_scaling.transform(ts.channel("error")[1:][:, None])[:, 0]
               for ts in cycles]
    lens = [len(b) for b in blocks]
    n_steps = max(lens)
    xs_pad = np.zeros((len(blocks), n_steps, model.n_in))
    targets_pad = np.zeros((len(blocks), n_steps))
    for b, (xs, tg) in enumerate(zip(blocks, targets)):
        xs_pad[b, :len(xs)] = xs
        targets_pad[b, :len(tg)] = tg
    flag_box = {"sens": False}

    def make_rj(theta):
        r, jac, flagged = _rtrl_pass(model, spec, theta, xs_pad, lens, targets_pad,
                                     e0, opts.sens_bound, want_jac=True)
        flag_box["sens"] = flag_box["sens"] or flagged
        return r, jac

    def loss_of(theta):
        r, _, _ = _rtrl_pass(model, spec, theta, xs_pad, lens, targets_pad,
                             e0, opts.sens_bound, want_jac=False)
        return float(np.mean(r * r))

    result = _run_restarts(model, opts,
                           lambda start: _gauss_newton(pack_params(start), make_rj, loss_of, opts))
    result.sensitivity_flag = flag_box["sens"]
    return result


def free_run_rmse(model: MlpModel, spec: NarxSpec, ts: TimeSeries, e0: float = 0.0) -> float:
    """Raw-space RMSE of the free-run against the measured error channel."""
    sim = narx_simulate_parallel(model, spec, ts, e0)
    e = ts.channel("error")
    return float(np.sqrt(np.mean((sim.errors - e) ** 2)))


def init_narx_model(spec: NarxSpec, sequences, n_hidden: int, seed: int) -> MlpModel:
    """Fresh net with scalings fitted on the given cycles.

    The e(k-1) regressor column and the output share one scaling (fitted on
    the full measured error), so the free-run feedback maps scaled output
    to scaled input without distortion.
    """
    cycles = _as_cycles(sequences)
    xs = np.vstack([narx_regressors(spec, ts)[0] for ts in cycles])
    e_all = np.concatenate([ts.channel("error") for ts in cycles])
    in_scale = ScalingInfo.fit(xs)
    e_scale = ScalingInfo.fit(e_all[:, None])
    in_scale.col_min[E_LAG_COL] = e_scale.col_min[0]
    in_scale.col_max[E_LAG_COL] = e_scale.col_max[0]
    in_scale.constant[E_LAG_COL] = e_scale.constant[0]
    return init_mlp(spec.width, n_hidden, seed, in_scale, e_scale)


@dataclass
class GridSearchResult:
    best_hidden: int
    scores: list[tuple[int, float]]


def grid_search_neurons(sequences, subset_size: int, candidates, opts: TrainOptions,
                        spec: NarxSpec | None = None) -> GridSearchResult:
    """Pick the hidden-layer width by free-run validation RMSE.

    Candidates train with series-parallel LM on a space-filling subset of
    the pooled regressor rows; the last cycle (or the last quarter of a
    single cycle) is held out and scored by free-run RMSE.  Failed
    candidates score nan and are skipped; ties go to the smaller network.
    """
    candidates = list(candidates)
    if not candidates:
        raise PreconditionError("candidate list is empty")
    spec = spec or NarxSpec()
    cycles = _as_cycles(sequences)
    if len(cycles) >= 2:
        train_cycles, val_cycle = cycles[:-1], cycles[-1]
    else:
        ts = cycles[0]
        cut = max(2, (3 * ts.length) // 4)
        if ts.length - cut < 2:
            raise PreconditionError("single cycle too short to hold out a validation slice")
        train_cycles, val_cycle = [ts.slice(0, cut)], ts.slice(cut, ts.length)
    X = np.vstack([narx_regressors(spec, ts)[0] for ts in train_cycles])
    Y = np.concatenate([narx_regressors(spec, ts)[1] for ts in train_cycles])
    if subset_size < len(X):
        idx = space_filling_subset(X, max(2, subset_size), seed=opts.seed)
        X, Y = X[idx], Y[idx]
    scores: list[tuple[int, float]] = []
    for h in candidates:
        try:
            m0 = init_narx_model(spec, train_cycles, h, opts.seed)
            fit = train_lm(m0, X, Y, opts)
            score = free_run_rmse(fit.model, spec, val_cycle)
        except (PreconditionError, ConvergenceError, np.linalg.LinAlgError):
            score = math.nan
        scores.append((int(h), float(score)))
    valid = [(s, h) for h, s in scores if math.isfinite(s)]
    if not valid:
        raise ConvergenceError("every grid-search candidate failed")
    _, best = min(valid)
    return GridSearchResult(best_hidden=best, scores=scores)


# ---------------------------------------------------------------------------
# serialization

def model_to_payload(model: MlpModel, spec: NarxSpec | None = None,
                     meta: dict | None = None) -> dict:
    payload = {
        "layer_sizes": model.layer_sizes,
        "w1": model.w1,
        "b1": model.b1,
        "w2": model.w2,
        "b2": model.b2,
        "input_scaling": model.input_scaling.to_payload(),
        "output_scaling": model.output_scaling.to_payload(),
    }
    if spec is not None:
        payload["narx"] = {"exog_channels": list(spec.exog_channels),
                           "lagged_exog": spec.lagged_exog,
                           "sat_bound": spec.sat_bound}
    if meta:
        payload["meta"] = meta
    return payload


def model_from_payload(payload: dict) -> tuple[MlpModel, NarxSpec | None]:
    model = MlpModel(
        w1=np.asarray(payload["w1"], dtype=float),
        b1=np.asarray(payload["b1"], dtype=float),
        w2=np.asarray(payload["w2"], dtype=float),
        b2=float(payload["b2"]),
        input_scaling=ScalingInfo.from_payload(payload["input_scaling"]),
        output_scaling=ScalingInfo.from_payload(payload["output_scaling"]),
    )
    if model.layer_sizes != [int(v) for v in payload["layer_sizes"]]:
        raise SchemaError(f"declared layer sizes {payload['layer_sizes']} != arrays {model.layer_sizes}")
    spec = None
    if "narx" in payload:
        nd = payload["narx"]
        sat = nd.get("sat_bound")
        spec = NarxSpec(exog_channels=tuple(nd["exog_channels"]),
                        lagged_exog=nd["lagged_exog"],
                        sat_bound=None if sat is None else float(sat))
    return model, spec
