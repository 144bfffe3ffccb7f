"""Equivalent-circuit battery model and a richer synthetic plant.

Sign conventions, fixed here and used by every other module: the
``current`` channel is positive while charging (it feeds the coulomb
counter directly) and the terminal voltage uses the discharge current
i_dis = -i,

    v(k) = OCV(soc(k)) - i_dis(k)*R0 - v_c1(k) - v_c2(k).

RC branch states advance by the exact zero-order-hold map
v <- v*exp(-dt/tau) + R*i_dis*(1 - exp(-dt/tau)).  The state seen at
sample k is the one accumulated from samples 0..k-1, so a current step
at t=0 gives v_c(k) = R*i_dis*(1 - exp(-k*dt/tau)) exactly, while soc(k)
includes the charge moved by sample k itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import PreconditionError, SchemaError
from .signal import TimeSeries, awgn


def _axis_locate(grid: np.ndarray, q: np.ndarray):
    """Left index, fractional weight and out-of-range mask for one axis.

    A singleton axis means the map is constant along it: weight 0 and no
    clamp flag regardless of the query.
    """
    n = len(grid)
    if n == 1:
        z = np.zeros(q.shape)
        return z.astype(int), z, np.zeros(q.shape, dtype=bool)
    outside = (q < grid[0]) | (q > grid[-1])
    qc = np.clip(q, grid[0], grid[-1])
    i0 = np.clip(np.searchsorted(grid, qc, side="right") - 1, 0, n - 2)
    w = (qc - grid[i0]) / (grid[i0 + 1] - grid[i0])
    return i0, w, outside


@dataclass
class GridMap:
    """Trilinear lookup over a rectilinear (soc, temperature, current) grid.

    Out-of-range queries clamp to the grid boundary and raise a diagnostic
    flag rather than an error.
    """

    soc: np.ndarray
    temp_c: np.ndarray
    current_a: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.soc = np.asarray(self.soc, dtype=float)
        self.temp_c = np.asarray(self.temp_c, dtype=float)
        self.current_a = np.asarray(self.current_a, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        for name, ax in (("soc", self.soc), ("temp_c", self.temp_c), ("current_a", self.current_a)):
            if ax.ndim != 1 or len(ax) < 1 or np.any(np.diff(ax) <= 0):
                raise SchemaError(f"grid axis {name} must be 1-D strictly increasing, got {ax}")
        want = (len(self.soc), len(self.temp_c), len(self.current_a))
        if self.values.shape != want:
            raise SchemaError(f"values shape {self.values.shape} != grid shape {want}")
        if not np.all(np.isfinite(self.values)):
            raise SchemaError("grid values must be finite")

    @classmethod
    def constant(cls, value: float) -> "GridMap":
        return cls(np.array([0.5]), np.array([25.0]), np.array([0.0]),
                   np.full((1, 1, 1), float(value)))

    def evaluate(self, soc, temp_c, current_a) -> tuple[np.ndarray, bool]:
        s, t, c = np.broadcast_arrays(np.atleast_1d(np.asarray(soc, dtype=float)),
                                      np.atleast_1d(np.asarray(temp_c, dtype=float)),
                                      np.atleast_1d(np.asarray(current_a, dtype=float)))
        i0, wi, fi = _axis_locate(self.soc, s)
        j0, wj, fj = _axis_locate(self.temp_c, t)
        k0, wk, fk = _axis_locate(self.current_a, c)
        out = np.zeros(s.shape)
        for di, ws in ((0, 1.0 - wi), (1, wi)):
            ii = np.minimum(i0 + di, len(self.soc) - 1)
            for dj, wt in ((0, 1.0 - wj), (1, wj)):
                jj = np.minimum(j0 + dj, len(self.temp_c) - 1)
                for dk, wc in ((0, 1.0 - wk), (1, wk)):
                    kk = np.minimum(k0 + dk, len(self.current_a) - 1)
                    out += ws * wt * wc * self.values[ii, jj, kk]
        return out, bool(np.any(fi) or np.any(fj) or np.any(fk))

    def __call__(self, soc, temp_c, current_a):
        vals, _ = self.evaluate(soc, temp_c, current_a)
        return float(vals[0]) if vals.size == 1 and np.isscalar(soc) else vals

    def grid_values(self) -> np.ndarray:
        return self.values


@dataclass
class ArrheniusMap:
    """Resistance map with analytic temperature dependence.

    The base grid holds reference values at t_ref_k (its temperature axis
    is normally a singleton); queries multiply by
    exp(ea_over_k * (1/T - 1/T_ref)) with T in kelvin.
    """

    base: GridMap
    t_ref_k: float
    ea_over_k: float

    def __post_init__(self):
        if self.t_ref_k <= 0:
            raise PreconditionError(f"t_ref_k must be positive, got {self.t_ref_k}")

    def evaluate(self, soc, temp_c, current_a) -> tuple[np.ndarray, bool]:
        vals, flag = self.base.evaluate(soc, temp_c, current_a)
        t_k = np.atleast_1d(np.asarray(temp_c, dtype=float)) + 273.15
        if np.any(t_k <= 0):
            raise PreconditionError("temperature at or below 0 K")
        return vals * np.exp(self.ea_over_k * (1.0 / t_k - 1.0 / self.t_ref_k)), flag

    def __call__(self, soc, temp_c, current_a):
        vals, _ = self.evaluate(soc, temp_c, current_a)
        return float(vals[0]) if vals.size == 1 and np.isscalar(soc) else vals

    def grid_values(self) -> np.ndarray:
        return self.base.grid_values()


ParamMap = GridMap | ArrheniusMap


def arrhenius_resistance(r_ref: float, t_ref_k: float, ea_over_k: float, t_k: float) -> float:
    """R(T) = R_ref * exp(Ea/k * (1/T - 1/T_ref)), temperatures in kelvin."""
    if t_k <= 0 or t_ref_k <= 0:
        raise PreconditionError(f"temperatures must be positive kelvin, got T={t_k}, T_ref={t_ref_k}")
    return r_ref * math.exp(ea_over_k * (1.0 / t_k - 1.0 / t_ref_k))


def _pair_disabled(r_map: ParamMap) -> bool:
    # An identically-zero resistance map disables its RC pair entirely.
    return not np.any(r_map.grid_values())


def _map_axes(m: ParamMap) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    g = m.base if isinstance(m, ArrheniusMap) else m
    return g.soc, g.temp_c, g.current_a


@dataclass
class EquivCircuitParams:
    """R0 + two RC pairs over operating-point maps, OCV table, capacity."""

    r0_map: ParamMap
    r1_map: ParamMap
    c1_map: ParamMap
    r2_map: ParamMap
    c2_map: ParamMap
    ocv_soc: np.ndarray
    ocv_v: np.ndarray
    capacity_ah: float

    def __post_init__(self):
        self.ocv_soc = np.asarray(self.ocv_soc, dtype=float)
        self.ocv_v = np.asarray(self.ocv_v, dtype=float)
        if self.capacity_ah <= 0:
            raise PreconditionError(f"capacity_ah must be positive, got {self.capacity_ah}")
        if len(self.ocv_soc) < 2 or np.any(np.diff(self.ocv_soc) <= 0):
            raise SchemaError("ocv soc knots must be strictly increasing, >= 2 knots")
        if self.ocv_soc[0] < 0.0 or self.ocv_soc[-1] > 1.0:
            raise SchemaError("ocv soc knots must lie in [0, 1]")
        if np.any(np.diff(self.ocv_v) < 0):
            raise SchemaError("ocv voltages must be non-decreasing")
        if np.any(self.r0_map.grid_values() <= 0):
            raise SchemaError("r0 map must be strictly positive")
        for name, r_map, c_map in (("1", self.r1_map, self.c1_map), ("2", self.r2_map, self.c2_map)):
            if _pair_disabled(r_map):
                continue
            if np.any(r_map.grid_values() <= 0) or np.any(c_map.grid_values() <= 0):
                raise SchemaError(f"RC pair {name} must be strictly positive (or R zeroed to disable)")
        if not (_pair_disabled(self.r1_map) or _pair_disabled(self.r2_map)):
            t1 = self._tau_mesh(self.r1_map, self.c1_map)
            t2 = self._tau_mesh(self.r2_map, self.c2_map)
            if not np.all(np.max(t1) < np.min(t2)):
                raise SchemaError(f"time-constant order violated: max tau1 {np.max(t1)} "
                                  f">= min tau2 {np.min(t2)}")

    def _tau_mesh(self, r_map: ParamMap, c_map: ParamMap) -> np.ndarray:
        # Evaluate tau = R*C on the union of both maps' declared grid nodes.
        axes = [np.unique(np.concatenate([_map_axes(r_map)[d], _map_axes(c_map)[d]]))
                for d in range(3)]
        s, t, c = np.meshgrid(*axes, indexing="ij")
        rv, _ = r_map.evaluate(s.ravel(), t.ravel(), c.ravel())
        cv, _ = c_map.evaluate(s.ravel(), t.ravel(), c.ravel())
        return rv * cv


def ocv_lookup(params: EquivCircuitParams, soc):
    """Piecewise-linear OCV(soc), clamped at table endpoints."""
    s = np.asarray(soc, dtype=float)
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise PreconditionError(f"soc outside [0, 1]: {s[np.argmax((s < 0) | (s > 1))] if s.ndim else s}")
    out = np.interp(s, params.ocv_soc, params.ocv_v)
    return float(out) if np.isscalar(soc) else out


def coulomb_count(current, dt: float, capacity_ah: float, soc0: float) -> np.ndarray:
    """soc(k) = clamp(soc0 + sum_{j<=k} i(j)*dt / (3600*capacity), 0, 1)."""
    if dt <= 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    if capacity_ah <= 0:
        raise PreconditionError(f"capacity_ah must be positive, got {capacity_ah}")
    i = np.asarray(current, dtype=float)
    return np.clip(soc0 + np.cumsum(i) * (dt / (3600.0 * capacity_ah)), 0.0, 1.0)


def _first_order_scan(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """v(0) = 0; v(k+1) = a(k)*v(k) + b(k); returns v(0..n-1).

    Constant-coefficient runs go through scipy's IIR filter (identical
    per-step arithmetic, C speed); varying coefficients fall back to a
    plain recursion.
    """
    n = len(a)
    v = np.zeros(n)
    if n <= 1:
        return v
    if np.all(a == a[0]):
        y = lfilter([1.0], [1.0, -float(a[0])], b)
        v[1:] = y[:-1]
    else:
        acc = 0.0
        for k in range(1, n):
            acc = a[k - 1] * acc + b[k - 1]
            v[k] = acc
    return v


@dataclass
class AmResult:
    voltage: np.ndarray
    soc: np.ndarray
    clamped: bool


def simulate_am(params: EquivCircuitParams, current, temperature, soc0: float,
                dt: float) -> AmResult:
    """Run the equivalent-circuit model over a sampled (current, temperature) drive.

    Parameters are looked up at each sample's operating point (soc(k),
    T(k), i(k)); the same coefficients hold over [k, k+1) for the exact
    ZOH advance of the RC states.  `clamped` reports whether any lookup
    left a map's declared domain.
    """
    i = np.asarray(current, dtype=float)
    t = np.asarray(temperature, dtype=float)
    if i.shape != t.shape or i.ndim != 1:
        raise PreconditionError(f"current/temperature must be equal-length 1-D, got {i.shape} vs {t.shape}")
    if dt <= 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    if not 0.0 <= soc0 <= 1.0:
        raise PreconditionError(f"soc0 outside [0, 1]: {soc0}")
    soc = coulomb_count(i, dt, params.capacity_ah, soc0)
    i_dis = -i
    r0, clamped = params.r0_map.evaluate(soc, t, i)
    v = ocv_lookup(params, soc) - i_dis * r0
    for r_map, c_map in ((params.r1_map, params.c1_map), (params.r2_map, params.c2_map)):
        if _pair_disabled(r_map):
            continue
        r, f_r = r_map.evaluate(soc, t, i)
        c, f_c = c_map.evaluate(soc, t, i)
        clamped = clamped or f_r or f_c
        decay = np.exp(-dt / (r * c))
        v -= _first_order_scan(decay, r * i_dis * (1.0 - decay))
    return AmResult(v, soc, bool(clamped))


@dataclass
class RcPair:
    r_ohm: float
    c_farad: float

    def __post_init__(self):
        if self.r_ohm <= 0 or self.c_farad <= 0:
            raise PreconditionError(f"RC pair must be positive, got R={self.r_ohm}, C={self.c_farad}")

    @property
    def tau_s(self) -> float:
        return self.r_ohm * self.c_farad


@dataclass
class PlantConfig:
    """Synthetic ground-truth plant: the analytical model plus the effects
    it deliberately lacks (a slow third RC pair, current-sign hysteresis,
    sensor noise)."""

    base: EquivCircuitParams
    extra_rc: RcPair | None = None
    hysteresis_mag_v: float = 0.0
    hysteresis_tau_s: float = 180.0
    sensor_noise_snr_db: float = math.inf
    seed: int = 0

    def __post_init__(self):
        if self.hysteresis_mag_v < 0:
            raise PreconditionError(f"hysteresis_mag_v must be >= 0, got {self.hysteresis_mag_v}")
        if self.hysteresis_tau_s <= 0:
            raise PreconditionError(f"hysteresis_tau_s must be positive, got {self.hysteresis_tau_s}")


def _hysteresis_trace(current: np.ndarray, mag: float, tau_s: float, dt: float) -> np.ndarray:
    """First-order relaxation toward +mag (charging) / -mag (discharging);
    the state holds wherever the current is exactly zero."""
    a = math.exp(-dt / tau_s)
    h = np.zeros(len(current))
    acc = 0.0
    for k in range(1, len(current)):
        i_prev = current[k - 1]
        if i_prev != 0.0:
            target = mag if i_prev > 0 else -mag
            acc = a * acc + (1.0 - a) * target
        h[k] = acc
    return h


def simulate_plant(config: PlantConfig, current, temperature, soc0: float,
                   dt: float) -> TimeSeries:
    """Measured-channel TimeSeries from the synthetic plant (deterministic per seed)."""
    am = simulate_am(config.base, current, temperature, soc0, dt)
    i = np.asarray(current, dtype=float)
    v = am.voltage.copy()
    if config.extra_rc is not None:
        rc = config.extra_rc
        a = math.exp(-dt / rc.tau_s)
        v -= _first_order_scan(np.full(len(i), a), rc.r_ohm * (-i) * (1.0 - a))
    if config.hysteresis_mag_v > 0.0:
        v += _hysteresis_trace(i, config.hysteresis_mag_v, config.hysteresis_tau_s, dt)
    snr = config.sensor_noise_snr_db
    if not (math.isinf(snr) and snr > 0):
        v = awgn(v, snr, np.random.default_rng(config.seed))
    return TimeSeries(1.0 / dt, {
        "current": i,
        "temperature": np.asarray(temperature, dtype=float),
        "soc": am.soc,
        "voltage": v,
    })


# ---------------------------------------------------------------------------
# serialization

def map_to_payload(m: ParamMap) -> dict:
    if isinstance(m, ArrheniusMap):
        return {"kind": "arrhenius", "base": map_to_payload(m.base),
                "t_ref_k": m.t_ref_k, "ea_over_k": m.ea_over_k}
    return {"kind": "grid", "soc": m.soc, "temp_c": m.temp_c,
            "current_a": m.current_a, "values": m.values}


def map_from_payload(payload: dict) -> ParamMap:
    kind = payload.get("kind")
    if kind == "arrhenius":
        return ArrheniusMap(map_from_payload(payload["base"]),
                            float(payload["t_ref_k"]), float(payload["ea_over_k"]))
    if kind == "grid":
        return GridMap(np.asarray(payload["soc"], dtype=float),
                       np.asarray(payload["temp_c"], dtype=float),
                       np.asarray(payload["current_a"], dtype=float),
                       np.asarray(payload["values"], dtype=float))
    raise SchemaError(f"unknown map kind {kind!r}")


def params_to_payload(p: EquivCircuitParams) -> dict:
    return {
        "r0_map": map_to_payload(p.r0_map),
        "r1_map": map_to_payload(p.r1_map),
        "c1_map": map_to_payload(p.c1_map),
        "r2_map": map_to_payload(p.r2_map),
        "c2_map": map_to_payload(p.c2_map),
        "ocv_soc": p.ocv_soc,
        "ocv_v": p.ocv_v,
        "capacity_ah": p.capacity_ah,
    }


def params_from_payload(payload: dict) -> EquivCircuitParams:
    return EquivCircuitParams(
        r0_map=map_from_payload(payload["r0_map"]),
        r1_map=map_from_payload(payload["r1_map"]),
        c1_map=map_from_payload(payload["c1_map"]),
        r2_map=map_from_payload(payload["r2_map"]),
        c2_map=map_from_payload(payload["c2_map"]),
        ocv_soc=np.asarray(payload["ocv_soc"], dtype=float),
        ocv_v=np.asarray(payload["ocv_v"], dtype=float),
        capacity_ah=float(payload["capacity_ah"]),
    )


def plant_to_payload(cfg: PlantConfig) -> dict:
    return {
        "base": params_to_payload(cfg.base),
        "extra_rc": None if cfg.extra_rc is None else
            {"r_ohm": cfg.extra_rc.r_ohm, "c_farad": cfg.extra_rc.c_farad},
        "hysteresis_mag_v": cfg.hysteresis_mag_v,
        "hysteresis_tau_s": cfg.hysteresis_tau_s,
        "sensor_noise_snr_db": ("inf" if math.isinf(cfg.sensor_noise_snr_db)
                                else cfg.sensor_noise_snr_db),
        "seed": cfg.seed,
    }


def plant_from_payload(payload: dict) -> PlantConfig:
    extra = payload.get("extra_rc")
    snr = payload.get("sensor_noise_snr_db", "inf")
    return PlantConfig(
        base=params_from_payload(payload["base"]),
        extra_rc=None if extra is None else RcPair(float(extra["r_ohm"]), float(extra["c_farad"])),
        hysteresis_mag_v=float(payload.get("hysteresis_mag_v", 0.0)),
        hysteresis_tau_s=float(payload.get("hysteresis_tau_s", 180.0)),
        sensor_noise_snr_db=math.inf if snr == "inf" else float(snr),
        seed=int(payload.get("seed", 0)),
    )


# ---------------------------------------------------------------------------
# desk-scale defaults (artifact values for a 4 V-class, 4 Ah cell)

def default_params() -> EquivCircuitParams:
    soc_ax = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    r0_base = GridMap(soc_ax, np.array([25.0]), np.array([0.0]),
                      np.array([0.026, 0.022, 0.020, 0.0195, 0.021]).reshape(5, 1, 1))
    temp_ax = np.array([-10.0, 10.0, 25.0, 40.0])
    r1 = GridMap(np.array([0.5]), temp_ax, np.array([0.0]),
                 np.array([0.016, 0.012, 0.010, 0.009]).reshape(1, 4, 1))
    r2 = GridMap(np.array([0.5]), temp_ax, np.array([0.0]),
                 np.array([0.024, 0.018, 0.015, 0.013]).reshape(1, 4, 1))
    return EquivCircuitParams(
        r0_map=ArrheniusMap(r0_base, t_ref_k=298.15, ea_over_k=1600.0),
        r1_map=r1,
        c1_map=GridMap.constant(1000.0),
        r2_map=r2,
        c2_map=GridMap.constant(20000.0),
        ocv_soc=np.array([0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
        ocv_v=np.array([3.00, 3.30, 3.45, 3.55, 3.62, 3.67, 3.72, 3.78, 3.86, 3.95, 4.05, 4.18]),
        capacity_ah=4.0,
    )


def default_plant_config(seed: int = 0) -> PlantConfig:
    return PlantConfig(
        base=default_params(),
        extra_rc=RcPair(r_ohm=0.005, c_farad=240000.0),
        hysteresis_mag_v=0.015,
        hysteresis_tau_s=180.0,
        sensor_noise_snr_db=50.0,
        seed=seed,
    )
