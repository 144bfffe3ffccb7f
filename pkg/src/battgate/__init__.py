"""Hybrid battery modelling toolkit: analytical equivalent-circuit model,
NARX error compensation, and validity-envelope gating."""

from .compose import (HybridModel, HybridResult, MetricsReport, aggregate,
                      compute_error_channel, envelope_score, evaluate,
                      hybrid_simulate, write_report_csv)
from .envelope import (GateConfig, HullModel, OcsvmModel, TuneResult, build_hull,
                       gate, gaussian_kernel, hull_3d, hull_contains,
                       ocsvm_score, quickhull_2d, train_ocsvm, tune_ocsvm)
from .errors import (BattgateError, ConvergenceError, DegenerateGeometryError,
                     InfeasibleError, ParseError, PreconditionError, SchemaError)
from .netdyn import (MlpModel, NarxSpec, TrainOptions, TrainResult,
                     grid_search_neurons, init_mlp, init_narx_model, mlp_forward,
                     mlp_jacobian, narx_predict_series_parallel, narx_regressors,
                     narx_simulate_parallel, train_lm, train_rtrl)
from .plant import (AmResult, ArrheniusMap, EquivCircuitParams, GridMap,
                    PlantConfig, RcPair, arrhenius_resistance, coulomb_count,
                    default_params, default_plant_config, ocv_lookup,
                    simulate_am, simulate_plant)
from .signal import (Dataset, ScalingInfo, TimeSeries, add_awgn,
                     antialias_downsample, awgn, denormalize, load_csv,
                     normalize, save_csv, space_filling_subset)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
