"""Boundary models of the training-data distribution and the output gate.

Two interchangeable envelope descriptions are provided: a one-class SVM
with a Gaussian kernel, trained by pairwise coordinate descent on the
dual QP

    min 1/2 a'Ka   s.t.  sum(a) = 1,  0 <= a_i <= 1/(nu*l),

and a convex hull (facet tests up to 3-D, feasibility LP above).  The
`gate` function multiplies a compensator output by a factor in [0, 1]
driven by the envelope score, so the compensator fades out away from the
data it was trained on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import (ConvergenceError, DegenerateGeometryError, InfeasibleError,
                     PreconditionError, SchemaError)
from .signal import ScalingInfo

GATE_VARIANTS = ("sigmoid", "literal", "hard")

#: facet slack / membership tolerance shared by both hull routes
HULL_TOL = 1e-9


@dataclass
class GateConfig:
    """gamma: sigmoid steepness; variant: 'sigmoid' (continuous, decays to
    zero outside), 'literal' (printed sig(-gamma*f) form, kept for
    comparison), or 'hard' (binary cutoff)."""

    gamma: float = 2.0
    variant: str = "sigmoid"

    def __post_init__(self):
        if not self.gamma > 0:
            raise PreconditionError(f"gamma must be > 0, got {self.gamma}")
        if self.variant not in GATE_VARIANTS:
            raise SchemaError(f"unknown gate variant {self.variant!r}; pick from {GATE_VARIANTS}")


def gate(raw, f_oc, config: GateConfig):
    """Attenuate `raw` by the envelope score: identity wherever f_oc > 0."""
    raw_arr = np.asarray(raw, dtype=float)
    f_arr = np.asarray(f_oc, dtype=float)
    raw_b, f_b = np.broadcast_arrays(raw_arr, f_arr)
    out = np.array(raw_b, dtype=float, copy=True)
    mask = f_b <= 0.0
    if np.any(mask):
        fm = f_b[mask]
        with np.errstate(over="ignore"):
            if config.variant == "hard":
                mult = np.zeros(fm.shape)
            elif config.variant == "sigmoid":
                mult = 2.0 / (1.0 + np.exp(-config.gamma * fm))
            else:  # literal: sig(-gamma*f), grows back toward 1 far outside
                mult = 1.0 / (1.0 + np.exp(config.gamma * fm))
        out[mask] = raw_b[mask] * mult
    if raw_arr.ndim == 0 and f_arr.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# one-class SVM

def gaussian_kernel(x, y, sigma: float) -> float:
    if not sigma > 0:
        raise PreconditionError(f"sigma must be > 0, got {sigma}")
    xv = np.asarray(x, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    if xv.shape != yv.shape:
        raise PreconditionError(f"kernel arguments differ in dimension: {xv.shape} vs {yv.shape}")
    d = xv - yv
    return math.exp(-float(d @ d) / (2.0 * sigma * sigma))


def kernel_matrix(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise PreconditionError(f"kernel arguments differ in dimension: {a.shape[1]} vs {b.shape[1]}")
    d2 = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * (a @ b.T))
    np.clip(d2, 0.0, None, out=d2)
    return np.exp(-d2 / (2.0 * sigma * sigma))


@dataclass
class OcsvmModel:
    """Support vectors are stored in scaled coordinates; `scaling` maps raw
    queries into that space.  Zero-multiplier training points are dropped."""

    support_vectors: np.ndarray
    alphas: np.ndarray
    bias_b: float
    sigma: float
    nu: float
    n_train: int
    scaling: ScalingInfo
    bias_offset: float = 0.0
    kkt_residual: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        self.support_vectors = np.atleast_2d(np.asarray(self.support_vectors, dtype=float))
        self.alphas = np.asarray(self.alphas, dtype=float)
        if len(self.alphas) != len(self.support_vectors):
            raise SchemaError("one multiplier per support vector required")
        cap = 1.0 / (self.nu * self.n_train)
        if np.any(self.alphas <= 0.0) or np.any(self.alphas > cap * (1.0 + 1e-9)):
            raise SchemaError(f"multipliers must lie in (0, {cap}]")
        if abs(float(np.sum(self.alphas)) - 1.0) > 1e-8:
            raise SchemaError(f"multipliers must sum to 1, got {np.sum(self.alphas)}")


def _smo_solve(kmat: np.ndarray, box_c: float, tol: float, max_iter: int):
    """Pairwise coordinate descent on the dual; returns (alpha, g, residual,
    iterations) with g = K @ alpha maintained incrementally."""
    l = len(kmat)
    alpha = np.zeros(l)
    n_full = int(math.floor(1.0 / box_c + 1e-12))
    n_full = min(n_full, l)
    alpha[:n_full] = box_c
    rem = 1.0 - box_c * n_full
    if rem > 1e-15 and n_full < l:
        alpha[n_full] = rem
    g = kmat @ alpha
    diag = np.diag(kmat).copy()
    it = 0
    while True:
        can_up = alpha < box_c
        can_down = alpha > 0.0
        gi = np.where(can_up, g, np.inf)
        gj = np.where(can_down, g, -np.inf)
        i = int(np.argmin(gi))
        j = int(np.argmax(gj))
        # masked values, not raw g: if one side has no movable index the
        # difference is -inf and we are at the only feasible point
        viol = gj[j] - gi[i]
        if viol <= tol or i == j:
            return alpha, g, max(viol, 0.0), it
        if it >= max_iter:
            raise ConvergenceError(f"dual solver hit {max_iter} iterations; "
                                   f"KKT residual {viol:.3e} > tol {tol:.3e}")
        eta = max(diag[i] + diag[j] - 2.0 * kmat[i, j], 1e-12)
        delta = viol / eta
        room_i = box_c - alpha[i]
        if delta >= min(room_i, alpha[j]):
            if room_i <= alpha[j]:
                delta = room_i
                alpha[i] = box_c
                alpha[j] -= delta
            else:
                delta = alpha[j]
                alpha[j] = 0.0
                alpha[i] += delta
        else:
            alpha[i] += delta
            alpha[j] -= delta
        g += delta * (kmat[:, i] - kmat[:, j])
        it += 1


def train_ocsvm(X, nu: float, sigma: float, tol: float = 1e-8,
                max_iter: int | None = None) -> OcsvmModel:
    """Fit the boundary; bias is chosen so f = 0 on margin support vectors.

    Inputs are min-max scaled per dimension before kernel evaluation; the
    scaling is kept on the model and applied again at scoring time.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    l = len(X)
    if l < 2:
        raise PreconditionError(f"need at least 2 training points, got {l}")
    if not np.all(np.isfinite(X)):
        raise PreconditionError("training points must be finite")
    if not 0.0 < nu <= 1.0:
        raise PreconditionError(f"nu must lie in (0, 1], got {nu}")
    if not sigma > 0:
        raise PreconditionError(f"sigma must be > 0, got {sigma}")
    if nu * l < 1.0 - 1e-12:
        raise InfeasibleError(f"nu*l = {nu * l:.3g} < 1: box [0, 1/(nu*l)] cannot reach sum(a)=1")
    scaling = ScalingInfo.fit(X)
    xs = scaling.transform(X)
    kmat = kernel_matrix(xs, xs, sigma)
    box_c = 1.0 / (nu * l)
    alpha, g, resid, iters = _smo_solve(kmat, box_c, tol,
                                        max_iter if max_iter is not None else max(100_000, 200 * l))
    margin = (alpha > 0.0) & (alpha < box_c)
    if np.any(margin):
        bias = float(np.mean(g[margin]))
    else:
        hi = g[alpha >= box_c]
        lo = g[alpha <= 0.0]
        if hi.size and lo.size:
            bias = float((hi.max() + lo.min()) / 2.0)
        elif hi.size:
            bias = float(hi.max())
        else:
            bias = float(lo.min())
    keep = alpha > 0.0
    return OcsvmModel(support_vectors=xs[keep], alphas=alpha[keep], bias_b=bias,
                      sigma=sigma, nu=nu, n_train=l, scaling=scaling,
                      kkt_residual=resid, iterations=iters)


def ocsvm_score(model: OcsvmModel, x):
    """f(x) = sum_i a_i K(x, sv_i) - (b - bias_offset); positive means inside."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.shape[1] != model.support_vectors.shape[1]:
        raise PreconditionError(f"query dimension {pts.shape[1]} != model dimension "
                                f"{model.support_vectors.shape[1]}")
    ks = kernel_matrix(model.scaling.transform(pts), model.support_vectors, model.sigma)
    f = ks @ model.alphas - (model.bias_b - model.bias_offset)
    return float(f[0]) if single else f


# ---------------------------------------------------------------------------
# convex hull

@dataclass
class HullModel:
    """dim <= 3 keeps outward facet equations (normal.x + offset <= 0
    inside); higher dimensions keep the vertex matrix for the membership
    LP, plus facets when the hull construction succeeded."""

    dim: int
    vertices: np.ndarray
    facets: np.ndarray | None = None
    points: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.vertices.shape[1] != self.dim:
            raise SchemaError(f"vertex width {self.vertices.shape[1]} != dim {self.dim}")


def build_hull(points) -> HullModel:
    """Convex hull of a point matrix in any dimension.

    Degenerate inputs (affinely flat, too few points) raise
    DegenerateGeometryError; callers that only need membership can fall
    back to hull_contains on the raw point matrix, which handles flat
    sets fine.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    if n < d + 1:
        raise DegenerateGeometryError(f"{n} points cannot span a {d}-D hull (need {d + 1})")
    if not np.all(np.isfinite(pts)):
        raise PreconditionError("hull points must be finite")
    try:
        qh = ConvexHull(pts)
    except QhullError as exc:
        if d > 3:
            # keep the LP-membership route available on flat high-D sets
            return HullModel(dim=d, vertices=pts.copy(), facets=None, points=pts.copy())
        raise DegenerateGeometryError(f"degenerate point set: {str(exc).splitlines()[0]}") from exc
    vertices = pts[qh.vertices]
    facets = np.asarray(qh.equations, dtype=float)
    slack = facets[:, :-1] @ pts.T + facets[:, -1][:, None]
    worst = float(slack.max())
    if worst > HULL_TOL:
        raise DegenerateGeometryError(f"hull facets leak training points by {worst:.3e}")
    return HullModel(dim=d, vertices=vertices, facets=facets, points=pts.copy())


def quickhull_2d(points) -> HullModel:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 2:
        raise PreconditionError(f"expected 2-D points, got width {pts.shape[1]}")
    return build_hull(pts)


def hull_3d(points) -> HullModel:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise PreconditionError(f"expected 3-D points, got width {pts.shape[1]}")
    return build_hull(pts)


def _lp_member(points: np.ndarray, x: np.ndarray, tol: float = HULL_TOL) -> bool:
    """Feasibility of x = sum(lam_i p_i), sum(lam) = 1, lam >= 0."""
    n = len(points)
    a_eq = np.vstack([points.T, np.ones(n)])
    b_eq = np.concatenate([x, [1.0]])
    res = linprog(np.zeros(n), A_eq=a_eq, b_eq=b_eq, bounds=(0.0, None),
                  method="highs", options={"primal_feasibility_tolerance": tol})
    return bool(res.status == 0)


def hull_contains(hull, x, method: str = "auto"):
    """Membership test; accepts a HullModel or a raw point matrix.

    method: 'facets' forces the facet-inequality route, 'lp' the
    convex-combination feasibility route, 'auto' prefers facets when they
    exist.  1-D x gives a bool, a matrix gives a bool vector.
    """
    if isinstance(hull, HullModel):
        facets = hull.facets
        support = hull.vertices
        dim = hull.dim
    else:
        pts = np.atleast_2d(np.asarray(hull, dtype=float))
        facets = None
        support = pts
        dim = pts.shape[1]
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    queries = np.atleast_2d(arr)
    if queries.shape[1] != dim:
        raise PreconditionError(f"query dimension {queries.shape[1]} != hull dimension {dim}")
    if method not in ("auto", "facets", "lp"):
        raise PreconditionError(f"unknown method {method!r}")
    if method == "facets" and facets is None:
        raise PreconditionError("this hull carries no facet description")
    use_facets = facets is not None and method != "lp"
    if use_facets:
        out = np.ones(len(queries), dtype=bool)
        for start in range(0, len(queries), 1024):
            block = queries[start:start + 1024]
            slack = block @ facets[:, :-1].T + facets[:, -1]
            out[start:start + 1024] = np.all(slack <= HULL_TOL, axis=1)
    else:
        lo = support.min(axis=0) - HULL_TOL
        hi = support.max(axis=0) + HULL_TOL
        out = np.empty(len(queries), dtype=bool)
        for idx, q in enumerate(queries):
            if np.any(q < lo) or np.any(q > hi):
                out[idx] = False
            else:
                out[idx] = _lp_member(support, q)
    return bool(out[0]) if single else out


# ---------------------------------------------------------------------------
# hyperparameter tuning

@dataclass
class TuneResult:
    nu: float
    sigma: float
    table: list[dict] = field(default_factory=list)
    n_probes: int = 0

    def __iter__(self):
        yield self.nu
        yield self.sigma
        yield self.table


def tune_ocsvm(X, nu_grid, sigma_grid, reference, probe_count: int = 2000,
               seed: int = 0, tol: float = 1e-7) -> TuneResult:
    """Grid search (nu, sigma) against a reference hull on random probes.

    Probes are uniform over the data bounding box.  Both error rates are
    fractions of the whole probe set: FPR counts probes outside the hull
    that the OCSVM accepts, FNR counts probes inside the hull that it
    rejects.  The cell minimizing FPR+FNR wins; ties prefer smaller sigma,
    then larger nu.  Cells whose box constraint is infeasible (nu*l < 1)
    are scored as unusable.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    nu_grid = list(nu_grid)
    sigma_grid = list(sigma_grid)
    if not nu_grid or not sigma_grid:
        raise PreconditionError("hyperparameter grids must be non-empty")
    if probe_count < 1:
        raise PreconditionError(f"probe_count must be >= 1, got {probe_count}")
    rng = np.random.default_rng(seed)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    probes = rng.uniform(lo, hi, size=(probe_count, X.shape[1]))
    in_hull = hull_contains(reference, probes)
    table: list[dict] = []
    best = None
    for nu in nu_grid:
        for sigma in sigma_grid:
            row = {"nu": float(nu), "sigma": float(sigma)}
            try:
                model = train_ocsvm(X, nu, sigma, tol=tol)
            except (InfeasibleError, ConvergenceError) as exc:
                row.update(fpr=math.nan, fnr=math.nan, note=type(exc).__name__)
                table.append(row)
                continue
            inside = ocsvm_score(model, probes) > 0.0
            fpr = float(np.sum(~in_hull & inside)) / probe_count
            fnr = float(np.sum(in_hull & ~inside)) / probe_count
            row.update(fpr=fpr, fnr=fnr)
            table.append(row)
            key = (fpr + fnr, float(sigma), -float(nu))
            if best is None or key < best[0]:
                best = (key, float(nu), float(sigma))
    if best is None:
        raise InfeasibleError("no feasible (nu, sigma) grid cell")
    return TuneResult(nu=best[1], sigma=best[2], table=table, n_probes=probe_count)


# ---------------------------------------------------------------------------
# serialization

def ocsvm_to_payload(model: OcsvmModel) -> dict:
    return {
        "support_vectors": model.support_vectors,
        "alphas": model.alphas,
        "bias_b": model.bias_b,
        "sigma": model.sigma,
        "nu": model.nu,
        "n_train": model.n_train,
        "bias_offset": model.bias_offset,
        "kkt_residual": model.kkt_residual,
        "iterations": model.iterations,
        "scaling": model.scaling.to_payload(),
    }


def ocsvm_from_payload(payload: dict) -> OcsvmModel:
    return OcsvmModel(
        support_vectors=np.asarray(payload["support_vectors"], dtype=float),
        alphas=np.asarray(payload["alphas"], dtype=float),
        bias_b=float(payload["bias_b"]),
        sigma=float(payload["sigma"]),
        nu=float(payload["nu"]),
        n_train=int(payload["n_train"]),
        scaling=ScalingInfo.from_payload(payload["scaling"]),
        bias_offset=float(payload.get("bias_offset", 0.0)),
        kkt_residual=float(payload.get("kkt_residual", 0.0)),
        iterations=int(payload.get("iterations", 0)),
    )


def hull_to_payload(hull: HullModel) -> dict:
    return {
        "dim": hull.dim,
        "vertices": hull.vertices,
        "facets": hull.facets,
        "points": hull.points,
    }


def hull_from_payload(payload: dict) -> HullModel:
    facets = payload.get("facets")
    points = payload.get("points")
    return HullModel(
        dim=int(payload["dim"]),
        vertices=np.asarray(payload["vertices"], dtype=float),
        facets=None if facets is None else np.asarray(facets, dtype=float),
        points=None if points is None else np.asarray(points, dtype=float),
    )
