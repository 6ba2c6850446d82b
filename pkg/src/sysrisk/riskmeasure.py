"""Set-valued capital requirements approximated on a grid.

The object of interest is the upper set R = {k : model output at k is
acceptable}. With scenarios fixed once per run, the membership oracle is
deterministic and monotone, so R restricted to a box is completely described
by its staircase boundary. The search labels every lattice point while
calling the oracle as rarely as possible: each verdict is propagated to the
full upper or lower orthant it implies, a diagonal bisection seeds the
labels, and each remaining grid column is closed by binary search.

The result is certified as a sandwich: the minimal acceptable lattice points
(inner frontier) are inside R, and every maximal unacceptable point moved up
by one grid spacing in all coordinates is acceptable or outside the box, so
the true boundary lies within one spacing of the reported one.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np

from .acceptance import AcceptanceSpec, is_acceptable
from .errors import DegenerateBoxError, ModelError, ParameterError

__all__ = [
    "GridSpec",
    "GridApproximation",
    "DiagonalResult",
    "EarResult",
    "ProbeReport",
    "PinnedAllocationModel",
    "membership",
    "membership_oracle",
    "diagonal_bisection",
    "grid_search",
    "refine",
    "ear",
    "quasiconvexity_probe",
    "write_frontier_csv",
    "write_labels_csv",
    "ear_record",
]

UNKNOWN, UNACCEPTABLE, ACCEPTABLE = -1, 0, 1

EAR_TIE_RTOL = 1e-9
MAX_DIMENSIONS = 4


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned search box with a fixed lattice resolution per dimension.

    The lattice has resolution[d] points along dimension d, spaced
    (upper - lower) / (resolution - 1) apart, endpoints included. With
    nonneg_constraint the box is clipped at zero, reflecting a hard
    restriction of allocations to the non-negative orthant rather than a
    mere viewing window.

    The lattice grows exponentially with the number of dimensions, so more
    than 4 groups must be enabled explicitly via allow_high_dim.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    resolution: tuple[int, ...]
    nonneg_constraint: bool = False
    allow_high_dim: bool = False

    def __init__(self, lower, upper, resolution, nonneg_constraint=False, allow_high_dim=False):
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        up = np.atleast_1d(np.asarray(upper, dtype=float))
        ndim = max(lo.size, up.size)
        if lo.size == 1 and ndim > 1:
            lo = np.repeat(lo, ndim)
        if up.size == 1 and ndim > 1:
            up = np.repeat(up, ndim)
        if lo.size != up.size:
            raise ParameterError(f"lower has {lo.size} entries, upper {up.size}")
        res = np.atleast_1d(np.asarray(resolution, dtype=int))
        if res.size == 1 and ndim > 1:
            res = np.repeat(res, ndim)
        if res.size != ndim:
            raise ParameterError(f"resolution has {res.size} entries for {ndim} dimensions")
        if not (np.isfinite(lo).all() and np.isfinite(up).all()):
            raise ParameterError("box bounds must be finite")
        if nonneg_constraint:
            lo = np.maximum(lo, 0.0)
        if (lo >= up).any():
            raise ParameterError("lower must be strictly below upper in every dimension")
        if (res < 2).any():
            raise ParameterError("resolution must be at least 2 per dimension")
        if ndim > MAX_DIMENSIONS and not allow_high_dim:
            raise ParameterError(
                f"{ndim} dimensions exceed the default limit of {MAX_DIMENSIONS} "
                "(lattice size is exponential in dimensions); pass allow_high_dim=True to override"
            )
        object.__setattr__(self, "lower", tuple(lo))
        object.__setattr__(self, "upper", tuple(up))
        object.__setattr__(self, "resolution", tuple(int(r) for r in res))
        object.__setattr__(self, "nonneg_constraint", bool(nonneg_constraint))
        object.__setattr__(self, "allow_high_dim", bool(allow_high_dim))

    @property
    def ndim(self) -> int:
        return len(self.lower)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / (np.array(self.resolution) - 1)

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(lo, up, res)
            for lo, up, res in zip(self.lower, self.upper, self.resolution)
        ]


@dataclass(frozen=True)
class GridApproximation:
    """Fully labeled lattice plus the two frontier antichains.

    inner_frontier holds the minimal acceptable lattice points, outer_frontier
    the maximal unacceptable ones, both as coordinate rows in lexicographic
    order (index rows in *_indices). v is the grid spacing: the certified
    accuracy of the sandwich. A box entirely inside or outside the acceptance
    region is flagged in degenerate and carries empty frontiers, since the
    true boundary was never bracketed.
    """

    grid: GridSpec
    labels: np.ndarray
    inner_frontier: np.ndarray
    outer_frontier: np.ndarray
    inner_indices: np.ndarray
    outer_indices: np.ndarray
    v: np.ndarray
    oracle_calls: int
    degenerate: str | None
    certified: bool


@dataclass(frozen=True)
class DiagonalResult:
    """Bracketing pair on the box diagonal, or the degenerate verdict."""

    degenerate: str | None
    last_out: np.ndarray | None
    first_in: np.ndarray | None


@dataclass(frozen=True)
class EarResult:
    """Minimizers of w . m over the inner frontier.

    on_box_boundary warns that some minimizer touches the search box edge
    (ignoring a lower edge pinned at zero by the non-negativity constraint):
    the reported optimum may then be an artifact of a too-small box or of a
    weight vector pointing outside the admissible dual cone.
    """

    weights: np.ndarray
    minimizers: np.ndarray
    min_value: float
    on_box_boundary: bool


@dataclass(frozen=True)
class ProbeReport:
    """Outcome of the scenario-blending convexity check."""

    alpha: float
    checked: int
    total_points: int
    violations: np.ndarray


# ---------------------------------------------------------------------------
# membership


class PinnedAllocationModel:
    """Adapter holding some group allocations at fixed values.

    The wrapped model keeps its full group dimension; searches run over the
    remaining free groups only. Monotonicity in the free coordinates is
    inherited from the underlying model.
    """

    def __init__(self, model, pinned: dict[int, float]):
        n_groups = model.n_groups
        if not pinned:
            raise ParameterError("pinned must fix at least one group index")
        if not all(0 <= j < n_groups for j in pinned):
            raise ParameterError(f"pinned group indices must lie in [0, {n_groups})")
        if len(pinned) >= n_groups:
            raise ParameterError("at least one group must remain free")
        self.model = model
        self.pinned = dict(sorted(pinned.items()))
        self.free = [j for j in range(n_groups) if j not in pinned]

    @property
    def n_groups(self) -> int:
        return len(self.free)

    def samples_at(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float).ravel()
        if k.size != len(self.free):
            raise ParameterError(f"allocation has {k.size} entries for {len(self.free)} free groups")
        full = np.empty(self.model.n_groups)
        full[self.free] = k
        for j, value in self.pinned.items():
            full[j] = value
        return self.model.samples_at(full)


def membership(model, spec: AcceptanceSpec, k) -> bool:
    """Is the model output at allocation k acceptable under the criterion?"""
    return is_acceptable(model.samples_at(k), spec)


def membership_oracle(model, spec: AcceptanceSpec):
    """Bind model and criterion into the boolean oracle used by the grid search."""

    def oracle(k) -> bool:
        return is_acceptable(model.samples_at(k), spec)

    return oracle


# ---------------------------------------------------------------------------
# label store with orthant propagation


class _LabelStore:
    """Shared lattice labels; every oracle verdict is propagated to the orthant it implies.

    Thread-safe for monotone oracles: concurrent writes only ever store
    values consistent with ground truth, so races cost duplicate oracle
    calls at worst. A verdict that contradicts existing labels means the
    oracle is not monotone and raises ModelError.
    """

    def __init__(self, oracle, grid: GridSpec, labels: np.ndarray | None = None):
        self.oracle = oracle
        self.grid = grid
        self.axes = grid.axes()
        if labels is None:
            labels = np.full(grid.resolution, UNKNOWN, dtype=np.int8)
        self.labels = labels
        self.calls = 0
        self._lock = threading.Lock()

    def point(self, idx) -> np.ndarray:
        return np.array([self.axes[d][i] for d, i in enumerate(idx)])

    def query(self, idx) -> int:
        cached = self.labels[idx]
        if cached != UNKNOWN:
            return int(cached)
        verdict = ACCEPTABLE if self.oracle(self.point(idx)) else UNACCEPTABLE
        with self._lock:
            self.calls += 1
        self.mark(idx, verdict)
        return verdict

    def mark(self, idx, verdict: int) -> None:
        if verdict == ACCEPTABLE:
            region = tuple(slice(i, None) for i in idx)
            conflict = UNACCEPTABLE
        else:
            region = tuple(slice(0, i + 1) for i in idx)
            conflict = ACCEPTABLE
        view = self.labels[region]
        if (view == conflict).any():
            raise ModelError(
                f"membership oracle is not monotone: verdict at lattice index {tuple(idx)} "
                "contradicts an already-established label"
            )
        view[...] = verdict


def _seed_labels(store: _LabelStore) -> str | None:
    """Corner degeneracy checks, then diagonal bisection to seed both orthants."""
    res = store.grid.resolution
    nd = store.grid.ndim
    bottom = (0,) * nd
    top = tuple(r - 1 for r in res)
    if store.query(bottom) == ACCEPTABLE:
        return "all_in"
    if store.query(top) == UNACCEPTABLE:
        return "all_out"
    lo, hi = 0, min(res) - 1
    if store.query((hi,) * nd) == ACCEPTABLE:  # cached for square grids (it is the top corner)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if store.query((mid,) * nd) == ACCEPTABLE:
                hi = mid
            else:
                lo = mid
    return None


def _resolve_column(store: _LabelStore, prefix: tuple[int, ...]) -> None:
    """Binary-search the acceptability threshold along the last axis of one column.

    Orthant propagation only ever writes a low block of unacceptable labels
    and a high block of acceptable ones into any column, so the unknown gap
    between them is contiguous and a plain bisection closes it.
    """
    column = store.labels[prefix]
    ones = np.flatnonzero(column == ACCEPTABLE)
    hi = int(ones[0]) if ones.size else column.size
    zeros = np.flatnonzero(column == UNACCEPTABLE)
    lo = int(zeros[-1]) if zeros.size else -1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if store.query(prefix + (mid,)) == ACCEPTABLE:
            hi = mid
        else:
            lo = mid


def _sweep_columns(store: _LabelStore, threads: int) -> None:
    res = store.grid.resolution
    prefixes = list(product(*[range(r) for r in res[:-1]]))  # lexicographic for reproducibility
    if threads <= 1:
        for prefix in prefixes:
            _resolve_column(store, prefix)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda p: _resolve_column(store, p), prefixes))


def _extract_frontiers(labels: np.ndarray):
    """Minimal acceptable and maximal unacceptable lattice points, vectorized.

    A lattice point is minimal acceptable iff it is acceptable and every
    in-box step down is unacceptable (missing neighbors at the box edge do
    not block); dually for maximal unacceptable. For monotone labels the
    single-step test is equivalent to true minimality/maximality.
    """
    acceptable = labels == ACCEPTABLE
    unacceptable = labels == UNACCEPTABLE
    nd = labels.ndim
    minimal = acceptable.copy()
    maximal = unacceptable.copy()
    for d in range(nd):
        below = [slice(None)] * nd
        above = [slice(None)] * nd
        below[d] = slice(None, -1)
        above[d] = slice(1, None)
        neighbor_down = np.zeros_like(acceptable)
        neighbor_down[tuple(above)] = acceptable[tuple(below)]
        minimal &= ~neighbor_down
        neighbor_up = np.zeros_like(unacceptable)
        neighbor_up[tuple(below)] = unacceptable[tuple(above)]
        maximal &= ~neighbor_up
    return np.argwhere(minimal), np.argwhere(maximal)  # argwhere order is lexicographic


def _finalize(store: _LabelStore, degenerate: str | None) -> GridApproximation:
    labels = store.labels
    grid = store.grid
    assert (labels != UNKNOWN).all(), "grid search left unlabeled points"
    if degenerate is None:
        if (labels == ACCEPTABLE).all():
            degenerate = "all_in"
        elif (labels == UNACCEPTABLE).all():
            degenerate = "all_out"

    nd = grid.ndim
    if degenerate is not None:
        inner_idx = np.empty((0, nd), dtype=int)
        outer_idx = np.empty((0, nd), dtype=int)
        certified = True
    else:
        inner_idx, outer_idx = _extract_frontiers(labels)
        res = np.array(grid.resolution)
        certified = True
        for o in outer_idx:
            stepped = o + 1
            if (stepped < res).all() and labels[tuple(stepped)] != ACCEPTABLE:
                raise ModelError(
                    f"sandwich certificate failed at lattice index {tuple(o)}: "
                    "point plus one spacing is inside the box but not acceptable"
                )

    axes = store.axes
    to_coords = lambda idx: (
        np.column_stack([axes[d][idx[:, d]] for d in range(nd)])
        if idx.size
        else np.empty((0, nd))
    )
    labels_ro = labels.copy()
    labels_ro.setflags(write=False)
    return GridApproximation(
        grid=grid,
        labels=labels_ro,
        inner_frontier=to_coords(inner_idx),
        outer_frontier=to_coords(outer_idx),
        inner_indices=inner_idx,
        outer_indices=outer_idx,
        v=grid.spacing,
        oracle_calls=store.calls,
        degenerate=degenerate,
        certified=certified,
    )


# ---------------------------------------------------------------------------
# public search operations


def diagonal_bisection(oracle, grid: GridSpec) -> DiagonalResult:
    """Locate the acceptability threshold along the box diagonal.

    Returns the last unacceptable and first acceptable lattice points on the
    index diagonal (t, ..., t). If the box's bottom corner is already
    acceptable or its top corner unacceptable, the box is degenerate and the
    corresponding flag is returned instead. On non-square lattices the
    diagonal may end before reaching the top corner without ever entering
    the acceptance region; first_in is then None.
    """
    store = _LabelStore(oracle, grid)
    nd = grid.ndim
    res = grid.resolution
    if store.query((0,) * nd) == ACCEPTABLE:
        return DiagonalResult("all_in", None, None)
    if store.query(tuple(r - 1 for r in res)) == UNACCEPTABLE:
        return DiagonalResult("all_out", None, None)
    lo, hi = 0, min(res) - 1
    if store.query((hi,) * nd) == UNACCEPTABLE:
        return DiagonalResult(None, store.point((hi,) * nd), None)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if store.query((mid,) * nd) == ACCEPTABLE:
            hi = mid
        else:
            lo = mid
    return DiagonalResult(None, store.point((lo,) * nd), store.point((hi,) * nd))


def grid_search(oracle, grid: GridSpec, threads: int = 1) -> GridApproximation:
    """Label the whole lattice and extract the frontier sandwich.

    The oracle must be monotone (true at k stays true at any k' >= k); this
    is asserted opportunistically whenever propagation overlaps. Labels are
    ground truth regardless of evaluation order, so the threaded sweep is
    deterministic in its output; only the oracle call count may vary.
    """
    store = _LabelStore(oracle, grid)
    degenerate = _seed_labels(store)
    if degenerate is None:
        _sweep_columns(store, threads)
    return _finalize(store, degenerate)


def refine(oracle, approximation: GridApproximation, subdivision_factor: int, threads: int = 1) -> GridApproximation:
    """Subdivide the lattice and re-search only where the frontier can hide.

    Every fine point inside a coarse cell whose lower corner was acceptable
    is acceptable; inside a cell whose upper corner was unacceptable,
    unacceptable. Only cells straddling the frontier are swept again. Labels
    at coincident lattice points are inherited, never re-queried; for
    power-of-two factors the coincident coordinates are bit-identical
    (other factors may drift by one ulp). oracle_calls accumulates across
    refinements.
    """
    factor = int(subdivision_factor)
    if factor < 2:
        raise ParameterError(f"subdivision factor must be at least 2, got {subdivision_factor}")
    coarse = approximation
    grid = coarse.grid
    new_res = tuple((r - 1) * factor + 1 for r in grid.resolution)
    fine_grid = GridSpec(
        grid.lower, grid.upper, new_res, grid.nonneg_constraint, grid.allow_high_dim
    )

    floor_ix = [np.arange(nr) // factor for nr in new_res]
    ceil_ix = [(np.arange(nr) + factor - 1) // factor for nr in new_res]
    floor_labels = coarse.labels[np.ix_(*floor_ix)]
    ceil_labels = coarse.labels[np.ix_(*ceil_ix)]
    if ((floor_labels == ACCEPTABLE) & (ceil_labels == UNACCEPTABLE)).any():
        raise ModelError("coarse labels are not monotone: cannot paint subdivided cells")

    fine_labels = np.full(new_res, UNKNOWN, dtype=np.int8)
    fine_labels[floor_labels == ACCEPTABLE] = ACCEPTABLE
    fine_labels[ceil_labels == UNACCEPTABLE] = UNACCEPTABLE

    store = _LabelStore(oracle, fine_grid, labels=fine_labels)
    store.calls = coarse.oracle_calls
    if (fine_labels == UNKNOWN).any():
        _sweep_columns(store, threads)
    return _finalize(store, None)


def ear(approximation: GridApproximation, w) -> EarResult:
    """Efficient allocations: minimizers of the weighted capital cost w . m over the inner frontier.

    Ties within a relative tolerance of 1e-9 are all reported (a flat
    frontier stretch orthogonal to w yields a whole segment of minimizers).
    """
    grid = approximation.grid
    w = np.asarray(w, dtype=float).ravel()
    if w.size != grid.ndim:
        raise ParameterError(f"weight vector has {w.size} entries for {grid.ndim} dimensions")
    if not np.isfinite(w).all() or (w <= 0).any():
        raise ParameterError("weights must be strictly positive and finite")
    if approximation.degenerate is not None or approximation.inner_indices.shape[0] == 0:
        raise DegenerateBoxError(
            "no acceptability frontier inside the search box"
            + (f" (degenerate: {approximation.degenerate})" if approximation.degenerate else "")
            + "; enlarge or move the box"
        )
    values = approximation.inner_frontier @ w
    min_value = float(values.min())
    keep = values <= min_value + EAR_TIE_RTOL * abs(min_value)
    minimizers = approximation.inner_frontier[keep]
    indices = approximation.inner_indices[keep]

    res = np.array(grid.resolution)
    lower = np.array(grid.lower)
    on_upper = (indices == res - 1).any()
    lower_exempt = approximation.grid.nonneg_constraint & (lower == 0.0)
    on_lower = ((indices == 0) & ~lower_exempt).any()
    return EarResult(
        weights=w,
        minimizers=minimizers,
        min_value=min_value,
        on_box_boundary=bool(on_upper or on_lower),
    )


def quasiconvexity_probe(model_a, model_b, alpha: float, spec: AcceptanceSpec, grid: GridSpec) -> ProbeReport:
    """Check set-valued quasi-convexity across two scenario draws on a lattice.

    Builds the blended model over alpha*X_a + (1-alpha)*X_b and verifies that
    every lattice point acceptable under both inputs stays acceptable under
    the blend. With a concave aggregation (so blending can only improve
    outcomes) and a convex acceptance criterion no violations should occur;
    non-concave models can and do violate, and the report lists where.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    blend = model_a.blend(model_b, alpha)
    axes = grid.axes()
    checked = 0
    total = 0
    violations = []
    for idx in np.ndindex(*grid.resolution):
        point = np.array([axes[d][i] for d, i in enumerate(idx)])
        total += 1
        if membership(model_a, spec, point) and membership(model_b, spec, point):
            checked += 1
            if not membership(blend, spec, point):
                violations.append(point)
    stacked = np.array(violations) if violations else np.empty((0, grid.ndim))
    return ProbeReport(alpha=alpha, checked=checked, total_points=total, violations=stacked)


# ---------------------------------------------------------------------------
# dataset output


def write_frontier_csv(points: np.ndarray, path) -> None:
    """Write frontier coordinates as CSV with columns k_1..k_l."""
    points = np.asarray(points, dtype=float)
    ndim = points.shape[1] if points.ndim == 2 else 0
    with open(path, "w") as fh:
        fh.write(",".join(f"k_{d + 1}" for d in range(ndim)) + "\n")
        for row in points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_labels_csv(approximation: GridApproximation, path) -> None:
    """Write all lattice points with their 0/1 labels, lexicographically ordered."""
    axes = approximation.grid.axes()
    nd = approximation.grid.ndim
    with open(path, "w") as fh:
        fh.write(",".join(f"k_{d + 1}" for d in range(nd)) + ",label\n")
        for idx in np.ndindex(*approximation.grid.resolution):
            coords = ",".join(repr(float(axes[d][i])) for d, i in enumerate(idx))
            fh.write(f"{coords},{int(approximation.labels[idx])}\n")


def ear_record(result: EarResult) -> dict:
    """JSON-ready summary of an EAR extraction."""
    return {
        "weights": [float(v) for v in result.weights],
        "minimizers": [[float(v) for v in row] for row in result.minimizers],
        "min_value": result.min_value,
        "on_box_boundary": result.on_box_boundary,
    }
