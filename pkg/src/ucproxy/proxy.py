"""Nearest-neighbor lookup over pre-solved commitment instances.

A daily input is flattened hour-major into a feature vector
(demand block, wind block, topology block) and compared with a
weighted L2 distance ``sqrt(sum_i w_i^2 (a_i - b_i)^2)``; the default
weights put 100 on every topology coordinate and 1 elsewhere, so a
single line-status difference dominates forecast noise.  Queries return
the stored label (full schedule and its cost) of the closest record,
never re-optimizing.  Ties break toward the lowest sample id.

Backends: a vectorized linear scan (default, exact) and a kd-tree built
on weight-scaled coordinates with bounding-ball pruning (exact as well;
candidate leaves are re-measured with the same distance routine as the
linear scan so both backends agree bit-for-bit, ties included).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from ucproxy.formulation import CostBreakdown, UcSolution
from ucproxy.grid import GridCase
from ucproxy.sampler import UcInput

INDEX_SCHEMA_VERSION = 1
FLATTEN_CONVENTION = "hour-major"

LINEAR = "linear"
KDTREE = "kdtree"

TOPOLOGY_WEIGHT_DEFAULT = 100.0


class IndexError_(ValueError):
    """Raised for inconsistent index construction or queries."""


def feature_length(case: GridCase) -> int:
    return 24 * case.n_buses + 24 * case.n_wind + case.n_lines


def featurize(case: GridCase, x: UcInput) -> np.ndarray:
    """Flatten (demand, wind, topology) hour-major into one vector."""
    if x.demand.shape != (24, case.n_buses) or x.wind.shape != (24, case.n_wind):
        raise IndexError_(
            f"input shapes {x.demand.shape}/{x.wind.shape} mismatch case")
    if len(x.topology) != case.n_lines:
        raise IndexError_("topology length mismatches case")
    return np.concatenate([
        np.asarray(x.demand, dtype=float).ravel(),
        np.asarray(x.wind, dtype=float).ravel(),
        np.asarray(x.topology, dtype=float),
    ])


@dataclass(frozen=True)
class DistanceWeights:
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if (vals <= 0).any():
            raise IndexError_("distance weights must be positive")
        object.__setattr__(self, "values", vals)

    @classmethod
    def default_for_case(cls, case: GridCase,
                         topology_weight: float = TOPOLOGY_WEIGHT_DEFAULT,
                         forecast_weight: float = 1.0) -> "DistanceWeights":
        w = np.full(feature_length(case), forecast_weight, dtype=float)
        w[24 * case.n_buses + 24 * case.n_wind:] = topology_weight
        return cls(w)


def distance(a: np.ndarray, b: np.ndarray, weights: DistanceWeights) -> float:
    if a.shape != b.shape or a.shape != weights.values.shape:
        raise IndexError_("feature/weight length mismatch")
    diff = (a - b) * weights.values
    return float(np.sqrt(np.dot(diff, diff)))


@dataclass
class IndexRecord:
    sample_id: int
    features: np.ndarray
    cost: float
    solution: UcSolution
    fingerprint: str


@dataclass
class Prediction:
    neighbor_id: int
    cost: float
    solution: UcSolution
    distance: float
    query_time_s: float


def index_fingerprint(case: GridCase, horizon: int, n1_enabled: bool) -> str:
    """Records are only comparable for one case, convention and model form."""
    return (f"{case.fingerprint()}:{FLATTEN_CONVENTION}:"
            f"T{horizon}:n1{int(bool(n1_enabled))}")


class ProxyIndex:
    """Ordered store of solved records answering nearest-neighbor queries."""

    def __init__(self, weights: DistanceWeights, fingerprint: str,
                 backend: str = LINEAR):
        if backend not in (LINEAR, KDTREE):
            raise IndexError_(f"unknown backend {backend!r}")
        self.weights = weights
        self.fingerprint = fingerprint
        self.backend = backend
        self.ids: list[int] = []
        self.costs: list[float] = []
        self.solutions: list[UcSolution] = []
        self._rows: list[np.ndarray] = []
        self._features: np.ndarray | None = None
        self._id_set: set[int] = set()
        self._tree: _KdTree | None = None
        self._tree_size = 0          # records covered by the built tree

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def features(self) -> np.ndarray:
        if self._features is None or self._features.shape[0] != len(self._rows):
            self._features = (np.vstack(self._rows) if self._rows
                              else np.empty((0, len(self.weights.values))))
        return self._features

    # -- growth ---------------------------------------------------------

    def add(self, record: IndexRecord) -> None:
        if record.fingerprint != self.fingerprint:
            raise IndexError_(
                f"record fingerprint {record.fingerprint!r} does not match "
                f"index {self.fingerprint!r}")
        if record.features.shape != (len(self.weights.values),):
            raise IndexError_("feature length mismatch")
        if record.sample_id in self._id_set:
            raise IndexError_(f"duplicate sample id {record.sample_id}")
        self._id_set.add(record.sample_id)
        self.ids.append(int(record.sample_id))
        self._rows.append(np.asarray(record.features, dtype=float))
        self.costs.append(float(record.cost))
        self.solutions.append(record.solution)
        if self.backend == KDTREE and len(self.ids) - self._tree_size >= max(
                64, self._tree_size):
            self._rebuild_tree()

    def _rebuild_tree(self) -> None:
        scaled = self.features * self.weights.values[None, :]
        self._tree = _KdTree(scaled)
        self._tree_size = len(self.ids)

    # -- queries ----------------------------------------------------------

    def query(self, features: np.ndarray) -> tuple[int, float]:
        """Position and distance of the nearest record (lowest id on ties)."""
        if not self.ids:
            raise IndexError_("query on empty index")
        if self.backend == KDTREE:
            if self._tree is None or self._tree_size == 0:
                self._rebuild_tree()
            return self._query_kdtree(features)
        return self._query_linear(features, 0, len(self.ids))

    def _query_linear(self, q: np.ndarray, lo: int, hi: int,
                      best: tuple[float, int, int] | None = None):
        diffs = (self.features[lo:hi] - q[None, :]) * self.weights.values
        dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
        ids = np.asarray(self.ids[lo:hi])
        order = np.lexsort((ids, dists))
        k = int(order[0])
        cand = (float(dists[k]), int(ids[k]), lo + k)
        if best is not None and (best[0], best[1]) <= (cand[0], cand[1]):
            cand = best
        return cand[2], cand[0]

    def _query_kdtree(self, q: np.ndarray):
        scaled_q = q * self.weights.values
        best = self._tree.nearest(scaled_q, self.features, q, self.weights,
                                  self.ids)
        # records added after the last rebuild are scanned linearly
        if self._tree_size < len(self.ids):
            pos, dist = self._query_linear(q, self._tree_size, len(self.ids))
            cand = (dist, self.ids[pos], pos)
            if (cand[0], cand[1]) < (best[0], best[1]):
                best = cand
        return best[2], best[0]


def build_index(records: list[IndexRecord], weights: DistanceWeights,
                backend: str = LINEAR,
                fingerprint: str | None = None) -> ProxyIndex:
    """Index a non-empty, homogeneous record batch."""
    if not records:
        raise IndexError_("cannot build an index from zero records")
    fps = {r.fingerprint for r in records}
    if len(fps) > 1:
        raise IndexError_(f"heterogeneous record fingerprints: {sorted(fps)}")
    fp = fingerprint or records[0].fingerprint
    index = ProxyIndex(weights, fp, backend=backend)
    for rec in records:
        index.add(rec)
    if backend == KDTREE:
        index._rebuild_tree()
    return index


def add_sample(index: ProxyIndex, record: IndexRecord) -> ProxyIndex:
    """Grow the index in place (single-writer); returns it for chaining."""
    index.add(record)
    return index


def predict(index: ProxyIndex, case: GridCase, x: UcInput) -> Prediction:
    """Answer with the stored label of the nearest pre-solved instance."""
    case_fp = case.fingerprint()
    if not index.fingerprint.startswith(case_fp):
        raise IndexError_(
            f"index fingerprint {index.fingerprint!r} was built for a "
            f"different case than {case_fp!r}")
    q = featurize(case, x)
    t0 = time.perf_counter()
    pos, dist = index.query(q)
    elapsed = time.perf_counter() - t0
    return Prediction(
        neighbor_id=index.ids[pos],
        cost=index.costs[pos],
        solution=index.solutions[pos],
        distance=dist,
        query_time_s=elapsed,
    )


class _KdTree:
    """Exact nearest-neighbor tree on pre-scaled coordinates.

    Median splits by position on the axis of largest spread keep the
    tree balanced under duplicates; a far branch is visited unless its
    axis gap strictly exceeds the incumbent distance, so equal-distance
    candidates are always reached and the lowest-id tie-break matches
    the linear scan.
    """

    __slots__ = ("points", "split_dim", "split_val", "index", "left", "right")

    LEAF_SIZE = 16

    def __init__(self, scaled: np.ndarray, index: np.ndarray | None = None):
        if index is None:
            index = np.arange(scaled.shape[0])
        self.index = index
        if len(index) <= self.LEAF_SIZE:
            self.points = scaled[index]
            self.split_dim = -1
            self.split_val = 0.0
            self.left = self.right = None
            return
        self.points = None
        sub = scaled[index]
        spreads = sub.max(axis=0) - sub.min(axis=0)
        self.split_dim = int(np.argmax(spreads))
        order = index[np.argsort(sub[:, self.split_dim], kind="stable")]
        mid = len(order) // 2
        self.split_val = float(scaled[order[mid], self.split_dim])
        self.left = _KdTree(scaled, order[:mid])
        self.right = _KdTree(scaled, order[mid:])

    def nearest(self, scaled_q, raw_features, raw_q, weights, ids,
                best: tuple[float, int, int] | None = None):
        if best is None:
            best = (np.inf, -1, -1)
        if self.points is not None:
            for pos in self.index:
                d = distance(raw_features[pos], raw_q, weights)
                cand = (d, ids[pos], int(pos))
                if (cand[0], cand[1]) < (best[0], best[1]):
                    best = cand
            return best
        gap = scaled_q[self.split_dim] - self.split_val
        near, far = (self.left, self.right) if gap < 0 else (self.right, self.left)
        best = near.nearest(scaled_q, raw_features, raw_q, weights, ids, best)
        if abs(gap) <= best[0]:
            best = far.nearest(scaled_q, raw_features, raw_q, weights, ids, best)
        return best


# ---------------------------------------------------------------------------
# Persistence: metadata document + stacked record arrays in one npz


def save_index(index: ProxyIndex, destination,
               extra_meta: dict | None = None) -> None:
    if not index.ids:
        raise IndexError_("refusing to persist an empty index")
    sols = index.solutions
    shapes = {s.theta.shape for s in sols}
    if len(shapes) > 1:
        raise IndexError_(
            "records carry different contingency counts; persisting such an "
            "index is unsupported (rebuild with a fixed contingency list)")
    meta = {
        "schema_version": INDEX_SCHEMA_VERSION,
        "fingerprint": index.fingerprint,
        "convention": FLATTEN_CONVENTION,
        "backend": index.backend,
        "count": len(index.ids),
        "contingency_ids": list(sols[0].contingency_ids),
        "statuses": [s.status for s in sols],
        "provenance": extra_meta or {},
    }
    arrays = {
        "meta_json": np.frombuffer(
            json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
        "weights": index.weights.values,
        "ids": np.asarray(index.ids, dtype=np.int64),
        "features": index.features,
        "costs": np.asarray(index.costs, dtype=float),
        "alpha": np.stack([s.alpha for s in sols]),
        "start": np.stack([s.start for s in sols]),
        "p_g": np.stack([s.p_g for s in sols]),
        "wind_curtail": np.stack([s.wind_curtail for s in sols]),
        "load_shed": np.stack([s.load_shed for s in sols]),
        "theta": np.stack([s.theta for s in sols]),
        "cost_parts": np.array(
            [[s.breakdown.generation, s.breakdown.startup,
              s.breakdown.curtailment, s.breakdown.shed] for s in sols]),
        "solve_time_s": np.array([s.solve_time_s for s in sols]),
    }
    if hasattr(destination, "write"):
        np.savez_compressed(destination, **arrays)
    else:
        with open(destination, "wb") as fh:
            np.savez_compressed(fh, **arrays)


def load_index(source) -> ProxyIndex:
    data = np.load(source if hasattr(source, "read") else str(source),
                   allow_pickle=False)
    meta = json.loads(bytes(data["meta_json"]).decode())
    if meta.get("schema_version") != INDEX_SCHEMA_VERSION:
        raise IndexError_(
            f"unsupported index schema_version {meta.get('schema_version')!r}")
    weights = DistanceWeights(data["weights"])
    index = ProxyIndex(weights, meta["fingerprint"], backend=meta["backend"])
    cont = tuple(int(c) for c in meta["contingency_ids"])
    parts = data["cost_parts"]
    for k in range(meta["count"]):
        breakdown = CostBreakdown(*[float(v) for v in parts[k]])
        sol = UcSolution(
            alpha=data["alpha"][k],
            start=data["start"][k],
            p_g=data["p_g"][k],
            wind_curtail=data["wind_curtail"][k],
            load_shed=data["load_shed"][k],
            theta=data["theta"][k],
            contingency_ids=cont,
            total_cost=float(data["costs"][k]),
            breakdown=breakdown,
            status=meta["statuses"][k],
            solve_time_s=float(data["solve_time_s"][k]),
        )
        index.add(IndexRecord(
            sample_id=int(data["ids"][k]),
            features=data["features"][k],
            cost=float(data["costs"][k]),
            solution=sol,
            fingerprint=meta["fingerprint"],
        ))
    if index.backend == KDTREE:
        index._rebuild_tree()
    return index
