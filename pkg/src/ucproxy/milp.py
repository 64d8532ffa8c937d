"""Solver-agnostic mixed-integer linear program container.

A :class:`MilpModel` is a plain in-memory description: a variable table
(bounds, binary marks, bookkeeping tags), sparse linear rows with lower
and upper row bounds (equalities have equal bounds), and a linear
objective, always minimized.  The engine consumes it directly; the MPS
writer serializes it; the commitment formulation tags variables through
``meta`` so solutions can be mapped back to matrices.
"""

from __future__ import annotations

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"

INF = float("inf")


class ModelError(ValueError):
    """Raised for structurally invalid models."""


class MilpModel:
    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.var_kinds: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.var_hour: list[int | None] = []
        self.var_entity: list[str | None] = []
        self.row_names: list[str] = []
        self.row_cols: list[np.ndarray] = []
        self.row_coefs: list[np.ndarray] = []
        self.row_lo: list[float] = []
        self.row_hi: list[float] = []
        self.obj: list[float] = []
        # bookkeeping: group tag -> ndarray of variable indices shaped like
        # the matrix the group maps to (e.g. meta["alpha"][g, t])
        self.meta: dict[str, np.ndarray] = {}
        self._name_to_idx: dict[str, int] = {}

    # -- construction -------------------------------------------------

    def add_var(
        self,
        name: str,
        kind: str = CONTINUOUS,
        lb: float = 0.0,
        ub: float = INF,
        obj: float = 0.0,
        hour: int | None = None,
        entity: str | None = None,
    ) -> int:
        if name in self._name_to_idx:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ModelError(f"unknown variable kind {kind!r}")
        if lb > ub:
            raise ModelError(f"variable {name!r} has lb > ub")
        if not np.isfinite(obj):
            raise ModelError(f"variable {name!r} has non-finite objective")
        idx = len(self.var_names)
        self.var_names.append(name)
        self.var_kinds.append(kind)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.var_hour.append(hour)
        self.var_entity.append(entity)
        self._name_to_idx[name] = idx
        return idx

    def add_row(
        self,
        name: str,
        cols: list[int] | np.ndarray,
        coefs: list[float] | np.ndarray,
        lo: float = -INF,
        hi: float = INF,
    ) -> int:
        cols = np.asarray(cols, dtype=np.int64)
        coefs = np.asarray(coefs, dtype=np.float64)
        if cols.shape != coefs.shape:
            raise ModelError(f"row {name!r}: index/coefficient length mismatch")
        if cols.size and (cols.min() < 0 or cols.max() >= len(self.var_names)):
            raise ModelError(f"row {name!r} references undeclared variable")
        if lo > hi:
            raise ModelError(f"row {name!r} has lo > hi")
        if lo == -INF and hi == INF:
            raise ModelError(f"row {name!r} is unbounded on both sides")
        idx = len(self.row_names)
        self.row_names.append(name)
        self.row_cols.append(cols)
        self.row_coefs.append(coefs)
        self.row_lo.append(float(lo))
        self.row_hi.append(float(hi))
        return idx

    # -- queries ------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    def var_index(self, name: str) -> int:
        return self._name_to_idx[name]

    def binary_indices(self) -> np.ndarray:
        return np.array(
            [i for i, k in enumerate(self.var_kinds) if k == BINARY],
            dtype=np.int64,
        )

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lb, dtype=float), np.asarray(self.ub, dtype=float)

    def objective_array(self) -> np.ndarray:
        return np.asarray(self.obj, dtype=float)

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        """Row activities a_i'x for a full primal vector."""
        out = np.empty(self.n_rows)
        for i, (cols, coefs) in enumerate(zip(self.row_cols, self.row_coefs)):
            out[i] = float(coefs @ x[cols])
        return out

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective_array() @ x)
