"""Least-squares regression over mergeable sufficient statistics.

All information needed to fit ordinary least squares lives in the sums
``(n, X'X, X'y, y'y, sum y)``; they add componentwise, so statistics
accumulated per cube cell merge into any coarser cell and refit there
without revisiting raw rows.  The fit solves the normal equations with an
optional ridge term that never touches the intercept; a singular system
at lambda=0 falls back to a small trace-scaled ridge, recorded in the
result.

Intercepts are an explicit leading-1 predictor column, which keeps the
merge algebra uniform.  Categorical predictors one-hot encode with the
last category dropped (it would be an exact linear combination of the
rest plus the intercept).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .codq import ObjectSet
from .errors import RegressionError
from .star_store import Value

#: condition-number threshold beyond which the normal equations count as singular
SINGULAR_CONDITION = 1e12
#: variance floor for the degenerate r-squared conventions
SST_FLOOR = 1e-12


@dataclass(frozen=True)
class RegressionStats:
    """Sufficient statistics of rows (x, y); ``d`` includes the intercept column."""

    d: int
    n: int
    xtx: np.ndarray
    xty: np.ndarray
    yty: float
    sum_y: float

    @staticmethod
    def zeros(d: int) -> "RegressionStats":
        return RegressionStats(d=d, n=0, xtx=np.zeros((d, d)), xty=np.zeros(d), yty=0.0, sum_y=0.0)

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "xtx": self.xtx.tolist(), "xty": self.xty.tolist(),
                "yty": self.yty, "sum_y": self.sum_y}


@dataclass(frozen=True)
class RegressionFit:
    beta: np.ndarray
    r2: float
    rmse: float
    lam: float
    n: int
    predictor_names: Optional[tuple[str, ...]] = None

    def to_dict(self) -> dict:
        out = {"beta": self.beta.tolist(), "r2": self.r2, "rmse": self.rmse,
               "lambda": self.lam, "n": self.n}
        if self.predictor_names is not None:
            out["predictor_names"] = list(self.predictor_names)
        return out


def accumulate(s: RegressionStats, x: Sequence[float], y: float) -> RegressionStats:
    """Fold one row into the statistics; ``x`` carries the leading 1."""
    xv = np.asarray(x, dtype=float)
    if xv.shape != (s.d,):
        raise RegressionError(f"predictor vector has {xv.shape[0] if xv.ndim == 1 else '?'} entries, expected {s.d}")
    return RegressionStats(d=s.d, n=s.n + 1,
                           xtx=s.xtx + np.outer(xv, xv),
                           xty=s.xty + xv * float(y),
                           yty=s.yty + float(y) ** 2,
                           sum_y=s.sum_y + float(y))


def accumulate_rows(d: int, rows: Sequence[Sequence[float]], ys: Sequence[float]) -> RegressionStats:
    """Accumulate many rows in ascending index order (the documented order)."""
    s = RegressionStats.zeros(d)
    for x, y in zip(rows, ys):
        s = accumulate(s, x, y)
    return s


def merge(a: RegressionStats, b: RegressionStats) -> RegressionStats:
    if a.d != b.d:
        raise RegressionError(f"cannot merge statistics of width {a.d} and {b.d}")
    return RegressionStats(d=a.d, n=a.n + b.n, xtx=a.xtx + b.xtx, xty=a.xty + b.xty,
                           yty=a.yty + b.yty, sum_y=a.sum_y + b.sum_y)


def merge_all(parts: Sequence[RegressionStats]) -> RegressionStats:
    """Left fold in input order; callers wanting determinism fix that order."""
    if not parts:
        raise RegressionError("cannot merge an empty list of statistics")
    out = parts[0]
    for p in parts[1:]:
        out = merge(out, p)
    return out


def _ridge_matrix(s: RegressionStats, lam: float) -> np.ndarray:
    penalty = np.eye(s.d)
    penalty[0, 0] = 0.0  # never penalize the intercept
    return s.xtx + lam * penalty


def _solve(a: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    try:
        beta = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(beta)):
        return None
    return beta


def fit(s: RegressionStats, lam: float = 0.0,
        predictor_names: Optional[Sequence[str]] = None) -> RegressionFit:
    """Solve the (possibly ridge-regularized) normal equations.

    With ``lam == 0`` and a numerically singular system (solve failure or
    condition estimate above ``SINGULAR_CONDITION``) the fit retries with
    ``lam = 1e-8 * trace(X'X) / d`` and reports that value.  R-squared
    degenerates per the stated conventions when the response variance
    vanishes.
    """
    if s.n == 0:
        raise RegressionError("cannot fit on zero rows")
    if lam < 0:
        raise RegressionError("ridge strength must be non-negative")

    lam_used = lam
    beta = None
    if lam == 0.0:
        if np.linalg.cond(s.xtx) <= SINGULAR_CONDITION:
            beta = _solve(s.xtx, s.xty)
        if beta is None:
            lam_used = 1e-8 * float(np.trace(s.xtx)) / s.d
            beta = _solve(_ridge_matrix(s, lam_used), s.xty)
    else:
        beta = _solve(_ridge_matrix(s, lam), s.xty)
    if beta is None:
        raise RegressionError("normal equations are singular even with the ridge fallback")

    ssr = float(s.yty - 2.0 * beta @ s.xty + beta @ s.xtx @ beta)
    ssr = max(ssr, 0.0)
    sst = float(s.yty - s.sum_y ** 2 / s.n)
    if sst <= SST_FLOOR:
        r2 = 1.0 if ssr <= SST_FLOOR else 0.0
    else:
        r2 = 1.0 - ssr / sst
    rmse = float(np.sqrt(ssr / s.n))
    names = tuple(predictor_names) if predictor_names is not None else None
    return RegressionFit(beta=beta, r2=r2, rmse=rmse, lam=lam_used, n=s.n, predictor_names=names)


# ---------------------------------------------------------------------------
# Building design rows from complex objects


def categories_in_order(values: Sequence[Value]) -> list[Value]:
    """Distinct non-null values in first-appearance order."""
    seen: dict[Value, None] = {}
    for v in values:
        if v is not None and v not in seen:
            seen[v] = None
    return list(seen)


@dataclass(frozen=True)
class PredictorEncoding:
    """Fixed global design-row encoding for one object set and target.

    Numeric feature attributes pass through unchanged; categorical ones
    one-hot encode against category lists scanned from the whole object
    set (first-appearance order, last category dropped).  Fixing the
    encoding globally is what makes per-cell statistics mergeable: every
    cell shares the same columns.
    """

    target: str
    target_index: int
    names: tuple[str, ...]  # includes the leading "intercept"
    numeric: tuple[tuple[str, int], ...]  # (attribute, object index)
    categorical: tuple[tuple[str, int, tuple[Value, ...]], ...]  # kept categories

    @property
    def d(self) -> int:
        return len(self.names)

    @staticmethod
    def from_objects(objects: ObjectSet, target: str) -> "PredictorEncoding":
        schema = objects.schema
        t_idx = schema.index_of(target)
        t_attr = schema.attributes[t_idx]
        if t_attr.type.value not in ("integer", "real"):
            raise RegressionError(f"target {target!r} must be numeric, got {t_attr.type.value}")

        names = ["intercept"]
        numeric: list[tuple[str, int]] = []
        categorical: list[tuple[str, int, tuple[Value, ...]]] = []
        for i, a in enumerate(schema.attributes):
            if a.role != "feature" or a.name == target:
                continue
            if a.type.value in ("integer", "real"):
                numeric.append((a.name, i))
                names.append(a.name)
            else:
                cats = categories_in_order([o[i] for o in objects.objects])
                kept = tuple(cats[:-1])  # drop last to avoid exact collinearity
                categorical.append((a.name, i, kept))
                names.extend(f"{a.name}={c}" for c in kept)
        return PredictorEncoding(target=target, target_index=t_idx, names=tuple(names),
                                 numeric=tuple(numeric), categorical=tuple(categorical))

    def row(self, obj: tuple[Value, ...]) -> Optional[tuple[list[float], float]]:
        """Design row and response for one object; None if any used value is null."""
        y = obj[self.target_index]
        if y is None:
            return None
        x = [1.0]
        for _, i in self.numeric:
            v = obj[i]
            if v is None:
                return None
            x.append(float(v))
        for _, i, kept in self.categorical:
            v = obj[i]
            if v is None:
                return None
            x.extend(1.0 if v == c else 0.0 for c in kept)
        return x, float(y)


def stats_for_objects(enc: PredictorEncoding, objects: ObjectSet,
                      indices: Optional[Sequence[int]] = None) -> RegressionStats:
    """Accumulate statistics over the given objects (all, by default)."""
    s = RegressionStats.zeros(enc.d)
    pool = range(len(objects.objects)) if indices is None else indices
    for i in pool:
        encoded = enc.row(objects.objects[i])
        if encoded is not None:
            s = accumulate(s, encoded[0], encoded[1])
    return s
