"""Sample container, analysis configuration, and delimited-text ingestion.

The running variable is cutoff-normalized at load time: every downstream
computation assumes the threshold sits at zero and that x >= 0 is the
assigned-treatment side.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .kernels import KERNELS


@dataclass(frozen=True)
class Sample:
    """Aligned (x, y, t) arrays with the cutoff normalized to zero.

    x is the running variable, y the outcome, and t the treatment indicator
    or treatment share in [0, 1].  Instances are immutable; arrays are
    written-protected copies so they can be shared across workers.
    """

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        for name in ("x", "y", "t"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.x.ndim == self.y.ndim == self.t.ndim == 1):
            raise DataError("x, y, t must be one-dimensional")
        if not (len(self.x) == len(self.y) == len(self.t)):
            raise DataError(
                f"length mismatch: x={len(self.x)}, y={len(self.y)}, t={len(self.t)}"
            )
        if len(self.x) == 0:
            raise DataError("sample is empty")
        for name in ("x", "y", "t"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DataError(f"non-finite values in column {name!r}")
        if np.any(self.t < 0.0) or np.any(self.t > 1.0):
            raise DataError("treatment values must lie in [0, 1]")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def right(self) -> np.ndarray:
        """Boolean mask of the treated side; x = 0 belongs to the right."""
        return self.x >= 0.0

    def require_both_sides(self):
        if not self.right.any() or self.right.all():
            raise DataError(
                "all observations lie on one side of the cutoff; "
                "inference requires support on both sides"
            )

    def dep(self, selector) -> np.ndarray:
        """Resolve a dependent-variable selector: 'y', 't', or an array."""
        if isinstance(selector, str):
            if selector not in ("y", "t"):
                raise DataError(f"unknown dependent variable {selector!r}")
            return getattr(self, selector)
        arr = np.asarray(selector, dtype=float)
        if arr.shape != self.x.shape:
            raise DataError("dependent variable length does not match sample")
        return arr


@dataclass(frozen=True)
class FitSpec:
    """Local polynomial fit description.

    p is the polynomial order, v the derivative order whose jump is the
    estimand (v=0, p=1 for FRD; v=1, p=2 for RKD).  bandwidth may be a
    single positive number or a (left, right) pair; it can be left unset
    when a caller supplies h explicitly.
    """

    kernel: str = "triangular"
    p: int = 1
    v: int = 0
    bandwidth: Optional[float | tuple[float, float]] = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise DataError(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        if self.p < 1:
            raise DataError("polynomial order p must be >= 1")
        if not (0 <= self.v <= self.p):
            raise DataError("derivative order v must satisfy 0 <= v <= p")
        if self.bandwidth is not None:
            for h in self.bandwidths:
                if not (h > 0):
                    raise DataError("bandwidth must be positive")

    @property
    def bandwidths(self) -> tuple[float, float]:
        """(left, right) bandwidth pair."""
        if self.bandwidth is None:
            raise DataError("FitSpec has no bandwidth set")
        if isinstance(self.bandwidth, (tuple, list)):
            lo, hi = self.bandwidth
            return float(lo), float(hi)
        return float(self.bandwidth), float(self.bandwidth)

    def with_bandwidth(self, h) -> "FitSpec":
        return replace(self, bandwidth=h)


@dataclass(frozen=True)
class SmoothnessBounds:
    """Caps on the magnitude of the (p+1)-th derivative on each side.

    b_y and b_t are the symmetric values; the optional per-side fields
    default to them when unset.
    """

    b_y: float
    b_t: float = 0.0
    b_y_plus: Optional[float] = None
    b_y_minus: Optional[float] = None
    b_t_plus: Optional[float] = None
    b_t_minus: Optional[float] = None

    def __post_init__(self):
        for name in ("b_y", "b_t", "b_y_plus", "b_y_minus", "b_t_plus", "b_t_minus"):
            val = getattr(self, name)
            if val is not None and not (np.isfinite(val) and val >= 0):
                raise DataError(f"smoothness bound {name} must be finite and >= 0")

    @property
    def y_sides(self) -> tuple[float, float]:
        """(minus, plus) bounds for the outcome function."""
        return (
            self.b_y if self.b_y_minus is None else self.b_y_minus,
            self.b_y if self.b_y_plus is None else self.b_y_plus,
        )

    @property
    def t_sides(self) -> tuple[float, float]:
        return (
            self.b_t if self.b_t_minus is None else self.b_t_minus,
            self.b_t if self.b_t_plus is None else self.b_t_plus,
        )

    def scaled(self, factor: float) -> "SmoothnessBounds":
        def f(v):
            return None if v is None else factor * v

        return SmoothnessBounds(
            b_y=factor * self.b_y,
            b_t=factor * self.b_t,
            b_y_plus=f(self.b_y_plus),
            b_y_minus=f(self.b_y_minus),
            b_t_plus=f(self.b_t_plus),
            b_t_minus=f(self.b_t_minus),
        )


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything a confidence-set run needs besides the data."""

    alpha: float = 0.05
    bounds: SmoothnessBounds = field(default_factory=lambda: SmoothnessBounds(b_y=1.0))
    fit: FitSpec = field(default_factory=FitSpec)
    eta: float = 0.075
    r_neighbors: int = 5
    c_grid: Optional[tuple[float, float, int]] = None
    fixed_bandwidth: Optional[float] = None
    donut: Optional[frozenset] = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DataError("alpha must lie in (0, 1)")
        if not (0.0 < self.eta < 1.0):
            raise DataError("eta must lie in (0, 1)")
        if self.r_neighbors < 2:
            raise DataError("r_neighbors must be >= 2")
        if self.c_grid is not None:
            lo, hi, j = self.c_grid
            if not (lo < hi):
                raise DataError("c_grid requires c_low < c_high")
            if j < 2:
                raise DataError("c_grid requires at least 2 points")
            object.__setattr__(self, "c_grid", (float(lo), float(hi), int(j)))
        if self.fixed_bandwidth is not None and not (self.fixed_bandwidth > 0):
            raise DataError("fixed_bandwidth must be positive")
        if self.donut is not None:
            object.__setattr__(self, "donut", frozenset(float(v) for v in self.donut))


def _parse_cell(raw: str, column: str, row: int) -> float:
    text = raw.strip()
    if text == "":
        raise DataError(f"missing value in column {column!r} at data row {row}")
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"non-numeric value {raw!r} in column {column!r} at data row {row}"
        ) from None
    if not np.isfinite(value):
        raise DataError(f"non-finite value in column {column!r} at data row {row}")
    return value


def load_sample(path, column_map: dict, cutoff: float = 0.0,
                delimiter: Optional[str] = None) -> Sample:
    """Read a delimited text file into a Sample.

    column_map maps the roles 'x', 'y', 't' to header names in the file.
    The running variable is shifted by -cutoff.  Rows with missing or
    non-numeric cells raise a DataError naming the 1-based data row.
    """
    for role in ("x", "y", "t"):
        if role not in column_map:
            raise DataError(f"column map is missing the {role!r} role")
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        raise DataError(f"{path} is empty")
    if delimiter is None:
        delimiter = "\t" if "\t" in text.splitlines()[0] else ","
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    headers = reader.fieldnames or []
    for role in ("x", "y", "t"):
        if column_map[role] not in headers:
            raise DataError(
                f"column {column_map[role]!r} (role {role!r}) not found; "
                f"file has columns {headers}"
            )
    cols = {"x": [], "y": [], "t": []}
    for row_index, record in enumerate(reader, start=1):
        for role in ("x", "y", "t"):
            cols[role].append(_parse_cell(record[column_map[role]] or "",
                                          column_map[role], row_index))
    if not cols["x"]:
        raise DataError(f"{path} has a header but no data rows")
    x = np.asarray(cols["x"]) - float(cutoff)
    sample = Sample(x=x, y=np.asarray(cols["y"]), t=np.asarray(cols["t"]))
    sample.require_both_sides()
    return sample


def write_sample(sample: Sample, path, delimiter: str = ","):
    """Write a Sample back out; round-trips through load_sample exactly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(["x", "y", "t"])
        for xi, yi, ti in zip(sample.x, sample.y, sample.t):
            writer.writerow([f"{xi:.17g}", f"{yi:.17g}", f"{ti:.17g}"])


def apply_donut(sample: Sample, excluded: Sequence[float]) -> tuple[Sample, int]:
    """Drop rows whose x exactly matches an excluded (normalized) value.

    Returns the filtered sample and the number of rows removed.  Raises a
    DataError if the exclusion empties one side of the cutoff.
    """
    excluded = set(float(v) for v in excluded)
    if not excluded:
        return sample, 0
    keep = np.array([xi not in excluded for xi in sample.x], dtype=bool)
    removed = int((~keep).sum())
    if removed == 0:
        return sample, 0
    if not keep.any():
        raise DataError("donut exclusion removes every observation")
    filtered = Sample(x=sample.x[keep], y=sample.y[keep], t=sample.t[keep])
    filtered.require_both_sides()
    return filtered, removed
