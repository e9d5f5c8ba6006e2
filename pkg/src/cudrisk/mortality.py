"""Life-table ingestion and the piecewise-constant competing mortality hazard.

The engine treats all-cause mortality as the competing risk.  A national
life table supplies the annual death probability ``q`` per integer age,
converted to a hazard rate ``-log(1 - q)`` that is constant within each
year of age.  The table is a known quantity: no uncertainty from it is
propagated into credible intervals.
"""

import csv
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SchemaError


@dataclass(frozen=True)
class LifeTableHazard:
    """Annual death probabilities and hazards for contiguous ages 0..max_age."""

    q: np.ndarray
    hazard: np.ndarray
    name: str = "life-table"

    @property
    def max_age(self) -> int:
        return len(self.q) - 1

    def hazard_at(self, age, clamp: bool = False) -> np.ndarray:
        """Hazard rate applying at (possibly fractional) ``age``."""
        a = np.atleast_1d(np.asarray(age, dtype=float))
        idx = np.floor(a).astype(int)
        if np.any(a < 0):
            raise DomainError("age below 0 is outside the life table")
        over = idx > self.max_age
        if over.any():
            if not clamp:
                raise DomainError(
                    f"age beyond life-table end ({self.max_age}); pass clamp=True to extend"
                )
            warnings.warn(
                "life table exhausted: clamping mortality hazard to the last tabulated age",
                stacklevel=2,
            )
            idx = np.minimum(idx, self.max_age)
        out = self.hazard[idx]
        return out if np.ndim(age) else float(out[0])

    def cumulative_hazard(self, age, clamp: bool = False) -> np.ndarray:
        """Integral of the hazard from age 0 to ``age`` (piecewise linear)."""
        a = np.atleast_1d(np.asarray(age, dtype=float))
        if np.any(a < 0):
            raise DomainError("age below 0 is outside the life table")
        end = self.max_age + 1
        if np.any(a > end):
            if not clamp:
                raise DomainError(
                    f"age {np.max(a)} beyond life-table coverage [0, {end}]"
                )
            warnings.warn(
                "life table exhausted: extending cumulative mortality with the last hazard",
                stacklevel=2,
            )
        cum = np.concatenate([[0.0], np.cumsum(self.hazard)])
        inside = np.minimum(a, end)
        idx = np.minimum(np.floor(inside).astype(int), self.max_age)
        out = cum[idx] + (inside - idx) * self.hazard[idx]
        out = out + np.maximum(a - end, 0.0) * self.hazard[-1]
        return out if np.ndim(age) else float(out[0])


def load_life_table(rows, name: str = "life-table") -> LifeTableHazard:
    """Build the hazard table from ``(age, q)`` pairs.

    Ages must be contiguous integers starting at 0 and each ``q`` must lie
    in [0, 1).
    """
    pairs = [(int(age), float(q)) for age, q in rows]
    if not pairs:
        raise SchemaError("life table is empty")
    ages = [a for a, _ in pairs]
    expected = list(range(len(pairs)))
    if ages != expected:
        for got, want in zip(ages, expected):
            if got != want:
                raise SchemaError(
                    f"life-table ages must be contiguous from 0: expected {want}, got {got}"
                )
        raise SchemaError("life-table ages must be contiguous from 0")
    q = np.array([v for _, v in pairs], dtype=float)
    if np.any((q < 0) | (q >= 1)):
        bad = int(np.argmax((q < 0) | (q >= 1)))
        raise SchemaError(f"death probability at age {bad} outside [0, 1): {q[bad]}")
    hazard = -np.log1p(-q)
    return LifeTableHazard(q=q, hazard=hazard, name=name)


def read_life_table_csv(path) -> LifeTableHazard:
    """Parse a ``age,q`` CSV file into a hazard table."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["age", "q"]:
            raise SchemaError(f"{path}: expected header 'age,q'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise SchemaError(f"{path}:{lineno}: expected two fields 'age,q'")
            try:
                rows.append((int(row[0]), float(row[1])))
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return load_life_table(rows, name=os.path.basename(str(path)))


def mortality_survival_ratio(a: float, t: float, table: LifeTableHazard,
                             clamp: bool = False) -> float:
    """Conditional mortality survival S2(t)/S2(a) for a <= t."""
    if t < a:
        raise ValueError("require a <= t for a survival ratio")
    mass = table.cumulative_hazard(t, clamp=clamp) - table.cumulative_hazard(a, clamp=clamp)
    return math.exp(-mass)
