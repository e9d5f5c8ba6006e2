"""Cohort records and the delimited cohort file format.

A cohort file is comma-separated with header ``id,t0,t,delta,weight``
followed by one column per covariate.  Every field must be present;
an empty covariate cell marks missingness and is rejected with the
offending row number.
"""

import csv
from dataclasses import dataclass, field

from .errors import SchemaError

RESERVED_COLUMNS = ("id", "t0", "t", "delta", "weight")


@dataclass(frozen=True)
class CohortRecord:
    """One subject: entry age, observed age, event flag, survey weight, covariates."""

    id: str
    t0: float
    t: float
    delta: int
    weight: float
    covariates: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t < self.t0:
            raise SchemaError(f"record {self.id}: observed age precedes entry age")
        if self.delta not in (0, 1):
            raise SchemaError(f"record {self.id}: event indicator must be 0 or 1")
        if not self.weight > 0:
            raise SchemaError(f"record {self.id}: survey weight must be positive")


def read_cohort_csv(path):
    """Load a cohort file; returns ``(records, covariate_names)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if tuple(header[:5]) != RESERVED_COLUMNS:
            raise SchemaError(
                f"{path}: header must start with {','.join(RESERVED_COLUMNS)}"
            )
        covariates = header[5:]
        if len(set(covariates)) != len(covariates):
            raise SchemaError(f"{path}: duplicate covariate columns")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"{path}: row {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                values = {}
                for name, cell in zip(covariates, row[5:]):
                    if cell.strip() == "":
                        raise ValueError(f"missing value for covariate {name!r}")
                    values[name] = float(cell)
                records.append(CohortRecord(
                    id=row[0],
                    t0=float(row[1]),
                    t=float(row[2]),
                    delta=int(float(row[3])),
                    weight=float(row[4]),
                    covariates=values,
                ))
            except (ValueError, SchemaError) as exc:
                raise SchemaError(f"{path}: row {lineno}: {exc}") from exc
    return records, covariates


def write_cohort_csv(path, records, covariates) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(RESERVED_COLUMNS) + list(covariates))
        for rec in records:
            writer.writerow(
                [rec.id, repr(rec.t0), repr(rec.t), rec.delta, repr(rec.weight)]
                + [repr(float(rec.covariates[name])) for name in covariates]
            )
