"""Loan-level file ingestion: parsing, outcome labeling, design matrices.

The pipeline turns a pair of delimited files (one origination row per
loan, many monthly performance rows per loan) into a modeling dataset:

1. parse both files row by row, collecting typed records and per-row
   rejects (a reject fraction above the configured threshold aborts);
2. label each loan Prepaid, Defaulted, Active, or Excluded from its
   performance history, measuring event times in years with a one-month
   floor;
3. fit preprocessing statistics on the labeled loans (standardization
   for quantitative fields, low-frequency merging for categorical ones)
   and build one covariate vector per loan.

Column positions, date format, and per-field missing-value codes live in
a FileSchema, so differently laid-out files only need a different JSON
schema, not new code.  A schema for the public single-family sample
layout ships with the package, as does the judicial-foreclosure state
table (versioned data, not code).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .model import CovariatePath, Dataset, LoanObservation, LoanStatus

__all__ = [
    "FileSchema",
    "IngestConfig",
    "IngestError",
    "ZeroVarianceError",
    "OriginationRecord",
    "PerformanceRecord",
    "RejectedRow",
    "ClassifiedLoan",
    "PreprocessSpec",
    "IngestResult",
    "month_index",
    "read_origination_file",
    "read_performance_file",
    "categorize",
    "fit_preprocess",
    "build_design",
    "ingest_portfolio",
    "load_judicial_states",
    "load_default_schema",
]

QUANT_FIELDS = (
    "credit_score",
    "mi_percent",
    "num_units",
    "dti",
    "upb",
    "interest_rate",
    "num_borrowers",
)
CAT_FIELDS = ("first_time_buyer", "occupancy_status", "property_type")
DEFAULT_ZB_CODES = ("03", "06", "09")
OTHER = "other"


class IngestError(ValueError):
    """Ingestion cannot proceed (bad schema, excess rejects, empty result)."""


class ZeroVarianceError(IngestError):
    """A quantitative field is constant and cannot be standardized."""


def month_index(text: str, date_format: str) -> int:
    """Calendar month as a flat integer (year * 12 + month - 1)."""
    if date_format == "yyyymm":
        if len(text) != 6 or not text.isdigit():
            raise ValueError(f"expected YYYYMM, got {text!r}")
        year, month = int(text[:4]), int(text[4:])
    elif date_format == "yyyy-mm":
        year_s, _, month_s = text.partition("-")
        if not (year_s.isdigit() and month_s.isdigit()):
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        year, month = int(year_s), int(month_s)
    else:
        raise ValueError(f"unknown date format {date_format!r}")
    if not (1 <= month <= 12):
        raise ValueError(f"month out of range in {text!r}")
    return year * 12 + month - 1


@dataclass(frozen=True)
class FileSchema:
    """Column layout and missing-value codes for one pair of input files."""

    origination_columns: dict[str, int]
    performance_columns: dict[str, int]
    delimiter: str = "|"
    has_header: bool = False
    date_format: str = "yyyymm"
    missing_codes: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if "loan_id" not in self.origination_columns:
            raise IngestError("origination_columns must map loan_id")
        for key in ("loan_id", "reporting_date"):
            if key not in self.performance_columns:
                raise IngestError(f"performance_columns must map {key}")

    def is_missing(self, fieldname: str, raw: str) -> bool:
        return raw in self.missing_codes.get(fieldname, ("",))

    @classmethod
    def from_json_dict(cls, d: dict) -> "FileSchema":
        return cls(
            origination_columns={k: int(v) for k, v in d["origination_columns"].items()},
            performance_columns={k: int(v) for k, v in d["performance_columns"].items()},
            delimiter=d.get("delimiter", "|"),
            has_header=bool(d.get("has_header", False)),
            date_format=d.get("date_format", "yyyymm"),
            missing_codes={k: tuple(v) for k, v in d.get("missing_codes", {}).items()},
        )


def load_default_schema() -> FileSchema:
    """The packaged schema for the public single-family sample file layout."""
    text = resources.files("mortsurv.data").joinpath("freddie_sample_schema.json").read_text()
    return FileSchema.from_json_dict(json.loads(text))


def load_judicial_states() -> frozenset[str]:
    """Packaged table of states where foreclosure runs through the courts."""
    text = resources.files("mortsurv.data").joinpath("judicial_states.json").read_text()
    return frozenset(json.loads(text)["states"])


@dataclass(frozen=True)
class OriginationRecord:
    """Typed origination row; None marks a missing value."""

    loan_id: str
    first_payment: int | None
    credit_score: float | None
    mi_percent: float | None
    num_units: float | None
    dti: float | None
    upb: float | None
    interest_rate: float | None
    num_borrowers: float | None
    first_time_buyer: str | None
    occupancy_status: str | None
    property_type: str | None
    property_state: str | None
    cltv: float | None  # parsed for completeness, never a covariate


@dataclass(frozen=True)
class PerformanceRecord:
    """One monthly performance row."""

    loan_id: str
    reporting_month: int
    delinquency: str  # "" when blank; "R" marks REO
    zero_balance: str  # "" while active, two-digit code at payoff
    repurchase: str  # "", "Y", or "N"


@dataclass(frozen=True)
class RejectedRow:
    line_no: int
    reason: str


def _split_line(line: str, delimiter: str) -> list[str]:
    return [f.strip() for f in line.rstrip("\r\n").split(delimiter)]


def _cell(fields: list[str], col: int | None) -> str:
    if col is None or col >= len(fields):
        return ""
    return fields[col]


def read_origination_file(path, schema: FileSchema):
    """Parse origination rows into records.

    Returns (records, rejects).  A row is rejected for a missing loan id,
    a duplicate loan id, or an unparseable value that is not a declared
    missing code; missing codes simply yield None fields.
    """
    cols = schema.origination_columns
    records: list[OriginationRecord] = []
    rejects: list[RejectedRow] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line_no == 1 and schema.has_header:
                continue
            if not line.strip():
                continue
            fields = _split_line(line, schema.delimiter)
            loan_id = _cell(fields, cols.get("loan_id"))
            if not loan_id:
                rejects.append(RejectedRow(line_no, "missing loan_id"))
                continue
            if loan_id in seen:
                rejects.append(RejectedRow(line_no, f"duplicate loan_id {loan_id}"))
                continue
            try:
                record = _parse_origination(loan_id, fields, schema)
            except ValueError as exc:
                rejects.append(RejectedRow(line_no, str(exc)))
                continue
            seen.add(loan_id)
            records.append(record)
    return records, rejects


def _parse_origination(loan_id: str, fields: list[str], schema: FileSchema) -> OriginationRecord:
    cols = schema.origination_columns

    def number(name: str) -> float | None:
        raw = _cell(fields, cols.get(name))
        if cols.get(name) is None or schema.is_missing(name, raw):
            return None
        try:
            return float(raw)
        except ValueError:
            raise ValueError(f"bad {name}: {raw!r}") from None

    def category(name: str) -> str | None:
        raw = _cell(fields, cols.get(name))
        if cols.get(name) is None or schema.is_missing(name, raw):
            return None
        return raw

    first_payment = None
    raw_date = _cell(fields, cols.get("first_payment_date"))
    if cols.get("first_payment_date") is not None and not schema.is_missing(
        "first_payment_date", raw_date
    ):
        try:
            first_payment = month_index(raw_date, schema.date_format)
        except ValueError as exc:
            raise ValueError(f"bad first_payment_date: {exc}") from None

    return OriginationRecord(
        loan_id=loan_id,
        first_payment=first_payment,
        credit_score=number("credit_score"),
        mi_percent=number("mi_percent"),
        num_units=number("num_units"),
        dti=number("dti"),
        upb=number("upb"),
        interest_rate=number("interest_rate"),
        num_borrowers=number("num_borrowers"),
        first_time_buyer=category("first_time_buyer"),
        occupancy_status=category("occupancy_status"),
        property_type=category("property_type"),
        property_state=category("property_state"),
        cltv=number("cltv"),
    )


def read_performance_file(path, schema: FileSchema):
    """Parse monthly performance rows into records.

    Returns (records, rejects).  Rows need a loan id and a parseable
    reporting date; one-digit zero-balance codes are left-padded so the
    file variants "1" and "01" compare equal.
    """
    cols = schema.performance_columns
    records: list[PerformanceRecord] = []
    rejects: list[RejectedRow] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line_no == 1 and schema.has_header:
                continue
            if not line.strip():
                continue
            fields = _split_line(line, schema.delimiter)
            loan_id = _cell(fields, cols.get("loan_id"))
            if not loan_id:
                rejects.append(RejectedRow(line_no, "missing loan_id"))
                continue
            raw_date = _cell(fields, cols.get("reporting_date"))
            try:
                month = month_index(raw_date, schema.date_format)
            except ValueError:
                rejects.append(RejectedRow(line_no, f"bad reporting_date: {raw_date!r}"))
                continue
            zb = _cell(fields, cols.get("zero_balance"))
            if len(zb) == 1:
                zb = "0" + zb
            records.append(
                PerformanceRecord(
                    loan_id=loan_id,
                    reporting_month=month,
                    delinquency=_cell(fields, cols.get("delinquency")),
                    zero_balance=zb,
                    repurchase=_cell(fields, cols.get("repurchase")).upper(),
                )
            )
    return records, rejects


@dataclass(frozen=True)
class IngestConfig:
    """Categorization and preprocessing knobs.

    ``data_end`` is the first month of the observation cutoff (a loan
    still alive then is Active); event times are
    max(1, months since origination) / 12 years.
    """

    data_end: int = month_index("201401", "yyyymm")
    default_zb_codes: tuple[str, ...] = DEFAULT_ZB_CODES
    prepaid_repurchase_values: tuple[str, ...] = ("N",)
    maturity_years: float = 30.0
    min_category_freq: float = 0.01
    max_reject_fraction: float = 0.10

    def __post_init__(self) -> None:
        if not (0.0 <= self.min_category_freq < 1.0):
            raise ValueError("min_category_freq must be in [0, 1)")
        if not (0.0 <= self.max_reject_fraction <= 1.0):
            raise ValueError("max_reject_fraction must be in [0, 1]")
        if not (self.maturity_years > 0.0):
            raise ValueError("maturity_years must be positive")


@dataclass(frozen=True)
class ClassifiedLoan:
    """Outcome label for one loan; status None means Excluded."""

    loan_id: str
    status: LoanStatus | None
    time: float | None
    reason: str


def _months_to_years(months: int) -> float:
    return max(1, months) / 12.0


def categorize(
    origination_month: int | None,
    history: list[PerformanceRecord],
    config: IngestConfig,
) -> tuple[LoanStatus | None, float | None, str]:
    """Label one loan from its (sorted) monthly history.

    The loan takes the chronologically first terminal event: Prepaid at
    the first voluntary-payoff month (zero balance 01 with an accepted
    repurchase flag), Defaulted at the first month with a default
    zero-balance code or REO delinquency, default winning a same-month
    tie.  Otherwise Active when the history reaches ``data_end`` with no
    payoff code, else Excluded with a reason.  Scanning first qualifying
    months makes the label insensitive to duplicated rows.
    """
    if origination_month is None:
        return None, None, "missing first_payment_date"
    if not history:
        return None, None, "no performance history"

    prepaid_month = None
    default_month = None
    for rec in history:
        if (
            prepaid_month is None
            and rec.zero_balance == "01"
            and rec.repurchase in config.prepaid_repurchase_values
        ):
            prepaid_month = rec.reporting_month
        if default_month is None and (
            rec.zero_balance in config.default_zb_codes or rec.delinquency == "R"
        ):
            default_month = rec.reporting_month

    if default_month is not None and (
        prepaid_month is None or default_month <= prepaid_month
    ):
        months = default_month - origination_month
        if months < 0:
            return None, None, "event precedes origination"
        return LoanStatus.DEFAULTED, _months_to_years(months), ""
    if prepaid_month is not None:
        months = prepaid_month - origination_month
        if months < 0:
            return None, None, "event precedes origination"
        return LoanStatus.PREPAID, _months_to_years(months), ""

    last = history[-1]
    if last.reporting_month >= config.data_end and last.zero_balance == "":
        months = last.reporting_month - origination_month
        if months < 0:
            return None, None, "event precedes origination"
        return LoanStatus.ACTIVE, _months_to_years(months), ""
    if last.zero_balance not in ("", "01"):
        return None, None, f"terminal zero-balance code {last.zero_balance}"
    if last.zero_balance == "01":
        return None, None, "payoff with unaccepted repurchase flag"
    return None, None, "history ends before observation cutoff"


@dataclass(frozen=True)
class PreprocessSpec:
    """Frozen preprocessing decisions, serializable and replayable.

    ``quantitative`` maps field name to (mean, sd) used for
    standardization; ``categorical`` maps field name to its baseline
    level, indicator column levels, and raw-value grouping; unseen or
    missing raw values fall to the "other" group when one exists and to
    the baseline (all indicators zero) otherwise.  The judicial-state
    membership is copied in at fit time so a spec is self-contained.
    """

    quantitative: dict[str, tuple[float, float]]
    categorical: dict[str, dict]
    judicial_states: tuple[str, ...]
    version: int = 1

    @property
    def schema(self) -> tuple[str, ...]:
        cols: list[str] = list(QUANT_FIELDS)
        cols.append("intercept")
        for name in CAT_FIELDS[:2]:
            cols.extend(f"{name}:{lvl}" for lvl in self.categorical[name]["columns"])
        cols.append("judicial_state")
        cols.extend(
            f"{CAT_FIELDS[2]}:{lvl}" for lvl in self.categorical[CAT_FIELDS[2]]["columns"]
        )
        return tuple(cols)

    def to_json_dict(self) -> dict:
        return {
            "version": self.version,
            "quantitative": {k: [v[0], v[1]] for k, v in self.quantitative.items()},
            "categorical": self.categorical,
            "judicial_states": list(self.judicial_states),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PreprocessSpec":
        return cls(
            quantitative={k: (float(v[0]), float(v[1])) for k, v in d["quantitative"].items()},
            categorical={
                k: {
                    "baseline": v["baseline"],
                    "columns": list(v["columns"]),
                    "map": dict(v["map"]),
                }
                for k, v in d["categorical"].items()
            },
            judicial_states=tuple(d["judicial_states"]),
            version=int(d["version"]),
        )


def fit_preprocess(
    records: list[OriginationRecord],
    judicial_states: frozenset[str] | None = None,
    min_category_freq: float = 0.01,
) -> PreprocessSpec:
    """Learn standardization and grouping from the modeling population.

    Quantitative statistics use the population convention (ddof 0) over
    non-missing values; a constant field raises ZeroVarianceError since
    its standardized column would be ill-defined.  Categorical levels
    seen in less than ``min_category_freq`` of non-missing rows merge
    into "other"; the most frequent level becomes the baseline and gets
    no column.
    """
    if not records:
        raise IngestError("cannot fit preprocessing on zero loans")
    states = judicial_states if judicial_states is not None else load_judicial_states()

    quantitative: dict[str, tuple[float, float]] = {}
    for name in QUANT_FIELDS:
        vals = np.array(
            [getattr(r, name) for r in records if getattr(r, name) is not None], dtype=float
        )
        if vals.size == 0:
            raise IngestError(f"field {name} has no usable values")
        mean = float(np.mean(vals))
        sd = float(np.std(vals))
        if sd == 0.0:
            raise ZeroVarianceError(f"field {name} is constant ({mean}); cannot standardize")
        quantitative[name] = (mean, sd)

    categorical: dict[str, dict] = {}
    for name in CAT_FIELDS:
        counts = Counter(
            getattr(r, name) for r in records if getattr(r, name) is not None
        )
        total = sum(counts.values())
        if total == 0:
            raise IngestError(f"field {name} has no usable values")
        kept = {lvl for lvl, c in counts.items() if c / total >= min_category_freq}
        merged = set(counts) - kept
        if kept:
            # baseline: most frequent kept level, ties broken lexicographically
            baseline = min(kept, key=lambda lvl: (-counts[lvl], lvl))
            columns = sorted(kept - {baseline})
            if merged:
                columns.append(OTHER)
        else:
            # every level is rare: all rows collapse to one group, no columns
            baseline = OTHER
            columns = []
        mapping = {lvl: (lvl if lvl in kept else OTHER) for lvl in sorted(counts)}
        categorical[name] = {"baseline": baseline, "columns": columns, "map": mapping}

    return PreprocessSpec(
        quantitative=quantitative,
        categorical=categorical,
        judicial_states=tuple(sorted(states)),
    )


def build_design(
    records: list[OriginationRecord], spec: PreprocessSpec
) -> tuple[list[tuple[str, np.ndarray]], list[tuple[str, str]]]:
    """Covariate vectors in ``spec.schema`` order, one per loan.

    Returns (rows, rejects) where rejects pair a loan id with the field
    that blocked it.  Quantitative or state fields must be present;
    missing categorical values fall to the "other" group like unseen
    levels.
    """
    state_set = frozenset(spec.judicial_states)
    rows: list[tuple[str, np.ndarray]] = []
    rejects: list[tuple[str, str]] = []
    schema = spec.schema
    p = len(schema)
    for rec in records:
        vec = np.zeros(p)
        pos = 0
        ok = True
        for name in QUANT_FIELDS:
            val = getattr(rec, name)
            if val is None:
                rejects.append((rec.loan_id, f"missing {name}"))
                ok = False
                break
            mean, sd = spec.quantitative[name]
            vec[pos] = (val - mean) / sd
            pos += 1
        if not ok:
            continue
        vec[pos] = 1.0  # intercept
        pos += 1
        for name in CAT_FIELDS[:2]:
            pos = _fill_indicators(vec, pos, rec, name, spec)
        if rec.property_state is None:
            rejects.append((rec.loan_id, "missing property_state"))
            continue
        vec[pos] = 1.0 if rec.property_state in state_set else 0.0
        pos += 1
        pos = _fill_indicators(vec, pos, rec, CAT_FIELDS[2], spec)
        rows.append((rec.loan_id, vec))
    return rows, rejects


def _fill_indicators(
    vec: np.ndarray, pos: int, rec: OriginationRecord, name: str, spec: PreprocessSpec
) -> int:
    info = spec.categorical[name]
    raw = getattr(rec, name)
    level = info["map"].get(raw, OTHER) if raw is not None else OTHER
    for col_level in info["columns"]:
        if level == col_level:
            vec[pos] = 1.0
        pos += 1
    return pos


@dataclass(frozen=True)
class IngestResult:
    """Everything the pipeline produced, including what it threw away."""

    dataset: Dataset
    preprocess: PreprocessSpec
    classified: tuple[ClassifiedLoan, ...]
    origination_rejects: tuple[RejectedRow, ...]
    performance_rejects: tuple[RejectedRow, ...]
    counts: dict[str, int]


def _missing_required(rec: OriginationRecord) -> str | None:
    """First required design field the record lacks, or None if complete."""
    for name in QUANT_FIELDS:
        if getattr(rec, name) is None:
            return name
    if rec.property_state is None:
        return "property_state"
    return None


def _check_reject_fraction(n_rejects: int, n_rows: int, label: str, config: IngestConfig):
    if n_rows and n_rejects / n_rows > config.max_reject_fraction:
        raise IngestError(
            f"{label} file: {n_rejects}/{n_rows} rows rejected, over the "
            f"{config.max_reject_fraction:.0%} threshold"
        )


def ingest_portfolio(
    origination_path,
    performance_path,
    schema: FileSchema | None = None,
    config: IngestConfig | None = None,
) -> IngestResult:
    """Run the full pipeline from raw files to a modeling dataset.

    Loans keep origination-file order.  Excluded loans appear in
    ``classified`` with their reason but not in the dataset; ``counts``
    tallies every category plus rejected rows.
    """
    schema = schema if schema is not None else load_default_schema()
    config = config if config is not None else IngestConfig()

    orig_records, orig_rejects = read_origination_file(origination_path, schema)
    perf_records, perf_rejects = read_performance_file(performance_path, schema)
    _check_reject_fraction(
        len(orig_rejects), len(orig_records) + len(orig_rejects), "origination", config
    )
    _check_reject_fraction(
        len(perf_rejects), len(perf_records) + len(perf_rejects), "performance", config
    )

    history: dict[str, list[PerformanceRecord]] = {}
    for rec in perf_records:
        history.setdefault(rec.loan_id, []).append(rec)
    for recs in history.values():
        recs.sort(key=lambda r: r.reporting_month)

    classified: list[ClassifiedLoan] = []
    labeled: dict[str, tuple[LoanStatus, float]] = {}
    modeling: list[OriginationRecord] = []
    for rec in orig_records:
        status, time, reason = categorize(rec.first_payment, history.get(rec.loan_id, []), config)
        if status is not None:
            # exclude design-incomplete loans up front so the preprocessing
            # statistics are fitted on exactly the loans entering the dataset
            missing = _missing_required(rec)
            if missing is not None:
                status, time, reason = None, None, f"missing {missing}"
        classified.append(ClassifiedLoan(rec.loan_id, status, time, reason))
        if status is not None:
            labeled[rec.loan_id] = (status, time)
            modeling.append(rec)

    if not modeling:
        raise IngestError("no loan survived categorization")
    spec = fit_preprocess(modeling, min_category_freq=config.min_category_freq)
    rows, design_rejects = build_design(modeling, spec)
    if design_rejects:
        raise AssertionError(f"complete records rejected by build_design: {design_rejects}")

    loans = []
    for loan_id, vec in rows:
        status, time = labeled[loan_id]
        loans.append(
            LoanObservation(
                loan_id=loan_id,
                status=status,
                time=time,
                covariates=CovariatePath.constant(vec),
                maturity=config.maturity_years,
            )
        )

    dataset = Dataset(loans=tuple(loans), schema=spec.schema)
    counts = Counter(
        c.status.value if c.status is not None else "excluded" for c in classified
    )
    counts["rejected_rows"] = len(orig_rejects) + len(perf_rejects)
    return IngestResult(
        dataset=dataset,
        preprocess=spec,
        classified=tuple(classified),
        origination_rejects=tuple(orig_rejects),
        performance_rejects=tuple(perf_rejects),
        counts=dict(counts),
    )
