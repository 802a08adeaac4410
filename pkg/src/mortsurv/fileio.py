"""Readers and writers for every on-disk format the package speaks.

All writers are deterministic: fields are emitted in fixed order, floats
use shortest round-trip repr, CSV rows end in a bare newline, and JSON
is sorted and indented.  Reading back what was written reproduces the
in-memory objects except where noted (posterior draw files do not carry
sampler statistics).
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .mcmc import ParamSummary, PosteriorSamples, PriorSpec, SamplerConfig
from .model import (
    CovariatePath,
    Dataset,
    LognormalBaseline,
    LoanObservation,
    LoanStatus,
    ModelParams,
)
from .synth import BenchmarkConfig, TruthRecord

__all__ = [
    "write_dataset_csv",
    "read_dataset_csv",
    "write_draws_csv",
    "read_draws_csv",
    "write_summary_csv",
    "write_acceptance_csv",
    "write_truth_json",
    "read_truth_json",
    "read_fit_config",
    "read_simulate_config",
    "params_to_json_dict",
    "params_from_json_dict",
]

_STATUS_BY_VALUE = {s.value: s for s in LoanStatus}


def fmt_value(x) -> str:
    """Shortest round-trip text for floats; str() for everything else."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


_fmt = fmt_value


def _open_write(path):
    return open(path, "w", encoding="utf-8", newline="")


# --- dataset ------------------------------------------------------------------


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Long-format dataset: one row per covariate observation.

    Loan-level fields (status, time, maturity) repeat on every row of the
    loan; single-observation loans take one row.
    """
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["loan_id", "status", "time", "maturity", "obs_time", *dataset.schema])
        for loan in dataset.loans:
            for obs_time, values in zip(loan.covariates.obs_times, loan.covariates.values):
                w.writerow(
                    [
                        loan.loan_id,
                        loan.status.value,
                        _fmt(loan.time),
                        _fmt(loan.maturity),
                        _fmt(obs_time),
                        *(_fmt(v) for v in values),
                    ]
                )


def read_dataset_csv(path) -> Dataset:
    """Inverse of ``write_dataset_csv``.

    Rows of one loan must be consecutive and agree on the loan-level
    fields; covariate observation times must be strictly increasing.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty dataset file") from None
        fixed = ["loan_id", "status", "time", "maturity", "obs_time"]
        if header[: len(fixed)] != fixed:
            raise ValueError(f"{path}: expected columns {fixed}..., got {header[:5]}")
        schema = tuple(header[len(fixed) :])
        if not schema:
            raise ValueError(f"{path}: no covariate columns")

        loans: list[LoanObservation] = []
        seen: set[str] = set()
        current: dict | None = None

        def flush(block: dict) -> None:
            loans.append(
                LoanObservation(
                    loan_id=block["loan_id"],
                    status=block["status"],
                    time=block["time"],
                    maturity=block["maturity"],
                    covariates=CovariatePath(
                        obs_times=np.array(block["obs_times"]),
                        values=np.array(block["values"]),
                    ),
                )
            )

        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(fixed) + len(schema):
                raise ValueError(f"{path}:{line_no}: expected {len(fixed)+len(schema)} fields")
            loan_id, status_s, time_s, maturity_s, obs_s = row[:5]
            if status_s not in _STATUS_BY_VALUE:
                raise ValueError(f"{path}:{line_no}: unknown status {status_s!r}")
            head = (
                loan_id,
                _STATUS_BY_VALUE[status_s],
                float(time_s),
                float(maturity_s),
            )
            if current is None or current["loan_id"] != loan_id:
                if current is not None:
                    flush(current)
                if loan_id in seen:
                    raise ValueError(f"{path}:{line_no}: rows of loan {loan_id} not consecutive")
                seen.add(loan_id)
                current = {
                    "loan_id": loan_id,
                    "status": head[1],
                    "time": head[2],
                    "maturity": head[3],
                    "obs_times": [],
                    "values": [],
                }
            elif (current["status"], current["time"], current["maturity"]) != head[1:]:
                raise ValueError(f"{path}:{line_no}: loan {loan_id} rows disagree on loan fields")
            current["obs_times"].append(float(obs_s))
            current["values"].append([float(v) for v in row[5:]])
        if current is not None:
            flush(current)
    return Dataset(loans=tuple(loans), schema=schema)


# --- posterior draws ----------------------------------------------------------


def write_draws_csv(samples: PosteriorSamples, path) -> None:
    """Kept draws, one row each: chain, iteration, then ``param_names``."""
    mat = samples.matrix()
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain", "iteration", *samples.param_names()])
        for i in range(samples.n_draws):
            w.writerow(
                [
                    int(samples.chain[i]),
                    int(samples.iteration[i]),
                    *(_fmt(v) for v in mat[i]),
                ]
            )


def read_draws_csv(path) -> PosteriorSamples:
    """Inverse of ``write_draws_csv``; sampler statistics come back empty."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty draws file") from None
        if header[:2] != ["chain", "iteration"]:
            raise ValueError(f"{path}: expected chain,iteration leading columns")
        names = header[2:]
        prefix = ["mu_default", "sigma2_default", "mu_prepay", "sigma2_prepay"]
        if names[:4] != prefix:
            raise ValueError(f"{path}: expected parameter columns to start with {prefix}")
        rest = names[4:]
        schema = tuple(n.split(":", 1)[1] for n in rest if n.startswith("theta_default:"))
        p = len(schema)
        expected = [f"theta_default:{s}" for s in schema] + [f"theta_prepay:{s}" for s in schema]
        if rest != expected:
            raise ValueError(f"{path}: malformed theta columns")
        rows = []
        meta = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 2 + 4 + 2 * p:
                raise ValueError(f"{path}:{line_no}: wrong field count")
            meta.append((int(row[0]), int(row[1])))
            rows.append([float(v) for v in row[2:]])
    if not rows:
        raise ValueError(f"{path}: no draws")
    mat = np.array(rows)
    chain = np.array([m[0] for m in meta], dtype=np.int64)
    iteration = np.array([m[1] for m in meta], dtype=np.int64)
    return PosteriorSamples(
        schema=schema,
        n_chains=int(np.unique(chain).size),
        chain=chain,
        iteration=iteration,
        mu_default=mat[:, 0],
        sigma2_default=mat[:, 1],
        mu_prepay=mat[:, 2],
        sigma2_prepay=mat[:, 3],
        theta_default=mat[:, 4 : 4 + p],
        theta_prepay=mat[:, 4 + p :],
        acceptance={},
        final_scales={},
    )


def write_summary_csv(rows: list[ParamSummary], path) -> None:
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "mean", "sd", "median", "q2.5", "q97.5", "rhat", "ess", "mcse"])
        for r in rows:
            w.writerow(
                [
                    r.name,
                    *(_fmt(v) for v in (r.mean, r.sd, r.median, r.q2_5, r.q97_5, r.rhat, r.ess, r.mcse)),
                ]
            )


def write_acceptance_csv(samples: PosteriorSamples, path) -> None:
    blocks = list(samples.acceptance)
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain", *blocks])
        for c in range(samples.n_chains):
            w.writerow([c, *(_fmt(samples.acceptance[b][c]) for b in blocks)])


# --- truth / params -----------------------------------------------------------


def params_to_json_dict(params: ModelParams) -> dict:
    return {
        "mu_default": params.baseline_default.mu,
        "sigma2_default": params.baseline_default.sigma2,
        "mu_prepay": params.baseline_prepay.mu,
        "sigma2_prepay": params.baseline_prepay.sigma2,
        "theta_default": [float(v) for v in params.theta_default],
        "theta_prepay": [float(v) for v in params.theta_prepay],
    }


def params_from_json_dict(d: dict) -> ModelParams:
    return ModelParams(
        baseline_default=LognormalBaseline(float(d["mu_default"]), float(d["sigma2_default"])),
        baseline_prepay=LognormalBaseline(float(d["mu_prepay"]), float(d["sigma2_prepay"])),
        theta_default=np.array(d["theta_default"], dtype=float),
        theta_prepay=np.array(d["theta_prepay"], dtype=float),
    )


def _dump_json(obj: dict, path) -> None:
    with _open_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_truth_json(truth: TruthRecord, path) -> None:
    _dump_json(
        {
            "params": params_to_json_dict(truth.params),
            "schema": list(truth.schema),
            "seed": truth.seed,
            "maturity": truth.maturity,
            "censor_time": truth.censor_time,
        },
        path,
    )


def read_truth_json(path) -> TruthRecord:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return TruthRecord(
        params=params_from_json_dict(d["params"]),
        schema=tuple(d["schema"]),
        seed=int(d["seed"]),
        maturity=float(d["maturity"]),
        censor_time=None if d["censor_time"] is None else float(d["censor_time"]),
    )


# --- run configs ----------------------------------------------------------------


def _build_from_dict(cls, d: dict, what: str):
    valid = set(cls.__dataclass_fields__)
    unknown = set(d) - valid
    if unknown:
        raise ValueError(f"{what}: unknown keys {sorted(unknown)}; valid keys are {sorted(valid)}")
    return cls(**d)


def read_fit_config(path) -> tuple[PriorSpec, SamplerConfig]:
    """Fit configuration JSON: {"prior": {...}, "sampler": {...}}, both optional."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    unknown = set(d) - {"prior", "sampler"}
    if unknown:
        raise ValueError(f"fit config: unknown top-level keys {sorted(unknown)}")
    prior = _build_from_dict(PriorSpec, d.get("prior", {}), "fit config prior")
    sampler = _build_from_dict(SamplerConfig, d.get("sampler", {}), "fit config sampler")
    return prior, sampler


def read_simulate_config(path) -> BenchmarkConfig:
    """Simulation configuration JSON with the ground truth under "true"."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if "true" not in d:
        raise ValueError('simulate config: missing required key "true"')
    params = params_from_json_dict(d["true"])
    rest = {k: v for k, v in d.items() if k != "true"}
    rest["true_params"] = params
    return _build_from_dict(BenchmarkConfig, rest, "simulate config")
