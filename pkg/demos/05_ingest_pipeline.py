"""From raw pipe-delimited loan files to a model-ready dataset.

Builds a toy origination file and matching monthly performance history,
then runs the full ingestion: event categorization from zero-balance
codes, exclusion with reasons, covariate standardization, categorical
encoding against the most frequent level, and the judicial-state
recoding.  The same pipeline drives the ``mortsurv ingest`` subcommand.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from mortsurv import IngestConfig, ingest_portfolio
from mortsurv.ingest import month_index

# column layout follows the packaged default schema (23 origination
# fields, 9 performance fields); only the ones the model uses are filled
O_BLANKS = [""] * 23
P_BLANKS = [""] * 9


def orow(lid, cs, state, mi, dti, upb, rate, nb, ptype="SF", occ="O",
         ftb="N", units="1"):
    row = list(O_BLANKS)
    row[0], row[1], row[2] = cs, "200201", ftb
    row[5], row[6], row[7] = mi, units, occ
    row[8], row[9], row[10] = "80", dti, upb
    row[12], row[16], row[17] = rate, state, ptype
    row[19], row[22] = lid, nb
    return "|".join(row)


def prow(lid, ym, zb="", dlq="0", rep=""):
    row = list(P_BLANKS)
    row[0], row[1], row[3], row[6], row[8] = lid, ym, dlq, rep, zb
    return "|".join(row)


orig_rows = [
    # prepays in 2004
    orow("A01", "720", "FL", mi="0", dti="28", upb="180000", rate="6.5", nb="2"),
    # defaults via REO in 2006
    orow("A02", "580", "CA", mi="30", dti="45", upb="95000", rate="9.1", nb="1"),
    # still active at the cutoff
    orow("A03", "705", "TX", mi="12", dti="33", upb="240000", rate="7.0", nb="2"),
    # missing credit score: excluded
    orow("A04", "9999", "NY", mi="0", dti="30", upb="150000", rate="7.5", nb="1"),
    orow("A05", "690", "OH", mi="25", dti="38", upb="120000", rate="8.2", nb="1",
         units="2", ftb="Y"),
]
perf_rows = [
    prow("A01", "200201"), prow("A01", "200405", zb="01", rep="N"),
    prow("A02", "200201"), prow("A02", "200602", zb="09"),
    prow("A03", "200201"), prow("A03", "201402"),
    prow("A04", "200201"), prow("A04", "200405", zb="01", rep="N"),
    prow("A05", "200201"), prow("A05", "200703", zb="01", rep="N"),
]

with tempfile.TemporaryDirectory() as tmp:
    orig = Path(tmp) / "orig.txt"
    perf = Path(tmp) / "perf.txt"
    orig.write_text("\n".join(orig_rows) + "\n")
    perf.write_text("\n".join(perf_rows) + "\n")

    config = IngestConfig(data_end=month_index("201401", "yyyymm"))
    result = ingest_portfolio(str(orig), str(perf), None, config)

print("categorization:")
for row in result.classified:
    status = row.status.value if row.status is not None else "excluded"
    time = f"{row.time:.2f}y" if row.time is not None else "     -"
    why = f"  ({row.reason})" if row.reason else ""
    print(f"  {row.loan_id}: {status:>8} {time}{why}")

print()
print("counts:", dict(sorted(result.counts.items())))
print()
print("model columns, in order:")
print(" ", ", ".join(result.dataset.schema))
spec = result.preprocess
print()
print("standardization picked up from the data:")
for name, (mean, sd) in spec.quantitative.items():
    print(f"  {name}: mean {mean:.3f}, sd {sd:.3f}")
first = result.dataset.loans[0]
print()
print(f"first design vector ({first.loan_id}):",
      " ".join(f"{v:.3f}" for v in first.covariates.values[0]))
