"""Loan-file ingestion: parsing, outcome classification, preprocessing,
and the end-to-end portfolio build."""

from __future__ import annotations

import numpy as np
import pytest

from mortsurv import IngestConfig, IngestError, LoanStatus, ZeroVarianceError, ingest_portfolio
from mortsurv.ingest import (
    OriginationRecord,
    PerformanceRecord,
    PreprocessSpec,
    build_design,
    categorize,
    fit_preprocess,
    load_default_schema,
    load_judicial_states,
    month_index,
    read_origination_file,
    read_performance_file,
)


def orow(cs="720", fpd="200501", ftb="N", mi="0", units="1", occ="O", cltv="80",
         dti="30", upb="150000", rate="5.5", state="CA", ptype="SF", lid="L001",
         nb="2"):
    row = [""] * 23
    row[0] = cs
    row[1] = fpd
    row[2] = ftb
    row[5] = mi
    row[6] = units
    row[7] = occ
    row[8] = cltv
    row[9] = dti
    row[10] = upb
    row[12] = rate
    row[16] = state
    row[17] = ptype
    row[19] = lid
    row[22] = nb
    return "|".join(row)


def prow(lid, ym, dlq="0", rep="", zb=""):
    row = [""] * 9
    row[0] = lid
    row[1] = ym
    row[3] = dlq
    row[6] = rep
    row[8] = zb
    return "|".join(row)


def mon(ym):
    return month_index(ym, "yyyymm")


def perf(lid, ym, dlq="0", rep="", zb=""):
    return PerformanceRecord(loan_id=lid, reporting_month=mon(ym),
                             delinquency=dlq, zero_balance=zb, repurchase=rep)


def record_stub(**kw):
    base = dict(loan_id="X", first_payment=mon("200501"),
                credit_score=700.0, mi_percent=0.0, num_units=1.0, dti=30.0,
                upb=150000.0, interest_rate=5.5, num_borrowers=2.0, cltv=80.0,
                first_time_buyer="N", occupancy_status="O", property_type="SF",
                property_state="CA")
    base.update(kw)
    return OriginationRecord(**base)


def varied_records(n=12, **overrides):
    """Records with nonconstant quantitative fields (standardization needs spread)."""
    recs = []
    for i in range(n):
        kw = dict(loan_id=f"L{i}", credit_score=600.0 + 10 * i, dti=20.0 + i,
                  upb=1e5 + 1000 * i, mi_percent=float(i % 30),
                  num_units=float(1 + (i % 3)), interest_rate=4 + 0.1 * (i % 7),
                  num_borrowers=float(1 + (i % 2)))
        for k, v in overrides.items():
            kw[k] = v(i) if callable(v) else v
        recs.append(record_stub(**kw))
    return recs


CFG = IngestConfig()  # data_end = Jan 2014


# --- low-level parsing ----------------------------------------------------------


def test_month_index_arithmetic():
    assert mon("200502") - mon("200501") == 1
    assert mon("200601") - mon("200501") == 12
    with pytest.raises(ValueError):
        mon("200513")
    with pytest.raises(ValueError):
        mon("20051")


def test_origination_parsing_and_missing_codes(tmp_path):
    f = tmp_path / "orig.txt"
    f.write_text("\n".join([
        orow(lid="A1"),
        orow(lid="A2", cs="9999", dti="999"),  # missing sentinels
        orow(lid="A3", cs="not_a_number"),
    ]) + "\n")
    schema = load_default_schema()
    records, rejects = read_origination_file(f, schema)
    assert [r.loan_id for r in records] == ["A1", "A2"]
    assert records[0].credit_score == 720.0
    assert records[1].credit_score is None
    assert records[1].dti is None
    assert len(rejects) == 1
    assert rejects[0].line_no == 3
    assert "credit_score" in rejects[0].reason


def test_origination_duplicate_and_blank_id_rejected(tmp_path):
    f = tmp_path / "orig.txt"
    f.write_text("\n".join([orow(lid="A1"), orow(lid="A1"), orow(lid="")]) + "\n")
    records, rejects = read_origination_file(f, load_default_schema())
    assert len(records) == 1
    assert len(rejects) == 2


def test_performance_zero_balance_left_padded(tmp_path):
    f = tmp_path / "perf.txt"
    f.write_text(prow("A1", "200506", zb="3") + "\n" +
                 prow("A1", "200507", rep="n", zb="01") + "\n")
    records, rejects = read_performance_file(f, load_default_schema())
    assert not rejects
    assert records[0].zero_balance == "03"
    assert records[1].repurchase == "N"  # uppercased


# --- outcome classification ------------------------------------------------------


def test_prepayment_needs_accepted_repurchase_flag():
    hist = [perf("A", "200501"), perf("A", "200607", rep="N", zb="01")]
    status, time, _ = categorize(mon("200501"), hist, CFG)
    assert status is LoanStatus.PREPAID
    assert time == pytest.approx(18 / 12)

    hist_bad = [perf("A", "200501"), perf("A", "200607", rep="Y", zb="01")]
    status, time, reason = categorize(mon("200501"), hist_bad, CFG)
    assert status is None
    assert "repurchase" in reason


def test_blank_repurchase_accepted_only_when_configured():
    hist = [perf("A", "200501"), perf("A", "200607", rep="", zb="01")]
    status, _, _ = categorize(mon("200501"), hist, CFG)
    assert status is None
    lax = IngestConfig(prepaid_repurchase_values=("N", ""))
    status, _, _ = categorize(mon("200501"), hist, lax)
    assert status is LoanStatus.PREPAID


def test_default_codes_and_reo_delinquency():
    for zb in ("03", "06", "09"):
        hist = [perf("A", "200501"), perf("A", "200612", zb=zb)]
        status, time, _ = categorize(mon("200501"), hist, CFG)
        assert status is LoanStatus.DEFAULTED
        assert time == pytest.approx(23 / 12)
    hist = [perf("A", "200501"), perf("A", "200612", dlq="R")]
    status, _, _ = categorize(mon("200501"), hist, CFG)
    assert status is LoanStatus.DEFAULTED


def test_first_qualifying_month_wins():
    hist = [
        perf("A", "200501"),
        perf("A", "200502", zb="03"),
        perf("A", "200509", rep="N", zb="01"),
    ]
    status, time, _ = categorize(mon("200501"), hist, CFG)
    assert status is LoanStatus.DEFAULTED
    assert time == pytest.approx(1 / 12)


def test_same_month_event_floors_to_one_month():
    hist = [perf("A", "200501", rep="N", zb="01")]
    status, time, _ = categorize(mon("200501"), hist, CFG)
    assert status is LoanStatus.PREPAID
    assert time == pytest.approx(1 / 12)


def test_duplicated_history_rows_do_not_change_outcome():
    hist = [perf("A", "200501"), perf("A", "200607", rep="N", zb="01")]
    doubled = sorted(hist + hist, key=lambda r: r.reporting_month)
    assert categorize(mon("200501"), hist, CFG) == categorize(mon("200501"), doubled, CFG)


def test_active_needs_report_at_or_past_cutoff():
    live = [perf("A", "200501"), perf("A", "201401")]
    status, time, _ = categorize(mon("200501"), live, CFG)
    assert status is LoanStatus.ACTIVE
    assert time == pytest.approx((mon("201401") - mon("200501")) / 12)

    stale = [perf("A", "200501"), perf("A", "201312")]
    status, _, reason = categorize(mon("200501"), stale, CFG)
    assert status is None
    assert "cutoff" in reason


def test_unknown_terminal_code_excluded():
    hist = [perf("A", "200501"), perf("A", "200607", zb="15")]
    status, _, reason = categorize(mon("200501"), hist, CFG)
    assert status is None
    assert "15" in reason


def test_event_before_origination_excluded():
    hist = [perf("A", "200401", rep="N", zb="01")]
    status, _, reason = categorize(mon("200501"), hist, CFG)
    assert status is None
    assert "precede" in reason


def test_no_history_excluded():
    status, _, reason = categorize(mon("200501"), [], CFG)
    assert status is None
    assert "history" in reason


def test_missing_first_payment_date_excluded():
    hist = [perf("A", "200501"), perf("A", "201402")]
    status, _, reason = categorize(None, hist, CFG)
    assert status is None
    assert "first_payment" in reason


# --- preprocessing ----------------------------------------------------------------


def test_standardization_is_population_moments():
    recs = varied_records(4)
    spec = fit_preprocess(recs, min_category_freq=0.01)
    mean, sd = spec.quantitative["credit_score"]
    vals = np.array([600.0, 610.0, 620.0, 630.0])
    assert mean == pytest.approx(vals.mean())
    assert sd == pytest.approx(vals.std())  # ddof=0


def test_zero_variance_aborts():
    recs = [record_stub(loan_id=f"L{i}") for i in range(3)]
    with pytest.raises(ZeroVarianceError):
        fit_preprocess(recs)


def test_rare_levels_merge_and_most_frequent_is_baseline():
    # SF x 120, CO x 78, PU x 2 of 200: PU is under the 1.5% floor
    recs = varied_records(
        200, property_type=lambda i: "SF" if i < 120 else ("CO" if i < 198 else "PU"))
    spec = fit_preprocess(recs, min_category_freq=0.015)
    pt = spec.categorical["property_type"]
    assert pt["baseline"] == "SF"
    assert "CO" in pt["columns"]
    assert "PU" not in pt["columns"]
    assert "other" in pt["columns"]
    assert pt["map"]["PU"] == "other"


def test_unseen_level_maps_to_other_when_kept():
    recs = varied_records(
        200, property_type=lambda i: "SF" if i < 120 else ("CO" if i < 198 else "PU"))
    spec = fit_preprocess(recs, min_category_freq=0.015)
    rows, missing = build_design([record_stub(property_type="MH")], spec)
    assert not missing
    (lid, x), = rows
    schema = list(spec.schema)
    assert x[schema.index("property_type:other")] == 1.0
    assert x[schema.index("property_type:CO")] == 0.0


def test_unseen_level_falls_to_baseline_without_other_group():
    recs = varied_records(12, property_type=lambda i: "SF" if i % 3 else "CO")
    spec = fit_preprocess(recs, min_category_freq=0.01)
    assert "other" not in spec.categorical["property_type"]["columns"]
    rows, missing = build_design([record_stub(property_type="MH")], spec)
    assert not missing
    (_, x), = rows
    schema = list(spec.schema)
    assert x[schema.index("property_type:CO")] == 0.0


def test_missing_quantitative_reported_not_built():
    recs = varied_records(10)
    spec = fit_preprocess(recs)
    rows, missing = build_design([record_stub(credit_score=None)], spec)
    assert not rows
    assert missing == [("X", "missing credit_score")]


def test_judicial_state_membership():
    states = load_judicial_states()
    assert "FL" in states and "NY" in states and "OH" in states
    assert "CA" not in states and "TX" not in states
    assert len(states) == 25


def test_preprocess_spec_json_roundtrip():
    recs = varied_records(12, first_time_buyer=lambda i: "Y" if i % 3 else "N")
    spec = fit_preprocess(recs)
    again = PreprocessSpec.from_json_dict(spec.to_json_dict())
    assert again == spec
    assert again.schema == spec.schema


def test_schema_order_quants_then_intercept_then_categoricals():
    recs = varied_records(
        12,
        first_time_buyer=lambda i: "Y" if i % 2 else "N",
        occupancy_status=lambda i: "I" if i % 3 == 0 else "O",
    )
    spec = fit_preprocess(recs)
    s = list(spec.schema)
    assert s[:7] == ["credit_score", "mi_percent", "num_units", "dti", "upb",
                     "interest_rate", "num_borrowers"]
    assert s[7] == "intercept"
    ftb = [c for c in s if c.startswith("first_time_buyer:")]
    occ = [c for c in s if c.startswith("occupancy_status:")]
    assert ftb and occ
    assert s.index(ftb[0]) < s.index(occ[0]) < s.index("judicial_state")
    assert "cltv" not in s  # parsed for screening, never a covariate


# --- end to end --------------------------------------------------------------------


@pytest.fixture()
def toy_files(tmp_path):
    orig = tmp_path / "orig.txt"
    orig.write_text("\n".join([
        orow(lid="L001", cs="720", fpd="200501", ftb="Y", occ="O", state="FL",
             ptype="SF", mi="25", dti="30", upb="150000", rate="5.5", nb="2"),
        orow(lid="L002", cs="680", fpd="200503", ftb="N", occ="O", state="CA",
             ptype="SF", mi="0", dti="38", upb="220000", rate="6.0", nb="1"),
        orow(lid="L003", cs="750", fpd="200506", ftb="N", occ="I", state="NY",
             ptype="CO", mi="12", dti="25", upb="310000", rate="5.8", nb="2",
             units="2"),
        orow(lid="L004", cs="640", fpd="200502", ftb="Y", occ="O", state="TX",
             ptype="PU", mi="30", dti="44", upb="125000", rate="6.4", nb="1"),
        orow(lid="L005", cs="705", fpd="200504", ftb="N", occ="S", state="OH",
             ptype="SF", mi="0", dti="33", upb="180000", rate="5.9", nb="2"),
        orow(lid="L006", cs="9999", fpd="200505", ftb="N", occ="O", state="IL",
             ptype="SF", mi="0", dti="999", upb="160000", rate="6.1", nb="1"),
    ]) + "\n")
    rows = [
        prow("L001", "200501"), prow("L001", "200606", rep="N", zb="01"),
        prow("L002", "200503"), prow("L002", "200703", dlq="3", zb="03"),
        prow("L003", "200506"), prow("L003", "201402"),
        prow("L004", "200502"), prow("L004", "200801", dlq="R"),
        prow("L005", "200504"), prow("L005", "201212"),
        prow("L006", "200505"), prow("L006", "200610", rep="N", zb="01"),
    ]
    perf_file = tmp_path / "perf.txt"
    perf_file.write_text("\n".join(rows) + "\n")
    return orig, perf_file


def test_portfolio_end_to_end(toy_files):
    orig, perf_file = toy_files
    result = ingest_portfolio(orig, perf_file)
    assert result.counts == {"prepaid": 1, "default": 2, "active": 1,
                             "excluded": 2, "rejected_rows": 0}
    by_id = {l.loan_id: l for l in result.dataset.loans}
    assert by_id["L001"].time == pytest.approx(17 / 12)
    assert by_id["L002"].time == pytest.approx(2.0)
    assert by_id["L004"].status is LoanStatus.DEFAULTED
    assert by_id["L003"].status is LoanStatus.ACTIVE
    reasons = {c.loan_id: c.reason for c in result.classified if c.status is None}
    assert "cutoff" in reasons["L005"]
    assert "credit_score" in reasons["L006"]


def test_built_columns_are_standardized(toy_files):
    orig, perf_file = toy_files
    result = ingest_portfolio(orig, perf_file)
    x = np.vstack([l.covariates.values[0] for l in result.dataset.loans])
    schema = list(result.dataset.schema)
    for j, name in enumerate(schema[:7]):
        assert abs(x[:, j].mean()) < 1e-12, name
        assert abs(x[:, j].std() - 1.0) < 1e-12, name
    assert np.all(x[:, schema.index("intercept")] == 1.0)
    by_id = {l.loan_id: l.covariates.values[0, schema.index("judicial_state")]
             for l in result.dataset.loans}
    assert by_id["L001"] == 1.0  # FL
    assert by_id["L003"] == 1.0  # NY
    assert by_id["L002"] == 0.0  # CA
    assert by_id["L004"] == 0.0  # TX


def test_reject_threshold_aborts(tmp_path):
    orig = tmp_path / "orig.txt"
    orig.write_text("\n".join(
        [orow(lid=f"L{i}", cs=str(650 + i)) for i in range(5)]
        + [orow(lid="") for _ in range(5)]  # 50% rejects
    ) + "\n")
    perf_file = tmp_path / "perf.txt"
    perf_file.write_text(prow("L0", "200501") + "\n")
    with pytest.raises(IngestError):
        ingest_portfolio(orig, perf_file,
                         config=IngestConfig(max_reject_fraction=0.1))
