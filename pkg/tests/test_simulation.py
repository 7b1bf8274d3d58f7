import csv
import io
import json
import math

import numpy as np
import pytest

from anchorcrc.core import TestAccuracy, UnsupportedFormat
from anchorcrc.simulation import (
    SimulationConfig,
    emit_table,
    generate_replicate,
    load_scenarios,
    run_replicates,
    run_scenario,
    simulate_population,
    summarize,
)
from anchorcrc.stochastic import SeedStream

PERFECT = TestAccuracy(1.0, 1.0)
LOW = dict(acc1=TestAccuracy(0.9, 0.9), acc2=TestAccuracy(0.95, 0.95))
HEADER = ("prevalence,n2,estimator,mean,sd,avg_se,avg_wald_width,avg_credible_width,"
          "wald_cov,credible_cov")


def small_cfg(**kw):
    base = dict(n_tot=200, p=0.3, n2=60, n_replicates=40, s_draws=100, **LOW)
    base.update(kw)
    return SimulationConfig(**base)


def test_config_defaults_and_checks():
    cfg = SimulationConfig(n_tot=1000, p=0.3, n2=100, **LOW)
    assert (cfg.n_replicates, cfg.s_draws, cfg.fixed_case_count) == (5000, 1000, True)
    assert (cfg.n_true, cfg.psi) == (300, 0.1)
    with pytest.raises(ValueError):
        SimulationConfig(n_tot=100, p=0.3, n2=101, **LOW)
    with pytest.raises(ValueError):
        SimulationConfig(n_tot=100, p=1.3, n2=10, **LOW)
    with pytest.raises(ValueError):
        small_cfg(credible_rule="widest")


def test_from_json_aliases_and_rejects_unknown():
    obj = {"n_tot": 100, "prevalence": 0.2, "n2": 10, "acc1": {"se": 0.9, "sp": 0.9},
           "acc2": {"se": 0.95, "sp": 0.95}}
    cfg = SimulationConfig.from_json(obj, n_replicates=7, s_draws=None)
    assert cfg.p == 0.2 and cfg.n_replicates == 7 and cfg.s_draws == 1000
    with pytest.raises(ValueError):
        SimulationConfig.from_json({**obj, "colour": "red"})
    assert SimulationConfig.from_json(cfg.to_json()) == cfg


def test_no_disease_with_perfect_tests_has_no_positives():
    cfg = small_cfg(p=0.0, acc1=PERFECT, acc2=PERFECT)
    for r in range(20):
        c = generate_replicate(cfg, SeedStream(1).child(r)).cells
        assert c.n1 == c.n3 == c.n4 == c.n5 == c.n7 == 0


def test_stream2_census():
    cfg = small_cfg(n2=200)
    c = generate_replicate(cfg, SeedStream(2)).cells
    assert c.n5 == c.n6 == c.n9 == 0
    assert c.stream2_size == 200


def test_fixed_case_count():
    cfg = small_cfg()
    assert generate_replicate(cfg, SeedStream(3)).n_true == 60
    bern = small_cfg(fixed_case_count=False)
    counts = {generate_replicate(bern, SeedStream(3).child(r)).n_true for r in range(20)}
    assert len(counts) > 1


def test_stream_sizes_match_inclusion_probability():
    cfg = SimulationConfig(n_tot=1000, p=0.1, n2=100, **LOW)
    p_s1 = 0.1 * (0.5 * 0.8 + 0.5 * 0.1) + 0.9 * (0.1 * 0.8 + 0.9 * 0.1)
    both, only2 = [], []
    for r in range(2000):
        c = generate_replicate(cfg, SeedStream(4).child(r)).cells
        both.append(c.both_size)
        only2.append(c.stream2_only_size)
    for values, expected in ((both, 100 * p_s1), (only2, 100 * (1 - p_s1))):
        values = np.asarray(values, float)
        mc = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - expected) <= 3 * mc


def test_streams_are_independent():
    cfg = SimulationConfig(n_tot=1000, p=0.3, n2=300, **LOW)
    s1, s2 = [], []
    for r in range(200):
        pop = simulate_population(cfg, SeedStream(5).child(r).generator())
        s1.append(pop.stream1)
        s2.append(pop.stream2)
    s1 = np.concatenate(s1).astype(float)
    s2 = np.concatenate(s2).astype(float)
    r = np.corrcoef(s1, s2)[0, 1]
    assert abs(r) <= 3 / math.sqrt(s1.size)


def test_degenerate_scenario_is_all_zero():
    cfg = small_cfg(p=0.0, acc1=PERFECT, acc2=PERFECT, n_replicates=20)
    s = run_scenario(cfg)
    for name in ("RS", "CRC", "CRC_MLE"):
        row = s.row(name)
        assert row.mean == 0.0 and row.sd == 0.0


def test_summary_rows_and_mle_has_no_intervals():
    s = run_scenario(small_cfg())
    assert [r.estimator for r in s.rows] == ["RS", "CRC", "CRC_MLE"]
    mle = s.row("CRC_MLE")
    assert mle.avg_se is None and mle.wald_coverage_pct is None
    crc = s.row("CRC")
    assert 0 <= crc.credible_coverage_pct <= 100 and crc.sd >= 0
    with pytest.raises(KeyError):
        s.row("XYZ")


def test_summary_arithmetic_by_hand():
    cfg = small_cfg(n_replicates=30)
    res = run_replicates(cfg)
    s = summarize(cfg, res)
    crc = res[:, 3]
    assert s.row("CRC").mean == pytest.approx(crc.mean(), rel=1e-12)
    assert s.row("CRC").sd == pytest.approx(crc.std(ddof=1), rel=1e-12)
    lo = crc - 1.959963985 * res[:, 4]
    hi = crc + 1.959963985 * res[:, 4]
    cover = 100 * np.mean((lo <= res[:, 0]) & (res[:, 0] <= hi))
    assert s.row("CRC").wald_coverage_pct == pytest.approx(cover)


def test_emit_csv_header_and_round_trip():
    s = run_scenario(small_cfg())
    text = emit_table([s], "csv")
    assert text.splitlines()[0] == HEADER
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 3
    crc = s.row("CRC")
    assert float(rows[1]["mean"]) == pytest.approx(round(crc.mean, 1), abs=1e-9)
    assert float(rows[1]["credible_cov"]) == pytest.approx(
        round(crc.credible_coverage_pct, 1), abs=1e-9)
    assert rows[2]["avg_se"] == ""


def test_emit_json_and_markdown():
    s = run_scenario(small_cfg())
    recs = json.loads(emit_table([s], "json"))
    assert [r["estimator"] for r in recs] == ["RS", "CRC", "CRC_MLE"]
    assert recs[0]["n_tot"] == 200 and recs[2]["avg_se"] is None
    md = emit_table([s], "markdown")
    assert md.startswith("| prevalence | n2 |")


def test_emit_errors():
    with pytest.raises(ValueError):
        emit_table([], "csv")
    s = run_scenario(small_cfg(n_replicates=5))
    with pytest.raises(UnsupportedFormat):
        emit_table([s], "xlsx")


def test_worker_count_does_not_change_output():
    cfg = small_cfg(n_replicates=60)
    one = emit_table([run_scenario(cfg, workers=1)], "csv")
    two = emit_table([run_scenario(cfg, workers=2)], "csv")
    assert one == two


def test_load_scenarios(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps([small_cfg().to_json()]))
    (cfg,) = load_scenarios(str(path), n_replicates=3)
    assert cfg.n_replicates == 3
    path.write_text("{}")
    with pytest.raises(ValueError):
        load_scenarios(str(path))


def test_full_scale_settings_are_accepted():
    cfg = SimulationConfig(n_tot=10_000, p=0.1, n2=1000, n_replicates=5000, s_draws=1000, **LOW)
    assert cfg.n_replicates * cfg.s_draws == 5_000_000


def test_credible_calibration_small_population():
    cfg = SimulationConfig(n_tot=200, p=0.3, n2=60, n_replicates=1000, s_draws=200, **LOW)
    cov = run_scenario(cfg).row("CRC").credible_coverage_pct
    assert 93.5 <= cov <= 97.5


def test_table_row_with_large_anchor_sample():
    cfg = SimulationConfig(n_tot=1000, p=0.3, n2=300, n_replicates=2000, s_draws=200, **LOW)
    s = run_scenario(cfg)
    crc = s.row("CRC")
    assert abs(crc.mean - 300) <= 3 * crc.sd / math.sqrt(2000)
    assert abs(crc.credible_coverage_pct - 95.7) <= 2.0
    assert crc.sd < s.row("RS").sd
