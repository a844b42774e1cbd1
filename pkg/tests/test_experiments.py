from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gpit_sim.config import load_config
from gpit_sim.experiments import (
    ExperimentKind,
    ExperimentSpec,
    Histogram,
    deal_histogram,
    elasticity_csv,
    exp_all,
    exp_dynamic,
    exp_elasticity,
    exp_fixed_profit,
    histogram_csv,
    is_unimodal,
    prepare,
    profit_csv,
    run_mode,
)

SMOKE = Path(__file__).resolve().parent.parent / "configs" / "smoke.conf"


@pytest.fixture(scope="module")
def cfg():
    return load_config(SMOKE)


@pytest.fixture(scope="module")
def spec(cfg):
    return ExperimentSpec(ExperimentKind.ELASTICITY, offers=cfg.offers, replications=2, base_seed=3)


@pytest.fixture(scope="module")
def everything(cfg, spec):
    return exp_all(cfg, spec)


# -- histogram -----------------------------------------------------------------


def test_histogram_bins():
    h = deal_histogram([0.0, 0.24, 0.25, 0.5, 0.75, 2.99, 3.0])
    assert list(h.counts[:4]) == [2, 1, 1, 1]
    assert h.counts[11] == 1 and h.counts[12] == 1
    assert h.total == 7
    assert h.mode_bin == (0.0, 0.25)
    assert h.edges[-1] == pytest.approx(13 * 0.25)


def test_histogram_empty():
    h = deal_histogram([])
    assert h.total == 0 and h.mode_bin is None
    text = histogram_csv(h, 1)
    assert "# empty" in text
    assert text.splitlines()[1] == "bin_low,bin_high,count"


@given(st.lists(st.floats(0, 20, allow_nan=False), min_size=1, max_size=200))
def test_histogram_conserves_counts(prices):
    h = deal_histogram(prices)
    assert h.total == len(prices)
    for p in prices:
        k = int(np.floor(p / 0.25 + 1e-9))
        assert k * 0.25 <= p + 1e-9 < (k + 1) * 0.25 + 1e-9


def test_unimodal():
    assert is_unimodal([1, 5, 40, 90, 41, 6])
    assert is_unimodal([100, 50, 10])
    assert not is_unimodal([100, 5, 0, 5, 100])
    assert not is_unimodal([])
    assert not is_unimodal([0, 0])
    # a 1-count wiggle on a large plateau is noise, not a second mode
    assert is_unimodal([10, 400, 399, 401, 398, 10])
    assert not is_unimodal([10, 400, 200, 400, 10])


def test_histogram_csv_layout():
    h = deal_histogram([1.0, 1.1, 3.0])
    lines = histogram_csv(h, 7).splitlines()
    assert lines[0] == "# gpit-sim schema v1, seed=7"
    assert lines[1] == "bin_low,bin_high,count"
    assert lines[2] == "0.00,0.25,0"
    assert lines[-1].startswith("# summary: deals=3 ")
    assert "mode=1.00-1.25" in lines[-1]


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(ExperimentKind.DYNAMIC, replications=0)
    with pytest.raises(ValueError):
        ExperimentSpec(ExperimentKind.DYNAMIC, offers=(1.0, -1.0))
    assert ExperimentSpec(ExperimentKind.DYNAMIC, replications=3, base_seed=9).seeds == [9, 10, 11]


# -- experiments -------------------------------------------------------------


def test_histogram_counts_match_ledger(cfg, spec):
    pooled, per_seed = exp_dynamic(cfg, spec)
    for seed, h in per_seed.items():
        res = run_mode(cfg, prepare(cfg, seed), None)
        assert h.total == res.ledger.trader.deals
        assert h.total == sum(1 for d in res.deals if d.outcome == "deal" and not d.promotional)
    assert pooled.total == sum(h.total for h in per_seed.values())


def test_elasticity_rows(everything, spec):
    _, rows, _ = everything
    assert [r.offer for r in rows] == sorted(spec.offers)
    assert rows[0].offer == 0 and rows[0].success_ratio == 1.0 and rows[0].stddev == 0.0
    assert len({r.attempts for r in rows}) == 1
    for r in rows:
        assert 0.0 <= r.success_ratio <= 1.0
        assert r.success_ratio == pytest.approx(r.successes / r.attempts)


def test_profit_rows(everything, spec):
    _, _, rows = everything
    assert rows[-1].offer is None
    assert [r.offer for r in rows[:-1]] == sorted(spec.offers)
    assert rows[0].profit <= 0  # free information earns nothing


def test_exp_all_matches_single_runs(cfg, spec, everything):
    (pooled, _), el, pr = everything
    assert exp_elasticity(cfg, spec) == el
    assert exp_fixed_profit(cfg, spec) == pr
    assert np.array_equal(exp_dynamic(cfg, spec)[0].counts, pooled.counts)


def test_parallel_matches_serial(cfg, spec):
    assert exp_elasticity(cfg, replace(spec, workers=2)) == exp_elasticity(cfg, spec)


def test_csv_writers(everything):
    _, el, pr = everything
    e = elasticity_csv(el, 3).splitlines()
    assert e[1] == "offer,success_ratio,stddev"
    assert e[2] == "0.00,1.000000,0.000000"
    assert len(e) == 2 + len(el)
    p = profit_csv(pr, 3).splitlines()
    assert p[1] == "offer,profit,deals"
    assert p[-1].startswith("dynamic,")


def test_single_station_histogram_empty(cfg):
    one = replace(cfg, world=replace(cfg.world, n_stations=1))
    pooled, _ = exp_dynamic(one, ExperimentSpec(ExperimentKind.DYNAMIC, replications=1))
    assert pooled.total == 0
