"""Market experiments: deal-price histogram under dynamic pricing,
elasticity of success to a fixed opening offer, and profit per fixed offer
against dynamic pricing.

Every replication shares one world, trace and refuel plan across pricing
modes, so the sweeps compare pricing on identical demand.
"""

from __future__ import annotations

import enum
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .config import DEFAULT_OFFERS, RunConfig
from .market import MarketResult, RefuelPlan, plan_refuels, simulate_market
from .scenario import EventTrace, generate_profiles, generate_trace
from .world import PriceTable, World, build_world, generate_prices, load_base_curve

__all__ = [
    "SCHEMA_LINE",
    "BIN_WIDTH",
    "ExperimentKind",
    "ExperimentSpec",
    "Replication",
    "prepare",
    "run_mode",
    "Histogram",
    "deal_histogram",
    "is_unimodal",
    "exp_dynamic",
    "exp_elasticity",
    "exp_fixed_profit",
    "exp_all",
    "ElasticityRow",
    "ProfitRow",
    "histogram_csv",
    "elasticity_csv",
    "profit_csv",
]

SCHEMA_LINE = "# gpit-sim schema v1, seed={seed}"
BIN_WIDTH = 0.25


class ExperimentKind(enum.Enum):
    DYNAMIC = "dynamic"
    ELASTICITY = "elasticity"
    PROFIT = "profit"


@dataclass(frozen=True)
class ExperimentSpec:
    kind: ExperimentKind
    offers: tuple[float, ...] = DEFAULT_OFFERS
    replications: int = 10
    base_seed: int = 1
    workers: int = 1

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if any(o < 0 for o in self.offers):
            raise ValueError("sweep offers must be >= 0")

    @property
    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.replications)]


# -- replications ------------------------------------------------------------


@dataclass
class Replication:
    seed: int
    world: World
    trace: EventTrace
    prices: PriceTable
    plan: RefuelPlan


def prepare(cfg: RunConfig, seed: int) -> Replication:
    world = build_world(cfg.world, seed)
    profiles = generate_profiles(world, cfg.n_clients, seed, cfg.scenario)
    trace = generate_trace(world, profiles, cfg.horizon_days, seed, cfg.scenario)
    params = cfg.prices
    if cfg.base_curve_csv is not None:
        params = replace(params, base_curve=load_base_curve(cfg.base_curve_csv))
    prices = generate_prices(world.stations, cfg.horizon_days, params, seed)
    plan = plan_refuels(world, trace, prices, cfg.sim, seed)
    return Replication(seed, world, trace, prices, plan)


def run_mode(cfg: RunConfig, rep: Replication, fixed_offer: float | None) -> MarketResult:
    return simulate_market(rep.plan, replace(cfg.sim, fixed_offer=fixed_offer), rep.seed)


@dataclass(frozen=True)
class _Summary:
    """What the experiments need from one market run, small enough to ship
    between processes."""

    fixed_offer: float | None
    attempts: int
    successes: int
    deals: int
    profit: float
    prices: tuple[float, ...]


def _summarise(fixed_offer: float | None, res: MarketResult) -> _Summary:
    prices = tuple(d.price for d in res.deals if d.outcome == "deal")
    return _Summary(
        fixed_offer, res.attempts, res.successes, res.ledger.trader.deals, res.ledger.trader.profit, prices
    )


def _replicate(args: tuple[RunConfig, int, tuple]) -> list[_Summary]:
    cfg, seed, modes = args
    rep = prepare(cfg, seed)
    return [_summarise(m, run_mode(cfg, rep, m)) for m in modes]


def _run(cfg: RunConfig, spec: ExperimentSpec, modes: Sequence[float | None]) -> dict[int, list[_Summary]]:
    jobs = [(cfg, s, tuple(modes)) for s in spec.seeds]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            out = list(pool.map(_replicate, jobs))
    else:
        out = [_replicate(j) for j in jobs]
    return dict(zip(spec.seeds, out))


# -- dynamic pricing histogram ---------------------------------------------


@dataclass
class Histogram:
    counts: np.ndarray
    width: float = BIN_WIDTH
    prices: list[float] = field(default_factory=list)

    @property
    def edges(self) -> np.ndarray:
        return np.arange(len(self.counts) + 1) * self.width

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def mode_bin(self) -> tuple[float, float] | None:
        if not self.total:
            return None
        k = int(np.argmax(self.counts))
        return k * self.width, (k + 1) * self.width

    @property
    def mean(self) -> float:
        return statistics.fmean(self.prices) if self.prices else math.nan

    @property
    def median(self) -> float:
        return statistics.median(self.prices) if self.prices else math.nan


def deal_histogram(prices: Iterable[float], width: float = BIN_WIDTH) -> Histogram:
    ps = [float(p) for p in prices]
    if not ps:
        return Histogram(np.zeros(0, dtype=int), width, [])
    # bin k holds [k*w, (k+1)*w); the integer index avoids float edge drift
    idx = np.floor(np.asarray(ps) / width + 1e-9).astype(int)
    counts = np.bincount(idx, minlength=int(idx.max()) + 1)
    return Histogram(counts, width, ps)


def is_unimodal(counts: Sequence[int], sigmas: float = 3.0) -> bool:
    """Exactly one significant local maximum.

    A peak is significant when its prominence exceeds ``sigmas`` standard
    deviations of Poisson counting noise at the peak, so sampling wiggles on
    a flat top do not count as extra modes.
    """
    c = np.asarray(counts, dtype=float)
    if c.size == 0 or c.max() <= 0:
        return False
    padded = np.concatenate([[0.0], c, [0.0]])
    peaks, props = find_peaks(padded, prominence=0)
    significant = props["prominences"] >= sigmas * np.sqrt(padded[peaks])
    return int(significant.sum()) == 1


def exp_dynamic(cfg: RunConfig, spec: ExperimentSpec) -> tuple[Histogram, dict[int, Histogram]]:
    """Pooled and per-seed histograms of agreed prices under dynamic pricing."""
    runs = _run(cfg, spec, [None])
    per_seed = {s: deal_histogram(r[0].prices) for s, r in runs.items()}
    pooled = deal_histogram(p for s in spec.seeds for p in runs[s][0].prices)
    return pooled, per_seed


# -- fixed-offer sweeps ----------------------------------------------------


@dataclass(frozen=True)
class ElasticityRow:
    offer: float
    success_ratio: float
    stddev: float
    attempts: int
    successes: int


@dataclass(frozen=True)
class ProfitRow:
    offer: float | None  # None is the dynamic-pricing row
    profit: float
    deals: int


def _elasticity_rows(spec: ExperimentSpec, runs: dict[int, list[_Summary]]) -> list[ElasticityRow]:
    rows = []
    for offer in sorted(spec.offers):
        per = [next(x for x in runs[s] if x.fixed_offer == offer) for s in spec.seeds]
        att = sum(x.attempts for x in per)
        ok = sum(x.successes for x in per)
        ratios = [x.successes / x.attempts for x in per if x.attempts]
        sd = statistics.stdev(ratios) if len(ratios) > 1 else 0.0
        rows.append(ElasticityRow(offer, ok / att if att else 0.0, sd, att, ok))
    return rows


def _profit_rows(spec: ExperimentSpec, runs: dict[int, list[_Summary]]) -> list[ProfitRow]:
    rows = []
    for offer in [*sorted(spec.offers), None]:
        per = [next(x for x in runs[s] if x.fixed_offer == offer) for s in spec.seeds]
        rows.append(ProfitRow(offer, sum(x.profit for x in per), sum(x.deals for x in per)))
    return rows


def exp_elasticity(cfg: RunConfig, spec: ExperimentSpec) -> list[ElasticityRow]:
    return _elasticity_rows(spec, _run(cfg, spec, sorted(spec.offers)))


def exp_fixed_profit(cfg: RunConfig, spec: ExperimentSpec) -> list[ProfitRow]:
    return _profit_rows(spec, _run(cfg, spec, [*sorted(spec.offers), None]))


def exp_all(cfg: RunConfig, spec: ExperimentSpec):
    """All three experiments from one pass over the replications."""
    runs = _run(cfg, spec, [*sorted(spec.offers), None])
    dyn = {s: next(x for x in r if x.fixed_offer is None) for s, r in runs.items()}
    per_seed = {s: deal_histogram(d.prices) for s, d in dyn.items()}
    pooled = deal_histogram(p for s in spec.seeds for p in dyn[s].prices)
    return (pooled, per_seed), _elasticity_rows(spec, runs), _profit_rows(spec, runs)


# -- CSV -------------------------------------------------------------------


def _header(seed: int) -> str:
    return SCHEMA_LINE.format(seed=seed) + "\n"


def histogram_csv(h: Histogram, seed: int) -> str:
    out = io.StringIO()
    out.write(_header(seed))
    out.write("bin_low,bin_high,count\n")
    if not h.total:
        out.write("# empty: no successful deals\n")
        return out.getvalue()
    for k, c in enumerate(h.counts):
        out.write(f"{k * h.width:.2f},{(k + 1) * h.width:.2f},{int(c)}\n")
    lo, hi = h.mode_bin
    out.write(f"# summary: deals={h.total} mean={h.mean:.4f} median={h.median:.4f} mode={lo:.2f}-{hi:.2f}\n")
    return out.getvalue()


def elasticity_csv(rows: Sequence[ElasticityRow], seed: int) -> str:
    out = io.StringIO()
    out.write(_header(seed))
    out.write("offer,success_ratio,stddev\n")
    for r in rows:
        out.write(f"{r.offer:.2f},{r.success_ratio:.6f},{r.stddev:.6f}\n")
    return out.getvalue()


def profit_csv(rows: Sequence[ProfitRow], seed: int) -> str:
    out = io.StringIO()
    out.write(_header(seed))
    out.write("offer,profit,deals\n")
    for r in rows:
        label = "dynamic" if r.offer is None else f"{r.offer:.2f}"
        out.write(f"{label},{r.profit:.2f},{r.deals}\n")
    return out.getvalue()
