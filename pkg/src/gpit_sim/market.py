"""Market orchestration: replay the baseline trace, inject refuel needs,
negotiate, refuel, and keep the books."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .negotiation import (
    FAST_CONCESSION,
    ClientStrategyState,
    DealRecord,
    Outcome,
    TraderStrategyState,
    promotional_deal,
    run_negotiation,
)
from .scenario import MINUTES_PER_DAY, ClientProfile, Event, EventKind, EventTrace, _agent_key
from .vehicle import (
    FuelState,
    NoStationOnPath,
    RefuelQuote,
    consume,
    default_station,
    make_quote,
    needs_refuel,
    refill,
    savings,
)
from .world import LocationId, PriceTable, Route, World, stations_near_path

__all__ = [
    "SimConfig",
    "Refuel",
    "RefuelPlan",
    "ClientLedger",
    "TraderLedger",
    "Ledger",
    "MarketResult",
    "plan_refuels",
    "simulate_market",
    "run_simulation",
    "dropout_check",
    "acquisition_cost_accrual",
    "augment_trace",
]


@dataclass(frozen=True)
class SimConfig:
    fixed_offer: float | None = None  # None selects dynamic pricing
    promo_rounds: int = 5
    dropout_enabled: bool = True
    dropout_window: int = 10
    dropout_useless: int = 5
    acquisition_rate: float = 0.0
    detour_radius: float = 2.0
    sees_radius: float = 0.25
    max_rounds: int = 40
    tank_capacity: float = 15.0
    mpg: float = 25.0
    low_threshold: float = 2.0
    client_initial_offer: float = 1.0
    client_c_max: float = 5.0
    client_delta_min: float = 0.15
    client_delta_max: float = 0.5
    history_window: int = 5
    savings_window: int = 20
    trader_initial_offer: float = 4.0
    trader_reservation: float = 0.10

    def __post_init__(self) -> None:
        if self.fixed_offer is not None and self.fixed_offer < 0:
            raise ValueError("fixed initial offer must be >= 0")
        if not 0 < self.client_delta_min <= self.client_delta_max <= 0.5:
            raise ValueError("client concession rates must satisfy 0 < min <= max <= 0.5")


@dataclass(frozen=True)
class Refuel:
    agent: str
    arrive_seq: int  # per-agent index of the ARRIVES event that triggered it
    timestamp: int
    day: int
    location: LocationId
    fuel_before: float
    default: RefuelQuote
    best: RefuelQuote
    fallback: bool

    @property
    def potential_savings(self) -> float:
        return savings(self.default, self.best)


@dataclass
class FuelLog:
    initial: float
    distance: float = 0.0
    refilled: float = 0.0
    final: float = 0.0


@dataclass
class RefuelPlan:
    """Pricing-independent part of a run: where and when each client needs
    fuel and what the default and best stations would cost."""

    agents: list[str]
    refuels: dict[str, list[Refuel]]
    fuel: dict[str, FuelLog]
    horizon_days: int
    n_stations: int


@dataclass
class ClientLedger:
    payments: float = 0.0
    gross_savings: float = 0.0
    purchases: int = 0
    conflicts: int = 0
    dropped_out: bool = False
    dropout_day: int | None = None

    @property
    def net_benefit(self) -> float:
        return self.gross_savings - self.payments


@dataclass
class TraderLedger:
    income: float = 0.0
    acquisition_cost: float = 0.0
    deals: int = 0
    daily_income: np.ndarray = field(default_factory=lambda: np.zeros(0))
    daily_deals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def profit(self) -> float:
        return self.income - self.acquisition_cost


@dataclass
class Ledger:
    clients: dict[str, ClientLedger]
    trader: TraderLedger


@dataclass
class MarketResult:
    ledger: Ledger
    deals: list[DealRecord]
    refuels: list[Refuel]

    @property
    def attempts(self) -> int:
        return sum(1 for d in self.deals if not d.promotional)

    @property
    def successes(self) -> int:
        return sum(1 for d in self.deals if not d.promotional and d.success)

    @property
    def success_ratio(self) -> float:
        n = self.attempts
        return self.successes / n if n else 0.0


# -- planning --------------------------------------------------------------


def _nearest_station(world: World, loc: LocationId) -> LocationId:
    i = world.index_of(loc)
    return min(world.stations, key=lambda s: (world.dist[i, world.index_of(s)], s))


def plan_refuels(
    world: World, trace: EventTrace, prices: PriceTable, config: SimConfig, seed: int
) -> RefuelPlan:
    by_agent = trace.by_agent()
    for events in by_agent.values():
        for e in events:
            if e.kind is EventKind.NEEDS:
                raise ValueError("baseline trace must not contain NEEDS events")
            if e.location not in world:
                raise ValueError(f"trace location {e.location} is not in the world")
    agents = sorted(by_agent, key=_agent_key)
    horizon = prices.horizon_days
    plan = RefuelPlan(agents, {}, {}, horizon, len(world.stations))
    ss = np.random.SeedSequence([seed, 1])
    initial = np.random.default_rng(ss).uniform(config.low_threshold, config.tank_capacity, len(agents))

    for agent, fuel0 in zip(agents, initial):
        events = by_agent[agent]
        state = FuelState(float(fuel0), config.tank_capacity, config.mpg, config.low_threshold)
        log = FuelLog(initial=state.fuel)
        out: list[Refuel] = []
        for i, e in enumerate(events):
            if e.kind is not EventKind.ARRIVES:
                continue
            state = consume(state, e.distance)
            log.distance += e.distance
            if not needs_refuel(state):
                continue
            dest = next((f.location for f in events[i + 1 :] if f.kind is EventKind.ARRIVES), None)
            route = Route.through(world, [e.location] if dest is None else [e.location, dest])
            day = min(e.timestamp // MINUTES_PER_DAY, horizon - 1)
            out.append(_plan_one(world, prices, config, agent, i, e, route, day, state))
            log.refilled += state.tank_capacity - state.fuel
            state = refill(state)
        log.final = state.fuel
        plan.refuels[agent] = out
        plan.fuel[agent] = log
    return plan


def _plan_one(world, prices, config, agent, seq, event, route, day, state) -> Refuel:
    fallback = False
    try:
        dflt = default_station(route, world, config.sees_radius)
    except NoStationOnPath:
        dflt, fallback = _nearest_station(world, event.location), True
    big = float(world.dist.max()) * 2 + 1.0
    detours = dict(stations_near_path(world, route, big))
    price = prices.realized
    row = {s: k for k, s in enumerate(prices.stations)}
    quotes = [
        make_quote(s, float(price[row[s], day]), d, state)
        for s, d in detours.items()
        if d <= config.detour_radius + 1e-9 or s == dflt
    ]
    default_q = next(q for q in quotes if q.station == dflt)
    best_q = min(quotes, key=lambda q: (q.total_cost, q.detour_miles, q.station))
    return Refuel(agent, seq, event.timestamp, day, event.location, state.fuel, default_q, best_q, fallback)


# -- market ----------------------------------------------------------------


def dropout_check(purchases: Sequence[tuple[float, float]], window: int = 10, useless: int = 5) -> bool:
    """``purchases`` holds (savings, payment) per purchase, oldest first."""
    if len(purchases) < window:
        return False
    tail = purchases[-window:]
    if sum(s - p for s, p in tail) <= 0:
        return True
    last = purchases[-useless:]
    return len(last) >= useless and all(s == 0 for s, _ in last)


def acquisition_cost_accrual(rate: float, n_stations: int, n_days: int) -> float:
    if rate < 0:
        raise ValueError("acquisition cost rate must be >= 0")
    return rate * n_stations * n_days


def _client_rng(seed: int, idx: int) -> random.Random:
    return random.Random(int(np.random.SeedSequence([seed, 2, idx]).generate_state(1)[0]))


def simulate_market(plan: RefuelPlan, config: SimConfig, seed: int) -> MarketResult:
    horizon = plan.horizon_days
    trader_book = TraderLedger(daily_income=np.zeros(horizon), daily_deals=np.zeros(horizon, dtype=int))
    trader_book.acquisition_cost = acquisition_cost_accrual(config.acquisition_rate, plan.n_stations, horizon)
    ledger = Ledger({}, trader_book)
    deals: list[DealRecord] = []
    refuels: list[Refuel] = []
    fixed = config.fixed_offer

    for idx, agent in enumerate(plan.agents):
        rng = _client_rng(seed, idx)
        client = ClientStrategyState(
            u_min=config.client_initial_offer,
            c_max=config.client_c_max,
            delta=rng.uniform(config.client_delta_min, config.client_delta_max),
            r=config.history_window,
            savings_window=config.savings_window,
        )
        trader = TraderStrategyState(
            u_s_max=config.trader_initial_offer,
            u_s_min=config.trader_reservation,
            r=config.history_window,
            adaptive=fixed is None,
            promo_rounds=config.promo_rounds,
        )
        book = ledger.clients[agent] = ClientLedger()
        history: list[tuple[float, float]] = []

        for ref in plan.refuels[agent]:
            refuels.append(ref)
            gain = ref.potential_savings
            if trader.in_promotion:
                rec = promotional_deal(client, trader, lambda: gain, rng, client_id=agent, day=ref.day)
                deals.append(_with_fallback(rec, ref))
                book.gross_savings += gain
                # the free sample is how the client learns what the information is worth
                client.u_min = client.cap
                continue
            if book.dropped_out:
                deals.append(DealRecord(agent, ref.day, 0.0, 0.0, False, 0, "dropped", 0.0, ref.fallback))
                continue
            if fixed == 0:
                # free information is always taken
                client.savings_history.append(gain)
                book.gross_savings += gain
                deals.append(DealRecord(agent, ref.day, 0.0, gain, False, 0, "free", 0.0, ref.fallback))
                continue
            if fixed is not None:
                trader.u_s_max, trader.u_s_min, trader.delta_c = fixed, fixed / 3, FAST_CONCESSION
            session, u_max = run_negotiation(client, trader, rng, config.max_rounds)
            if session.outcome is Outcome.DEAL:
                price = session.price
                client.savings_history.append(gain)
                book.payments += price
                book.gross_savings += gain
                book.purchases += 1
                trader_book.income += price
                trader_book.deals += 1
                trader_book.daily_income[ref.day] += price
                trader_book.daily_deals[ref.day] += 1
                deals.append(DealRecord(agent, ref.day, price, gain, False, session.rounds, "deal", u_max, ref.fallback))
                history.append((gain, price))
                if config.dropout_enabled and dropout_check(history, config.dropout_window, config.dropout_useless):
                    book.dropped_out, book.dropout_day = True, ref.day
            else:
                book.conflicts += 1
                deals.append(DealRecord(agent, ref.day, 0.0, 0.0, False, session.rounds, "conflict", u_max, ref.fallback))
    return MarketResult(ledger, deals, refuels)


def _with_fallback(rec: DealRecord, ref: Refuel) -> DealRecord:
    if not ref.fallback:
        return rec
    return DealRecord(rec.client_id, rec.day, rec.price, rec.savings, rec.promotional, rec.rounds, rec.outcome, rec.u_max, True)


def augment_trace(trace: EventTrace, refuels: Sequence[Refuel]) -> EventTrace:
    """Insert a NEEDS event right after each triggering ARRIVES event."""
    triggers = {(r.agent, r.arrive_seq) for r in refuels}
    seq: dict[str, int] = {}
    out: list[Event] = []
    for e in trace.events:
        k = seq.get(e.agent, 0)
        seq[e.agent] = k + 1
        out.append(e)
        if (e.agent, k) in triggers:
            out.append(Event(e.agent, EventKind.NEEDS, e.location, e.timestamp, 0.0))
    return EventTrace(out)


def run_simulation(
    world: World,
    trace: EventTrace,
    profiles: Sequence[ClientProfile],
    prices: PriceTable,
    config: SimConfig,
    seed: int,
) -> tuple[Ledger, EventTrace, list[DealRecord]]:
    known = {p.client_id for p in profiles}
    stray = {e.agent for e in trace.events} - known
    if profiles and stray:
        raise ValueError(f"trace agents without a profile: {sorted(stray)[:5]}")
    plan = plan_refuels(world, trace, prices, config, seed)
    result = simulate_market(plan, config, seed)
    return result.ledger, augment_trace(trace, result.refuels), result.deals
