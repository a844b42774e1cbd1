"""Alternating-offers price negotiation between a client and the trader.

Both sides use monotonic concession towards a reservation price.  The
client adapts its opening offer to the mean of its recent deals; the
trader smooths its opening offer towards an exponential moving average of
the deals with that client and picks its concession rate from a MACD
signal on the same deal stream.
"""

from __future__ import annotations

import enum
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

__all__ = [
    "Side",
    "Offer",
    "Outcome",
    "NegotiationSession",
    "ClientStrategyState",
    "TraderStrategyState",
    "DealRecord",
    "OutOfTurn",
    "client_initial_offer",
    "client_reservation",
    "client_next_offer",
    "ema_update",
    "trader_initial_offer",
    "macd_step",
    "trader_concession_rate",
    "trader_next_offer",
    "run_session",
    "run_negotiation",
    "promotional_deal",
    "SLOW_CONCESSION",
    "FAST_CONCESSION",
]

SMOOTHING = 0.125
RESERVATION_MULTIPLE = 2.0
SLOW_CONCESSION = 0.15
FAST_CONCESSION = 0.25
MACD_FAST, MACD_SLOW, MACD_SIGNAL = 9, 15, 5


class Side(enum.Enum):
    CLIENT = "client"
    TRADER = "trader"


class Outcome(enum.Enum):
    OPEN = "open"
    DEAL = "deal"
    CONFLICT = "conflict"


@dataclass(frozen=True)
class Offer:
    side: Side
    amount: float
    round: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.amount) and self.amount >= 0):
            raise ValueError(f"offer amount must be finite and >= 0, got {self.amount}")


class OutOfTurn(RuntimeError):
    pass


@dataclass
class NegotiationSession:
    max_rounds: int = 40
    offers: list[Offer] = field(default_factory=list)
    outcome: Outcome = Outcome.OPEN
    price: float = 0.0
    rounds: int = 0

    @property
    def turn(self) -> Side:
        # the client opens
        if not self.offers or self.offers[-1].side is Side.TRADER:
            return Side.CLIENT
        return Side.TRADER

    def last(self, side: Side) -> Offer | None:
        for o in reversed(self.offers):
            if o.side is side:
                return o
        return None

    def amounts(self, side: Side) -> list[float]:
        return [o.amount for o in self.offers if o.side is side]


@dataclass
class ClientStrategyState:
    u_min: float = 1.0
    c_max: float = 5.0
    delta: float = 0.25
    u_max: float = 0.0
    m: float = SMOOTHING
    r: int = 5
    savings_window: int = 20
    deal_history: deque = field(default_factory=deque)
    savings_history: deque = field(default_factory=deque)

    def __post_init__(self) -> None:
        if not 0 < self.delta <= 0.5:
            raise ValueError("client concession rate must lie in (0, 0.5]")
        self.deal_history = deque(self.deal_history, maxlen=self.r)
        self.savings_history = deque(self.savings_history, maxlen=self.savings_window)

    @property
    def expected_savings(self) -> float | None:
        if not self.savings_history:
            return None
        return sum(self.savings_history) / len(self.savings_history)

    @property
    def cap(self) -> float:
        """Upper bound on the opening offer.

        Once realised savings are known the opening is held to half their
        mean, which centres the reservation (twice the opening) on the
        expected savings.
        """
        expected = self.expected_savings
        if expected is None:
            return self.c_max
        return min(self.c_max, expected / RESERVATION_MULTIPLE)


@dataclass
class TraderStrategyState:
    u_s_max: float = 4.0
    u_s_min: float = 0.10
    phi: float = 0.0
    phi_fast: float = 0.0
    phi_slow: float = 0.0
    signal_ema: float = 0.0
    delta_c: float = FAST_CONCESSION
    m: float = SMOOTHING
    r: int = 5
    adaptive: bool = True
    promo_rounds: int = 5
    promo_estimates: list[float] = field(default_factory=list)

    @property
    def in_promotion(self) -> bool:
        return len(self.promo_estimates) < self.promo_rounds


@dataclass(frozen=True)
class DealRecord:
    client_id: str
    day: int
    price: float
    savings: float
    promotional: bool
    rounds: int
    outcome: str = "deal"  # deal | conflict | promo | free | dropped
    u_max: float = 0.0
    fallback: bool = False

    def __post_init__(self) -> None:
        if self.price < 0:
            raise ValueError("price must be >= 0")
        if self.promotional and self.price != 0:
            raise ValueError("promotional deals are free")

    @property
    def success(self) -> bool:
        return self.outcome in ("deal", "promo", "free")


# -- client ----------------------------------------------------------------


def client_initial_offer(state: ClientStrategyState) -> float:
    if state.deal_history:
        recent = list(state.deal_history)[-state.r :]
        mean = sum(recent) / len(recent)
        u = state.m * mean + state.u_min * (1 - state.m)
    else:
        u = state.u_min
    state.u_min = min(max(u, 0.0), state.cap)
    return state.u_min


def client_reservation(state: ClientStrategyState, noise: float) -> float:
    u_max = RESERVATION_MULTIPLE * state.u_min + noise
    expected = state.expected_savings
    if expected is not None:
        # never willing to pay more than the information has been worth
        u_max = min(u_max, expected)
    state.u_max = max(state.u_min, u_max)
    return state.u_max


def _client_proposal(state: ClientStrategyState, session: NegotiationSession) -> float:
    prev = session.last(Side.CLIENT)
    if prev is None:
        return state.u_min
    nxt = min(state.u_max, prev.amount + state.delta * (state.u_max - state.u_min))
    # a step lost to rounding on a tiny range goes straight to the bound
    return state.u_max if nxt == prev.amount else nxt


def client_next_offer(state: ClientStrategyState, session: NegotiationSession) -> Offer:
    if session.outcome is not Outcome.OPEN or session.turn is not Side.CLIENT:
        raise OutOfTurn("not the client's turn")
    offer = Offer(Side.CLIENT, _client_proposal(state, session), session.rounds + 1)
    session.offers.append(offer)
    session.rounds += 1
    return offer


# -- trader ----------------------------------------------------------------


def ema_update(prev_phi: float, v: float, r: int) -> float:
    if r < 1:
        raise ValueError("EMA period must be >= 1")
    alpha = 2.0 / (r + 1)
    return alpha * v + (1 - alpha) * prev_phi


def trader_initial_offer(state: TraderStrategyState) -> float:
    u = state.m * state.phi + state.u_s_max * (1 - state.m)
    state.u_s_max = max(u, state.u_s_min)
    return state.u_s_max


def macd_step(state: TraderStrategyState, v: float) -> tuple[float, float, float]:
    state.phi_fast = ema_update(state.phi_fast, v, MACD_FAST)
    state.phi_slow = ema_update(state.phi_slow, v, MACD_SLOW)
    varphi = state.phi_fast - state.phi_slow
    state.signal_ema = ema_update(state.signal_ema, varphi, MACD_SIGNAL)
    return varphi, state.signal_ema, varphi - state.signal_ema


def trader_concession_rate(varphi: float, signal: float) -> float:
    return SLOW_CONCESSION if varphi < signal else FAST_CONCESSION


def _trader_proposal(state: TraderStrategyState, session: NegotiationSession) -> float:
    prev = session.last(Side.TRADER)
    if prev is None:
        return state.u_s_max
    nxt = max(state.u_s_min, prev.amount - state.delta_c * (state.u_s_max - state.u_s_min))
    return state.u_s_min if nxt == prev.amount else nxt


def trader_next_offer(state: TraderStrategyState, session: NegotiationSession) -> Offer:
    if session.outcome is not Outcome.OPEN or session.turn is not Side.TRADER:
        raise OutOfTurn("not the trader's turn")
    offer = Offer(Side.TRADER, _trader_proposal(state, session), session.rounds)
    session.offers.append(offer)
    return offer


# -- protocol --------------------------------------------------------------


def run_session(
    client: ClientStrategyState, trader: TraderStrategyState, max_rounds: int = 40
) -> NegotiationSession:
    """One alternating-offers exchange with the current bounds of both sides.

    A side accepts the opponent's latest offer once it is at least as good
    as the offer it would make next.  A round in which neither side moves,
    or hitting ``max_rounds``, ends in conflict.
    """
    s = NegotiationSession(max_rounds=max_rounds)
    while True:
        # client's move
        proposal = _client_proposal(client, s)
        t_last = s.last(Side.TRADER)
        if t_last is not None and t_last.amount <= proposal:
            s.outcome, s.price = Outcome.DEAL, t_last.amount
            return s
        c_prev = s.last(Side.CLIENT)
        c = client_next_offer(client, s)
        # trader's move
        proposal = _trader_proposal(trader, s)
        if c.amount >= proposal:
            s.outcome, s.price = Outcome.DEAL, c.amount
            return s
        t = trader_next_offer(trader, s)
        stalled = (
            c_prev is not None
            and t_last is not None
            and c.amount == c_prev.amount
            and t.amount == t_last.amount
        )
        if stalled or s.rounds >= max_rounds:
            s.outcome, s.price = Outcome.CONFLICT, 0.0
            return s


def run_negotiation(
    client: ClientStrategyState,
    trader: TraderStrategyState,
    rng: random.Random,
    max_rounds: int = 40,
) -> tuple[NegotiationSession, float]:
    """Full adaptive negotiation: update both opening offers from history,
    draw the client's reservation, bargain, then learn from the outcome.

    Returns the session and the client's reservation for this session.
    """
    client_initial_offer(client)
    client_reservation(client, rng.gauss(0.0, 1.0))
    if trader.adaptive:
        trader_initial_offer(trader)
    session = run_session(client, trader, max_rounds)
    if session.outcome is Outcome.DEAL:
        v = session.price
        client.deal_history.append(v)
        if trader.adaptive:
            trader.phi = ema_update(trader.phi, v, trader.r)
            varphi, signal, _ = macd_step(trader, v)
            trader.delta_c = trader_concession_rate(varphi, signal)
    return session, client.u_max


def promotional_deal(
    client: ClientStrategyState,
    trader: TraderStrategyState,
    realized_savings: Callable[[], float],
    rng: random.Random,
    *,
    client_id: str = "",
    day: int = 0,
) -> DealRecord:
    """Deliver the information for free and collect the client's value estimate."""
    if not trader.in_promotion:
        raise RuntimeError("promotional phase is over for this client")
    client_initial_offer(client)
    client_reservation(client, rng.gauss(0.0, 1.0))
    midpoint = (client.u_min + client.u_max) / 2
    estimate = max(0.0, rng.gauss(midpoint, 1.0))
    trader.promo_estimates.append(estimate)
    mean = sum(trader.promo_estimates) / len(trader.promo_estimates)
    trader.phi = trader.phi_fast = trader.phi_slow = mean
    trader.signal_ema = 0.0
    saved = realized_savings()
    client.savings_history.append(saved)
    return DealRecord(client_id, day, 0.0, saved, True, 0, "promo", client.u_max)
