import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpit_sim.negotiation import (
    FAST_CONCESSION,
    SLOW_CONCESSION,
    ClientStrategyState,
    DealRecord,
    NegotiationSession,
    Offer,
    Outcome,
    OutOfTurn,
    Side,
    TraderStrategyState,
    client_initial_offer,
    client_next_offer,
    client_reservation,
    ema_update,
    macd_step,
    promotional_deal,
    run_negotiation,
    run_session,
    trader_concession_rate,
    trader_initial_offer,
    trader_next_offer,
)


class ScriptedRng:
    """Stands in for random.Random: gauss() returns queued values, where a
    value of None means 'return the mean'."""

    def __init__(self, *values):
        self.values = list(values)

    def gauss(self, mu, sigma):
        v = self.values.pop(0)
        return mu if v is None else v


def hand_states():
    client = ClientStrategyState(u_min=1.0, delta=0.25)
    client.u_max = 3.0
    trader = TraderStrategyState(u_s_max=4.0, u_s_min=1.0, delta_c=0.25)
    return client, trader


# -- client --------------------------------------------------------------


def test_client_initial_offer_examples():
    s = ClientStrategyState(u_min=2.0, deal_history=[2.0, 2.0])
    assert client_initial_offer(s) == 2.0
    s = ClientStrategyState(u_min=2.0, deal_history=[4.0])
    assert client_initial_offer(s) == pytest.approx(2.25)
    s = ClientStrategyState(u_min=4.9, c_max=5.0, deal_history=[40.0])
    assert client_initial_offer(s) == 5.0
    s = ClientStrategyState(u_min=1.7)
    assert client_initial_offer(s) == 1.7


def test_client_initial_offer_uses_last_r_deals():
    s = ClientStrategyState(u_min=1.0, r=2, deal_history=[100.0, 3.0, 5.0])
    assert list(s.deal_history) == [3.0, 5.0]
    assert client_initial_offer(s) == pytest.approx(0.125 * 4.0 + 0.875 * 1.0)


def test_client_cap_follows_savings():
    s = ClientStrategyState(u_min=3.0, c_max=5.0, savings_history=[2.0, 4.0])
    assert s.expected_savings == 3.0
    assert s.cap == 1.5
    assert client_initial_offer(s) == 1.5
    assert ClientStrategyState(c_max=5.0, savings_history=[40.0]).cap == 5.0


@settings(max_examples=300)
@given(st.floats(0, 10), st.lists(st.floats(0, 10), min_size=1, max_size=8))
def test_eq1_step_is_bounded(prev, deals):
    s = ClientStrategyState(u_min=prev, c_max=100.0, deal_history=deals)
    mean = np.mean(list(s.deal_history))
    new = client_initial_offer(s)
    assert abs(new - prev) <= 0.125 * abs(mean - prev) + 1e-12


def test_client_reservation_examples():
    s = ClientStrategyState(u_min=1.5)
    assert client_reservation(s, 0.0) == 3.0
    s = ClientStrategyState(u_min=0.4)
    assert client_reservation(s, -1.0) == 0.4


def test_client_reservation_distribution():
    rng = random.Random(7)
    s = ClientStrategyState(u_min=2.0)
    draws = [client_reservation(s, rng.gauss(0, 1)) for _ in range(100_000)]
    assert np.mean(draws) == pytest.approx(4.0, abs=0.02)


def test_client_offer_walk():
    client, _ = hand_states()
    session = NegotiationSession()
    got = []
    for _ in range(6):
        got.append(client_next_offer(client, session).amount)
        session.offers.append(Offer(Side.TRADER, 9.0, session.rounds))
    assert got == [1.0, 1.5, 2.0, 2.5, 3.0, 3.0]


def test_client_max_rate_reaches_reservation_in_two():
    client = ClientStrategyState(u_min=1.0, delta=0.5)
    client.u_max = 3.0
    session = NegotiationSession()
    got = []
    for _ in range(3):
        got.append(client_next_offer(client, session).amount)
        session.offers.append(Offer(Side.TRADER, 9.0, session.rounds))
    assert got == [1.0, 2.0, 3.0]


def test_client_delta_validated():
    for bad in (0.0, 0.6, -0.1):
        with pytest.raises(ValueError):
            ClientStrategyState(delta=bad)


# -- trader --------------------------------------------------------------


def test_ema_examples():
    assert ema_update(3.0, 3.0, 7) == 3.0
    assert ema_update(2.0, 4.0, 9) == pytest.approx(2.4)
    with pytest.raises(ValueError):
        ema_update(1.0, 1.0, 0)


@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(1, 30))
def test_ema_converges_geometrically(phi0, target, r):
    phi = phi0
    for _ in range(100):
        phi = ema_update(phi, target, r)
    alpha = 2 / (r + 1)
    assert abs(phi - target) <= (1 - alpha) ** 100 * abs(phi0 - target) + 1e-12


def test_trader_initial_offer_examples():
    t = TraderStrategyState(u_s_max=3.0, phi=3.0)
    assert trader_initial_offer(t) == 3.0
    t = TraderStrategyState(u_s_max=4.0, phi=2.0)
    assert trader_initial_offer(t) == pytest.approx(3.75)
    t = TraderStrategyState(u_s_max=0.02, u_s_min=0.10, phi=0.01)
    assert trader_initial_offer(t) == 0.10


def test_macd_steady_state():
    t = TraderStrategyState(phi_fast=2.0, phi_slow=2.0, signal_ema=0.0)
    assert macd_step(t, 2.0) == (0.0, 0.0, 0.0)


def test_macd_reacts_to_rise():
    t = TraderStrategyState(phi_fast=2.0, phi_slow=2.0, signal_ema=0.0)
    varphi, _, _ = macd_step(t, 3.0)
    assert varphi == pytest.approx(0.2 - 0.125)
    assert varphi > 0


def reference_macd(stream, fast0, slow0, sig0):
    """Straight-line recomputation of the three recurrences."""
    a9, a15, a5 = 2 / 10, 2 / 16, 2 / 6
    fast, slow, sig = fast0, slow0, sig0
    out = []
    for v in stream:
        fast = a9 * v + (1 - a9) * fast
        slow = a15 * v + (1 - a15) * slow
        varphi = fast - slow
        sig = a5 * varphi + (1 - a5) * sig
        out.append((varphi, sig, varphi - sig, 0.15 if varphi < sig else 0.25))
    return out


@settings(max_examples=50)
@given(st.lists(st.floats(0, 20), min_size=1, max_size=50), st.floats(0, 5), st.floats(0, 5))
def test_macd_matches_reference(stream, a, b):
    t = TraderStrategyState(phi_fast=a, phi_slow=b, signal_ema=0.0)
    want = reference_macd(stream, a, b, 0.0)
    for v, (rv, rs, rh, rate) in zip(stream, want):
        varphi, sig, hist = macd_step(t, v)
        assert abs(varphi - rv) <= 1e-12 and abs(sig - rs) <= 1e-12 and abs(hist - rh) <= 1e-12
        assert trader_concession_rate(varphi, sig) == rate


def test_concession_rate_branches():
    assert trader_concession_rate(-0.10, 0.0) == SLOW_CONCESSION == 0.15
    assert trader_concession_rate(0.10, 0.0) == FAST_CONCESSION == 0.25
    assert trader_concession_rate(0.3, 0.3) == 0.25


@pytest.mark.parametrize("rate,want", [(0.25, [4.0, 3.25, 2.5, 1.75, 1.0, 1.0]), (0.15, [4.0, 3.55, 3.10, 2.65, 2.20, 1.75])])
def test_trader_offer_walk(rate, want):
    t = TraderStrategyState(u_s_max=4.0, u_s_min=1.0, delta_c=rate)
    session = NegotiationSession()
    got = []
    for _ in range(6):
        session.offers.append(Offer(Side.CLIENT, 0.0, session.rounds + 1))
        session.rounds += 1
        got.append(trader_next_offer(t, session).amount)
    assert got == pytest.approx(want)


def test_out_of_turn():
    client, trader = hand_states()
    session = NegotiationSession()
    with pytest.raises(OutOfTurn):
        trader_next_offer(trader, session)
    client_next_offer(client, session)
    with pytest.raises(OutOfTurn):
        client_next_offer(client, session)
    session.outcome = Outcome.CONFLICT
    with pytest.raises(OutOfTurn):
        trader_next_offer(trader, session)


# -- protocol --------------------------------------------------------------


def test_hand_enumerated_session():
    client, trader = hand_states()
    s = run_session(client, trader)
    assert s.outcome is Outcome.DEAL
    assert s.price == 2.5
    assert s.rounds <= 4
    assert s.amounts(Side.CLIENT) == [1.0, 1.5, 2.0]
    assert s.amounts(Side.TRADER) == [4.0, 3.25, 2.5]


def test_disjoint_ranges_conflict():
    client = ClientStrategyState(u_min=0.5, delta=0.25)
    client.u_max = 1.0
    trader = TraderStrategyState(u_s_max=4.0, u_s_min=2.0)
    s = run_session(client, trader)
    assert s.outcome is Outcome.CONFLICT
    assert s.price == 0.0
    assert s.rounds <= 40


def test_max_rounds_conflict():
    client = ClientStrategyState(u_min=1.0, delta=0.01)
    client.u_max = 3.0
    trader = TraderStrategyState(u_s_max=3.5, u_s_min=2.9, delta_c=0.15)
    s = run_session(client, trader, max_rounds=5)
    assert s.outcome is Outcome.CONFLICT
    assert s.rounds == 5


def test_trader_accepts_generous_opening():
    client = ClientStrategyState(u_min=3.0)
    client.u_max = 6.0
    trader = TraderStrategyState(u_s_max=2.0, u_s_min=0.1)
    s = run_session(client, trader)
    # the trader takes the better offer on the table
    assert (s.outcome, s.price, s.rounds) == (Outcome.DEAL, 3.0, 1)


session_params = st.tuples(
    st.floats(0.0, 5.0),  # client u_min
    st.floats(0.0, 5.0),  # client reservation above u_min
    st.floats(0.05, 0.5),  # client delta
    st.floats(0.0, 5.0),  # trader u_s_min
    st.floats(0.0, 5.0),  # trader opening above u_s_min
    st.sampled_from([0.15, 0.25]),
)


def check_session(params):
    u_min, gap, delta, s_min, s_gap, dc = params
    client = ClientStrategyState(u_min=u_min, c_max=100.0, delta=delta)
    client.u_max = u_min + gap
    trader = TraderStrategyState(u_s_max=s_min + s_gap, u_s_min=s_min, delta_c=dc)
    s = run_session(client, trader)
    c, t = s.amounts(Side.CLIENT), s.amounts(Side.TRADER)
    assert all(a <= b for a, b in zip(c, c[1:]))
    assert all(a >= b for a, b in zip(t, t[1:]))
    assert all(u_min <= x <= client.u_max for x in c)
    assert all(s_min <= x <= trader.u_s_max for x in t)
    assert s.rounds <= 40
    if s.outcome is Outcome.DEAL:
        assert u_min <= s.price <= client.u_max
        assert s.price >= s_min
        assert s.price <= max(client.u_max, t[0] if t else s.price)
    else:
        assert s.price == 0.0
    if client.u_max >= s_min:
        assert s.outcome is Outcome.DEAL
    return s


@settings(max_examples=1000)
@given(session_params)
def test_session_properties(params):
    check_session(params)


# -- adaptive wrapper --------------------------------------------------------


def test_run_negotiation_learns_from_deal():
    client = ClientStrategyState(u_min=1.0, delta=0.25)
    trader = TraderStrategyState(u_s_max=4.0, u_s_min=1.0, phi=4.0, phi_fast=4.0, phi_slow=4.0)
    session, u_max = run_negotiation(client, trader, ScriptedRng(1.0))
    assert u_max == 3.0
    assert session.outcome is Outcome.DEAL and session.price == 2.5
    assert list(client.deal_history) == [2.5]
    assert trader.phi == pytest.approx(ema_update(4.0, 2.5, 5))
    # falling deal stream: fast EMA drops below slow, signal lags at 0
    assert trader.phi_fast < trader.phi_slow
    assert trader.delta_c == SLOW_CONCESSION


def test_run_negotiation_conflict_leaves_history():
    client = ClientStrategyState(u_min=0.2, delta=0.25)
    trader = TraderStrategyState(u_s_max=9.0, u_s_min=8.0, phi=9.0)
    session, _ = run_negotiation(client, trader, ScriptedRng(0.0))
    assert session.outcome is Outcome.CONFLICT
    assert list(client.deal_history) == []
    assert trader.phi == 9.0


def test_promotional_estimate_is_midpoint():
    client = ClientStrategyState(u_min=1.0)
    trader = TraderStrategyState()
    rec = promotional_deal(client, trader, lambda: 2.5, ScriptedRng(1.0, None), client_id="c1", day=3)
    assert client.u_max == 3.0
    assert trader.promo_estimates == [2.0]
    assert rec.price == 0.0 and rec.promotional and rec.savings == 2.5
    assert list(client.savings_history) == [2.5]


def test_promotion_seeds_trader_with_mean_estimate():
    client = ClientStrategyState(u_min=1.0)
    trader = TraderStrategyState(promo_rounds=5)
    rng = random.Random(3)
    for _ in range(5):
        rec = promotional_deal(client, trader, lambda: 1.0, rng)
        assert rec.price == 0.0
    mean = sum(trader.promo_estimates) / 5
    assert trader.phi == trader.phi_fast == trader.phi_slow == pytest.approx(mean)
    assert trader.signal_ema == 0.0
    assert all(e >= 0 for e in trader.promo_estimates)
    with pytest.raises(RuntimeError):
        promotional_deal(client, trader, lambda: 1.0, rng)


def test_deal_record_invariants():
    with pytest.raises(ValueError):
        DealRecord("c1", 0, -1.0, 0.0, False, 1)
    with pytest.raises(ValueError):
        DealRecord("c1", 0, 1.0, 0.0, True, 0)
    with pytest.raises(ValueError):
        Offer(Side.CLIENT, float("nan"), 1)
    with pytest.raises(ValueError):
        Offer(Side.CLIENT, -0.5, 1)
