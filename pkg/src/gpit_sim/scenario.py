"""Client lifestyles, the baseline year-long event trace, and its text format.

Trace lines look like ``c1;DEPARTS;R3;475;0.00``: agent, event word,
location, minutes since scenario start, miles since the agent's previous
event (non-zero only on ARRIVES).
"""

from __future__ import annotations

import enum
import io
import math
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .world import LocationId, LocationKind, World

__all__ = [
    "EventKind",
    "Event",
    "EventTrace",
    "ClientProfile",
    "ScenarioConfig",
    "TraceParseError",
    "generate_profiles",
    "generate_trace",
    "serialize_trace",
    "parse_trace",
    "check_grammar",
    "MINUTES_PER_DAY",
]

MINUTES_PER_DAY = 1440
WORK_START = 8 * 60
WORK_END = 17 * 60

DayKind = str  # "weekday" | "weekend"
Band = str  # "morning" | "afternoon" | "evening"

BANDS: dict[Band, tuple[int, int]] = {
    # (earliest departure, latest start of a further stop), minutes of day
    "morning": (9 * 60, 11 * 60 + 30),
    "afternoon": (13 * 60, 16 * 60),
    "evening": (18 * 60 + 30, 21 * 60 + 30),
}

# Baseline outing probabilities; scaled so the weekly mean equals
# trips_per_week_mean (5 * 0.4 + 2 * 3 * (1/3) = 4).
_BASE_PROPENSITY: dict[tuple[DayKind, Band], float] = {
    ("weekday", "morning"): 0.0,
    ("weekday", "afternoon"): 0.0,
    ("weekday", "evening"): 0.4,
    ("weekend", "morning"): 1 / 3,
    ("weekend", "afternoon"): 1 / 3,
    ("weekend", "evening"): 1 / 3,
}
_BASE_TRIPS_PER_WEEK = 4.0

# Next-location rule: (current kind, day kind, band) -> weights over the
# destination kinds; "home" ends the outing.
_TRANSITIONS: dict[tuple[LocationKind, DayKind, Band], dict[str, float]] = {}
for _dk in ("weekday", "weekend"):
    for _band in BANDS:
        _TRANSITIONS[(LocationKind.RESIDENTIAL, _dk, _band)] = (
            {"S": 0.8, "R": 0.2} if _band != "evening" else {"S": 0.6, "R": 0.4}
        )
        _TRANSITIONS[(LocationKind.SHOPPING, _dk, _band)] = (
            {"S": 0.35, "R": 0.05, "home": 0.6} if _dk == "weekend" else {"S": 0.15, "home": 0.85}
        )
_MAX_STOPS = 3


class EventKind(enum.Enum):
    DEPARTS = "DEPARTS"
    ARRIVES = "ARRIVES"
    SEES = "SEES"
    NEEDS = "NEEDS"


class Event(NamedTuple):
    agent: str
    kind: EventKind
    location: LocationId
    timestamp: int
    distance: float = 0.0


@dataclass
class EventTrace:
    events: list[Event] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def by_agent(self) -> dict[str, list[Event]]:
        out: dict[str, list[Event]] = {}
        for ev in self.events:
            out.setdefault(ev.agent, []).append(ev)
        return out


@dataclass(frozen=True)
class ClientProfile:
    client_id: str
    home: LocationId
    workplace: LocationId
    activity_propensity: dict[tuple[DayKind, Band], float]

    def __post_init__(self) -> None:
        if self.home == self.workplace:
            raise ValueError("home and workplace must differ")
        if self.home.kind is not LocationKind.RESIDENTIAL or self.workplace.kind is not LocationKind.WORK:
            raise ValueError("home must be residential and workplace must be work")
        if any(not 0.0 <= p <= 1.0 for p in self.activity_propensity.values()):
            raise ValueError("propensities must lie in [0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    trips_per_week_mean: float = 4.0
    propensity_spread: float = 0.5
    sees_radius: float = 0.25
    speed_mph: float = 30.0
    commute_jitter_min: int = 20
    stay_min: tuple[int, int] = (30, 120)


def day_kind(day: int) -> DayKind:
    # day 0 is a Monday
    return "weekend" if day % 7 >= 5 else "weekday"


def generate_profiles(
    world: World, n_clients: int, seed: int, config: ScenarioConfig = ScenarioConfig()
) -> list[ClientProfile]:
    homes = world.of_kind(LocationKind.RESIDENTIAL)
    works = world.of_kind(LocationKind.WORK)
    if not homes or not works:
        raise ValueError("world needs at least one residential and one work location")
    if n_clients < 1:
        raise ValueError("n_clients must be >= 1")
    rng = np.random.default_rng(seed)
    home_idx = rng.integers(0, len(homes), n_clients)
    work_idx = rng.integers(0, len(works), n_clients)
    spread = config.propensity_spread
    scale = config.trips_per_week_mean / _BASE_TRIPS_PER_WEEK
    mult = rng.uniform(1 - spread, 1 + spread, n_clients) if spread > 0 else np.ones(n_clients)
    profiles = []
    for i in range(n_clients):
        prop = {k: float(min(1.0, max(0.0, p * scale * mult[i]))) for k, p in _BASE_PROPENSITY.items()}
        profiles.append(ClientProfile(f"c{i + 1}", homes[home_idx[i]], works[work_idx[i]], prop))
    return profiles


class _TripWriter:
    def __init__(self, world: World, agent: str, config: ScenarioConfig, cache: dict) -> None:
        self.world = world
        self.agent = agent
        self.config = config
        self.events: list[Event] = []
        self._cache = cache

    def _template(self, a: LocationId, b: LocationId) -> tuple[float, int, list[tuple[LocationId, float]]]:
        key = (a.kind, a.index, b.kind, b.index)
        hit = self._cache.get(key)
        if hit is None:
            w = self.world
            miles = float(w.dist[w.index_of(a), w.index_of(b)])
            minutes = max(1, math.ceil(miles / self.config.speed_mph * 60))
            seen = [
                (s, along / miles if miles > 0 else 0.0)
                for s, along in w.seen_stations(a, b, self.config.sees_radius)
            ]
            hit = self._cache[key] = (miles, minutes, seen)
        return hit

    def travel_minutes(self, a: LocationId, b: LocationId) -> int:
        return self._template(a, b)[1]

    def trip(self, a: LocationId, b: LocationId, depart: int) -> int:
        miles, minutes, seen = self._template(a, b)
        ev = self.events
        agent = self.agent
        ev.append(Event(agent, EventKind.DEPARTS, a, depart, 0.0))
        for station, frac in seen:
            ev.append(Event(agent, EventKind.SEES, station, depart + int(frac * minutes), 0.0))
        arrive = depart + minutes
        ev.append(Event(agent, EventKind.ARRIVES, b, arrive, round(miles, 2)))
        return arrive


def _pick_kind(rng: random.Random, weights: dict[str, float], available: dict[str, list]) -> str:
    opts = [(k, w) for k, w in weights.items() if w > 0 and (k == "home" or available.get(k))]
    if not opts:
        return "home"
    total = sum(w for _, w in opts)
    x = rng.random() * total
    for k, w in opts:
        x -= w
        if x < 0:
            return k
    return opts[-1][0]


def _client_events(
    world: World,
    profile: ClientProfile,
    horizon_days: int,
    rng: random.Random,
    config: ScenarioConfig,
    cache: dict,
) -> list[Event]:
    tw = _TripWriter(world, profile.client_id, config, cache)
    home, work = profile.home, profile.workplace
    by_kind = {
        "S": world.of_kind(LocationKind.SHOPPING),
        "R": [r for r in world.of_kind(LocationKind.RESIDENTIAL) if r != home],
    }
    position = {k: {loc: i for i, loc in enumerate(v)} for k, v in by_kind.items()}
    now = -1
    lo_stay, hi_stay = config.stay_min
    jitter = config.commute_jitter_min
    for day in range(horizon_days):
        base = day * MINUTES_PER_DAY
        dk = day_kind(day)
        if dk == "weekday":
            depart = base + WORK_START - tw.travel_minutes(home, work) - rng.randint(0, jitter)
            if depart > now:
                tw.trip(home, work, depart)
                now = tw.trip(work, home, base + WORK_END + rng.randint(0, jitter))
        for band, (start, last_stop) in BANDS.items():
            p = profile.activity_propensity.get((dk, band), 0.0)
            if p <= 0 or rng.random() >= p:
                continue
            depart = max(base + start + rng.randint(0, 90), now + 15)
            if depart > base + last_stop:
                continue
            here = home
            for _ in range(_MAX_STOPS):
                weights = _TRANSITIONS[(here.kind, dk, band)]
                kind = _pick_kind(rng, weights, by_kind)
                if kind == "home" or depart > base + last_stop:
                    break
                choices = by_kind[kind]
                at = position[kind].get(here)
                if at is None:
                    dest = choices[rng.randrange(len(choices))]
                elif len(choices) == 1:
                    break
                else:
                    # uniform over the other destinations
                    j = rng.randrange(len(choices) - 1)
                    dest = choices[j + (j >= at)]
                now = tw.trip(here, dest, depart)
                here = dest
                depart = now + rng.randint(lo_stay, hi_stay)
            if here != home:
                now = tw.trip(here, home, depart)
    return tw.events


def _agent_key(agent: str) -> tuple:
    m = re.fullmatch(r"([A-Za-z_]*)(\d+)", agent)
    return (m.group(1), int(m.group(2)), "") if m else (agent, -1, agent)


def sort_events(events: Iterable[Event]) -> list[Event]:
    """Order by (timestamp, agent, per-agent sequence); stable in sequence."""
    events = list(events)
    rank = {a: i for i, a in enumerate(sorted({e.agent for e in events}, key=_agent_key))}
    return sorted(events, key=lambda e: (e.timestamp, rank[e.agent]))


def generate_trace(
    world: World,
    profiles: Sequence[ClientProfile],
    horizon_days: int,
    seed: int,
    config: ScenarioConfig = ScenarioConfig(),
) -> EventTrace:
    if horizon_days < 1:
        raise ValueError("horizon_days must be >= 1")
    children = np.random.SeedSequence(seed).spawn(len(profiles))
    events: list[Event] = []
    cache: dict = {}
    for profile, child in zip(profiles, children):
        rng = random.Random(int(child.generate_state(1)[0]))
        events.extend(_client_events(world, profile, horizon_days, rng, config, cache))
    return EventTrace(sort_events(events))


# -- text format -----------------------------------------------------------


class TraceParseError(ValueError):
    def __init__(self, lineno: int, reason: str) -> None:
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


def serialize_trace(trace: EventTrace) -> str:
    out = io.StringIO()
    for e in trace.events:
        out.write(f"{e.agent};{e.kind.value};{e.location};{e.timestamp};{e.distance:.2f}\n")
    return out.getvalue()


_AGENT_RE = re.compile(r"^[^\s;#][^\s;]*$")
_TS_RE = re.compile(r"^(0|[1-9][0-9]*)$")
_DIST_RE = re.compile(r"^(0|[1-9][0-9]*)\.[0-9]{2}$")
_KINDS = {k.value: k for k in EventKind}


def parse_trace(text: str) -> EventTrace:
    events: list[Event] = []
    last_ts: dict[str, int] = {}
    loc_cache: dict[str, LocationId] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split(";")
        if len(parts) != 5:
            raise TraceParseError(lineno, f"expected 5 fields, got {len(parts)}")
        agent, word, loc_text, ts_text, dist_text = parts
        if not _AGENT_RE.match(agent):
            raise TraceParseError(lineno, f"bad agent id {agent!r}")
        kind = _KINDS.get(word)
        if kind is None:
            raise TraceParseError(lineno, f"unknown event {word!r}")
        loc = loc_cache.get(loc_text)
        if loc is None:
            try:
                loc = loc_cache[loc_text] = LocationId.parse(loc_text)
            except ValueError:
                raise TraceParseError(lineno, f"malformed location {loc_text!r}") from None
        if not _TS_RE.match(ts_text):
            raise TraceParseError(lineno, f"bad timestamp {ts_text!r}")
        if dist_text.startswith("-"):
            raise TraceParseError(lineno, f"negative distance {dist_text}")
        if not _DIST_RE.match(dist_text):
            raise TraceParseError(lineno, f"bad distance {dist_text!r}")
        ts = int(ts_text)
        if ts < last_ts.get(agent, 0):
            raise TraceParseError(lineno, f"timestamp regression for {agent}: {ts} < {last_ts[agent]}")
        if kind is EventKind.SEES and not loc.is_station:
            raise TraceParseError(lineno, "SEES on non-station")
        last_ts[agent] = ts
        events.append(Event(agent, kind, loc, ts, float(dist_text)))
    return EventTrace(events)


def check_grammar(trace: EventTrace, allow_needs: bool = True) -> list[str]:
    """Per-agent ``(DEPARTS SEES* ARRIVES NEEDS?)*`` check; returns problems."""
    problems = []
    moving: dict[str, bool] = {}
    for i, e in enumerate(trace.events):
        m = moving.get(e.agent, False)
        if e.kind is EventKind.DEPARTS:
            if m:
                problems.append(f"event {i}: {e.agent} departs while travelling")
            moving[e.agent] = True
        elif e.kind is EventKind.SEES:
            if not m:
                problems.append(f"event {i}: {e.agent} sees while parked")
        elif e.kind is EventKind.ARRIVES:
            if not m:
                problems.append(f"event {i}: {e.agent} arrives without departing")
            moving[e.agent] = False
        elif e.kind is EventKind.NEEDS:
            if not allow_needs:
                problems.append(f"event {i}: NEEDS in baseline trace")
            elif m:
                problems.append(f"event {i}: {e.agent} needs fuel while travelling")
    problems.extend(f"{a} ends while travelling" for a, m in moving.items() if m)
    return problems
