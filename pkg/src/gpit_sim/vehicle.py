"""Fuel bookkeeping and refuelling choices."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .world import LocationId, PriceTable, Route, World, price_at, stations_near_path

__all__ = [
    "FuelState",
    "RefuelQuote",
    "NoStationOnPath",
    "consume",
    "needs_refuel",
    "refill",
    "make_quote",
    "default_station",
    "best_station",
    "savings",
]


@dataclass(frozen=True)
class FuelState:
    fuel: float
    tank_capacity: float = 15.0
    mpg: float = 25.0
    low_threshold: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fuel <= self.tank_capacity:
            raise ValueError(f"fuel {self.fuel} outside [0, {self.tank_capacity}]")
        if not self.mpg > 0:
            raise ValueError("mpg must be positive")


@dataclass(frozen=True)
class RefuelQuote:
    station: LocationId
    unit_price: float
    detour_miles: float
    gallons: float
    total_cost: float


class NoStationOnPath(LookupError):
    pass


def consume(state: FuelState, distance: float) -> FuelState:
    if distance < 0:
        raise ValueError("distance must be >= 0")
    return replace(state, fuel=max(0.0, state.fuel - distance / state.mpg))


def needs_refuel(state: FuelState) -> bool:
    return state.fuel < state.low_threshold


def refill(state: FuelState) -> FuelState:
    return replace(state, fuel=state.tank_capacity)


def make_quote(station: LocationId, unit_price: float, detour_miles: float, state: FuelState) -> RefuelQuote:
    # detour fuel is bought at the same pump, so the tank still ends full
    gallons = state.tank_capacity - state.fuel
    total = gallons * unit_price + detour_miles / state.mpg * unit_price
    return RefuelQuote(station, unit_price, detour_miles, gallons, total)


def default_station(route_remaining: Route, world: World, sees_radius: float = 0.25) -> LocationId:
    """First station within ``sees_radius`` of the remaining route."""
    wps = route_remaining.waypoints
    if not wps:
        raise NoStationOnPath("empty route")
    legs = list(zip(wps, wps[1:])) or [(wps[0], wps[0])]
    for a, b in legs:
        seen = world.seen_stations(a, b, sees_radius)
        if seen:
            return seen[0][0]
    raise NoStationOnPath(f"no station within {sees_radius} mi of route {[str(w) for w in wps]}")


def best_station(
    route_remaining: Route,
    world: World,
    prices: PriceTable,
    day: int,
    state: FuelState,
    detour_radius: float,
    sees_radius: float = 0.25,
) -> RefuelQuote:
    """Cheapest total refuel cost near the route; ties go to the smaller
    detour and then the smaller station id."""
    candidates = stations_near_path(world, route_remaining, detour_radius)
    if not candidates:
        station = default_station(route_remaining, world, sees_radius)
        detour = _insertion_detour(world, route_remaining, station)
        return make_quote(station, price_at(prices, station, day), detour, state)
    quotes = [make_quote(s, price_at(prices, s, day), d, state) for s, d in candidates]
    return min(quotes, key=lambda q: (q.total_cost, q.detour_miles, q.station))


def _insertion_detour(world: World, route: Route, station: LocationId) -> float:
    # radius large enough that the station is always listed
    big = float(world.dist.max()) * 2 + 1.0
    for s, d in stations_near_path(world, route, big):
        if s == station:
            return d
    raise KeyError(station)


def savings(default_quote: RefuelQuote, best_quote: RefuelQuote) -> float:
    if default_quote.station == best_quote.station:
        return 0.0
    return max(0.0, default_quote.total_cost - best_quote.total_cost)
