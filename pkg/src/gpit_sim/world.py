"""Synthetic geography and the spatio-temporal gas-price field.

A :class:`World` is a connected road graph over typed locations (work,
shopping, residential, gas station).  Distances are shortest-path road
miles.  A :class:`PriceTable` holds one realized $/gal value per
(station, day), drawn once and never mutated.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

__all__ = [
    "LocationKind",
    "LocationId",
    "World",
    "WorldConfig",
    "Route",
    "PriceParams",
    "PriceTable",
    "WorldFormatError",
    "build_world",
    "shortest_distance",
    "stations_near_path",
    "generate_prices",
    "price_at",
    "load_base_curve",
    "parse_world",
    "format_world",
]

_EPS = 1e-9


class LocationKind(enum.IntEnum):
    WORK = 0
    SHOPPING = 1
    RESIDENTIAL = 2
    STATION = 3

    @property
    def prefix(self) -> str:
        return _PREFIX[self]


_PREFIX = {
    LocationKind.WORK: "W",
    LocationKind.SHOPPING: "S",
    LocationKind.RESIDENTIAL: "R",
    LocationKind.STATION: "STA",
}
_KIND_BY_PREFIX = {v: k for k, v in _PREFIX.items()}
# STA must be tried before S
_ID_RE = re.compile(r"^(STA|W|S|R)(0|[1-9][0-9]*)$")


@dataclass(frozen=True, order=True, slots=True)
class LocationId:
    kind: LocationKind
    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"negative location index {self.index}")

    def __str__(self) -> str:
        return f"{_PREFIX[self.kind]}{self.index}"

    @classmethod
    def parse(cls, text: str) -> "LocationId":
        m = _ID_RE.match(text)
        if m is None:
            raise ValueError(f"malformed location id {text!r}")
        return cls(_KIND_BY_PREFIX[m.group(1)], int(m.group(2)))

    @property
    def is_station(self) -> bool:
        return self.kind is LocationKind.STATION


StationId = LocationId


@dataclass(frozen=True)
class WorldConfig:
    n_work: int = 20
    n_shopping: int = 15
    n_residential: int = 200
    n_stations: int = 12
    width: float = 15.0
    height: float = 15.0
    k_neighbors: int = 4


class WorldFormatError(ValueError):
    pass


@dataclass(eq=False)
class World:
    """Immutable road network.  Build with :func:`build_world` or
    :func:`parse_world`; the constructor precomputes all-pairs distances."""

    locations: tuple[LocationId, ...]
    coords: np.ndarray
    edges: tuple[tuple[int, int, float], ...]
    dist: np.ndarray = field(init=False, repr=False)
    _pred: np.ndarray = field(init=False, repr=False)
    _index: dict[LocationId, int] = field(init=False, repr=False)
    _path_cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.locations)
        self._index = {loc: i for i, loc in enumerate(self.locations)}
        if len(self._index) != n:
            raise WorldFormatError("duplicate location ids")
        if not any(loc.is_station for loc in self.locations):
            raise WorldFormatError("world has no gas station")
        rows, cols, w = [], [], []
        for a, b, miles in self.edges:
            if not miles > 0:
                raise WorldFormatError(f"non-positive edge weight {miles}")
            rows += [a, b]
            cols += [b, a]
            w += [miles, miles]
        graph = csr_matrix((w, (rows, cols)), shape=(n, n))
        ncomp, _ = connected_components(graph, directed=False)
        if ncomp != 1:
            raise WorldFormatError(f"road graph is not connected ({ncomp} components)")
        dist, pred = shortest_path(graph, method="D", directed=False, return_predecessors=True)
        dist.setflags(write=False)
        self.coords = np.asarray(self.coords, dtype=float)
        self.coords.setflags(write=False)
        self.dist = dist
        self._pred = pred

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, World):
            return NotImplemented
        return (
            self.locations == other.locations
            and self.edges == other.edges
            and np.array_equal(self.coords, other.coords)
        )

    __hash__ = None  # type: ignore[assignment]

    def index_of(self, loc: LocationId) -> int:
        try:
            return self._index[loc]
        except KeyError:
            raise KeyError(f"unknown location {loc}") from None

    def __contains__(self, loc: object) -> bool:
        return loc in self._index

    def of_kind(self, kind: LocationKind) -> list[LocationId]:
        return [loc for loc in self.locations if loc.kind is kind]

    @property
    def stations(self) -> list[LocationId]:
        return self.of_kind(LocationKind.STATION)

    @property
    def _station_coords(self) -> tuple[list[LocationId], np.ndarray]:
        hit = self._path_cache.get("stations")
        if hit is None:
            st = self.stations
            hit = self._path_cache["stations"] = (st, self.coords[[self._index[s] for s in st]])
        return hit

    def _edge_neighbours(self, radius: float) -> dict[tuple[int, int], list[tuple[int, float, float]]]:
        """For each directed road segment, the stations within ``radius`` of
        it as (station position, fraction along, distance)."""
        key = ("edges", radius)
        hit = self._path_cache.get(key)
        if hit is not None:
            return hit
        _, q = self._station_coords
        ab = np.array([(a, b) for a, b, _ in self.edges], dtype=int).reshape(-1, 2)
        p0 = self.coords[ab[:, 0]]
        v = self.coords[ab[:, 1]] - p0
        vv = np.einsum("ij,ij->i", v, v)
        rel = q[None, :, :] - p0[:, None, :]  # (edges, stations, 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(vv[:, None] > 0, np.einsum("esk,ek->es", rel, v) / vv[:, None], 0.0)
        t = np.clip(t, 0.0, 1.0)
        gap = rel - t[..., None] * v[:, None, :]
        d = np.hypot(gap[..., 0], gap[..., 1])
        out: dict[tuple[int, int], list[tuple[int, float, float]]] = {}
        for e, k in zip(*np.nonzero(d <= radius + _EPS)):
            a, b = int(ab[e, 0]), int(ab[e, 1])
            te, de = float(t[e, k]), float(d[e, k])
            out.setdefault((a, b), []).append((int(k), te, de))
            out.setdefault((b, a), []).append((int(k), 1.0 - te, de))
        self._path_cache[key] = out
        return out

    def node_path(self, a: LocationId, b: LocationId) -> list[int]:
        """Graph node indices along the shortest path from a to b."""
        i, j = self.index_of(a), self.index_of(b)
        path = [j]
        while path[-1] != i:
            path.append(int(self._pred[i, path[-1]]))
        path.reverse()
        return path

    def seen_stations(self, a: LocationId, b: LocationId, radius: float) -> list[tuple[LocationId, float]]:
        """Stations within ``radius`` of the drawn a->b path, in travel order.

        Returns (station, road miles from a to the closest point).  Cached.
        """
        key = (a, b, radius)
        hit = self._path_cache.get(key)
        if hit is not None:
            return hit
        path = self.node_path(a, b)
        stations, q = self._station_coords
        if len(path) == 1:
            d = np.hypot(*(q - self.coords[path[0]]).T)
            out = [(s, 0.0) for s, dd in zip(stations, d) if dd <= radius + _EPS]
        else:
            near = self._edge_neighbours(radius)
            best: dict[int, tuple[float, float]] = {}  # station -> (distance, along)
            cum = 0.0
            for u, v in zip(path, path[1:]):
                length = float(self.dist[u, v])
                for k, t, dd in near.get((u, v), ()):
                    # keep the earliest segment attaining the minimum distance
                    if k not in best or dd < best[k][0] - _EPS:
                        best[k] = (dd, cum + t * length)
                cum += length
            out = [(stations[k], along) for k, (_, along) in best.items()]
        out.sort(key=lambda sa: (sa[1], sa[0]))
        self._path_cache[key] = out
        return out


def build_world(config: WorldConfig, seed: int) -> World:
    counts = {
        LocationKind.WORK: config.n_work,
        LocationKind.SHOPPING: config.n_shopping,
        LocationKind.RESIDENTIAL: config.n_residential,
        LocationKind.STATION: config.n_stations,
    }
    if config.n_stations < 1:
        raise ValueError("world needs at least one gas station")
    if config.n_work < 1 or config.n_residential < 1:
        raise ValueError("world needs at least one work and one residential location")
    if any(c < 0 for c in counts.values()):
        raise ValueError("negative location count")
    if not (config.width > 0 and config.height > 0):
        raise ValueError("area dimensions must be positive")

    rng = np.random.default_rng(seed)
    locations = tuple(LocationId(kind, i + 1) for kind, c in counts.items() for i in range(c))
    n = len(locations)
    coords = rng.uniform((0.0, 0.0), (config.width, config.height), size=(n, 2))
    coords = np.round(coords, 4)

    diff = coords[:, None, :] - coords[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    # coincident points would produce zero-weight edges
    d[d == 0] = 1e-4
    np.fill_diagonal(d, np.inf)

    edges: dict[tuple[int, int], float] = {}
    k = min(config.k_neighbors, n - 1)
    for i in range(n):
        for j in np.argsort(d[i], kind="stable")[:k]:
            a, b = min(i, int(j)), max(i, int(j))
            edges[(a, b)] = float(d[a, b])

    # join components through their closest pair until connected
    while True:
        g = csr_matrix(
            ([1.0] * len(edges), ([a for a, _ in edges], [b for _, b in edges])), shape=(n, n)
        )
        ncomp, labels = connected_components(g, directed=False)
        if ncomp <= 1:
            break
        in0 = labels == labels[0]
        sub = np.where(in0[:, None] & ~in0[None, :], d, np.inf)
        i, j = np.unravel_index(int(np.argmin(sub)), sub.shape)
        a, b = min(int(i), int(j)), max(int(i), int(j))
        edges[(a, b)] = float(d[a, b])

    edge_list = tuple(sorted((a, b, round(w, 6)) for (a, b), w in edges.items()))
    return World(locations, coords, edge_list)


def shortest_distance(world: World, a: LocationId, b: LocationId) -> float:
    return float(world.dist[world.index_of(a), world.index_of(b)])


@dataclass(frozen=True)
class Route:
    waypoints: tuple[LocationId, ...]
    length_miles: float

    @classmethod
    def through(cls, world: World, waypoints: Sequence[LocationId]) -> "Route":
        wps = tuple(waypoints)
        length = sum(shortest_distance(world, a, b) for a, b in zip(wps, wps[1:]))
        return cls(wps, length)


def stations_near_path(world: World, route: Route, detour_radius: float) -> list[tuple[LocationId, float]]:
    """Stations whose cheapest single insertion into the route costs at most
    ``detour_radius`` extra miles, ordered by position along the route."""
    if not route.waypoints:
        raise ValueError("empty route")
    if detour_radius < 0:
        raise ValueError("detour_radius must be >= 0")
    wps = route.waypoints
    legs = list(zip(wps, wps[1:])) or [(wps[0], wps[0])]
    idx = [world.index_of(w) for w in wps]
    legs_idx = list(zip(idx, idx[1:])) or [(idx[0], idx[0])]
    D = world.dist
    found = []
    for s in world.stations:
        k = world.index_of(s)
        best = None
        for leg, (a, b) in enumerate(legs_idx):
            extra = D[a, k] + D[k, b] - D[a, b]
            if best is None or extra < best[0] - _EPS:
                best = (extra, leg, D[a, k])
        extra, leg, along = best
        if extra <= detour_radius + _EPS:
            found.append((leg, along, s, 0.0 if abs(extra) < _EPS else float(extra)))
    found.sort(key=lambda f: (f[0], f[1], f[2]))
    return [(s, extra) for _, _, s, extra in found]


# -- import / export -------------------------------------------------------


def parse_world(text: str) -> World:
    """Parse the ``LOC;id;x;y`` / ``EDGE;a;b;miles`` text format."""
    locs: list[LocationId] = []
    coords: list[tuple[float, float]] = []
    index: dict[LocationId, int] = {}
    raw_edges: list[tuple[int, int, float]] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(";")
        try:
            if parts[0] == "LOC" and len(parts) == 4:
                loc = LocationId.parse(parts[1])
                if loc in index:
                    raise ValueError(f"duplicate location {loc}")
                index[loc] = len(locs)
                locs.append(loc)
                coords.append((float(parts[2]), float(parts[3])))
            elif parts[0] == "EDGE" and len(parts) == 4:
                a, b = LocationId.parse(parts[1]), LocationId.parse(parts[2])
                if a not in index or b not in index:
                    raise ValueError("edge references undeclared location")
                miles = float(parts[3])
                if not miles > 0:
                    raise ValueError(f"non-positive edge weight {parts[3]}")
                i, j = index[a], index[b]
                raw_edges.append((min(i, j), max(i, j), miles))
            else:
                raise ValueError(f"unrecognised record {parts[0]!r}")
        except ValueError as exc:
            raise WorldFormatError(f"line {lineno}: {exc}") from None
    if not locs:
        raise WorldFormatError("no locations")
    return World(tuple(locs), np.array(coords, dtype=float).reshape(-1, 2), tuple(sorted(raw_edges)))


def format_world(world: World) -> str:
    out = io.StringIO()
    for loc, (x, y) in zip(world.locations, world.coords):
        out.write(f"LOC;{loc};{x:.4f};{y:.4f}\n")
    for a, b, miles in world.edges:
        out.write(f"EDGE;{world.locations[a]};{world.locations[b]};{miles:.6f}\n")
    return out.getvalue()


# -- prices ----------------------------------------------------------------


@dataclass(frozen=True)
class PriceParams:
    variance_scale: float = 1.0
    noise_sigma: float = 0.0
    spatial_sigma: float = 0.05
    base_start: float = 2.60
    daily_sigma: float = 0.02
    base_min: float = 1.50
    base_max: float = 5.00
    price_floor: float = 1.00
    base_curve: tuple[float, ...] | None = None


@dataclass(frozen=True, eq=False)
class PriceTable:
    stations: tuple[LocationId, ...]
    base_curve: np.ndarray
    spatial_offsets: np.ndarray
    variance_scale: float
    noise_sigma: float
    noise: np.ndarray
    realized: np.ndarray
    price_floor: float

    @property
    def horizon_days(self) -> int:
        return int(self.base_curve.shape[0])

    def row(self, station: LocationId) -> np.ndarray:
        return self.realized[self._row_index[station]]

    @property
    def _row_index(self) -> dict[LocationId, int]:
        cache = self.__dict__.get("_rows")
        if cache is None:
            cache = {s: i for i, s in enumerate(self.stations)}
            object.__setattr__(self, "_rows", cache)
        return cache


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def generate_prices(
    stations: Sequence[LocationId], horizon_days: int, params: PriceParams, seed: int
) -> PriceTable:
    if horizon_days < 1:
        raise ValueError("horizon_days must be >= 1")
    if params.variance_scale < 0 or params.noise_sigma < 0:
        raise ValueError("variance_scale and noise_sigma must be >= 0")
    stations = tuple(stations)
    # independent substreams so that changing one knob leaves other draws fixed
    base_ss, off_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)

    if params.base_curve is not None:
        base = np.asarray(params.base_curve, dtype=float)
        if base.shape[0] < horizon_days:
            raise ValueError(f"base curve has {base.shape[0]} days, need {horizon_days}")
        if np.any(base <= 0):
            raise ValueError("base curve prices must be positive")
        base = base[:horizon_days].copy()
    else:
        steps = np.random.default_rng(base_ss).normal(0.0, params.daily_sigma, horizon_days - 1)
        base = np.empty(horizon_days)
        base[0] = params.base_start
        for t, step in enumerate(steps, start=1):
            base[t] = min(params.base_max, max(params.base_min, base[t - 1] + step))

    offsets = np.random.default_rng(off_ss).standard_normal(len(stations)) * params.spatial_sigma
    noise = np.random.default_rng(noise_ss).standard_normal((len(stations), horizon_days)) * params.noise_sigma
    realized = base[None, :] + params.variance_scale * offsets[:, None] + noise
    realized = np.maximum(realized, params.price_floor)
    return PriceTable(
        stations=stations,
        base_curve=_readonly(base),
        spatial_offsets=_readonly(offsets),
        variance_scale=params.variance_scale,
        noise_sigma=params.noise_sigma,
        noise=_readonly(noise),
        realized=_readonly(realized),
        price_floor=params.price_floor,
    )


def price_at(table: PriceTable, station: LocationId, day: int) -> float:
    if not 0 <= day < table.horizon_days:
        raise IndexError(f"day {day} outside horizon [0, {table.horizon_days})")
    try:
        return float(table.row(station)[day])
    except KeyError:
        raise KeyError(f"unknown station {station}") from None


def load_base_curve(source: str | Path | Iterable[str]) -> tuple[float, ...]:
    """Read a ``day,price`` CSV (0-based contiguous days, positive prices)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        source = Path(source).read_text(encoding="utf-8")
    lines = source.splitlines() if isinstance(source, str) else list(source)
    reader = csv.reader(line for line in lines if line.strip() and not line.startswith("#"))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["day", "price"]:
        raise ValueError("base curve CSV must start with header 'day,price'")
    prices = []
    for expected, row in enumerate(reader):
        day, price = int(row[0]), float(row[1])
        if day != expected:
            raise ValueError(f"missing day {expected} (found {day})")
        if not price > 0:
            raise ValueError(f"non-positive price on day {day}")
        prices.append(price)
    if not prices:
        raise ValueError("base curve CSV has no rows")
    return tuple(prices)
