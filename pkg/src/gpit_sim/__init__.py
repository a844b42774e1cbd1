"""Agent-based simulation of a market for cheapest-gas-station information."""

from .config import RunConfig, load_config, parse_config
from .market import Ledger, SimConfig, run_simulation, simulate_market
from .negotiation import (
    ClientStrategyState,
    DealRecord,
    NegotiationSession,
    TraderStrategyState,
    run_negotiation,
    run_session,
)
from .scenario import EventTrace, generate_profiles, generate_trace, parse_trace, serialize_trace
from .world import PriceParams, World, WorldConfig, build_world, generate_prices

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "Ledger",
    "SimConfig",
    "run_simulation",
    "simulate_market",
    "ClientStrategyState",
    "TraderStrategyState",
    "DealRecord",
    "NegotiationSession",
    "run_negotiation",
    "run_session",
    "EventTrace",
    "generate_profiles",
    "generate_trace",
    "parse_trace",
    "serialize_trace",
    "World",
    "WorldConfig",
    "PriceParams",
    "build_world",
    "generate_prices",
]
