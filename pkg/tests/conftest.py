import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from derdispatch import gridgen
from derdispatch.caseio import BidCurve, Bus, Generator, Line, Load, SystemCase


@pytest.fixture
def triangle():
    """3-bus triangle, equal reactances, gens at buses 1-2, 9 MW load at 3."""
    return gridgen.triangle_case(x=0.1, load_mw=9.0, cap=100.0)


@pytest.fixture
def two_bus():
    buses = [Bus(1, is_reference=True), Bus(2)]
    lines = [Line(0, 1, 2, 0.1, 0.0, 50.0)]
    gens = [Generator(0, 1, 0.0, 30.0, 30.0, 30.0, BidCurve.single(10.0, 0.0, 30.0))]
    return SystemCase(buses, lines, gens, [Load(2, 10.0)], name="two_bus")


@pytest.fixture(scope="session")
def sys118():
    """Synthetic 118-bus twin (same dimensions as the classic case)."""
    case = gridgen.synthetic_case(118, n_lines=186, n_gens=54, seed=2024,
                                  load_share=0.84, total_load=4000.0)
    return gridgen.assign_ratings(case, headroom=1.8, floor=40.0)


@pytest.fixture(scope="session")
def scenario118():
    """Congested 118-bus scenario: DERAs built, bids assigned, N-1 rated.

    Returns (case, vulnerable_line_ids); the dispatch at proportional
    output is N-1 feasible by construction while the merit-order optimum
    overloads a handful of corridors.
    """
    from derdispatch.caseio import build_deras, generate_bids

    base = gridgen.synthetic_case(118, n_lines=186, n_gens=54, seed=2024,
                                  load_share=0.84, total_load=4000.0)
    base = build_deras(base, fraction=0.5, group_size=10, seed=1)
    case, vulnerable = gridgen.rate_for_contingencies(
        base, n_vulnerable=5, headroom=1.4, floor=30.0, n_tight=3,
        tight_headroom=1.0)
    case = generate_bids(case, 30.0, seed=2, horizon=1)
    return case, vulnerable


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def build_sys24(horizon=288, tder_cost_mode="independent", seed_profile=4):
    """Desk-scale rolling scenario: 24 buses, 3 DERAs, engineered congestion."""
    from derdispatch.caseio import LoadProfile, assign_tder_costs, build_deras, \
        generate_bids
    from derdispatch.harness import synthetic_shape

    base = gridgen.synthetic_case(24, n_lines=35, n_gens=8, seed=7,
                                  load_share=0.8, total_load=700.0)
    base = build_deras(base, fraction=0.5, group_size=7, seed=1)
    case, vulnerable = gridgen.rate_for_contingencies(
        base, n_vulnerable=5, headroom=1.35, floor=12.0, n_tight=3,
        tight_headroom=1.0)
    shape = synthetic_shape(horizon, 5.0, seed=seed_profile)
    profile = LoadProfile.from_shape(case, shape)
    case = generate_bids(case, 30.0, seed=2, profile=profile)
    case = assign_tder_costs(case, tder_cost_mode, 3, base_lmp=30.0,
                             profile=profile, smoothing=0.9)
    return case, profile, vulnerable


@pytest.fixture(scope="session")
def sys24_day():
    """One simulated day on the 24-bus scenario (shared, read-only)."""
    return build_sys24(horizon=288)
