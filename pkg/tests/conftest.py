import numpy as np
import pytest

from gridmc.composite import CompositeSystem, NetworkDescription
from gridmc.dataio import (
    bundled_data_dir,
    load_fleet,
    load_network,
    load_portfolio,
    load_trace_library,
)


@pytest.fixture(scope="session")
def rts_network():
    return load_network(bundled_data_dir() / "rts" / "network.yaml",
                        rating_scale=0.8)


@pytest.fixture(scope="session")
def rts_system(rts_network):
    return CompositeSystem(rts_network)


@pytest.fixture(scope="session")
def gb_data():
    d = bundled_data_dir() / "gb"
    return {
        "portfolio": load_portfolio(d / "portfolio.csv"),
        "fleet": load_fleet(d / "fleet.csv"),
        "demand": load_trace_library(d / "demand_years.csv", hours=8760),
        "wind": load_trace_library(d / "wind_years.csv", hours=8760),
    }


@pytest.fixture
def toy_network():
    """2-bus system: generator at bus 0, load at bus 1, one 30 MW line."""
    return NetworkDescription(
        n_nodes=2,
        gen_node=[0], gen_capacity=[100.0], gen_availability=[0.9],
        line_from=[0], line_to=[1], line_reactance=[1.0],
        line_rating=[30.0], line_availability=[0.95],
        nodal_weights=[0.0, 1.0],
        demand_trace=np.full(100, 50.0),
    )
