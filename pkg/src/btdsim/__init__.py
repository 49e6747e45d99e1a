"""Blockage detection and path recovery for mmWave relay chains on a road segment."""

from .geometry import (
    BlockageType,
    BlockageVerdict,
    InvalidGeometry,
    Link,
    Obstacle,
    Topology,
    TopologyConfig,
    blocked_links,
    build_topology,
    classify_oracle,
    interference_free_margin,
)
from .sim.scenario import NonTermination, ScenarioResult, run_scenario

__version__ = "0.1.0"
