"""dcensim: event-driven simulator of data-center energy consumption with
cooperative network/server power management on fat-tree topologies."""

from .config import ConfigError, ExperimentConfig
from .engine import SimConfig, Simulation, max_min_rates, run
from .experiments import (
    POLICY_COMBOS,
    compare_policies,
    run_experiment,
    sweep_flowsize,
    tune_timers,
)
from .metrics import JobRecord, SimulationResult, latency_cdf, nearest_rank_quantile
from .power import (
    ChassisPowerProfile,
    EnergyLedger,
    LineCardPowerProfile,
    ServerPowerProfile,
    default_chassis_profile,
    default_linecard_profile,
    default_server_profile,
    linecard_power,
    server_power,
    switch_power,
)
from .policies import (
    ElasticRouting,
    EnergyAwareRouting,
    PlacementDecision,
    PopcornsPlacement,
    RandomPlacement,
    ShortestPathRouting,
    WaspPlacement,
    link_weight,
    pair_weight,
    server_weight,
)
from .topology import (
    FatTree,
    NodeId,
    NodeKind,
    Path,
    build_fat_tree,
    dijkstra_path,
    enumerate_paths,
    leftmost_path,
    paths_between,
)
from .workload import (
    JobDag,
    JobStream,
    MmppArrivals,
    PoissonArrivals,
    TraceArrivals,
    ingest_trace,
    lambda_for_utilization,
    make_job,
    qos_deadline,
    topological_order,
)

__version__ = "0.1.0"
