"""Run all five placement/routing combos on one identical workload and
print the energy/latency table (the `dcensim compare` command does the
same from a YAML config)."""

from dcensim import ExperimentConfig, compare_policies

cfg = ExperimentConfig(
    k=4,
    utilization=0.15,
    stop_jobs=800,
    seed=2,
    placement="random",
    routing="shortest",
)
print(f"k={cfg.k} fat tree, {cfg.num_servers} servers, "
      f"{cfg.stop_jobs} two-task jobs at rho={cfg.utilization}")
results, errors = compare_policies(cfg, parallel=False)
assert not errors, errors

print(f"\n{'combo':12s} {'J/job':>9} {'server J':>9} {'net J':>9} {'p90 lat':>8} {'QoS p90':>8}")
for label in ("SB+SP", "SB+ET", "WASP+SP", "WASP+ET", "PopcornsPro"):
    r = results[label]
    print(
        f"{label:12s} {r.energy_per_job:9.2f} "
        f"{r.server_energy()/r.jobs_completed:9.2f} "
        f"{r.network_energy()/r.jobs_completed:9.2f} "
        f"{r.latency_quantile(0.9):8.3f} {r.qos_ratio_quantile(0.9):8.3f}"
    )

print("\nThe cooperative policy co-locates interdependent tasks and keeps both")
print("servers and line cards asleep; the spread baseline pays for every wake.")
