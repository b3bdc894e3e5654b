"""Tune the line-card sleep timers by coordinate descent and compare the
full multi-state ladder against a single active<->deep ladder."""

from dcensim import ExperimentConfig, tune_timers

base = ExperimentConfig(
    k=2, utilization=0.2, stop_jobs=300, seed=4,
    placement="random", routing="shortest",
)
grid = (0.01, 0.05, 0.2, 1.0)

multi = tune_timers(base, grid=grid)
single = tune_timers(base.replaced(single_deep_state=True), grid=grid)

print("Multi-state ladder (active->lp1->lp2->lp3->deep):")
print("  best timers:", multi["timers"])
print(f"  energy/job : {multi['result'].energy_per_job:.2f} J")
print("\nSingle deep state (active->deep):")
print("  best timer :", single["timers"])
print(f"  energy/job : {single['result'].energy_per_job:.2f} J")

print(f"\n{len(multi['table'])} candidate settings were evaluated; a sample:")
for row in multi["table"][:5]:
    print(f"  {row['timers']}  ->  {row['energy_per_job_j']:.2f} J/job, "
          f"QoS p90 ratio {row['qos_ratio_p90']:.3f}")
