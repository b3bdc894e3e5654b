"""Walk through the device power models: the line-card sleep ladder, the
server ACPI-style ladder, and chassis overheads."""

from dcensim import (
    default_chassis_profile,
    default_linecard_profile,
    default_server_profile,
    linecard_power,
    switch_power,
)
from dcensim.power import LC_STATES, SERVER_STATES, linecard_power_components

card = default_linecard_profile()
print("Line-card power by state (all 24 ports in LPI, empty buffers):")
for state in LC_STATES:
    w = linecard_power(card, state, 0.0, 0, 24)
    print(f"  {state:>6}: {w:7.2f} W   entry {card.entry_delay.get(state, 0):>8.6f} s, "
          f"wake {card.wakeup_latency[state]:>8.6f} s")

print("\nFully active card:", linecard_power(card, "active", 0.0, 24, 0), "W")
comps = linecard_power_components(card, "active", 100.0, 24, 0)
print("With 100 MB buffered, the VoQ/TCAM terms add",
      round(sum(comps.values()) - 268.5, 3), "W:")
for name, w in comps.items():
    print(f"  {name:>18}: {w:7.3f} W")

srv = default_server_profile(20)
print("\nServer power by state (20 cores):")
for state in SERVER_STATES:
    print(f"  {state:>8}: {srv.total_power[state]:6.1f} W   "
          f"wake {srv.wakeup_latency[state]:>8.6f} s")
print(f"Each busy core adds {srv.per_active_core:.2f} W on top of the 308 W platform.")

ch = default_chassis_profile()
print("\nSwitch chassis around one card:")
print("  any card up :", switch_power(ch, [268.5], any_card_up=True), "W")
print("  all cards in deep sleep:", switch_power(ch, [7.0], any_card_up=False), "W")
