"""Max-min fair bandwidth sharing with progressive filling."""

from dcensim import max_min_rates

print("Three flows on one 9 Gb/s link split it evenly:")
rates = max_min_rates({0: 9e9}, {0: (0,), 1: (0,), 2: (0,)})
for fid, r in rates.items():
    print(f"  flow {fid}: {r/1e9:.2f} Gb/s")

print("\nA flow bottlenecked elsewhere frees capacity for its sharers:")
caps = {0: 10e9, 1: 2e9}
rates = max_min_rates(caps, {0: (0, 1), 1: (0,)})
print(f"  flow 0 crosses both links, capped by link 1: {rates[0]/1e9:.2f} Gb/s")
print(f"  flow 1 only crosses link 0 and takes the rest: {rates[1]/1e9:.2f} Gb/s")

print("\nFat-tree example: two flows share a 1 Gb/s server uplink, a third")
print("rides its own uplink at full rate:")
caps = {10: 1e9, 11: 1e9, 20: 10e9}
flows = {0: (10, 20), 1: (10, 20), 2: (11, 20)}
rates = max_min_rates(caps, flows)
for fid, r in sorted(rates.items()):
    print(f"  flow {fid}: {r/1e9:.2f} Gb/s")
