"""Calibration constants, kept apart from first-principles outputs.

These values are fitted to target headline figures, not derived from the
simulator. Bump ``VERSION`` whenever a constant changes.
"""

VERSION = "2026.1"

# throughput formula: best case is 4 RNG cells in each of the two selected words of all
# 8 banks, i.e. 64 bits per loop iteration on one channel
BEST_BITS_PER_BANK = 8
TARGET_MAX_MBPS_PER_CHANNEL = 179.4
TARGET_AVG_MBPS_PER_CHANNEL = 108.9
CHANNELS = 4
BANKS = 8
LOOP_RUNTIME_NS = BANKS * BEST_BITS_PER_BANK / TARGET_MAX_MBPS_PER_CHANNEL * 1000.0
# average data rate implied by the average per-channel throughput
AVG_BITS_PER_BANK = TARGET_AVG_MBPS_PER_CHANNEL * LOOP_RUNTIME_NS / 1000.0 / BANKS

# 64-bit latency: first access plus a pipeline interval per extra access.
# Fitted to the worst case (64 serial accesses, 960 ns) and the best case
# (one access per bank, 100 ns).
LATENCY_FIRST_NS = 100.0
LATENCY_INTERVAL_NS = (960.0 - 100.0) / 63

# per-command energy (nJ) and background power (mW); command energies are
# scaled so 100 iterations of the default 8-bank core loop at 8 bits per
# bank cost 4.4 nJ/bit
ENERGY_TARGET_NJ_PER_BIT = 4.4
ENERGY_ACT_NJ = 5.2726
ENERGY_PRE_NJ = 3.1636
ENERGY_READ_NJ = 4.2181
ENERGY_WRITE_NJ = 4.7453
ENERGY_REF_NJ = 0.0
ENERGY_BACKGROUND_MW = 60.0
ENERGY_IDLE_MW = 40.0
