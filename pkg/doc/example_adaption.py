from __future__ import annotations

import numpy as np

import cvqkdadapt.numerics as numerics
from cvqkdadapt.adapt_core import run_adaption
from cvqkdadapt.channel_model import ChannelEnsemble
from cvqkdadapt.rate_ladder import RateLadder, default_profile

# a low-SNR ensemble of 64 sub-channels out of 128 subcarriers
rng = numerics.make_rng(42)
ens = ChannelEnsemble.generate(64, 128, (0.1, 0.27), (0.9, 1.0), rng)

ladder = RateLadder(0.5, [1.0, 1.5, 2.0], 2.5)
profiles = {ch.index: default_profile(ch.nu, 0.3, ladder) for ch in ens.sub_channels}

# on average one bit per channel use per sub-channel
allocation = run_adaption(ens, ladder, profiles, 64.0)

print("total rate %s after %d steps" % (allocation.total_rate, len(allocation.trace)))
print(allocation.channel_frame().RATE_INDEX.value_counts())

trace = allocation.trace_frame()
print(trace.tail(10))
print("worst BER along the trace: %s" % np.max(trace.BER))
