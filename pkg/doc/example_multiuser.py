from __future__ import annotations

import cvqkdadapt.numerics as numerics
from cvqkdadapt.adapt_core import ber_at
from cvqkdadapt.channel_model import ChannelEnsemble
from cvqkdadapt.multiuser import (
    LogicalChannel,
    adapt_users,
    assign_logical_channels,
    equalized_ber,
    variance_correction,
)
from cvqkdadapt.rate_ladder import MAX, MIN, RateLadder, default_profile

ens = ChannelEnsemble.generate(300, 512, (0.1, 0.27), (0.9, 1.0), numerics.make_rng(7))
ladder = RateLadder(0.5, [1.0, 1.5, 2.0], 2.5)
profiles = {ch.index: default_profile(ch.nu, 0.3, ladder) for ch in ens.sub_channels}

# three users with 100 sub-channels each and different key rate targets
users = assign_logical_channels(ens, 3, 100, [80.0, 100.0, 150.0])
allocations = adapt_users(users, ladder, profiles)

for user in users:
    allocation = allocations[user.user_id]
    keep = [k for k, s in enumerate(allocation.final_states) if MIN <= s.current_index.kind < MAX]
    active = LogicalChannel(user.user_id, [user.sub_channels[k] for k in keep], user.target)
    states = [allocation.final_states[k] for k in keep]
    pre = [ber_at(profiles[ch.index], s.current_index) for ch, s in zip(active.sub_channels, states)]

    correction = variance_correction([s.delta for s in states], 64.0)
    post = equalized_ber(active, correction, pre)

    print("user %d: rate %s, xi %.6f, largest variance correction %.6f" %
          (user.user_id, allocation.total_rate, correction.xi, correction.corrections.max()))
    print("  BER before %.3e .. %.3e, after %.3e" %
          (min(p.ber for p in pre), max(p.ber for p in pre), post[0].ber))
