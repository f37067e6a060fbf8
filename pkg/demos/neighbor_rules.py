"""
Recovering neighbor ignition rules from a simulated fire
=========================================================

A 20 x 30 fire is grown from known ordinal-probit rules with an on/off
northward wind.  The covariate-only model is fitted to the first 40 frames
and its ignition probabilities are compared with the truth, then the last
5 frames are forecast.

Run with ``python3 demos/neighbor_rules.py [sweeps]``.
"""
import sys

import numpy as np
from scipy.special import ndtr

from cafire import ChainConfig, ForecastConfig, fit_states, forecast, naive_rps, rps, transition_probability
from cafire.simulator import REFERENCE_BETA
from cafire.synthetic import REFERENCE_IGNITION, neighbor_rule_experiment

sweeps = int(sys.argv[1]) if len(sys.argv) > 1 else 4000

scn = neighbor_rule_experiment(seed=2024)
S, W = scn.states, scn.winds
print(f"grid {scn.grid.ny}x{scn.grid.nx}, {S.shape[0]} frames")
print("cells per state in the last frame:", np.bincount(S[-1], minlength=4)[1:])

# r = 0: plain ordinal probit on the neighbor counts
post = fit_states(S[:40], W[:40], scn.spec, scn.grid, cfg=ChainConfig(iterations=sweeps, seed=1))
print(f"\nbeta mean {post.beta.mean(axis=0).round(3)}, cutpoint mean {post.cutpoint.mean():.2f}")

print("\nunburnt  burning   true   posterior mean   95% HPD")
for (u, b), tabled in REFERENCE_IGNITION.items():
    # compare with the exact generating probability, not its 4-decimal rounding
    p = ndtr(np.dot([u, b, 0], REFERENCE_BETA))
    mean, (lo, hi) = transition_probability(post, [u, b, 0]).ignition
    flag = "" if lo <= p <= hi else "  <- missed"
    print(f"{u:7d} {b:8d}   {p:.4f}   {mean:.4f}          ({lo:.4f}, {hi:.4f}){flag}")

# forecast the held-out frames with the observed winds
fd = forecast(post, S[39], None, ForecastConfig(5, winds=W[40:45], draws=500, seed=2), scn.grid, scn.spec)
print(f"\nforecast RPS {rps(fd.mean, S[40:45]):.4f}, naive {naive_rps(S[40:45]):.4f}")
