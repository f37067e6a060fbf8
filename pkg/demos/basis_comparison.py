"""
Latent spatial bases on a synthetic ridge burn
==============================================

The generator adds a smooth diagonal ridge pattern to the neighbor-count
signal, which the covariates alone cannot see.  Three fits share the same
44 training frames: covariates only, 5 constructed EOFs (observed
temperatures plus 5 simulated frames) and 6 bisquare functions.  Each
forecasts the next 5 frames.

Run with ``python3 demos/basis_comparison.py [seed] [sweeps]``.
"""
import sys

from cafire import ChainConfig, ForecastConfig, bisquare_basis, construct_eofs, fit_states, forecast, regular_knots
from cafire import naive_rps, rps, score, most_probable_states
from cafire.synthetic import ridge_burn

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
sweeps = int(sys.argv[2]) if len(sys.argv) > 2 else 2000

scn = ridge_burn(seed)
S, W, grid, spec = scn.states, scn.winds, scn.grid, scn.spec
train, truth = slice(0, 44), S[44:49]

eofs = construct_eofs(S[train], scn.temps[train], 5, 5, W[train], spec, grid, seed=seed)
print("variance share of the 5 EOFs:", eofs.explained_variance().round(3))
bases = {"covariates": None, "EOF": eofs.H, "bisquare": bisquare_basis(grid, regular_knots(grid, 3, 2)).H}

for name, H in bases.items():
    post = fit_states(S[train], W[train], spec, grid, H=H, cfg=ChainConfig(iterations=sweeps, seed=seed))
    fd = forecast(post, S[43], H, ForecastConfig(5, winds=W[44:49], draws=300, seed=seed), grid, spec)
    report = score(most_probable_states(fd), truth, fd.mean)
    print(f"\n{name}: RPS {rps(fd.mean, truth):.4f}")
    print(report.table())

print(f"\nnaive RPS {naive_rps(truth):.4f}")
