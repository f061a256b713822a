"""
How far is the DP from the Oracle when predictions are imperfect?
=================================================================

The DP allocates on predicted surfaces. The Oracle enumerates every
combination on the true surfaces. The gap between their true average
improvements is the price of prediction error.
"""

import numpy as np

from ecoshift.harness import GapStudyConfig, gap_study, train_predictor

cfg = GapStudyConfig(surface_noise_sd=0.02, seed=0)
predictor = train_predictor(cfg.grid, n_apps=40, seed=0, library_noise_sd=0.02, sample_noise_sd=0.09)

result = gap_study(cfg, predictor)
s = result.summary()
print(f"{s['n']} configurations, mean prediction accuracy {100 * s['mean_prediction_accuracy']:.1f} %")
print(f"median gap {s['median_pp']:.2f} pp, 90th percentile {s['p90_pp']:.2f} pp, max {s['max_pp']:.2f} pp")
print(f"gaps below 3 pp: {100 * s['frac_lt_3pp']:.0f} %")

# Text CDF of the gap distribution
gaps = result.gaps
for edge in np.arange(0.5, 4.01, 0.5):
    frac = float(np.mean(gaps <= edge))
    print(f"  <= {edge:3.1f} pp {'#' * int(round(40 * frac)):40s} {100 * frac:5.1f} %")

# Without prediction error the gap is exactly zero: the DP is exact.
exact = gap_study(GapStudyConfig(surface_noise_sd=0.02, seed=0))
print("perfect information, max gap:", float(np.max(np.abs(exact.gaps))))
