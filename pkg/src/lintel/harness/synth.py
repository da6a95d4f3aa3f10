"""Synthetic benchmark series: GP draws with injected outliers and a regime switch."""

import numpy as np

from lintel.harness.io import TimeSeries
from lintel.kernel_gp import gp_sample
from lintel.kernels import matern32, matern52, sum_of

# A two-scale ground truth: a smooth slow component plus a rough fast one.
GROUND_TRUTH = sum_of(matern52(1.0, 8.0), matern32(0.5, 1.0))
# Process generating the switched regime.
REGIME_KERNEL = matern52(1.0, 3.0)

N_POINTS = 3000
T_MAX = 3000.0
NOISE_STD = 0.3
OUTLIER_STD = 2.0
N_OUTLIERS = 10
PRETRAIN = 250
REGIME_START, REGIME_STOP = 1500, 2000  # inclusive


def _base(seed: int):
    main, regime = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(main)
    times = np.sort(rng.uniform(0.0, T_MAX, N_POINTS))
    latent = gp_sample(GROUND_TRUTH, 0.0, times, rng)
    noise = rng.normal(0.0, NOISE_STD, N_POINTS)
    # outliers are kept out of the pretraining prefix so evidence fits see clean data
    idx = np.sort(rng.choice(np.arange(PRETRAIN, N_POINTS), N_OUTLIERS, replace=False))
    noise[idx] += rng.normal(0.0, OUTLIER_STD, N_OUTLIERS)
    is_outlier = np.zeros(N_POINTS, dtype=bool)
    is_outlier[idx] = True
    return times, latent, noise, is_outlier, np.random.default_rng(regime)


def synth_outliers(seed: int) -> TimeSeries:
    """3000 noisy draws of the ground-truth GP at sorted U(0, 3000) times.

    Noise is N(0, 0.3^2) except at 10 indices (outside the first 250) whose
    noise variance is 2.0^2 + 0.3^2; those are marked in ``is_outlier``.
    """
    times, latent, noise, is_outlier, _ = _base(seed)
    return TimeSeries(times, latent + noise, is_outlier=is_outlier, latent=latent, name=f"synth_outliers_{seed}")


def synth_regimes(seed: int) -> TimeSeries:
    """Like :func:`synth_outliers`, but indices 1500..2000 follow an independent Matern-5/2 draw.

    Outside that block the series equals ``synth_outliers(seed)`` exactly.
    """
    times, latent, noise, is_outlier, regime_rng = _base(seed)
    block = slice(REGIME_START, REGIME_STOP + 1)
    latent = latent.copy()
    latent[block] = gp_sample(REGIME_KERNEL, 0.0, times[block], regime_rng)
    in_regime = np.zeros(N_POINTS, dtype=bool)
    in_regime[block] = True
    return TimeSeries(
        times, latent + noise, is_outlier=is_outlier, in_regime=in_regime, latent=latent, name=f"synth_regimes_{seed}"
    )
