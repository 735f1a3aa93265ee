"""Generative access to the nominal kernel and sampled support-function estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .uncertainty import Contamination, TotalVariation, Wasserstein, support_values

PRNG_FAMILY = "numpy.PCG64"


def split_seed(root_seed: int, *key: int) -> np.random.SeedSequence:
    """Child seed for stream ``key`` under ``root_seed``.

    Streams are ``SeedSequence(root_seed, spawn_key=key)``, so they depend only
    on the root seed and the integer key, never on scheduling order.
    """
    return np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in key))


class GenerativeModel:
    """Sampler for next states drawn from the nominal kernel of ``mdp``.

    Holds a single ``PCG64`` generator; one instance per thread.
    """

    def __init__(self, mdp, seed=0, key=()):
        self.mdp = mdp
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self.rng = np.random.Generator(np.random.PCG64(split_seed(self.seed, *self.key)))
        kern = np.asarray(mdp.nominal_kernel)
        self._rows = kern.reshape(-1, kern.shape[-1])
        cdf = np.cumsum(kern, axis=-1)
        cdf[..., -1] = 1.0
        self._cdf = cdf
        self.n_samples = 0

    @property
    def family(self):
        return PRNG_FAMILY

    def spawn(self, *key):
        """Independent generative model on stream ``self.key + key``."""
        return GenerativeModel(self.mdp, self.seed, self.key + tuple(key))

    def sample_next(self, s: int, a: int) -> int:
        return int(self.sample_many(s, a, 1)[0])

    def sample_many(self, s: int, a: int, size: int) -> np.ndarray:
        u = self.rng.random(size)
        self.n_samples += size
        return np.searchsorted(self._cdf[s, a], u, side="right")

    def sample_all(self) -> np.ndarray:
        """One next state for every (s, a) pair, shape (S, A)."""
        u = self.rng.random(self._cdf.shape[:2])
        self.n_samples += u.size
        return (self._cdf <= u[..., None]).sum(axis=-1)


@dataclass(frozen=True)
class MlmcConfig:
    n_max: int = 12
    geom_p: float = 0.5

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ConfigError(f"n_max must be a positive integer, got {self.n_max}")
        if self.geom_p != 0.5:
            raise ConfigError("geom_p is fixed at 0.5")

    def level_prob(self, n):
        """P(min(N, n_max) = n) for N ~ Geom(0.5) on {0, 1, ...}."""
        n = np.asarray(n)
        return np.where(n < self.n_max, 0.5 ** (n + 1.0), 0.5 ** float(self.n_max))

    def draw_levels(self, rng, size=None):
        # numpy's geometric counts trials (support >= 1); shift to failures
        n = rng.geometric(self.geom_p, size=size) - 1
        return np.minimum(n, self.n_max)


def estimate_sigma_contamination(gm: GenerativeModel, s, a, v, radius) -> float:
    v = np.asarray(v, dtype=float)
    nxt = gm.sample_next(s, a)
    return (1.0 - radius) * float(v[nxt]) + radius * float(v.max())


def _onehot(idx, n):
    out = np.zeros((np.size(idx), n))
    out[np.arange(np.size(idx)), idx] = 1.0
    return out


def estimate_sigma_mlmc(gm: GenerativeModel, s, a, v, model, cfg: MlmcConfig = MlmcConfig(),
                        return_samples=False):
    """Truncated multilevel Monte-Carlo estimate of the support function.

    Draws a level ``N' = min(N, n_max)`` with ``N ~ Geom(0.5)``, then
    ``2^(N'+1)`` next states. With ``P1`` the point mass on the first draw and
    ``Pfull``, ``Podd``, ``Peven`` the empirical measures of all, odd-indexed
    and even-indexed draws, returns::

        sigma(P1) + [sigma(Pfull) - (sigma(Peven) + sigma(Podd)) / 2] / P(N' = n)
    """
    if not isinstance(model, (TotalVariation, Wasserstein)):
        raise ConfigError("MLMC estimator applies to TV and Wasserstein sets")
    v = np.asarray(v, dtype=float)
    n_s = v.size
    level = int(cfg.draw_levels(gm.rng))
    draws = gm.sample_many(s, a, 2 ** (level + 1))
    # 1-based odd positions are 0-based even positions
    odd, even = draws[0::2], draws[1::2]
    rows = np.stack([
        _onehot(draws[:1], n_s)[0],
        np.bincount(draws, minlength=n_s) / draws.size,
        np.bincount(even, minlength=n_s) / even.size,
        np.bincount(odd, minlength=n_s) / odd.size,
    ])
    sig = support_values(model, rows, v)
    est = sig[0] + (sig[1] - 0.5 * (sig[2] + sig[3])) / float(cfg.level_prob(level))
    if return_samples:
        return float(est), int(draws.size)
    return float(est)


def mlmc_all(gm: GenerativeModel, v, model, cfg: MlmcConfig = MlmcConfig()) -> np.ndarray:
    """One MLMC estimate for every (s, a) pair at once, shape (S, A).

    Draws the same law as :func:`estimate_sigma_mlmc` but samples empirical
    counts with multinomials instead of individual next states: the first
    draw, the remaining ``2^N' - 1`` odd draws and the ``2^N'`` even draws.
    """
    v = np.asarray(v, dtype=float)
    rows = gm._rows
    k, n_s = rows.shape
    rng = gm.rng
    level = cfg.draw_levels(rng, size=k)
    half = 2**level
    u = rng.random(k)
    first = (np.cumsum(rows, axis=1)[:, :-1] <= u[:, None]).sum(axis=1)
    first_row = _onehot(first, n_s)
    odd = first_row + rng.multinomial(half - 1, rows)
    even = rng.multinomial(half, rows)
    gm.n_samples += int(2 * half.sum())
    half_f = half[:, None].astype(float)
    batch = np.concatenate([first_row, (odd + even) / (2 * half_f), even / half_f, odd / half_f])
    sig = support_values(model, batch, v).reshape(4, k)
    est = sig[0] + (sig[1] - 0.5 * (sig[2] + sig[3])) / cfg.level_prob(level)
    return est.reshape(gm._cdf.shape[:2])


def contamination_all(gm: GenerativeModel, v, radius) -> np.ndarray:
    """One contamination estimate for every (s, a) pair, shape (S, A)."""
    v = np.asarray(v, dtype=float)
    nxt = gm.sample_all()
    return (1.0 - radius) * v[nxt] + radius * v.max()


def estimate_sigma_all(gm: GenerativeModel, v, model, cfg: MlmcConfig = MlmcConfig()) -> np.ndarray:
    """Sampled support estimates for all (s, a): one-sample for contamination,
    truncated MLMC for TV / Wasserstein."""
    if isinstance(model, Contamination):
        return contamination_all(gm, v, model.radius)
    return mlmc_all(gm, v, model, cfg)
