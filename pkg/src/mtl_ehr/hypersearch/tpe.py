"""A compact Tree-of-Parzen-Estimators suggester.

History is split at the ``gamma`` quantile of the objective (higher is
better). Each dimension gets a Gaussian kernel density on its transformed
axis (Scott bandwidth, floored at range / min(100, n + 1), plus one broad
prior kernel) or, for choices, smoothed category frequencies, for
the good and the bad group. Candidates are drawn from the good densities
and the one with the largest good/bad density ratio is returned.
"""
from __future__ import annotations

import math
import zlib

import numpy as np

from .space import Choice, LogNormal, SearchSpace, sample

GAMMA = 0.25
N_CANDIDATES = 24
MIN_HISTORY = 10


def _bandwidth(points, width):
    n = len(points)
    sd = float(np.std(points)) if n > 1 else 0.0
    bw = sd * n ** (-1.0 / 5.0)
    # floor keeps a small or collapsed set from becoming a spike
    return max(bw, width / min(100.0, n + 1.0), 1e-6)


class _Kde:
    """Gaussian kernels plus one broad prior component covering the range."""

    def __init__(self, points, lo, hi, prior_mu, prior_sd, width):
        self.points = np.asarray(points, dtype=np.float64)
        self.lo, self.hi = lo, hi
        self.prior_mu, self.prior_sd = prior_mu, prior_sd
        self.bw = _bandwidth(self.points, width)

    def _clip(self, u):
        return min(max(u, self.lo), self.hi)

    def draw(self, rng):
        k = rng.integers(len(self.points) + 1)
        c, sd = (self.prior_mu, self.prior_sd) if k == len(self.points) else (self.points[k], self.bw)
        for _ in range(64):
            u = rng.normal(c, sd)
            if self.lo <= u <= self.hi:
                return u
        return self._clip(c)

    def logpdf(self, u):
        z = (u - self.points) / self.bw
        kern = np.sum(np.exp(-0.5 * z * z)) / self.bw
        zp = (u - self.prior_mu) / self.prior_sd
        prior = math.exp(-0.5 * zp * zp) / self.prior_sd
        dens = (kern + prior) / ((len(self.points) + 1) * math.sqrt(2 * math.pi))
        return math.log(dens + 1e-300)


class _Cat:
    def __init__(self, indices, k):
        counts = np.bincount(np.asarray(indices, dtype=int), minlength=k) + 1.0
        self.p = counts / counts.sum()

    def draw(self, rng):
        return float(rng.choice(len(self.p), p=self.p))

    def logpdf(self, u):
        return math.log(self.p[int(u)])


def _density(dim, values):
    axis = [dim.to_axis(v) for v in values]
    if isinstance(dim, Choice):
        return _Cat(axis, len(dim.options))
    lo, hi = dim.bounds()
    if isinstance(dim, LogNormal):
        return _Kde(axis, lo, hi, dim.mu, dim.sigma, 4.0 * dim.sigma)
    return _Kde(axis, lo, hi, 0.5 * (lo + hi), hi - lo, hi - lo)


def split_history(history, gamma=GAMMA):
    """``(good, bad)`` trials: the top ``ceil(gamma * n)`` objectives are good."""
    done = sorted((t for t in history if t.ok), key=lambda t: -t.objective)
    n_good = max(1, int(math.ceil(gamma * len(done))))
    return done[:n_good], done[n_good:]


def tpe_suggest(history, space: SearchSpace, seed, gamma=GAMMA, n_candidates=N_CANDIDATES):
    """Next parameters to try. Falls back to ``sample`` on a thin or flat history."""
    done = [t for t in history if t.ok]
    objectives = [t.objective for t in done]
    if len(done) < MIN_HISTORY or max(objectives) == min(objectives):
        return sample(space, seed)
    good, bad = split_history(done, gamma)
    rng = np.random.default_rng([int(seed), zlib.crc32(b"tpe")])
    models = {}
    for name in space.names:
        dim = space.dims[name]
        models[name] = (_density(dim, [t.params[name] for t in good]),
                        _density(dim, [t.params[name] for t in bad]))
    best, best_score = None, -math.inf
    for _ in range(n_candidates):
        cand, score = {}, 0.0
        for name in space.names:
            lg, bg = models[name]
            u = lg.draw(rng)
            dim = space.dims[name]
            value = dim.from_axis(u)
            u = dim.to_axis(value)
            cand[name] = value
            score += lg.logpdf(u) - bg.logpdf(u)
        if score > best_score:
            best, best_score = cand, score
    return {**space.fixed, **best}
