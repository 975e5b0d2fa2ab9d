"""Critical Galton-Watson process with geometric offspring.

Offspring law P(k) = 2^{-(k+1)} on {0, 1, 2, ...} (mean one, pgf 1/(2-s)).
This is the exact law of nested traversal counts between circles with unit
log-gaps, which is why everything here doubles as an oracle for the path
samplers.

The exact machinery works on truncated probability vectors (`CountDist`) and
tracks the truncated tail mass explicitly; one generation is a negative
binomial mixture computed by blocked matrix-vector products with log-space
row construction, so it stays stable for initial counts in the thousands.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .errors import DomainError, TruncationOverflow

LOG2 = np.log(2.0)


def offspring_pmf(k):
    """P(offspring = k) = 2^{-(k+1)} for k >= 0."""
    k = np.asarray(k)
    if np.any(k < 0):
        raise DomainError("offspring count must be >= 0")
    out = np.exp(-(np.asarray(k, dtype=float) + 1.0) * LOG2)
    return float(out) if out.ndim == 0 else out


def offspring_pgf(s):
    """f(s) = 1/(2 - s), the generating function of the offspring law."""
    return 1.0 / (2.0 - np.asarray(s, dtype=float))


def extinction_prob(n: int, l: int) -> float:
    """P(generation l is empty | generation 0 has n individuals) = (l/(l+1))^n.

    The l-fold iterate of the pgf at 0 is l/(l+1).  In the traversal-count
    indexing where the top count sits at level 1, extinction of level L given
    t driving excursions is extinction_prob(t, L-1) = (1 - 1/L)^t.
    """
    if n < 0 or l < 1:
        raise DomainError("need n >= 0 and l >= 1")
    return (l / (l + 1.0)) ** n


def nb_transition(p: np.ndarray, block: int = 1024) -> np.ndarray:
    """Apply one offspring generation to a (possibly sub-probability) vector.

    q[k] = p[0]*1{k=0} + sum_{n>=1} p[n] * NB(k; n, 1/2) truncated to len(p):
    the exact generation step of the chain.  Rows NB(.; n) are built in log
    space, log NB(k; n) = log C(n+k-1, k) - (n+k) log 2, from a factorial
    table, in blocks of `block` parent counts.  Each block only evaluates the
    k-window n +/- 45 sqrt(n); outside it the row mass is below the float64
    underflow threshold, so the banding is exact.
    """
    p = np.asarray(p, dtype=float)
    size = len(p)
    out = np.zeros(size)
    out[0] = p[0]  # extinction is absorbing
    lf = np.zeros(2 * size + 2)
    np.cumsum(np.log(np.arange(1, 2 * size + 2)), out=lf[1:])
    karr = np.arange(size)
    # parents carrying less than 1e-40 of the peak mass cannot move any
    # output entry by more than ~1e-36 absolute, far below every read in use
    floor = 1e-40 * float(p.max())
    nz = np.nonzero(p[1:] > floor)[0] + 1
    for start in range(0, len(nz), block):
        ns = nz[start : start + block]
        klo = max(0, int(ns[0] - 45.0 * math.sqrt(ns[0]) - 32.0))
        khi = min(size, int(ns[-1] + 45.0 * math.sqrt(ns[-1]) + 32.0) + 1)
        ks = karr[klo:khi]
        logrow = (
            lf[ns[:, None] + ks[None, :] - 1]
            - lf[ks][None, :]
            - lf[ns - 1][:, None]
            - (ns[:, None] + ks[None, :]).astype(float) * LOG2
        )
        out[klo:khi] += p[ns] @ np.exp(logrow)
    return out


@dataclass
class CountDist:
    """Truncated distribution over counts 0..len(probs)-1 plus lost tail mass."""

    probs: np.ndarray
    lost_mass: float = 0.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if np.any(self.probs < -1e-15):
            raise DomainError("probabilities must be nonnegative")
        total = float(self.probs.sum()) + self.lost_mass
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"mass must sum to one, got {total}")

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def mean(self) -> float:
        return float(np.arange(len(self.probs)) @ self.probs)

    @classmethod
    def point_mass(cls, n: int, n_max: int | None = None) -> "CountDist":
        size = (n if n_max is None else n_max) + 1
        if n >= size:
            raise DomainError("point mass outside truncation range")
        p = np.zeros(size)
        p[n] = 1.0
        return cls(p)


def default_n_max(n: int, generations: int) -> int:
    """Truncation size keeping the lost mass of a `generations`-step evolution
    below ~1e-12 when started from n (40 sigma of the sqrt-scale spread)."""
    if n == 0:
        return 1
    return int(max(8 * n, n + 40.0 * np.sqrt(max(n, 1) * max(generations, 1)), 64))


def gw_step_exact(dist: CountDist, lost_mass_bound: float = 1e-6) -> CountDist:
    """One exact generation of the chain, with tracked truncation loss."""
    out = nb_transition(dist.probs)
    new_lost = dist.lost_mass + max(0.0, 1.0 - dist.lost_mass - float(out.sum()))
    if new_lost > lost_mass_bound:
        raise TruncationOverflow(
            f"lost mass {new_lost:.3e} exceeds bound {lost_mass_bound:.3e}; "
            "increase the truncation size"
        )
    return CountDist(out, lost_mass=new_lost)


def generation_dist(
    n: int,
    l: int,
    n_max: int | None = None,
    lost_mass_bound: float = 1e-6,
) -> CountDist:
    """Exact distribution of generation l started from n individuals."""
    if n < 0 or l < 0:
        raise DomainError("need n >= 0 and l >= 0")
    size = default_n_max(n, max(l, 1)) if n_max is None else n_max
    dist = CountDist.point_mass(n, n_max=size)
    for _ in range(l):
        dist = gw_step_exact(dist, lost_mass_bound=lost_mass_bound)
    return dist


def deviation_tail(n: int, l: int, theta: float) -> float:
    """Exact P(|sqrt(2 T_l) - sqrt(2 n)| >= theta) under the GW law from n.

    The Gaussian-type bound c*exp(-theta^2/(2l)) dominates this tail with a
    single modest constant; the exact value comes from the truncated DP.
    """
    if n < 1 or l < 1 or theta < 0:
        raise DomainError("need n >= 1, l >= 1, theta >= 0")
    dist = generation_dist(n, l, lost_mass_bound=1e-10)
    dev = np.abs(np.sqrt(2.0 * np.arange(len(dist.probs))) - np.sqrt(2.0 * n))
    return float(dist.probs[dev >= theta].sum()) + dist.lost_mass


@dataclass(frozen=True)
class GWPath:
    """One sampled trajectory of generation sizes T_0..T_L (extinction absorbing)."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        dead = c[:-1] == 0
        if np.any(c[1:][dead] != 0):
            raise DomainError("extinction must be absorbing")


def sample_gw_path(n: int, L: int, rng: np.random.Generator) -> GWPath:
    """Exact sampling of T_0..T_L from n: each generation is a sum of
    geometric(1/2) offspring (numpy's geometric is on {1,2,...}, shift by 1)."""
    if n < 0 or L < 0:
        raise DomainError("need n >= 0 and L >= 0")
    counts = np.empty(L + 1, dtype=np.int64)
    counts[0] = n
    cur = int(n)
    for l in range(1, L + 1):
        if cur == 0:
            counts[l:] = 0
            return GWPath(counts)
        cur = int(rng.geometric(0.5, size=cur).sum()) - cur
        counts[l] = cur
    return GWPath(counts)


def sample_generation_sizes(
    n0: np.ndarray | int, L: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized path sampling: rows are trials, columns generations 0..L."""
    n0 = np.atleast_1d(np.asarray(n0, dtype=np.int64))
    paths = np.empty((len(n0), L + 1), dtype=np.int64)
    paths[:, 0] = n0
    cur = n0.copy()
    for l in range(1, L + 1):
        alive = np.nonzero(cur)[0]
        nxt = np.zeros_like(cur)
        if len(alive):
            sizes = cur[alive]
            draws = rng.geometric(0.5, size=int(sizes.sum())) - 1
            starts = np.r_[0, np.cumsum(sizes)[:-1]]
            nxt[alive] = np.add.reduceat(draws, starts)
        cur = nxt
        paths[:, l] = cur
        if not cur.any():
            paths[:, l + 1 :] = 0
            break
    return paths
