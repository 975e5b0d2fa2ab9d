"""Traversal counting, grid covers, local excursion clocks and cover times.

The counting machinery is sampler-agnostic: hit events come either from the
planar walk-on-spheres mode (exact hitting order, no clock) or from the
spherical stepper (clocked).  Nested concentric circles reduce the hit
sequence to a nearest-neighbour walk on level indices, which is what the
state machines below consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import bm_sim, geometry as geo
from .errors import BudgetExceeded, DomainError, InvariantViolation

# ---------------------------------------------------------------------------
# Queries and samplers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraversalQuery:
    """Count traversals B(u,h(R)) -> B(u,h(r)) during n excursions
    B(x,h(r_tilde)) -> B(x,h(R_tilde)).  All radii are planar (pre-h)."""

    n: int
    outer_center: np.ndarray
    R_tilde: float
    r_tilde: float
    inner_center: np.ndarray
    R: float
    r: float

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("n must be >= 0")
        if not 0 < self.r < self.R < self.r_tilde < self.R_tilde:
            raise DomainError("need 0 < r < R < r_tilde < R_tilde")
        object.__setattr__(self, "outer_center", geo.as_sphere_point(self.outer_center))
        object.__setattr__(self, "inner_center", geo.as_sphere_point(self.inner_center))


class PlanarSampler:
    """Hit-order sampler in stereographic coordinates (walk on spheres)."""

    def __init__(self, rng: np.random.Generator, shell: float = 1e-7,
                 jump_budget: int = 10**6):
        self.rng = rng
        self.shell = shell
        self.jump_budget = jump_budget

    def next_level_radial(
        self, rho: np.ndarray, inner: np.ndarray, outer: np.ndarray
    ) -> np.ndarray:
        """Vectorized radial walk on spheres between concentric circles.

        Walkers at planar radius rho land on their inner (return 0) or outer
        (return 1) target circle; infinite outer targets (open top level) are
        allowed.  Only the radius matters by rotational symmetry: a jump of
        size s from radius rho lands at sqrt(rho^2 + s^2 + 2 rho s cos U).
        """
        rho = np.array(rho, dtype=float)
        inner = np.asarray(inner, dtype=float)
        outer = np.asarray(outer, dtype=float)
        out = np.full(len(rho), -1, dtype=np.int64)
        active = np.arange(len(rho))
        cap = 8.0 * np.nanmax(np.where(np.isfinite(outer), outer, inner * math.e**2))
        for _ in range(self.jump_budget):
            if not len(active):
                return out
            gi = rho - inner[active]
            go = outer[active] - rho
            hit_in = gi <= self.shell * inner[active]
            hit_out = go <= self.shell * np.where(
                np.isfinite(outer[active]), outer[active], 1.0
            )
            done = hit_in | hit_out
            if np.any(done):
                out[active[done]] = np.where(hit_in[done], 0, 1)
                active = active[~done]
                rho = rho[~done]
                gi, go = gi[~done], go[~done]
            if not len(active):
                return out
            s = np.minimum(np.minimum(gi, go), cap)
            u = self.rng.uniform(0.0, 2.0 * math.pi, size=len(rho))
            rho = np.sqrt(rho * rho + s * s + 2.0 * rho * s * np.cos(u))
        raise BudgetExceeded("radial walk on spheres exceeded its jump budget")

    def level_walk_step(self, levels: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """One move of the nested-circle level walk.

        Walkers sit on circle `levels[i]` of the concentric family `radii`
        (decreasing, level 0 outermost); returns the next distinct level,
        which is always adjacent.  Extreme levels move deterministically.
        """
        L = len(radii) - 1
        nxt = np.empty_like(levels)
        nxt[levels == 0] = 1
        nxt[levels == L] = L - 1
        mid = (levels > 0) & (levels < L)
        if np.any(mid):
            m = levels[mid]
            res = self.next_level_radial(
                radii[m], inner=radii[m + 1], outer=radii[m - 1]
            )
            nxt[mid] = np.where(res == 0, m + 1, m - 1)
        return nxt


class SphereSampler:
    """Hit-order sampler driven by the adaptive spherical stepper."""

    def __init__(self, rng: np.random.Generator, policy: bm_sim.StepPolicy | None = None):
        self.rng = rng
        self.policy = policy or bm_sim.StepPolicy()

    def level_walk_step(self, levels: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """Same contract as PlanarSampler.level_walk_step, on the sphere.

        `radii` are planar radii of circles about the south pole; walkers are
        regenerated at a uniform point of their current circle, which is
        exact for the level walk by rotational symmetry.
        """
        L = len(radii) - 1
        h = geo.h(radii)
        nxt = np.empty_like(levels)
        nxt[levels == 0] = 1
        nxt[levels == L] = L - 1
        mid_levels = np.unique(levels[(levels > 0) & (levels < L)])
        for m in mid_levels:
            sel = levels == m
            k = int(sel.sum())
            ang = self.rng.uniform(0.0, 2.0 * math.pi, size=k)
            starts = bm_sim.move_along_geodesic(
                np.tile(geo.SOUTH, (k, 1)),
                h[m] * np.cos(ang),
                h[m] * np.sin(ang),
            )
            circles = [
                geo.CircleSpec(center=geo.SOUTH, radius=h[m + 1]),
                geo.CircleSpec(center=geo.SOUTH, radius=h[m - 1]),
            ]
            ids, _, _ = bm_sim.batch_first_hit(starts, circles, self.policy, self.rng)
            nxt[sel] = np.where(ids == 0, m + 1, m - 1)
        return nxt


# ---------------------------------------------------------------------------
# Traversal counting
# ---------------------------------------------------------------------------


def traversal_process(
    schedule: geo.RadiusSchedule,
    n: int,
    sampler,
    trials: int = 1,
) -> np.ndarray:
    """Counts T_l, l = 1..L, of level-(l-1)->l traversals within the first n
    driving excursions (level 1 -> level 0), for `trials` independent paths.

    Returns an int array of shape (trials, L+1); column 0 mirrors column 1.
    T_1 = n by the driving convention: walks start on circle 1 and each
    completed 1->0 move ends one driving excursion.
    """
    L = schedule.L
    if L < 1:
        raise DomainError("schedule must have at least one level")
    counts = np.zeros((trials, L + 1), dtype=np.int64)
    levels = np.ones(trials, dtype=np.int64)
    driving = np.zeros(trials, dtype=np.int64)
    active = np.arange(trials)
    while True:
        active = active[driving[active] < n]
        if not len(active):
            break
        nxt = sampler.level_walk_step(levels[active], schedule.r)
        down = nxt > levels[active]
        if np.any(down):
            counts[active[down], nxt[down]] += 1
        up_done = (levels[active] == 1) & (nxt == 0)
        driving[active[up_done]] += 1
        levels[active] = nxt
    counts[:, 1] = n
    counts[:, 0] = n
    return counts


def count_traversals(query: TraversalQuery, sampler: PlanarSampler) -> int:
    """One sample of the traversal count of Definition-style queries with
    arbitrary centers, via planar walk on spheres over the four projected
    circles."""
    circles = [
        bm_sim.project_circle(geo.CircleSpec(query.outer_center, geo.h(query.R_tilde))),
        bm_sim.project_circle(geo.CircleSpec(query.outer_center, geo.h(query.r_tilde))),
        bm_sim.project_circle(geo.CircleSpec(query.inner_center, geo.h(query.R))),
        bm_sim.project_circle(geo.CircleSpec(query.inner_center, geo.h(query.r))),
    ]
    OUTER_BIG, OUTER_SMALL, INNER_BIG, INNER_SMALL = range(4)
    w = circles[OUTER_SMALL].center + np.array([circles[OUTER_SMALL].radius, 0.0])
    rng = sampler.rng
    driving = 0
    count = 0
    armed_u = False
    armed_x = True  # the walk starts on the r_tilde circle
    last = OUTER_SMALL
    events = 0
    outer = bm_sim.enclosing_circle(circles)
    while driving < query.n:
        sub = [c for j, c in enumerate(circles) if j != last]
        idmap = [j for j in range(4) if j != last]
        ids, pts = bm_sim.wos_first_hit(
            w[None, :], sub, rng, shell=sampler.shell, budget=sampler.jump_budget,
            outer=outer,
        )
        events += 1
        if events > sampler.jump_budget:
            raise BudgetExceeded("traversal query exceeded its event budget")
        hit = idmap[int(ids[0])]
        w = pts[0]
        if hit == INNER_BIG:
            armed_u = True
        elif hit == INNER_SMALL:
            if armed_u:
                count += 1
                armed_u = False
        elif hit == OUTER_SMALL:
            armed_x = True
        elif armed_x:  # OUTER_BIG completes one driving excursion
            driving += 1
            armed_x = False
        last = hit
    return count


# ---------------------------------------------------------------------------
# Grid covers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridCover:
    """Centers of a near-minimal cover of the sphere at one radii level."""

    level: int
    points: np.ndarray
    covering_radius: float


def measured_covering_radius(
    points: np.ndarray, n_probe: int = 100_000, rng: np.random.Generator | None = None
) -> float:
    """Empirical covering radius: max over probe points of the distance to
    the nearest grid point (probes include a fixed fine lattice)."""
    rng = rng or np.random.default_rng(0)
    probes = geo.fibonacci_sphere(n_probe)
    z = rng.normal(size=(n_probe // 4, 3))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    probes = np.vstack([probes, geo.CENTER + z])
    tree = cKDTree(points - geo.CENTER)
    chord, _ = tree.query(probes - geo.CENTER, k=1)
    return float(2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0)).max())


def cover_points_for_radius(target: float) -> np.ndarray:
    """Fibonacci lattice sized so its covering radius is below `target`.

    The golden-angle lattice covers within about 2.67/sqrt(n) across scales
    (measured); 2.8 leaves head-room.  Small lattices are additionally
    verified against a probe sample and grown until they comply.
    """
    if target <= 0:
        raise DomainError("covering radius must be positive")
    if target >= math.pi:
        return geo.fibonacci_sphere(1)
    n = max(4, int(np.ceil((2.8 / target) ** 2)))
    pts = geo.fibonacci_sphere(n)
    while n <= 20_000 and measured_covering_radius(pts, n_probe=40 * n) > target:
        n = int(n * 1.3) + 1
        pts = geo.fibonacci_sphere(n)
    return pts


def build_grid_cover(
    l: int,
    schedule: geo.RadiusSchedule,
    density_factor: float = 10.0,
    verify: bool = False,
) -> GridCover:
    """Nested cover at level l with covering radius <= h_l / density_factor.

    Levels nest by construction: the level-l cover is the union of all
    coarser-level lattices with a fresh lattice sized for level l.  The
    source analysis uses density factor 1000; 10 is the simulation default
    and 1000 remains available through this parameter.
    """
    if not 0 <= l <= schedule.L:
        raise DomainError("level out of range")
    pts = [cover_points_for_radius(float(schedule.h[m]) / density_factor) for m in range(l + 1)]
    points = np.unique(np.vstack(pts), axis=0)
    target = float(schedule.h[l]) / density_factor
    radius = measured_covering_radius(points) if verify else target
    if verify and radius > target:
        raise InvariantViolation(
            f"measured covering radius {radius:.3e} exceeds target {target:.3e}"
        )
    return GridCover(level=l, points=points, covering_radius=radius)


class LatBandIndex:
    """Latitude-banded index over the currently uncovered grid points.

    Bands partition the polar angle; within each band points are sorted by
    azimuth, so a radius query scans only the azimuth window that can
    possibly be inside the radius, then filters exactly.
    """

    def __init__(self, points: np.ndarray, n_bands: int | None = None):
        self.points = np.asarray(points, dtype=float)
        v = self.points - geo.CENTER
        self.polar = np.arccos(np.clip(v[:, 2], -1.0, 1.0))
        self.azim = np.mod(np.arctan2(v[:, 1], v[:, 0]), 2.0 * math.pi)
        n = len(points)
        self.n_bands = n_bands or max(1, int(math.sqrt(n / 2)))
        self.band_of = np.minimum(
            (self.polar / math.pi * self.n_bands).astype(int), self.n_bands - 1
        )
        order = np.lexsort((self.azim, self.band_of))
        self.order = order
        self.band_sorted = self.band_of[order]
        self.azim_sorted = self.azim[order]
        self.band_start = np.searchsorted(self.band_sorted, np.arange(self.n_bands + 1))
        self.alive = np.ones(n, dtype=bool)

    def mark_covered(self, ids: np.ndarray) -> None:
        self.alive[ids] = False

    def query(self, point, radius: float) -> np.ndarray:
        """Ids of uncovered points within geodesic `radius` of `point`."""
        v = np.asarray(point, dtype=float) - geo.CENTER
        pol = math.acos(max(-1.0, min(1.0, v[2])))
        az = math.atan2(v[1], v[0]) % (2.0 * math.pi)
        b_lo = max(0, int((pol - radius) / math.pi * self.n_bands))
        b_hi = min(self.n_bands - 1, int((pol + radius) / math.pi * self.n_bands))
        hits = []
        for b in range(b_lo, b_hi + 1):
            s, e = self.band_start[b], self.band_start[b + 1]
            if s == e:
                continue
            # widest azimuth offset at which this band can still be in range:
            # haversine gives sin^2(dlam/2) <= sin^2(r/2)/(sin th1 sin th2)
            sin_min = min(
                math.sin(b * math.pi / self.n_bands),
                math.sin((b + 1) * math.pi / self.n_bands),
            )
            denom = math.sin(pol) * sin_min
            if denom <= 1e-12 or math.sin(radius / 2.0) ** 2 >= denom:
                cand = self.order[s:e]
            else:
                half = min(
                    math.pi,
                    2.0 * math.asin(math.sin(radius / 2.0) / math.sqrt(denom)),
                )
                lo, hi = az - half, az + half
                seg = self.azim_sorted[s:e]
                if hi - lo >= 2.0 * math.pi:
                    cand = self.order[s:e]
                else:
                    lo_m, hi_m = lo % (2.0 * math.pi), hi % (2.0 * math.pi)
                    if lo_m <= hi_m:
                        i0, i1 = np.searchsorted(seg, [lo_m, hi_m])
                        cand = self.order[s:e][i0:i1]
                    else:
                        i1 = np.searchsorted(seg, hi_m)
                        i0 = np.searchsorted(seg, lo_m)
                        cand = np.r_[self.order[s:e][:i1], self.order[s:e][i0:]]
            if len(cand):
                cand = cand[self.alive[cand]]
            if len(cand):
                d = geo.sphere_distance(np.asarray(point, dtype=float), self.points[cand])
                hits.append(cand[d <= radius])
        return np.sort(np.concatenate(hits)) if hits else np.array([], dtype=int)


@dataclass
class CoverState:
    """Coverage bookkeeping for one trajectory over one grid."""

    grid: GridCover
    covered: np.ndarray = field(init=False)
    uncovered_count: int = field(init=False)
    index: LatBandIndex = field(init=False)

    def __post_init__(self):
        n = len(self.grid.points)
        self.covered = np.zeros(n, dtype=bool)
        self.uncovered_count = n
        self.index = LatBandIndex(self.grid.points)

    def mark(self, ids: np.ndarray) -> None:
        fresh = np.unique(ids[~self.covered[ids]])
        self.covered[fresh] = True
        self.uncovered_count -= len(fresh)
        self.index.mark_covered(fresh)


# ---------------------------------------------------------------------------
# Cover times
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverConfig:
    """Discretization knobs for cover-time runs.

    step_fraction: skeleton step length as a fraction of eps; grid_fraction:
    grid covering radius as a fraction of eps; chunk: steps per vectorized
    chunk; budget: step cap per trajectory.
    """

    step_fraction: float = 1.0 / 3.0
    grid_fraction: float = 1.0 / 5.0
    chunk: int = 250_000
    budget: int = 400_000_000


@dataclass(frozen=True)
class CoverResult:
    eps: float
    c_lower: float
    c_upper: float
    grid_size: int
    covering_radius: float
    steps: int
    dt: float


def _cover_targets(eps: float, config: CoverConfig):
    grid_pts = cover_points_for_radius(eps * config.grid_fraction)
    delta = eps * config.grid_fraction
    r_lo = eps + delta  # easier radius, first-cover time bounds C* from below
    r_hi = max(eps - delta, 1e-9)  # harder radius, bounds C* from above
    return grid_pts, delta, r_lo, r_hi


def cover_times_multi(
    eps_list,
    rng: np.random.Generator,
    config: CoverConfig = CoverConfig(),
    start=None,
) -> list[CoverResult]:
    """Sandwich cover times for several eps measured on one trajectory.

    For each eps the grid has covering radius delta = eps*grid_fraction and
    the result brackets the skeleton cover time: C_lower uses first cover at
    radius eps+delta (recorded at chunk starts), C_upper at radius eps-delta
    (recorded at chunk ends), so C_lower <= C_skeleton_eps <= C_upper.
    The skeleton step is sized off the smallest eps.
    """
    eps_list = sorted(float(e) for e in np.atleast_1d(eps_list))
    if not eps_list or eps_list[0] <= 0:
        raise DomainError("eps values must be positive")
    eps_min = eps_list[0]
    dt = (eps_min * config.step_fraction) ** 2 / 2.0
    start = geo.SOUTH if start is None else np.asarray(start, dtype=float)
    chunker = bm_sim.PathChunker(start, dt, rng)

    class _PerEps:
        def __init__(self, eps):
            self.eps = eps
            pts, self.delta, self.r_lo, self.r_hi = _cover_targets(eps, config)
            self.vecs = pts - geo.CENTER
            n = len(pts)
            self.t_lo = np.full(n, -1, dtype=np.int64)
            self.t_hi = np.full(n, -1, dtype=np.int64)
            self.open_lo = np.arange(n)
            self.open_hi = np.arange(n)

        def chord(self, radius):
            return 2.0 * math.sin(min(radius, math.pi) / 2.0)

        def scan(self, tree, lo_step, hi_step):
            if len(self.open_lo):
                d, _ = tree.query(
                    self.vecs[self.open_lo], k=1,
                    distance_upper_bound=self.chord(self.r_lo) + 1e-12,
                )
                got = np.isfinite(d)
                self.t_lo[self.open_lo[got]] = lo_step
                self.open_lo = self.open_lo[~got]
            if len(self.open_hi):
                d, _ = tree.query(
                    self.vecs[self.open_hi], k=1,
                    distance_upper_bound=self.chord(self.r_hi) + 1e-12,
                )
                got = np.isfinite(d)
                self.t_hi[self.open_hi[got]] = hi_step
                self.open_hi = self.open_hi[~got]

        @property
        def done(self):
            return len(self.open_hi) == 0 and len(self.open_lo) == 0

    states = [_PerEps(e) for e in eps_list]
    # step 0: the start position counts as a zero-time mini chunk
    tree0 = cKDTree((np.asarray(start, dtype=float) - geo.CENTER)[None, :])
    for st in states:
        st.scan(tree0, 0, 0)
    step = 0
    while not all(st.done for st in states):
        if step >= config.budget:
            raise BudgetExceeded(
                f"cover-time trajectory exceeded {config.budget} steps"
            )
        k = min(config.chunk, config.budget - step)
        pos = chunker.next_chunk(k)
        tree = cKDTree(pos - geo.CENTER)
        for st in states:
            if not st.done:
                st.scan(tree, lo_step=step + 1, hi_step=step + k)
        step += k
    out = []
    for st in states:
        out.append(
            CoverResult(
                eps=st.eps,
                c_lower=float(st.t_lo.max()) * dt,
                c_upper=float(st.t_hi.max()) * dt,
                grid_size=len(st.vecs),
                covering_radius=st.delta,
                steps=step,
                dt=dt,
            )
        )
    return out


def cover_time(
    eps: float,
    rng: np.random.Generator,
    config: CoverConfig = CoverConfig(),
    start=None,
) -> CoverResult:
    """Sandwich [C_lower, C_upper] for one eps on a fresh trajectory."""
    return cover_times_multi([eps], rng, config=config, start=start)[0]


# ---------------------------------------------------------------------------
# Local excursion counts and clocks
# ---------------------------------------------------------------------------


def local_excursion_cover(
    schedule: geo.RadiusSchedule,
    grid_points: np.ndarray,
    rng: np.random.Generator,
    shell: float = 1e-9,
    event_budget: int = 2_000_000,
    start=None,
) -> np.ndarray:
    """t*_{x,L} for every grid point x on one planar-mode trajectory.

    For a walk not already inside B(x, h_L), t*_{x,L} is one more than the
    number of completed driving excursions around x (circle 1 -> circle 0)
    when B(x, h_L) is first entered, i.e. the smallest n with T_L^{x,n} > 0;
    a start already inside scores zero.  The supremum over the grid is the
    local-excursion cover count t*_L.
    """
    grid_points = np.atleast_2d(grid_points)
    G = len(grid_points)
    L = schedule.L
    circles = []
    meta = []  # (point index, role): roles 0=r1, 1=r0, 2=rL
    for i, x in enumerate(grid_points):
        for role, rad in ((0, schedule.h[1]), (1, schedule.h[0]), (2, schedule.h[L])):
            circles.append(bm_sim.project_circle(geo.CircleSpec(x, float(rad))))
            meta.append((i, role))
    armed = np.zeros(G, dtype=bool)
    driving = np.zeros(G, dtype=np.int64)
    tstar = np.full(G, -1, dtype=np.int64)
    if start is None:
        # start on the level-1 circle of the first point, which arms it
        w = circles[0].center + np.array([circles[0].radius, 0.0])
        armed[0] = True
        last = 0
    else:
        w = np.asarray(geo.stereo_project(geo.as_sphere_point(start)), dtype=float)
        for i, x in enumerate(grid_points):
            if geo.sphere_distance(x, start) < schedule.h[L]:
                tstar[i] = 0
        last = -1
    outer = bm_sim.enclosing_circle(circles)
    for _ in range(event_budget):
        if np.all(tstar >= 0):
            return tstar
        sub = [c for j, c in enumerate(circles) if j != last]
        idmap = [j for j in range(len(circles)) if j != last]
        ids, pts = bm_sim.wos_first_hit(w[None, :], sub, rng, shell=shell, outer=outer)
        hit = idmap[int(ids[0])]
        w = pts[0]
        i, role = meta[hit]
        if role == 0:
            armed[i] = True
        elif role == 1:
            if armed[i]:
                driving[i] += 1
                armed[i] = False
        elif tstar[i] < 0:
            tstar[i] = driving[i] + 1
        last = hit
    raise BudgetExceeded("local excursion cover exceeded its event budget")


def tau_x(
    m: int,
    x,
    schedule: geo.RadiusSchedule,
    dt: float,
    rng: np.random.Generator,
    chunk: int = 200_000,
    max_steps: int = 2 * 10**9,
) -> float:
    """Clock reading at the m-th completed excursion from the level-1 circle
    to the level-0 circle around x (spherical sampler, bridge-corrected)."""
    if m == 0:
        return 0.0
    h1, h0 = float(schedule.h[1]), float(schedule.h[0])
    start = bm_sim.move_along_geodesic(np.asarray(geo.as_sphere_point(x)), h1, 0.0)
    chunker = bm_sim.PathChunker(start, dt, rng)
    tracker = bm_sim.LevelCrossingTracker(x, h1, h0, dt, rng)
    while len(tracker.completions) < m:
        if chunker.steps_done > max_steps:
            raise BudgetExceeded("tau_x exceeded its step budget")
        tracker.process(chunker.next_chunk(chunk))
    return tracker.completions[m - 1] * dt


def multi_center_tau(
    centers: np.ndarray,
    inner: float,
    outer: float,
    m: int,
    dt: float,
    rng: np.random.Generator,
    chunk: int = 200_000,
    max_steps: int = 10**9,
    start=None,
) -> np.ndarray:
    """tau_x(m) for every center x on one shared trajectory.

    Distances to all centers are evaluated chunk-wise on the uniform-step
    skeleton; each center runs its own bridge-corrected excursion tracker.
    """
    centers = np.atleast_2d(centers)
    start = centers[0] if start is None else start
    start = bm_sim.move_along_geodesic(np.asarray(geo.as_sphere_point(start)), inner, 0.0)
    chunker = bm_sim.PathChunker(start, dt, rng)
    trackers = [
        bm_sim.LevelCrossingTracker(c, inner, outer, dt, rng) for c in centers
    ]
    cvecs = centers - geo.CENTER
    while any(len(t.completions) < m for t in trackers):
        if chunker.steps_done > max_steps:
            raise BudgetExceeded("multi_center_tau exceeded its step budget")
        pos = chunker.next_chunk(chunk)
        dots = np.clip((pos - geo.CENTER) @ cvecs.T, -1.0, 1.0)
        dists = np.arccos(dots)
        for i, t in enumerate(trackers):
            t.process_distances(dists[:, i])
    return np.array([t.completions[m - 1] * dt for t in trackers])
