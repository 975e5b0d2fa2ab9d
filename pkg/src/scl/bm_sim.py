"""Samplers for Brownian motion on the sphere (generator Delta/2).

Three engines, each matched to what it must get right:

* adaptive stepping with bisection landing (`run_until_hit`) -- accurate hit
  *positions*; step size min(dt_max, (gap/refine)^2) so overshooting a
  monitored circle inside one step is exponentially unlikely;
* uniform-step path chunks with Brownian-bridge touch coupons
  (`PathChunker` + `LevelCrossingTracker`) -- accurate hit *clocks* for
  excursion timing at a cost independent of how close the path idles to a
  circle.  Between consecutive skeleton points with signed level gaps g0, g1
  of equal sign, the continuous radial path still touched the level with
  probability exp(-2 g0 g1 / dt), which is sampled as a coupon;
* planar walk-on-spheres (`wos_first_hit`) -- exact-in-law hitting order and
  exit angles with no clock, used wherever the spec only needs order
  statistics (hitting probabilities are conformally invariant).

Uniform-step skeletons are generated by composing per-step rotations with a
parallel prefix scan over quaternions; the chain law is identical to
sequential geodesic Euler steps because each step is a great-circle move of
length |N(0, dt I_2)| in a uniformly random tangent direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from .errors import BudgetExceeded, DomainError

# ---------------------------------------------------------------------------
# Policies and event records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepPolicy:
    """Controls for the adaptive stepper.

    dt_max: base step; refine_factor: near-boundary divisor; shell: hit
    tolerance as a fraction of the smallest monitored radius; budget: hard
    cap on steps per trial (exceeding it raises, never truncates silently).
    """

    dt_max: float = 1e-3
    refine_factor: float = 5.0
    shell: float = 1e-3
    budget: int = 10**9

    def __post_init__(self):
        if self.dt_max <= 0:
            raise DomainError("dt_max must be positive")
        if self.refine_factor < 2:
            raise DomainError("refine_factor must be >= 2")
        if not 0 < self.shell <= 0.1:
            raise DomainError("shell must lie in (0, 0.1]")


@dataclass
class WalkerState:
    """One walker: position on the sphere, elapsed clock, private stream."""

    position: np.ndarray
    rng: np.random.Generator
    clock: float = 0.0

    def __post_init__(self):
        self.position = geo.as_sphere_point(self.position)


@dataclass(frozen=True)
class HitEvent:
    circle_id: int
    point: np.ndarray
    time: float


# ---------------------------------------------------------------------------
# Elementary geodesic stepping
# ---------------------------------------------------------------------------


def _tangent_basis(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the tangent plane at unit displacement(s) v."""
    v = np.atleast_2d(v)
    helper = np.zeros_like(v)
    helper[np.arange(len(v)), np.argmin(np.abs(v), axis=1)] = 1.0
    e1 = np.cross(v, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(v, e1)
    return e1, e2


def move_along_geodesic(positions: np.ndarray, xi1, xi2) -> np.ndarray:
    """Exponential-map move by the tangent vector with coordinates (xi1, xi2)."""
    p = np.atleast_2d(positions)
    v = p - geo.CENTER
    e1, e2 = _tangent_basis(v)
    xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    theta = np.hypot(xi1, xi2)
    small = theta < 1e-300
    theta_safe = np.where(small, 1.0, theta)
    u = (e1 * xi1[:, None] + e2 * xi2[:, None]) / theta_safe[:, None]
    v_new = np.cos(theta)[:, None] * v + np.sin(theta)[:, None] * u
    v_new = np.where(small[:, None], v, v_new)
    out = geo.CENTER + v_new / np.linalg.norm(v_new, axis=1, keepdims=True)
    return out[0] if np.asarray(positions).ndim == 1 else out


def geodesic_step(state: WalkerState, dt: float) -> WalkerState:
    """One Brownian step: tangent Gaussian with covariance dt*I_2, moved along
    the geodesic, clock advanced by dt.  E|step|^2 = 2 dt (generator Delta/2)."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    xi = state.rng.normal(0.0, math.sqrt(dt), size=2)
    pos = move_along_geodesic(state.position, xi[0], xi[1])
    return replace(state, position=pos, clock=state.clock + dt)


# ---------------------------------------------------------------------------
# Uniform-step skeletons via quaternion prefix scan
# ---------------------------------------------------------------------------


def _quat_multiply_into(a: np.ndarray, b: np.ndarray, out: np.ndarray) -> None:
    """out = a*b (Hamilton product); `out` must not alias a or b."""
    w1, x1, y1, z1 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    w2, x2, y2, z2 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    out[..., 0] = w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2
    out[..., 1] = w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2
    out[..., 2] = w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2
    out[..., 3] = w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2


def _quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    _quat_multiply_into(a, b, out)
    return out


def _quat_prefix_scan(q: np.ndarray) -> np.ndarray:
    """Inclusive prefix products q_1, q_1*q_2, ... along axis 0 (in place)."""
    n = len(q)
    d = 1
    scratch = np.empty_like(q)
    while d < n:
        out = scratch[d:]
        _quat_multiply_into(q[:-d], q[d:], out)
        q[d:] = out
        d *= 2
    return q


def _quat_from_start(v0: np.ndarray) -> np.ndarray:
    """A unit quaternion whose rotation takes e_z to the unit vector v0."""
    ez = np.array([0.0, 0.0, 1.0])
    c = float(np.dot(ez, v0))
    if c > 1.0 - 1e-14:
        return np.array([1.0, 0.0, 0.0, 0.0])
    if c < -1.0 + 1e-14:
        return np.array([0.0, 1.0, 0.0, 0.0])  # pi about x-axis
    axis = np.cross(ez, v0)
    axis /= np.linalg.norm(axis)
    half = 0.5 * math.acos(max(-1.0, min(1.0, c)))
    return np.array([math.cos(half), *(math.sin(half) * axis)])


class PathChunker:
    """Generates a single uniform-dt Brownian skeleton in vectorized chunks.

    Successive calls to next_chunk(K) return the next K positions (shape
    (K, 3)); `last_position` carries the state across chunks and the clock is
    step_count * dt.  Identical in law to K sequential geodesic_step calls.
    """

    def __init__(self, start, dt: float, rng: np.random.Generator):
        if dt <= 0:
            raise DomainError("dt must be positive")
        self.dt = float(dt)
        self.rng = rng
        self.last_position = geo.as_sphere_point(np.asarray(start, dtype=float))
        self._q = _quat_from_start(self.last_position - geo.CENTER)
        self.steps_done = 0

    def next_chunk(self, k: int) -> np.ndarray:
        xi = self.rng.normal(0.0, math.sqrt(self.dt), size=(k, 2))
        theta = np.hypot(xi[:, 0], xi[:, 1])
        azim = np.arctan2(xi[:, 1], xi[:, 0])
        half = 0.5 * theta
        sin_half = np.sin(half)
        dq = np.empty((k, 4))
        dq[:, 0] = np.cos(half)
        dq[:, 1] = sin_half * np.cos(azim)
        dq[:, 2] = sin_half * np.sin(azim)
        dq[:, 3] = 0.0
        q = _quat_prefix_scan(dq)
        q = _quat_multiply(self._q[None, :], q)
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
        v = np.empty((k, 3))
        v[:, 0] = 2.0 * (x * z + w * y)
        v[:, 1] = 2.0 * (y * z - w * x)
        v[:, 2] = 1.0 - 2.0 * (x * x + y * y)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        self._q = q[-1]
        self.last_position = geo.CENTER + v[-1]
        self.steps_done += k
        return geo.CENTER + v


class LevelCrossingTracker:
    """Counts touches of two radial levels around one center on a skeleton.

    Levels are geodesic radii inner < outer.  Deterministic sign changes of
    d(X, center) - level are always touches; same-sign steps touch with the
    Brownian-bridge probability exp(-2 g0 g1/dt).  The tracker maintains the
    excursion state (armed after an inner touch) across chunks and records
    the step index of every completed inner->outer excursion.
    """

    def __init__(self, center, inner: float, outer: float, dt: float,
                 rng: np.random.Generator):
        if not 0 < inner < outer < math.pi:
            raise DomainError("need 0 < inner < outer < pi")
        self.center = geo.as_sphere_point(center)
        self.inner = float(inner)
        self.outer = float(outer)
        self.dt = float(dt)
        self.rng = rng
        self.armed = False
        self.completions: list[int] = []
        self.inner_touches: list[int] = []
        self._prev_dist: float | None = None
        self._offset = 0

    def _touch_steps(self, d: np.ndarray, level: float) -> np.ndarray:
        g = d - level
        g0, g1 = g[:-1], g[1:]
        prod = g0 * g1
        touched = prod <= 0.0
        same = ~touched
        if np.any(same):
            # only steps that came near the level can realistically dip
            near = same & (prod < (20.0 * self.dt))
            idx = np.nonzero(near)[0]
            if len(idx):
                p = np.exp(-2.0 * prod[idx] / self.dt)
                dip = self.rng.random(len(idx)) < p
                touched[idx[dip]] = True
        return np.nonzero(touched)[0] + 1  # index of the step's endpoint

    def process(self, positions: np.ndarray) -> None:
        self.process_distances(geo.sphere_distance(self.center, positions))

    def process_distances(self, d_new: np.ndarray) -> None:
        if self._prev_dist is None:
            self._prev_dist = float(d_new[0])
            d = d_new
            base = self._offset
        else:
            d = np.r_[self._prev_dist, d_new]
            base = self._offset - 1
        ti = self._touch_steps(d, self.inner)
        to = self._touch_steps(d, self.outer)
        events = np.r_[ti, to]
        kinds = np.r_[np.zeros(len(ti), dtype=np.int8), np.ones(len(to), dtype=np.int8)]
        order = np.argsort(events, kind="stable")
        events, kinds = events[order], kinds[order]
        # state-machine scan, vectorized: a virtual leading event encodes the
        # carried armed flag; repeats (0,0) or (1,1) are no-ops, so fresh
        # armings are 0-events preceded by a 1 and completions 1-events
        # preceded by a 0.
        prev = np.r_[np.int8(0 if self.armed else 1), kinds[:-1]]
        fresh = (kinds == 0) & (prev == 1)
        done = (kinds == 1) & (prev == 0)
        self.inner_touches.extend((base + events[fresh]).tolist())
        self.completions.extend((base + events[done]).tolist())
        if len(kinds):
            self.armed = bool(kinds[-1] == 0)
        self._prev_dist = float(d_new[-1])
        self._offset += len(d_new)


def excursion_durations(
    x,
    inner: float,
    outer: float,
    n_excursions: int,
    dt: float,
    rng: np.random.Generator,
    chunk: int = 200_000,
    max_steps: int = 2 * 10**9,
) -> np.ndarray:
    """Clocked durations of n complete inner->outer->inner commute cycles
    around x, all read off one long trajectory (cycle durations are iid by
    rotational symmetry and the strong Markov property).

    Returns an array of n durations (time units of the Delta/2 diffusion).
    """
    start = move_along_geodesic(
        np.asarray(geo.as_sphere_point(x)), outer, 0.0
    )  # start on the outer circle
    chunker = PathChunker(start, dt, rng)
    tracker = LevelCrossingTracker(x, inner, outer, dt, rng)
    while len(tracker.completions) < n_excursions + 1:
        if chunker.steps_done > max_steps:
            raise BudgetExceeded("excursion sampling exceeded its step budget")
        tracker.process(chunker.next_chunk(chunk))
    comp = np.asarray(tracker.completions[: n_excursions + 1], dtype=float)
    return np.diff(comp) * dt


def leg_durations(
    x,
    inner: float,
    outer: float,
    n_pairs: int,
    dt: float,
    rng: np.random.Generator,
    chunk: int = 200_000,
    max_steps: int = 2 * 10**9,
) -> tuple[np.ndarray, np.ndarray]:
    """(outward, inward) leg durations of n_pairs commute cycles around x.

    Fresh armings A_i (first inner touch after an outer touch) and
    completions C_i alternate as A_1 < C_1 < A_2 < C_2 < ...; the outward leg
    C_i - A_i is a sample of the inner->outer hitting time from a point of
    the inner circle, the inward leg A_{i+1} - C_i of the outer->inner time.
    The first cycle is dropped (start transient).
    """
    start = move_along_geodesic(np.asarray(geo.as_sphere_point(x)), inner, 0.0)
    chunker = PathChunker(start, dt, rng)
    tracker = LevelCrossingTracker(x, inner, outer, dt, rng)
    while len(tracker.completions) < n_pairs + 2:
        if chunker.steps_done > max_steps:
            raise BudgetExceeded("excursion sampling exceeded its step budget")
        tracker.process(chunker.next_chunk(chunk))
    arms = np.asarray(tracker.inner_touches, dtype=float)
    comps = np.asarray(tracker.completions[: n_pairs + 2], dtype=float)
    arms = arms[: len(comps)]
    outward = (comps - arms)[1 : n_pairs + 1] * dt
    inward = (arms[1:] - comps[:-1])[1 : n_pairs + 1] * dt
    return outward, inward


# ---------------------------------------------------------------------------
# Adaptive first-hit stepping (accurate positions)
# ---------------------------------------------------------------------------


def _signed_gaps(positions: np.ndarray, circles: list[geo.CircleSpec]) -> np.ndarray:
    """Signed distances d(pos, center_j) - radius_j, shape (N, M)."""
    p = np.atleast_2d(positions)
    out = np.empty((len(p), len(circles)))
    for j, c in enumerate(circles):
        out[:, j] = geo.sphere_distance(c.center, p) - c.radius
    return out


def _slerp(p: np.ndarray, q: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Geodesic interpolation between sphere points p and q at fraction t."""
    u = p - geo.CENTER
    v = q - geo.CENTER
    dot = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    ang = np.arccos(dot)
    small = ang < 1e-12
    ang_safe = np.where(small, 1.0, ang)
    s = np.sin(ang_safe)
    a = np.sin((1.0 - t) * ang_safe) / s
    b = np.sin(t * ang_safe) / s
    w = a[..., None] * u + b[..., None] * v
    w = np.where(small[..., None], u, w)
    return geo.CENTER + w / np.linalg.norm(w, axis=-1, keepdims=True)


def _project_to_circle(p: np.ndarray, circle: geo.CircleSpec) -> np.ndarray:
    """Move p along the great circle through the center to the exact radius."""
    c = circle.center - geo.CENTER
    v = p - geo.CENTER
    dot = np.clip(np.sum(v * c, axis=-1), -1.0, 1.0)
    tang = v - dot[..., None] * c
    nrm = np.linalg.norm(tang, axis=-1, keepdims=True)
    # p at the exact center: pick an arbitrary tangent direction
    if np.any(nrm < 1e-300):
        e1, _ = _tangent_basis(np.atleast_2d(c))
        tang = np.where(nrm < 1e-300, e1, tang)
        nrm = np.linalg.norm(tang, axis=-1, keepdims=True)
    tang = tang / nrm
    w = math.cos(circle.radius) * c + math.sin(circle.radius) * tang
    return geo.CENTER + w


def batch_first_hit(
    starts: np.ndarray,
    circles: list[geo.CircleSpec],
    policy: StepPolicy,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First hit of any monitored circle for a batch of independent walkers.

    Returns (circle ids, hit points, hit clocks).  Walkers starting within
    the shell of a circle register an immediate hit at time zero.  Raises
    BudgetExceeded if any walker runs past policy.budget steps.
    """
    pos = np.atleast_2d(np.asarray(starts, dtype=float)).copy()
    n = len(pos)
    min_radius = min(c.radius for c in circles)
    shell = policy.shell * min_radius
    ids = np.full(n, -1, dtype=np.int64)
    points = np.zeros((n, 3))
    times = np.zeros(n)
    clock = np.zeros(n)
    active = np.arange(n)
    gaps = _signed_gaps(pos, circles)
    steps = 0
    while len(active):
        agap = np.abs(gaps)
        nearest = np.argmin(agap, axis=1)
        gmin = agap[np.arange(len(active)), nearest]
        landed = gmin <= shell
        if np.any(landed):
            w = active[landed]
            cid = nearest[landed]
            ids[w] = cid
            times[w] = clock[w]
            for j in np.unique(cid):
                sel = landed & (nearest == j)
                points[active[sel]] = _project_to_circle(pos[sel], circles[j])
            keep = ~landed
            active, pos, gaps = active[keep], pos[keep], gaps[keep]
            if not len(active):
                break
        steps += 1
        if steps > policy.budget:
            raise BudgetExceeded("batch_first_hit exceeded its step budget")
        agap = np.abs(gaps)
        gmin = agap.min(axis=1)
        dt = np.minimum(policy.dt_max, (gmin / policy.refine_factor) ** 2)
        dt = np.maximum(dt, (shell / policy.refine_factor) ** 2 * 0.25)
        xi = rng.normal(size=(len(active), 2)) * np.sqrt(dt)[:, None]
        new_pos = move_along_geodesic(pos, xi[:, 0], xi[:, 1])
        new_gaps = _signed_gaps(new_pos, circles)
        clock[active] += dt
        crossed = (gaps * new_gaps) < 0
        if np.any(crossed):
            rows = np.nonzero(crossed.any(axis=1))[0]
            # bisect each crossed circle along the step geodesic and land on
            # the earliest one
            t_hit = np.full(len(rows), np.inf)
            j_hit = np.full(len(rows), -1)
            for j in range(len(circles)):
                sub = crossed[rows, j]
                if not np.any(sub):
                    continue
                tix = np.nonzero(sub)[0]
                rr = rows[tix]
                lo = np.zeros(len(rr))
                hi = np.ones(len(rr))
                g0 = gaps[rr, j]
                for _ in range(40):
                    mid = 0.5 * (lo + hi)
                    gm = (
                        geo.sphere_distance(
                            circles[j].center, _slerp(pos[rr], new_pos[rr], mid)
                        )
                        - circles[j].radius
                    )
                    same = (g0 * gm) > 0
                    lo = np.where(same, mid, lo)
                    hi = np.where(same, hi, mid)
                better = hi < t_hit[tix]
                t_hit[tix] = np.where(better, hi, t_hit[tix])
                j_hit[tix] = np.where(better, j, j_hit[tix])
            pts = _slerp(pos[rows], new_pos[rows], t_hit)
            w = active[rows]
            ids[w] = j_hit
            times[w] = clock[w]  # bisected landing: clock error < dt
            for j in np.unique(j_hit):
                sel = j_hit == j
                points[w[sel]] = _project_to_circle(pts[sel], circles[j])
            keep = np.ones(len(active), dtype=bool)
            keep[rows] = False
            active, pos, new_pos, new_gaps = (
                active[keep],
                pos[keep],
                new_pos[keep],
                new_gaps[keep],
            )
            if not len(active):
                break
        pos = new_pos
        gaps = new_gaps
    return ids, points, times


def run_until_hit(
    state: WalkerState, circles: list[geo.CircleSpec], policy: StepPolicy
) -> HitEvent:
    """Run one walker until it lands on a monitored circle (spec contract)."""
    if not circles:
        raise DomainError("need at least one monitored circle")
    ids, points, times = batch_first_hit(
        state.position[None, :], list(circles), policy, state.rng
    )
    state.position = points[0]
    state.clock += float(times[0])
    return HitEvent(circle_id=int(ids[0]), point=points[0], time=float(times[0]))


def sample_excursion(
    x,
    a: float,
    b: float,
    policy: StepPolicy,
    rng: np.random.Generator,
    start=None,
) -> tuple[HitEvent, HitEvent]:
    """One excursion around x: in to the circle of radius a, back out to b.

    Starts on the outer circle unless an explicit start is given.  Returns
    the inbound and outbound hit events; their times are leg durations.
    """
    if not 0 < a < b < math.pi:
        raise DomainError("need 0 < a < b < pi")
    x = geo.as_sphere_point(x)
    if start is None:
        angle = rng.uniform(0.0, 2.0 * math.pi)
        start = move_along_geodesic(x, b * math.cos(angle), b * math.sin(angle))
    state = WalkerState(position=np.asarray(start), rng=rng)
    inner = geo.CircleSpec(center=x, radius=a)
    outer = geo.CircleSpec(center=x, radius=b)
    ev_in = run_until_hit(state, [inner], policy)
    ev_out = run_until_hit(state, [outer], policy)
    return ev_in, ev_out


# ---------------------------------------------------------------------------
# Planar fast mode: walk on spheres (hitting order only, no clock)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlanarCircle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise DomainError("planar circle radius must be positive")


def project_circle(circle: geo.CircleSpec) -> PlanarCircle:
    """Stereographic image of a spherical circle.

    The image circle's diameter endpoints are the projections of the two
    points of the spherical circle on the meridian through its center (the
    image is symmetric about that meridian's image line).
    """
    c = circle.center
    phi_c = geo.sphere_distance(geo.SOUTH, c)
    if abs(phi_c + circle.radius - math.pi) < 1e-9 or abs(phi_c - circle.radius + math.pi) < 1e-9:
        raise DomainError("circle passes through the projection pole")
    if phi_c < 1e-12:
        u = np.array([1.0, 0.0])
    else:
        w = geo.stereo_project(c)
        u = w / np.linalg.norm(w)
    s_plus = 2.0 * math.tan((phi_c + circle.radius) / 2.0)
    s_minus = 2.0 * math.tan((phi_c - circle.radius) / 2.0)
    center = 0.5 * (s_plus + s_minus) * u
    radius = 0.5 * abs(s_plus - s_minus)
    return PlanarCircle(center=center, radius=radius)


def enclosing_circle(circles: list[PlanarCircle]) -> PlanarCircle | None:
    """The monitored circle that contains every other one, if there is one."""
    if not circles:
        return None
    j = int(np.argmax([c.radius for c in circles]))
    big = circles[j]
    for c in circles:
        if np.linalg.norm(c.center - big.center) + c.radius > big.radius * (1 + 1e-9):
            return None
    return big


def _exterior_reentry(
    w: np.ndarray, circle: PlanarCircle, rng: np.random.Generator
) -> np.ndarray:
    """First touch points on `circle` for walkers strictly outside it.

    By inversion, the exterior harmonic measure seen from distance D equals
    the interior one from radius R^2/D: a wrapped-Cauchy angle with ratio
    R/D about the walker's direction.  Planar Brownian motion is
    neighbourhood-recurrent, so the touch happens almost surely.
    """
    v = w - circle.center
    dist = np.linalg.norm(v, axis=1)
    rho = circle.radius / dist
    phi = np.arctan2(v[:, 1], v[:, 0])
    alpha = rng.uniform(0.0, 2.0 * math.pi, size=len(w))
    num = np.stack([np.cos(alpha) + rho, np.sin(alpha)], axis=1)
    den = np.stack([1.0 + rho * np.cos(alpha), rho * np.sin(alpha)], axis=1)
    theta = np.arctan2(num[:, 1], num[:, 0]) - np.arctan2(den[:, 1], den[:, 0])
    ang = phi + theta
    return circle.center + circle.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def wos_first_hit(
    starts: np.ndarray,
    circles: list[PlanarCircle],
    rng: np.random.Generator,
    shell: float = 1e-6,
    budget: int = 100_000,
    outer: PlanarCircle | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized walk-on-spheres until each walker lands within a relative
    shell of some monitored circle; returns (circle ids, landing points).

    Each jump goes to a uniform point on the largest circle around the
    current position avoiding every monitored circle; hitting order is exact
    in law up to the shell tolerance.  `outer` may name a circle known to
    enclose every monitored one (it need not be monitored itself): walkers
    straying outside it are brought back through their exact first-touch
    point, which keeps excursions to the far field cheap.
    """
    w = np.atleast_2d(np.asarray(starts, dtype=float)).copy()
    n = len(w)
    centers = np.stack([c.center for c in circles])
    radii = np.array([c.radius for c in circles])
    if outer is None:
        outer = enclosing_circle(circles)
    ids = np.full(n, -1, dtype=np.int64)
    points = np.zeros((n, 2))
    active = np.arange(n)
    # fallback cap for geometries without an enclosing circle
    r_cap = 10.0 * float(np.max(np.linalg.norm(centers, axis=1) + radii) + 1.0)
    for it in range(budget):
        if not len(active):
            break
        if outer is not None:
            out_d = np.linalg.norm(w - outer.center, axis=1)
            far = out_d > outer.radius * (1.0 + 1e-12)
            if np.any(far):
                w[far] = _exterior_reentry(w[far], outer, rng)
        diff = w[:, None, :] - centers[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        agap = np.abs(dist - radii[None, :])
        nearest = np.argmin(agap, axis=1)
        gmin = agap[np.arange(len(w)), nearest]
        landed = gmin <= shell * radii[nearest]
        if np.any(landed):
            rows = np.nonzero(landed)[0]
            cid = nearest[rows]
            ids[active[rows]] = cid
            c = centers[cid]
            v = w[rows] - c
            nv = np.linalg.norm(v, axis=1, keepdims=True)
            v = np.where(nv > 1e-300, v / nv, np.array([[1.0, 0.0]]))
            points[active[rows]] = c + radii[cid][:, None] * v
            keep = ~landed
            active, w, gmin = active[keep], w[keep], gmin[keep]
            if not len(active):
                break
        r = np.minimum(gmin * (1.0 - 1e-12), r_cap)
        ang = rng.uniform(0.0, 2.0 * math.pi, size=len(w))
        w = w + r[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        raise BudgetExceeded("walk-on-spheres exceeded its jump budget")
    return ids, points


def planar_hit_order_walk(
    w0,
    circles: list[PlanarCircle],
    rng: np.random.Generator,
    n_hits: int = 1,
    shell: float = 1e-6,
    budget: int = 100_000,
) -> list[HitEvent]:
    """Sequence of the first n_hits circle hits of one planar walker.

    Clockless: `time` on the returned events counts hits, not diffusion time.
    After each landing the walker restarts from the landing point; a landing
    on the same circle it sits on is only registered after it has moved away,
    so consecutive events are genuine transitions.
    """
    w = np.asarray(w0, dtype=float)
    events: list[HitEvent] = []
    outer = enclosing_circle(circles)
    last_id = -1
    for k in range(n_hits):
        sub = [c for j, c in enumerate(circles) if j != last_id]
        idmap = [j for j in range(len(circles)) if j != last_id]
        ids, pts = wos_first_hit(
            w[None, :], sub, rng, shell=shell, budget=budget, outer=outer
        )
        cid = idmap[int(ids[0])]
        w = pts[0]
        events.append(HitEvent(circle_id=cid, point=w.copy(), time=float(k + 1)))
        last_id = cid
    return events
