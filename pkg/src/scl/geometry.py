"""Closed-form geometry of the unit sphere tangent to the plane.

The sphere is the unit sphere in R^3 centered at ``CENTER = (0, 0, 1)``, so it
touches the plane z = 0 at the south pole ``SOUTH = (0, 0, 0)``.  Stereographic
projection from the north pole ``NORTH = (0, 0, 2)`` maps the punctured sphere
onto that plane and is the isothermal chart used everywhere else in the
package: a Euclidean radius ``r`` in the plane corresponds to the geodesic
radius ``h(r) = 2*arctan(r/2)`` on the sphere.

All functions are pure and accept/return plain numpy arrays; vector inputs
follow numpy broadcasting over a trailing axis of length 3 (sphere) or 2
(plane).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvariantViolation, SingularPoint

CENTER = np.array([0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, 0.0])
NORTH = np.array([0.0, 0.0, 2.0])

# |p - CENTER| must equal 1 within this tolerance for a valid SpherePoint.
POINT_TOL = 1e-12


def as_sphere_point(p) -> np.ndarray:
    """Validate that p lies on the sphere and return it as a float array."""
    p = np.asarray(p, dtype=float)
    nrm = np.linalg.norm(p - CENTER, axis=-1)
    if not np.all(np.abs(nrm - 1.0) <= 1e-9):
        raise DomainError(f"point not on the unit sphere about (0,0,1): |p-c|={nrm}")
    return p


def renormalize(p: np.ndarray) -> np.ndarray:
    """Project p radially back onto the sphere (guards drift in long walks)."""
    v = p - CENTER
    return CENTER + v / np.linalg.norm(v, axis=-1, keepdims=True)


def is_north_pole(p, tol: float = POINT_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.linalg.norm(p - NORTH, axis=-1) <= tol


def h(r):
    """Geodesic radius of the spherical circle whose planar radius is r.

    h(r) = 2*arctan(r/2); strictly increasing with h(r) <= r and h(2) = pi/2.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("h(r) requires r >= 0")
    out = 2.0 * np.arctan(r / 2.0)
    return float(out) if out.ndim == 0 else out


def h_inverse(a):
    """Planar radius with h(r) = a, i.e. r = 2*tan(a/2); requires a in [0, pi)."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or np.any(a >= np.pi):
        raise DomainError("h_inverse requires a in [0, pi)")
    out = 2.0 * np.tan(a / 2.0)
    return float(out) if out.ndim == 0 else out


def stereo_project(p) -> np.ndarray:
    """Stereographic image (p1, p2)/(1 - p3/2) of a sphere point.

    Raises SingularPoint at the north pole, where the chart degenerates.
    """
    p = np.asarray(p, dtype=float)
    if np.any(is_north_pole(p)):
        raise SingularPoint("stereographic projection undefined at the north pole")
    denom = 1.0 - p[..., 2] / 2.0
    return p[..., :2] / denom[..., None]


def stereo_inverse(w) -> np.ndarray:
    """Sphere point whose stereographic image is the plane point w."""
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DomainError("plane point must have finite coordinates")
    s = np.sum(w * w, axis=-1)
    t = 4.0 / (s + 4.0)
    p = np.empty(w.shape[:-1] + (3,))
    p[..., 0] = t * w[..., 0]
    p[..., 1] = t * w[..., 1]
    p[..., 2] = 2.0 * s / (s + 4.0)
    return p


def sphere_distance(p, q):
    """Geodesic distance between two sphere points, in [0, pi].

    Computed from the chord, d = 2*arcsin(|p-q|/2), which stays accurate for
    nearby points where the arccos form loses half the mantissa.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    chord = np.linalg.norm(p - q, axis=-1)
    out = 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


def conformal_factor(w):
    """Conformal factor lambda(w) = 1/(1 + |w|^2/4) of the pulled-back metric.

    The plane with metric lambda^2 (dx^2 + dy^2) is isometric to the sphere;
    the radial arc-length to (rho, 0) integrates to 2*arctan(rho/2) = h(rho).
    """
    w = np.asarray(w, dtype=float)
    out = 1.0 / (1.0 + np.sum(w * w, axis=-1) / 4.0)
    return float(out) if out.ndim == 0 else out


def annulus_hit_prob(rho1, rho2, rho3):
    """P(hit the h(rho1) circle before the h(rho3) circle | start on h(rho2)).

    All three radii are planar (pre-h) radii of concentric circles,
    0 < rho1 <= rho2 <= rho3.  Equals log(rho2/rho3)/log(rho1/rho3); the
    hitting order is conformally invariant, so the planar log-ratio applies
    verbatim on the sphere.
    """
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    rho3 = np.asarray(rho3, dtype=float)
    if np.any(rho1 <= 0) or np.any(rho1 > rho2) or np.any(rho2 > rho3):
        raise DomainError("annulus_hit_prob requires 0 < rho1 <= rho2 <= rho3")
    if np.any(rho1 == rho3):
        raise DomainError("annulus_hit_prob undefined for rho1 == rho3")
    out = np.log(rho2 / rho3) / np.log(rho1 / rho3)
    return float(out) if out.ndim == 0 else out


def rotation_to_south(center) -> np.ndarray:
    """Rotation matrix (about CENTER) taking `center` to the south pole.

    Rodrigues rotation in displacement coordinates v = p - CENTER.
    """
    c = as_sphere_point(center) - CENTER
    target = SOUTH - CENTER
    dot = float(np.clip(np.dot(c, target), -1.0, 1.0))
    if dot > 1.0 - 1e-14:
        return np.eye(3)
    if dot < -1.0 + 1e-14:
        # c is the north pole direction: rotate by pi about the x-axis.
        return np.diag([1.0, -1.0, -1.0])
    axis = np.cross(c, target)
    axis /= np.linalg.norm(axis)
    ang = np.arccos(dot)
    K = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(ang) * K + (1.0 - np.cos(ang)) * (K @ K)


def rotate_about_center(R: np.ndarray, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return (p - CENTER) @ R.T + CENTER


def poisson_kernel_sphere(r: float, z, x, center=SOUTH, tol: float = 1e-9):
    """Exit density of Brownian motion from B(center, r), z inside, x on the boundary.

    Density is taken with respect to the uniform probability measure on the
    boundary circle:

        p(z, x) = (sin^2(r/2) - sin^2(d(c,z)/2)) / sin^2(d(z,x)/2)

    stated for balls about the south pole; other centers are handled by
    rotating both arguments (the kernel is rotation covariant).
    """
    if not (0.0 < r < np.pi):
        raise DomainError("ball radius must lie in (0, pi)")
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    dz = sphere_distance(c, z)
    dx = sphere_distance(c, x)
    if np.any(dz >= r - tol):
        raise DomainError("z must lie strictly inside the ball")
    if np.any(np.abs(dx - r) > max(tol, 1e-7 * r)):
        raise DomainError("x must lie on the boundary circle")
    dzx = sphere_distance(z, x)
    num = np.sin(r / 2.0) ** 2 - np.sin(dz / 2.0) ** 2
    den = np.sin(dzx / 2.0) ** 2
    out = num / den
    return float(out) if out.ndim == 0 else out


def kappa(a, b):
    """Expected round-trip (commute) time between concentric circles of
    geodesic radii a < b: kappa = 4*log(tan(b/2)/tan(a/2)).

    Additive along nested radii and independent of the common center.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(a >= b) or np.any(b >= np.pi):
        raise DomainError("kappa requires 0 < a < b < pi")
    out = 4.0 * np.log(np.tan(b / 2.0) / np.tan(a / 2.0))
    return float(out) if out.ndim == 0 else out


def expected_hit_inner(a, b):
    """Expected time to reach the inner circle radius a from the outer radius b.

    2*log((1-cos b)/(1-cos a)) for 0 < a < b < pi.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(a >= b) or np.any(b >= np.pi):
        raise DomainError("expected_hit_inner requires 0 < a < b < pi")
    out = 2.0 * np.log((1.0 - np.cos(b)) / (1.0 - np.cos(a)))
    return float(out) if out.ndim == 0 else out


def expected_hit_outer(a, b):
    """Expected time to reach the outer circle radius b from the inner radius a.

    2*log((1+cos a)/(1+cos b)); together with expected_hit_inner this sums to
    kappa(a, b) exactly (half-angle identity).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(a >= b) or np.any(b >= np.pi):
        raise DomainError("expected_hit_outer requires 0 < a < b < pi")
    out = 2.0 * np.log((1.0 + np.cos(a)) / (1.0 + np.cos(b)))
    return float(out) if out.ndim == 0 else out


# Largest r0 for which the sandwich 0.9 r <= h(r) <= r still holds; the
# source regime is r0 <= 1e-6 but desk-scale runs use circles of order one.
R0_SANDWICH_MAX = 1.2


@dataclass(frozen=True)
class RadiusSchedule:
    """Geometric radii r_l = r0*e^{-l} and their geodesic images h_l = h(r_l).

    Invariant: 0.9*r_l <= h_l <= r_l for every level and both arrays strictly
    decrease.
    """

    r0: float
    L: int
    r: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)

    def level_radii(self, l: int) -> tuple[float, float]:
        """(inner, outer) geodesic radii (h_l, h_{l-1}) of the level-l annulus."""
        if not 1 <= l <= self.L:
            raise DomainError(f"level must be in 1..{self.L}")
        return float(self.h[l]), float(self.h[l - 1])


def make_radius_schedule(r0: float, L: int) -> RadiusSchedule:
    """Build the radii schedule r_l = r0*e^{-l}, h_l = h(r_l) for l = 0..L."""
    if not 0 < r0 <= R0_SANDWICH_MAX:
        raise DomainError(f"r0 must lie in (0, {R0_SANDWICH_MAX}]")
    if L < 1:
        raise DomainError("L must be >= 1")
    ell = np.arange(L + 1)
    r = r0 * np.exp(-ell.astype(float))
    hh = h(r)
    if not (np.all(0.9 * r <= hh) and np.all(hh <= r)):
        raise InvariantViolation("sandwich 0.9 r_l <= h_l <= r_l failed")
    if not (np.all(np.diff(r) < 0) and np.all(np.diff(hh) < 0)):
        raise InvariantViolation("radii schedule must be strictly decreasing")
    return RadiusSchedule(r0=float(r0), L=int(L), r=r, h=hh)


@dataclass(frozen=True)
class CircleSpec:
    """A spherical circle: boundary of B(center, radius), radius in (0, pi)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_sphere_point(self.center))
        if not 0.0 < self.radius < np.pi:
            raise DomainError("circle radius must lie in (0, pi)")


def fibonacci_sphere(n: int) -> np.ndarray:
    """n near-uniform points on the sphere (golden-angle lattice), shape (n, 3)."""
    if n < 1:
        raise DomainError("need at least one point")
    i = np.arange(n, dtype=float)
    zc = 1.0 - (2.0 * i + 1.0) / n  # cos(polar angle), midpoint rule
    phi = i * (np.pi * (3.0 - np.sqrt(5.0)))
    s = np.sqrt(np.maximum(0.0, 1.0 - zc * zc))
    pts = np.stack([s * np.cos(phi), s * np.sin(phi), zc], axis=1)
    return pts + CENTER
