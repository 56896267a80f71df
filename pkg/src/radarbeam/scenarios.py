"""Canned scenes exercising the failure modes the algorithms target.

Every generator takes a seed (it fixes the sensor-noise RNG; mixed_suite
also draws its geometry from it) and returns a validated Scene.  Users stay
inside the +/-60 degree codebook field of view and under the pedestrian
speed bound.
"""

from __future__ import annotations

import numpy as np

from .geometry import Point2
from .scene import BlockerSpec, ReflectorSpec, Scene, UserSpec, validate_scene


def crossing_2users(seed: int = 0) -> Scene:
    """Two users approach head-on at the same range, pass within a radar
    resolution cell around t=4 s, and reverse.  A constant-velocity tracker
    without identity anchoring swaps them at the bounce."""
    u1 = UserSpec(user_id=1, waypoints=(
        (0.0, Point2(-6.0, 6.0)),
        (4.0, Point2(-0.3, 6.0)),
        (8.0, Point2(-6.0, 6.0)),
    ))
    u2 = UserSpec(user_id=2, waypoints=(
        (0.0, Point2(6.0, 6.0)),
        (4.0, Point2(0.3, 6.0)),
        (8.0, Point2(6.0, 6.0)),
    ))
    scene = Scene(users=(u1, u2), duration=8.0, seed=seed)
    validate_scene(scene)
    return scene


def crossing_4users(seed: int = 0) -> Scene:
    """Four users on crossing diagonals; several pairwise near-encounters."""
    users = (
        UserSpec(1, ((0.0, Point2(-6.0, 4.0)), (10.0, Point2(6.0, 12.0)))),
        UserSpec(2, ((0.0, Point2(6.0, 4.0)), (10.0, Point2(-6.0, 12.0)))),
        UserSpec(3, ((0.0, Point2(-5.0, 10.0)), (10.0, Point2(5.0, 3.5)))),
        UserSpec(4, ((0.0, Point2(5.0, 9.0)), (10.0, Point2(-5.0, 4.0)))),
    )
    scene = Scene(users=users, duration=10.0, seed=seed)
    validate_scene(scene)
    return scene


def reflector_walk(seed: int = 0) -> Scene:
    """One user walks past a finite wall segment.

    The specular bounce exists only while the reflection point stays inside
    the wall extent: with the wall at y=8 spanning x in [-2, 4/3] and the
    user on y=5, the image-source crossing enters the segment near t=2.25 s
    and leaves near t=6.83 s of the 10 s walk.
    """
    user = UserSpec(user_id=1, waypoints=(
        (0.0, Point2(-5.0, 5.0)),
        (10.0, Point2(5.0, 5.0)),
    ))
    wall = ReflectorSpec(p1=Point2(-2.0, 8.0), p2=Point2(4.0 / 3.0, 8.0),
                         reflection_coeff=0.8)
    scene = Scene(users=(user,), reflectors=(wall,), duration=10.0, seed=seed)
    validate_scene(scene)
    return scene


def blocker_crossing(seed: int = 0) -> Scene:
    """A pedestrian cuts the LoS of a near-static user twice (about t=2.1 s
    and t=6.0 s) while a side wall provides an alternative bounce path."""
    user = UserSpec(user_id=1, waypoints=(
        (0.0, Point2(0.5, 8.0)),
        (8.0, Point2(-0.5, 8.0)),
    ))
    wall = ReflectorSpec(p1=Point2(4.0, 2.0), p2=Point2(4.0, 9.0),
                         reflection_coeff=0.75)
    blocker = BlockerSpec(waypoints=(
        (0.0, Point2(-3.8, 4.0)),
        (4.0, Point2(3.8, 4.0)),
        (8.0, Point2(-3.8, 4.0)),
    ))
    clutter = ((Point2(-6.0, 10.0), 0.5), (Point2(7.0, 12.0), 0.8),
               (Point2(-3.0, 14.0), 0.6))
    scene = Scene(users=(user,), reflectors=(wall,), blockers=(blocker,),
                  static_clutter=clutter, duration=8.0, seed=seed)
    validate_scene(scene)
    return scene


def mixed_suite(seed: int = 0) -> Scene:
    """Randomized stress scene: a user pair that meets inside one radar
    resolution cell early in the run and bounces apart (the identity trap:
    a constant-velocity tracker swaps them, and only recalibration heals
    it), plus a back wall, a blocker crossing in the second half, and a few
    clutter points.  Geometry is drawn from the seed, so a sweep over seeds
    gives independent trials."""
    rng = np.random.default_rng(seed)
    y0 = float(rng.uniform(5.0, 7.0))
    t_bounce = float(rng.uniform(2.0, 2.6))
    gap = float(rng.uniform(0.20, 0.30))
    speed = float(rng.uniform(1.5, 1.9))
    x0 = gap + speed * t_bounce
    duration = 8.0

    def bounce(uid: int, side: float) -> UserSpec:
        # walks in, reverses at the near-miss, walks back out, then parks
        return UserSpec(user_id=uid, waypoints=(
            (0.0, Point2(side * x0, y0)),
            (t_bounce, Point2(side * gap, y0)),
            (2.0 * t_bounce, Point2(side * x0, y0)),
        ))

    users = (bounce(1, -1.0), bounce(2, 1.0))

    y_wall = float(rng.uniform(10.0, 12.0))
    half_span = float(rng.uniform(2.5, 4.0))
    wall = ReflectorSpec(p1=Point2(-half_span, y_wall),
                         p2=Point2(half_span, y_wall),
                         reflection_coeff=float(rng.uniform(0.6, 0.9)))

    t_cross = float(rng.uniform(4.5, 6.5))
    y_b = float(rng.uniform(2.5, 3.5))
    sb = float(rng.uniform(1.2, 1.9))
    blocker = BlockerSpec(waypoints=(
        (0.0, Point2(-sb * t_cross, y_b)),
        (duration, Point2(sb * (duration - t_cross), y_b)),
    ))

    clutter = tuple(
        (Point2(float(r * np.sin(np.radians(b))),
                float(r * np.cos(np.radians(b)))), float(rcs))
        for r, b, rcs in zip(rng.uniform(9.0, 14.0, 3),
                             rng.uniform(-70.0, 70.0, 3),
                             rng.uniform(0.3, 0.9, 3)))

    scene = Scene(users=users, reflectors=(wall,), blockers=(blocker,),
                  static_clutter=clutter, duration=duration, seed=seed)
    validate_scene(scene)
    return scene


GENERATORS = {
    "crossing_2users": crossing_2users,
    "crossing_4users": crossing_4users,
    "reflector_walk": reflector_walk,
    "blocker_crossing": blocker_crossing,
    "mixed_suite": mixed_suite,
}
