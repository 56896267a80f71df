"""Shared fixtures and small scene builders for the test suite."""

import numpy as np
import pytest

from radarbeam.geometry import Point2
from radarbeam.radar import RadarConfig
from radarbeam.radio import RadioConfig
from radarbeam.scene import (
    BlockerSpec,
    BlockerState,
    ReflectorSpec,
    Scene,
    SceneSnapshot,
    UserSpec,
    UserState,
)


@pytest.fixture
def radar_cfg() -> RadarConfig:
    return RadarConfig()


@pytest.fixture
def radio_cfg() -> RadioConfig:
    return RadioConfig()


@pytest.fixture
def quiet_radar() -> RadarConfig:
    # noise floor low enough that synthesized frames are effectively clean
    return RadarConfig(noise_floor_db=-300.0)


@pytest.fixture
def quiet_radio() -> RadioConfig:
    return RadioConfig(noise_power_dbm=-400.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def static_snapshot(users: dict[int, Point2],
                    reflectors: tuple[ReflectorSpec, ...] = (),
                    blockers=(),
                    clutter: tuple[tuple[Point2, float], ...] = (),
                    t: float = 0.0) -> SceneSnapshot:
    """Snapshot of standing users at given positions (zero velocity)."""
    states = {uid: UserState(user_id=uid, position=p,
                             velocity=Point2(0.0, 0.0), rcs=1.0)
              for uid, p in users.items()}
    return SceneSnapshot(t=t, users=states, blockers=tuple(blockers),
                         reflectors=reflectors, static_clutter=clutter)


def standing_user_scene(pos: Point2, duration: float = 2.0,
                        seed: int = 0, **kw) -> Scene:
    wps = ((0.0, pos), (duration, pos))
    return Scene(users=(UserSpec(user_id=0, waypoints=wps),),
                 duration=duration, seed=seed, **kw)


def wall(x1, y1, x2, y2, coeff: float = 0.7) -> ReflectorSpec:
    return ReflectorSpec(p1=Point2(x1, y1), p2=Point2(x2, y2),
                         reflection_coeff=coeff)


def standing_blocker(pos: Point2, length: float = 0.6,
                     attenuation_db: float = 30.0) -> BlockerSpec:
    wps = ((0.0, pos), (1.0, pos))
    return BlockerSpec(waypoints=wps, length=length,
                       attenuation_db=attenuation_db)


def blocker_state(pos: Point2, vel: Point2 = Point2(0.0, 0.0),
                  length: float = 0.6, attenuation_db: float = 30.0,
                  rcs: float = 0.8) -> BlockerState:
    return BlockerState(position=pos, velocity=vel, length=length,
                        attenuation_db=attenuation_db, rcs=rcs)


def random_reflection_geometry(rng: np.random.Generator):
    """One solvable {user, wall} draw around a base station at the origin.

    Returns (user position, wall anchor, wall orientation deg, specular
    point, reflected path length).  The wall is an infinite line here;
    draws whose specular point does not exist are rejected and redrawn.
    """
    from radarbeam.geometry import (
        ORIGIN,
        direction_from_orientation,
        specular_point,
        unit_from_bearing,
    )

    while True:
        user = unit_from_bearing(rng.uniform(-55, 55)) * rng.uniform(2.0, 15.0)
        phi = float(rng.uniform(-89.9, 90.0))
        direction = direction_from_orientation(phi)
        anchor = unit_from_bearing(rng.uniform(-180, 180)) * rng.uniform(3.0, 12.0)
        sp = specular_point(ORIGIN, user, anchor, direction)
        if sp is None:
            continue
        length = sp.norm() + (user - sp).norm()
        # keep the bounce in front of the array and geometrically sane
        if sp.norm() < 0.5 or (user - sp).norm() < 0.5:
            continue
        if length > 60.0 or length < user.norm() + 1e-3:
            continue
        return user, anchor, phi, sp, length
