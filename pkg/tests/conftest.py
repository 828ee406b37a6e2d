import numpy as np
import pytest

from diskrod.model import ActuationState, ManipulatorConfig, solve_equilibrium


@pytest.fixture(scope="session")
def config():
    return ManipulatorConfig()


@pytest.fixture(scope="session")
def solve_cached(config):
    """Memoized equilibrium solves shared across the whole test session."""
    memo = {}

    def solve(tendon_mm=0.0, angles=(0.0,) * 9, cfg=None):
        cfg = cfg or config
        key = (id(cfg), float(tendon_mm), tuple(float(a) for a in angles))
        if key not in memo:
            memo[key] = solve_equilibrium(
                cfg, ActuationState(tendon_mm=tendon_mm, disk_angles_deg=tuple(angles)))
        return memo[key]

    return solve


def actuation(tendon_mm=0.0, **disks):
    """Shorthand: actuation(100, d5=-70) sets disk 5 to -70 degrees."""
    angles = [0.0] * 9
    for name, deg in disks.items():
        angles[int(name[1:]) - 1] = float(deg)
    return ActuationState(tendon_mm=tendon_mm, disk_angles_deg=tuple(angles))


@pytest.fixture(scope="session")
def va_target(solve_cached):
    """Loop-closure target with one torsion sign change (disk 5 at -70)."""
    return solve_cached(100.0, actuation(100.0, d5=-70).disk_angles_deg).shape.dense_curve


@pytest.fixture(scope="session")
def vb_target(solve_cached):
    """Loop-closure target with two sign changes (disk 4 at +87, disk 6 at -55)."""
    return solve_cached(131.0, actuation(131.0, d4=87, d6=-55).disk_angles_deg).shape.dense_curve


@pytest.fixture(scope="session")
def va_match(va_target, config):
    from diskrod.matching import match_shape
    return match_shape(va_target, config)


@pytest.fixture(scope="session")
def vb_match(vb_target, config):
    from diskrod.matching import match_shape
    return match_shape(vb_target, config)
