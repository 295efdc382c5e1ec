"""Named analytic target fields."""

import numpy as np


def velocity_target(x, y):
    """Divergence-free target velocity vanishing on the boundary."""
    u1 = -2.0 * x**2 * y * (1 - x) ** 2 * (1 - 3 * y + 2 * y**2)
    u2 = 2.0 * x * y**2 * (1 - y) ** 2 * (1 - 3 * x + 2 * x**2)
    return u1, u2


def pressure_target(x, y):
    return np.cos(np.pi * x) * np.cos(np.pi * y)


def zero_velocity(x, y):
    z = np.zeros_like(np.asarray(x, dtype=float))
    return z, z


def zero_pressure(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


TARGETS = {
    "default": (velocity_target, pressure_target),
    "zero": (zero_velocity, zero_pressure),
}


def get_targets(name="default"):
    try:
        return TARGETS[name]
    except KeyError:
        raise KeyError(f"unknown target set {name!r}; "
                       f"choose from {sorted(TARGETS)}") from None
