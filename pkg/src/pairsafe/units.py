"""Unit conversion to SI for configuration values."""

import math

KNOT = 0.5144
FOOT = 0.3048

# suffix -> (factor to SI, dimension)
UNITS = {
    "m": (1.0, "length"),
    "km": (1000.0, "length"),
    "ft": (FOOT, "length"),
    "mi": (1609.344, "length"),
    "mps": (1.0, "speed"),
    "m/s": (1.0, "speed"),
    "kt": (KNOT, "speed"),
    "s": (1.0, "time"),
    "min": (60.0, "time"),
    "rad": (1.0, "angle"),
    "deg": (math.pi / 180.0, "angle"),
    "mps2": (1.0, "acceleration"),
    "m/s2": (1.0, "acceleration"),
    "ft/s2": (FOOT, "acceleration"),
    "1/s": (1.0, "rate"),
    "rad/s": (1.0, "rate"),
}


def knots(value):
    return value * KNOT


def feet(value):
    return value * FOOT


def parse_quantity(text):
    """Split ``"2200 ft"`` into ``(670.56, "length")``.

    A bare number is returned with dimension ``None``.  Raises ``ValueError``
    for an unknown suffix or a malformed number.
    """
    parts = text.strip().split()
    if len(parts) == 1:
        # allow "5km" style
        token = parts[0]
        for suffix in sorted(UNITS, key=len, reverse=True):
            if token.endswith(suffix) and _is_number(token[: -len(suffix)]):
                parts = [token[: -len(suffix)], suffix]
                break
    if len(parts) == 1:
        return float(parts[0]), None
    if len(parts) != 2:
        raise ValueError(f"cannot parse quantity {text!r}")
    number, suffix = parts
    if suffix not in UNITS:
        raise ValueError(f"unknown unit {suffix!r}")
    factor, dim = UNITS[suffix]
    return float(number) * factor, dim


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True
