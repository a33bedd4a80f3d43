"""Small shared helpers."""

from __future__ import annotations

import math


def round_half_up(x: float) -> int:
    """Round a non-negative value half away from zero.

    Sample-size arithmetic uses this fixed convention so that sizes agree
    bit-for-bit across platforms (Python's built-in round() is banker's
    rounding and would differ on exact halves).
    """
    if x < 0:
        raise ValueError("round_half_up expects a non-negative value")
    return int(math.floor(x + 0.5))
