"""Exact powers of (1+ε) and the discretization helpers built on them."""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

from .graph import as_fraction


class EpsPowers:
    """Exact (1+ε)^e for integer e, with float-guided exact floor/ceil logs."""

    def __init__(self, eps):
        self.eps = as_fraction(eps)
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        self.base = 1 + self.eps
        self._log = math.log(float(self.base))
        self.pow = lru_cache(maxsize=None)(self._pow)

    def _pow(self, e: int) -> Fraction:
        return self.base ** e

    def floor_log(self, x) -> int:
        """Largest e with (1+ε)^e ≤ x, for x > 0."""
        x = as_fraction(x)
        if x <= 0:
            raise ValueError("log of non-positive value")
        e = math.floor(math.log(float(x)) / self._log)
        while self.pow(e) > x:
            e -= 1
        while self.pow(e + 1) <= x:
            e += 1
        return e

    def ceil_log(self, x) -> int:
        """Smallest e with (1+ε)^e ≥ x, for x > 0."""
        e = self.floor_log(x)
        return e if self.pow(e) == as_fraction(x) else e + 1

    def round_up(self, d) -> Fraction:
        """Distance rounded up to a power of (1+ε); zero stays zero."""
        d = as_fraction(d)
        return Fraction(0) if d == 0 else self.pow(self.ceil_log(d))
