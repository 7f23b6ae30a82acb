"""Fixed-point rounding of policy parameters and activations."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .network import PolicyParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedPointScheme:
    """Signed fixed point with `int_bits` integer and `frac_bits` fractional bits.

    The default is an 18-bit word (sign + 5 + 12). `frac_bits=None` means
    infinite precision: values pass through unchanged.
    """

    int_bits: int = 5
    frac_bits: Optional[int] = 12

    def __post_init__(self):
        if self.int_bits < 0 or (self.frac_bits is not None and self.frac_bits < 0):
            raise ValueError("bit widths must be nonnegative")

    @property
    def exact(self) -> bool:
        return self.frac_bits is None

    @property
    def total_bits(self) -> Optional[int]:
        return None if self.exact else 1 + self.int_bits + self.frac_bits

    @property
    def max_value(self) -> float:
        if self.exact:
            return float("inf")
        return 2.0**self.int_bits - 2.0 ** (-self.frac_bits)

    def apply(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        """Round to the grid and saturate; returns (values, saturated)."""
        x = np.asarray(x, dtype=float)
        if self.exact:
            return x, False
        step = 2.0 ** (-self.frac_bits)
        rounded = np.round(x / step) * step
        limit = self.max_value
        saturated = bool(np.any(np.abs(rounded) > limit))
        return np.clip(rounded, -limit, limit), saturated

    def to_dict(self) -> dict:
        return {"int_bits": self.int_bits, "frac_bits": self.frac_bits}

    @classmethod
    def from_dict(cls, data: dict) -> "FixedPointScheme":
        frac = data.get("frac_bits")
        return cls(int(data["int_bits"]), int(frac) if frac is not None else None)


def quantize(params: PolicyParams, scheme: FixedPointScheme) -> PolicyParams:
    """Parameters rounded to `scheme`; inference then also rounds activations."""
    saturated = False

    def convert(layers):
        nonlocal saturated
        out = []
        for w, b in layers:
            qw, sat_w = scheme.apply(w)
            qb, sat_b = scheme.apply(b)
            saturated = saturated or sat_w or sat_b
            out.append((qw, qb))
        return tuple(out)

    preproc = convert(params.preproc)
    layers = convert(params.layers)
    if saturated:
        logger.warning("Fixed-point scheme %s saturated some parameters", scheme.to_dict())
    return PolicyParams(
        params.topology,
        preproc,
        layers,
        fixed_point=None if scheme.exact else scheme,
        saturated=saturated,
    )
