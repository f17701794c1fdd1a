"""Fixed-point formats and the three rounding modes used for quantization.

Quantized values are carried as float64 numbers that lie exactly on the
format grid ``n * 2**-frac_bits``. All supported widths fit in the 53-bit
float mantissa, so scaling by a power of two and flooring is exact.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

import numpy as np

MAX_WIDTH = 48

_QNOTATION = re.compile(r"^q([su])(\d+)\.(\d+)$")


class RoundingMode(str, enum.Enum):
    TRUNCATE = "truncate"
    NEAREST = "nearest"
    STOCHASTIC = "stochastic"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown rounding mode {name!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class FixedPointFormat:
    """Signedness plus integer/fractional bit counts.

    The grid is ``{n * ulp}`` clipped to ``[min_val, max_val]`` with
    ``max_val = 2**int_bits - ulp`` and ``min_val = -2**int_bits`` for signed
    formats (0 otherwise).
    """

    signed: bool
    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 0 or self.frac_bits < 0:
            raise ValueError(f"bit counts must be non-negative, got {self!r}")
        if self.width < 1:
            raise ValueError("a fixed-point format needs at least one bit")
        if self.width > MAX_WIDTH:
            raise ValueError(f"width {self.width} exceeds supported maximum {MAX_WIDTH}")

    @property
    def width(self) -> int:
        return int(self.signed) + self.int_bits + self.frac_bits

    @property
    def ulp(self) -> float:
        return math.ldexp(1.0, -self.frac_bits)

    @property
    def max_int(self) -> int:
        return (1 << (self.int_bits + self.frac_bits)) - 1

    @property
    def min_int(self) -> int:
        return -(1 << (self.int_bits + self.frac_bits)) if self.signed else 0

    @property
    def max_val(self) -> float:
        return math.ldexp(float(self.max_int), -self.frac_bits)

    @property
    def min_val(self) -> float:
        return math.ldexp(float(self.min_int), -self.frac_bits)

    def __str__(self):
        return f"q{'s' if self.signed else 'u'}{self.int_bits}.{self.frac_bits}"

    @classmethod
    def parse(cls, text):
        """Parse ``q<s|u><int>.<frac>``; ``fp32`` parses to ``None``."""
        text = str(text).strip().lower()
        if text == "fp32":
            return None
        m = _QNOTATION.match(text)
        if m is None:
            raise ValueError(f"malformed format string {text!r}; expected e.g. 'qs3.4', 'qu0.8' or 'fp32'")
        return cls(m.group(1) == "s", int(m.group(2)), int(m.group(3)))

    def contains(self, values) -> bool:
        """True if every value lies on this format's grid."""
        values = np.asarray(values, dtype=np.float64)
        scaled = np.ldexp(values, self.frac_bits)
        return bool(
            np.all(np.isfinite(values))
            and np.all(scaled == np.floor(scaled))
            and np.all(values >= self.min_val)
            and np.all(values <= self.max_val)
        )


def format_name(fmt) -> str:
    return "fp32" if fmt is None else str(fmt)


def format_width(fmt) -> int:
    """Storage width in bits; the unquantized reference counts as 32."""
    return 32 if fmt is None else fmt.width


def format_range(fmt: FixedPointFormat):
    """Return ``(min_val, max_val, ulp)``."""
    return fmt.min_val, fmt.max_val, fmt.ulp


def _check_finite(values):
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.argwhere(bad)[0]
        idx = tuple(int(i) for i in idx)
        if len(idx) == 1:
            idx = idx[0]
        raise ValueError(f"cannot quantize non-finite value {values[bad][0]!r} at index {idx}")


def quantize_tensor(values, fmt: FixedPointFormat, mode, rng=None) -> np.ndarray:
    """Quantize an array elementwise onto ``fmt``'s grid.

    Rounding happens first, saturation second. Stochastic mode draws one
    uniform per element, in C order, from ``rng``.
    """
    mode = RoundingMode.parse(mode)
    values = np.asarray(values, dtype=np.float64)
    if mode is RoundingMode.STOCHASTIC and rng is None:
        raise ValueError("stochastic rounding requires a seeded random generator")
    _check_finite(values)
    scaled = np.ldexp(values, fmt.frac_bits)
    if mode is RoundingMode.TRUNCATE:
        n = np.floor(scaled)
    elif mode is RoundingMode.NEAREST:
        n = np.copysign(np.floor(np.abs(scaled) + 0.5), scaled)
    else:
        n = np.floor(scaled)
        frac = scaled - n
        n = n + (rng.random(values.shape) < frac)
    n = np.clip(n, fmt.min_int, fmt.max_int)
    # copysign above can yield -0.0
    return np.ldexp(n, -fmt.frac_bits) + 0.0


def quantize_value(x, fmt: FixedPointFormat, mode, rng=None) -> float:
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    return float(quantize_tensor(np.float64(x), fmt, mode, rng))


def quantize_group(values, fmt, mode, rng=None):
    """Like :func:`quantize_tensor` but passes values through for ``fmt=None`` (fp32)."""
    if fmt is None:
        return np.asarray(values, dtype=np.float64)
    return quantize_tensor(values, fmt, mode, rng)


def to_raw(values, fmt: FixedPointFormat) -> np.ndarray:
    """Integer codes of grid values (used only for serialization)."""
    values = np.asarray(values, dtype=np.float64)
    if not fmt.contains(values):
        raise ValueError(f"values are not on the {fmt} grid")
    return np.ldexp(values, fmt.frac_bits).astype(np.int64)


def from_raw(codes, fmt: FixedPointFormat) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size and (codes.min() < fmt.min_int or codes.max() > fmt.max_int):
        raise ValueError(f"integer codes out of range for {fmt}")
    return np.ldexp(codes.astype(np.float64), -fmt.frac_bits)


def min_frac_bits(value: float, cap: int) -> int:
    """Smallest fractional width that represents ``value`` exactly, capped at ``cap``."""
    for f in range(cap + 1):
        scaled = math.ldexp(value, f)
        if scaled == math.floor(scaled):
            return f
    return cap
