"""Domain types: experiment grid, parameter space with trim history, models.

All types are immutable after construction and safe for concurrent reads.
Parameter fields use offset-binary encoding: a decoded value is

    signed_offset + pre_eval_offset + (fixed_prefix . raw_bits  as unsigned)

so the remaining value set is always one contiguous integer interval and
quarters taken on the two most significant active bits are contiguous
sub-intervals.  Signed ranges set signed_offset = -2**(bits-1) rather than
using two's complement for the same reason.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import expr
from .errors import PhasefitError, RangeError


@dataclass(frozen=True)
class DomainGrid:
    """Complete rectangular grid of integer coordinates, row-major order.

    Dimension j runs over 0..dims[j]-1.  Sizes need not be powers of two;
    the gate-level oracle is the only consumer that insists on that.
    """

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims or any(d < 1 for d in dims):
            raise PhasefitError(f"grid dims must be positive, got {dims}")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def total_size(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    def coordinate_arrays(self) -> list[np.ndarray]:
        """One int64 array per dimension, each of length total_size."""
        idx = np.indices(self.dims, dtype=np.int64)
        return [idx[j].reshape(-1) for j in range(self.ndim)]

    def points(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(d) for d in self.dims))


@dataclass(frozen=True)
class DataTable:
    """The experiment f: one integer sample per grid point."""

    grid: DomainGrid
    values: np.ndarray
    provenance: str = "ingested"

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.dtype == object or not np.issubdtype(values.dtype, np.integer):
            raise PhasefitError("data values must be integers")
        values = values.astype(np.int64).reshape(-1)
        if values.size != self.grid.total_size:
            raise PhasefitError(
                f"expected {self.grid.total_size} values for grid {self.grid.dims}, "
                f"got {values.size}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_max_abs", int(np.abs(values).max()) if values.size else 0)

    @property
    def max_abs(self) -> int:
        return self._max_abs


@dataclass(frozen=True)
class NoiseSpec:
    """Deterministic integer noise stream: none, uniform(+-w) or rounded gaussian."""

    kind: str = "none"  # none | uniform | gaussian
    half_width: int = 0
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "uniform", "gaussian"):
            raise PhasefitError(f"unknown noise kind {self.kind!r}")
        if self.half_width < 0 or self.sigma < 0:
            raise PhasefitError("noise width/sigma must be nonnegative")

    def sample(self, size: int) -> np.ndarray:
        """Identical spec + seed gives the identical stream."""
        if self.kind == "none":
            return np.zeros(size, dtype=np.int64)
        rng = np.random.default_rng(self.seed)
        if self.kind == "uniform":
            return rng.integers(-self.half_width, self.half_width + 1, size=size, dtype=np.int64)
        return np.rint(rng.normal(0.0, self.sigma, size=size)).astype(np.int64)

    def describe(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "uniform":
            return f"uniform:{self.half_width}"
        return f"gaussian:{self.sigma}"


@dataclass(frozen=True)
class ParamField:
    """One parameter's bit budget plus the rebindings accumulated by trimming."""

    name: str
    total_bits: int
    active_bits: int = -1  # default: all bits active
    fixed_prefix: str = ""
    pre_eval_offset: int = 0
    signed_offset: int = 0
    finished: bool = False

    def __post_init__(self):
        if self.active_bits < 0:
            object.__setattr__(self, "active_bits", self.total_bits)
        if self.total_bits < 1:
            raise PhasefitError(f"field {self.name!r}: need at least 1 bit")
        if not (0 <= self.active_bits <= self.total_bits):
            raise PhasefitError(f"field {self.name!r}: active_bits out of range")
        if len(self.fixed_prefix) != self.total_bits - self.active_bits:
            raise PhasefitError(
                f"field {self.name!r}: prefix length {len(self.fixed_prefix)} "
                f"!= {self.total_bits - self.active_bits}"
            )
        if self.fixed_prefix.strip("01"):
            raise PhasefitError(f"field {self.name!r}: prefix must be a bit string")
        lo, hi = self.value_range()
        full_lo = self.signed_offset
        full_hi = self.signed_offset + 2**self.total_bits - 1
        if lo < full_lo or hi > full_hi:
            raise PhasefitError(
                f"field {self.name!r}: decoded range [{lo},{hi}] leaves "
                f"original range [{full_lo},{full_hi}]"
            )

    @classmethod
    def signed(cls, name: str, bits: int) -> "ParamField":
        """Fresh field over the signed range [-2**(bits-1), 2**(bits-1)-1]."""
        return cls(name=name, total_bits=bits, signed_offset=-(2 ** (bits - 1)))

    @property
    def size(self) -> int:
        return 2**self.active_bits

    def base_value(self) -> int:
        prefix_value = int(self.fixed_prefix, 2) if self.fixed_prefix else 0
        return self.signed_offset + self.pre_eval_offset + (prefix_value << self.active_bits)

    def decode(self, raw: int) -> int:
        if not (0 <= raw < self.size):
            raise RangeError(
                f"field {self.name!r}: raw value {raw} needs more than "
                f"{self.active_bits} bits"
            )
        return self.base_value() + raw

    def value_range(self) -> tuple[int, int]:
        base = self.base_value()
        return base, base + self.size - 1

    def values(self) -> range:
        lo, hi = self.value_range()
        return range(lo, hi + 1)


def decode_parameter(field: ParamField, raw: int) -> int:
    return field.decode(raw)


@dataclass(frozen=True)
class ParameterSpace:
    """Ordered parameter fields; |Y| is the product of the active-bit sizes."""

    fields: tuple[ParamField, ...]

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise PhasefitError(f"duplicate parameter names in {names}")

    @classmethod
    def fresh(cls, bits: Sequence[tuple[str, int]], signed: Sequence[str] = ()) -> "ParameterSpace":
        fields = []
        for name, b in bits:
            if name in signed:
                fields.append(ParamField.signed(name, b))
            else:
                fields.append(ParamField(name=name, total_bits=b))
        return cls(tuple(fields))

    @property
    def size(self) -> int:
        n = 1
        for f in self.fields:
            n *= f.size
        return n

    @property
    def n_params(self) -> int:
        return len(self.fields)

    def field_index(self, name: str) -> int:
        for i, f in enumerate(self.fields):
            if f.name == name:
                return i
        raise PhasefitError(f"no parameter named {name!r}")

    def with_field(self, index: int, new_field: ParamField) -> "ParameterSpace":
        fields = list(self.fields)
        fields[index] = new_field
        return ParameterSpace(tuple(fields))

    def raw_matrix(self) -> np.ndarray:
        """(|Y|, k) raw assignments in lexicographic enumeration order."""
        n = self.size
        out = np.empty((n, len(self.fields)), dtype=np.int64)
        stride = n
        for j, f in enumerate(self.fields):
            stride //= f.size
            out[:, j] = (np.arange(n, dtype=np.int64) // stride) % f.size
        return out

    def decoded_matrix(self) -> np.ndarray:
        """(|Y|, k) decoded parameter vectors in enumeration order."""
        raw = self.raw_matrix()
        for j, f in enumerate(self.fields):
            raw[:, j] += f.base_value()
        return raw

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        bases = [f.base_value() for f in self.fields]
        for raw in itertools.product(*(range(f.size) for f in self.fields)):
            yield tuple(b + r for b, r in zip(bases, raw))

    def token(self) -> tuple:
        """Hashable fingerprint of the current trim state."""
        return tuple(
            (f.name, f.total_bits, f.active_bits, f.fixed_prefix,
             f.pre_eval_offset, f.signed_offset, f.finished)
            for f in self.fields
        )

    def signature(self) -> tuple[tuple[int, int], ...]:
        """Per-field decoded (lo, hi) ranges; used to align fit traces."""
        return tuple(f.value_range() for f in self.fields)

    def describe(self) -> str:
        parts = []
        for f in self.fields:
            lo, hi = f.value_range()
            parts.append(f"{f.name}=[{lo},{hi}]" if lo != hi else f"{f.name}={lo}")
        return " ".join(parts)


def enumerate_parameters(space: ParameterSpace) -> Iterator[tuple[int, ...]]:
    return space.enumerate()


@dataclass(frozen=True)
class TrialModel:
    """Parsed trial function g_y; evaluates to an exact integer."""

    source: str
    ast: expr.Node
    n_vars: int
    n_params: int

    @classmethod
    def from_source(cls, source: str, n_vars: int, n_params: int) -> "TrialModel":
        return cls(source, expr.parse(source, (n_vars, n_params)), n_vars, n_params)

    @property
    def arity(self) -> tuple[int, int]:
        return (self.n_vars, self.n_params)

    def evaluate(self, x: Sequence[int], y: Sequence[int]) -> int:
        if len(x) != self.n_vars or len(y) != self.n_params:
            raise PhasefitError(
                f"arity mismatch: model takes ({self.n_vars},{self.n_params}) "
                f"got ({len(x)},{len(y)})"
            )
        return expr.evaluate(self.ast, tuple(x), tuple(y))

    def evaluate_on(self, xs, ys) -> np.ndarray:
        """Vectorized evaluation; xs/ys broadcast (see expr.evaluate_on_grid)."""
        if len(xs) != self.n_vars or len(ys) != self.n_params:
            raise PhasefitError(
                f"arity mismatch: model takes ({self.n_vars},{self.n_params}) "
                f"got ({len(xs)},{len(ys)})"
            )
        return expr.evaluate_on_grid(self.ast, xs, ys)

    def value_bounds(self, grid: DomainGrid, space: ParameterSpace) -> tuple[int, int]:
        x_ranges = [(0, d - 1) for d in grid.dims]
        y_ranges = [f.value_range() for f in space.fields]
        return expr.value_bounds(self.ast, x_ranges, y_ranges)


@dataclass(frozen=True)
class Sensitivity:
    """Phase modulus M = 2**exponent used by the shape measure."""

    exponent: int

    def __post_init__(self):
        if self.exponent < 1:
            raise PhasefitError("sensitivity exponent must be >= 1")

    @property
    def modulus(self) -> int:
        return 2**self.exponent
