"""Quadratic interleaver: ``pi(i) = k * i * (i + 1) / 2 mod N``."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class InterleaverSpec:
    length: int = 4096
    multiplier: int = 1
    perm: np.ndarray = field(init=False, repr=False, compare=False)
    inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n, k = int(self.length), int(self.multiplier)
        if n < 1 or n & (n - 1):
            raise ConfigError(f"length must be a power of 2, got {n}", "length")
        if k < 1 or k % 2 == 0:
            raise ConfigError(f"multiplier must be an odd positive integer, got {k}", "multiplier")
        i = np.arange(n, dtype=np.int64)
        perm = (k * ((i * (i + 1) // 2) % n)) % n
        inv = np.empty_like(perm)
        inv[perm] = i
        perm.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "inverse", inv)


def quadratic_permute(x, spec):
    """Permute a sequence (element ``i`` goes to position ``pi(i)``) or map an index."""
    if np.ndim(x) == 0:
        return int(spec.perm[int(x)])
    x = np.asarray(x)
    if x.shape[0] != spec.length:
        raise ValueError(f"sequence length {x.shape[0]} != interleaver length {spec.length}")
    out = np.empty_like(x)
    out[spec.perm] = x
    return out


def quadratic_unpermute(y, spec):
    y = np.asarray(y)
    if y.shape[0] != spec.length:
        raise ValueError(f"sequence length {y.shape[0]} != interleaver length {spec.length}")
    return y[spec.perm]
