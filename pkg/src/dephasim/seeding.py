"""Deterministic seed derivation and platform-stable random streams.

All randomness in the package flows through :func:`derive_seed` and the two
stream helpers below. Uniform doubles come from numpy's PCG64 bit generator,
whose output is fixed by its seed. Gaussian variates are produced from that
uniform stream with the Box-Muller transform rather than numpy's ziggurat
sampler, so the mapping from seed to tilt values is written down here and
does not depend on sampler internals.
"""

import numpy as np


def derive_seed(*keys: int) -> int:
    """Hash a tuple of non-negative integers into a 64-bit seed.

    ``derive_seed(master, a, b)`` and ``derive_seed(master, a, c)`` are
    independent streams for ``b != c``. Uses SeedSequence spawn keys.
    """
    if not keys:
        raise ValueError("derive_seed needs at least one key")
    for k in keys:
        if int(k) < 0:
            raise ValueError(f"seed keys must be non-negative, got {k}")
    seq = np.random.SeedSequence(entropy=int(keys[0]), spawn_key=tuple(int(k) for k in keys[1:]))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def uniform_stream(seed: int, size: int) -> np.ndarray:
    """``size`` doubles uniform on [0, 1)."""
    return np.random.Generator(np.random.PCG64(seed)).random(size)


def gaussian_stream(seed: int, size: int) -> np.ndarray:
    """``size`` standard normal variates via Box-Muller on :func:`uniform_stream`."""
    pairs = (size + 1) // 2
    u = uniform_stream(seed, 2 * pairs)
    radius = np.sqrt(-2.0 * np.log1p(-u[:pairs]))  # 1 - u in (0, 1]
    angle = 2.0 * np.pi * u[pairs:]
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return z[:size]
