"""Deterministic sampling, orbit streaming, and the worker-pool map.

Everything here is a pure function of (seed, sample index): per-sample
Philox streams are keyed by SeedSequence((seed, index)), so results are
bit-identical regardless of chunking or thread count.

The doubling family needs special treatment: float64 iteration of
2x mod 1 shifts one mantissa bit per step and collapses to 0 within 53
steps.  ``DoublingBitOrbit`` instead simulates the exact orbit of a real
number with an infinite random binary expansion by sliding a 53-bit
window: x_{i+1} = (2 x_i mod 1) + b * 2^-53 with a fresh stream bit b.
All involved float operations are exact, so the produced sequence is the
true orbit of the (implicitly defined) random seed point.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import families

CHUNK = 256  # fixed chunk size keeps reductions independent of threads
_BOTTOM_BIT = 2.0 ** -53


def sample_generator(seed, index):
    """Counter-based per-sample RNG stream."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((int(seed), int(index))))
    )


def stratified_parameters(lo, hi, count, seed):
    """One jittered sample per equal subinterval of [lo, hi]."""
    jitter = np.empty(count)
    for i in range(count):
        jitter[i] = sample_generator(seed, i).random()
    return lo + (hi - lo) * (np.arange(count) + jitter) / count


class DoublingBitOrbit:
    """Exact sliding-window orbit of 2x mod 1 over a batch of samples.

    ``x0`` fixes the leading 53 bits of each seed point (pass stratified
    parameters here); the remaining binary expansion comes from the
    per-sample bit streams, so the simulated point lies in
    [x0, x0 + 2^-53).
    """

    def __init__(self, seed, indices, n_steps, x0=None):
        words = (n_steps + 64) // 64
        self._bits = np.empty((len(indices), words), dtype=np.uint64)
        starts = np.empty(len(indices))
        for row, idx in enumerate(indices):
            g = sample_generator(seed, idx)
            starts[row] = g.random()
            self._bits[row] = g.integers(0, 2 ** 64, size=words, dtype=np.uint64)
        self._step = 0
        self.x = starts if x0 is None else np.asarray(x0, dtype=float).copy()

    def step(self):
        """Advance every sample by one map application."""
        word = self._bits[:, self._step >> 6]
        b = (word >> np.uint64(self._step & 63)) & np.uint64(1)
        self._step += 1
        y = 2.0 * self.x
        y -= np.floor(y)
        self.x = y + b.astype(np.float64) * _BOTTOM_BIT
        return self.x


class PlainOrbit:
    """Float iteration of T_a per sample; fine off exactly-binary slopes."""

    def __init__(self, family, a_values, x0=None):
        self.family = family
        self.a = np.asarray(a_values, dtype=float)
        if x0 is None:
            self.x = np.asarray(families.x0_value(family, self.a), dtype=float) + np.zeros_like(self.a)
        else:
            self.x = np.asarray(x0, dtype=float).copy()
        self._step_fn = families.make_stepper(family, self.a)

    def step(self):
        self.x = self._step_fn(self.x)
        return self.x


def orbit_stream(family, a_values, n_steps, seed, indices, x0=None):
    """Streaming orbit engine with the doubling-collapse workaround.

    For ``constant_doubling`` the sampled parameter (or the supplied
    start) only fixes the top 53 bits of the seed point and the
    bit-window simulation supplies the rest; other families iterate in
    plain float64 where roundoff is statistically benign.
    """
    if family.kind == "constant_doubling":
        start = x0
        if start is None:
            start = np.asarray(
                families.x0_value(family, np.asarray(a_values, dtype=float)),
                dtype=float,
            )
        return DoublingBitOrbit(seed, indices, n_steps, x0=start)
    return PlainOrbit(family, a_values, x0=x0)


def parallel_map(fn, items, threads=1):
    """Ordered map over items, optionally on a thread pool.

    The reduction is a deterministic ordered concatenation, so the result
    does not depend on the thread count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunk_indices(count, chunk=CHUNK):
    """[(start, stop), ...] covering range(count) in fixed-size chunks."""
    return [(s, min(s + chunk, count)) for s in range(0, count, chunk)]
