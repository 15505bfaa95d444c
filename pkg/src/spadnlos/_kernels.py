from __future__ import annotations

import logging
import math
import time

import numba
import numpy as np
from numba import njit, prange

logger = logging.getLogger(__name__)


def configure_workers(workers: int = 0) -> int:
    """Set the kernel thread count; 0 means every available core."""
    available = numba.config.NUMBA_NUM_THREADS
    threads = available if workers <= 0 else min(workers, available)
    numba.set_num_threads(threads)
    return threads


@njit(parallel=True)
def _gather(histograms, walls, spot, xs, ys, zs, reference_bin, path_per_bin, attenuation):
    pixels, bins = histograms.shape
    out = np.zeros((xs.shape[0], ys.shape[0], zs.shape[0]))

    for ix in prange(xs.shape[0]):
        x = xs[ix]
        for iy in range(ys.shape[0]):
            y = ys[iy]
            for iz in range(zs.shape[0]):
                z = zs[iz]
                r1 = math.sqrt((x - spot[0]) ** 2 + (y - spot[1]) ** 2 + (z - spot[2]) ** 2)
                total = 0.0
                for p in range(pixels):
                    r2 = math.sqrt((x - walls[p, 0]) ** 2 + (y - walls[p, 1]) ** 2 + (z - walls[p, 2]) ** 2)
                    position = reference_bin + (r1 + r2) / path_per_bin
                    if position < 0.0 or position > bins - 1:
                        continue
                    lo = int(math.floor(position))
                    frac = position - lo
                    value = histograms[p, lo]
                    if lo < bins - 1:
                        value = value * (1.0 - frac) + histograms[p, lo + 1] * frac
                    if attenuation:
                        value *= r1 * r1 * r2 * r2
                    total += value
                out[ix, iy, iz] = total

    return out


def gather(
    histograms: np.ndarray,
    walls: np.ndarray,
    spot: np.ndarray,
    axes: tuple[np.ndarray, np.ndarray, np.ndarray],
    reference_bin: int,
    path_per_bin: float,
    attenuation: bool = False,
) -> np.ndarray:
    """
    For every voxel, sum each pixel's histogram sampled at the laser-spot -> voxel -> wall-point delay.

    `histograms` is (pixels, bins) and real; voxels whose delay falls outside the histogram contribute 0.
    Each voxel's sum runs over pixels in a fixed order, so results do not depend on the thread count.
    """
    xs, ys, zs = (np.ascontiguousarray(a, dtype=np.float64) for a in axes)
    started = time.perf_counter()

    out = _gather(
        np.ascontiguousarray(histograms, dtype=np.float64),
        np.ascontiguousarray(walls, dtype=np.float64),
        np.ascontiguousarray(spot, dtype=np.float64),
        xs,
        ys,
        zs,
        float(reference_bin),
        float(path_per_bin),
        bool(attenuation),
    )

    elapsed = time.perf_counter() - started
    paths = len(xs) * len(ys) * len(zs) * len(walls)
    logger.info(f"Back-projected {paths:,} voxel-pixel paths in {elapsed:.2f}s ({paths / max(elapsed, 1e-9):,.0f} paths/s)")
    return out
