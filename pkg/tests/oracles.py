"""Independent numpy reference implementations used as test oracles.

Everything here is written directly from the closed-form definitions, with
plain float64 numpy, so it shares no code path with the package.
"""

import math

import numpy as np


def huber_ref(a, b, delta):
    """Aggregate-norm Huber on mean L1/L2 norms of the difference."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    d1 = np.mean(np.abs(d))
    d2 = np.mean(d * d)
    if d1 <= delta:
        return 0.5 * d2
    return delta * d1 - 0.5 * delta * delta


def huber_elementwise_ref(a, b, delta):
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    ad = np.abs(d)
    per = np.where(ad <= delta, 0.5 * d * d, delta * ad - 0.5 * delta * delta)
    return float(np.mean(per))


def relation_ref(gen_t, gt_t, neighbors, delta, layers):
    """Compose the relation terms from huber_ref alone.

    gen_t/gt_t: list of per-level arrays; neighbors: {n: list of arrays}.
    Returns {(n, j): loss} with 1-based level index j.
    """
    out = {}
    for n, nb in neighbors.items():
        for j in layers:
            rel_gen = huber_ref(gen_t[j - 1], nb[j - 1], delta)
            rel_gt = huber_ref(gt_t[j - 1], nb[j - 1], delta)
            out[(n, j)] = huber_ref(rel_gen, rel_gt, delta)
    return out


def total_ref(content, relation, pixel, w_c, w_r, w_p, n_layers, radius):
    total = w_p * pixel
    if content:
        total += w_c * sum(content.values()) / n_layers
    if relation:
        total += w_r * sum(relation.values()) / (2 * radius * n_layers)
    return total


def psnr_ref(a, b):
    mse = np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window_ref(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-0.5 * (x / sigma) ** 2)
    w = np.outer(k, k)
    return w / w.sum()


def ssim_ref(x, y, k1=0.01, k2=0.03):
    """Brute-force windowed SSIM on a single channel: explicit loops over
    every valid 11x11 window, weighted moments per the standard definition."""
    x = np.asarray(x, np.float64)
    y = np.asarray(y, np.float64)
    w = gaussian_window_ref()
    size = w.shape[0]
    c1, c2 = k1**2, k2**2
    h, wd = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(wd - size + 1):
            px = x[i : i + size, j : j + size]
            py = y[i : i + size, j : j + size]
            mx = np.sum(w * px)
            my = np.sum(w * py)
            vx = np.sum(w * px * px) - mx * mx
            vy = np.sum(w * py * py) - my * my
            cxy = np.sum(w * px * py) - mx * my
            vals.append(
                ((2 * mx * my + c1) * (2 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


def ssim_rgb_ref(x, y):
    return float(np.mean([ssim_ref(x[:, :, c], y[:, :, c]) for c in range(3)]))
