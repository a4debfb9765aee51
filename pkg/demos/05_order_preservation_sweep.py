"""
Order preservation of the warp
------------------------------
A warp that keeps the ordering of F0 values is invertible on the contour's
value set. Here we sweep the level spacing ``g`` of quantized contours and
the size of the per-step displacement, and count ordering violations.

The bounded regime caps every step's largest displacement at
``g / (3 * steps)``; the sweep also shows what happens well past the cap.
"""
import numpy as np

from vcgan.warp import WarpConfig, geodesic_path

cfg = WarpConfig()
T = 128


def quantized_contour(rng, g):
    # smooth random phrase, snapped to a grid of spacing g
    t = np.linspace(0, 1, T)
    raw = 150 + 40 * np.sin(2 * np.pi * rng.uniform(0.3, 1.5) * t + rng.uniform(0, 6))
    raw += rng.normal(0, 15, 4) @ np.sin(np.outer(np.arange(1, 5), np.pi * t))
    return np.clip(np.round(raw / g) * g, g, 790)


def scaled_momenta(rng, p, cap):
    m = rng.normal(0, 1, T)
    scale = 1.0
    while True:
        path, _ = geodesic_path(m * scale, p, cfg)
        worst = np.max(np.abs(np.diff(path, axis=0)))
        if worst <= cap:
            return m * scale
        scale *= 0.9 * cap / worst


def violations(p, out):
    order = np.argsort(p, kind="stable")
    ps, os_ = p[order], out[order]
    distinct = np.diff(ps) > 0
    return int(np.sum(np.diff(os_)[distinct] <= 0))


#%%
# Inside the bounded regime there are no violations for any spacing.
rng = np.random.default_rng(0)
for g in (0.5, 1.0, 2.0, 5.0, 10.0):
    bad = 0
    for _ in range(200):
        p = quantized_contour(rng, g)
        m = scaled_momenta(rng, p, g / (3 * cfg.steps))
        path, _ = geodesic_path(m, p, cfg)
        bad += violations(p, path[-1])
    print(f"g={g:5.1f} Hz  bounded regime: {bad} violations / 200 contours")

#%%
# Far outside the cap, large momenta can fold the contour.
for mult in (1, 10, 100, 1000):
    bad = 0
    for _ in range(200):
        p = quantized_contour(rng, 1.0)
        m = scaled_momenta(rng, p, mult * 1.0 / (3 * cfg.steps))
        try:
            path, _ = geodesic_path(m, p, cfg)
        except ValueError:
            continue
        bad += violations(p, path[-1])
    print(f"cap x{mult:<5d} g=1 Hz: {bad} violations / 200 contours")
