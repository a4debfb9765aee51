"""
Warping an F0 contour with momenta
----------------------------------
The converter never edits F0 values directly. It predicts one momentum per
frame and shoots the contour along a kernel flow in Hz space: frames with
similar pitch move together, frames far apart in pitch move independently.

This script walks through the kernel, the identity case, the closed form for
a single frame, and a two-frame example.
"""
import numpy as np

from vcgan.warp import WarpConfig, gaussian_kernel, generate_f0, geodesic_path

cfg = WarpConfig()
print(cfg)

#%%
# The Gaussian kernel couples frames by pitch distance. With sigma = 50 Hz
# two frames 50 Hz apart share e^-1 of each other's momentum.
K, d = gaussian_kernel([150.0, 100.0, 200.0], cfg.sigma)
np.set_printoptions(precision=4, suppress=True)
print(d)
print(K)

#%%
# Zero momenta leave any contour untouched, bit for bit.
rng = np.random.default_rng(0)
p = 120 + 20 * np.sin(np.linspace(0, 3 * np.pi, 128)) + rng.normal(0, 1, 128)
print("identity:", np.array_equal(generate_f0(np.zeros(128), p, cfg), p))

#%%
# A single frame has K = [[1]] and the momentum never changes, so three
# unit steps add 3 m: 100 Hz with m = 5 lands on 115 Hz.
print(generate_f0([5.0], [100.0], cfg))

#%%
# Two frames pushed apart. The momenta shrink as the frames separate, and
# the path records every intermediate step.
path, momenta = geodesic_path([2.0, -2.0], [100.0, 150.0], cfg)
for s, (x, m) in enumerate(zip(path, momenta)):
    print(f"step {s}: f0 = {x}, momenta = {m}")

#%%
# Momenta on the upper half of a phrase raise it more than the lower half.
# Every frame receives the kernel-weighted sum of all momenta, so dozens of
# small momenta add up to a shift of several Hz.
m = np.where(p > 120, 0.05, 0.0)
out = generate_f0(m, p, cfg)
print(f"mean shift above 120 Hz: {np.mean((out - p)[p > 120]):.2f} Hz")
print(f"mean shift below 120 Hz: {np.mean((out - p)[p <= 120]):.2f} Hz")
