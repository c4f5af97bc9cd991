# Two forward plane waves whose superposition flows backwards at the origin.
import math

import numpy as np

from bohmarrival import BackflowPair, backflow_wavevectors, integrate_trajectory, quantum_potential

k = 2 * math.pi
pair = BackflowPair(*backflow_wavevectors(k, math.pi / 3, 9 * math.pi / 20))
print("alpha =", pair.alpha)
print("k1 =", pair.k1, " k2 =", pair.k2)

# both components move towards +z, yet the current at the origin does not
print("J(0) =", pair.current(np.zeros(3), 0.0))
print("local wave vector at 0:", pair.k_eff(), " |k_eff|/k =", np.linalg.norm(pair.k_eff()) / k)
print("Q(0) =", quantum_potential(pair, np.zeros(3), 0.0))

# a few trajectories through the backflow region
for x0 in (-0.2, 0.0, 0.2):
    tr = integrate_trajectory(pair, (x0, 0.0, 0.0), 0.0, 0.5, 1e-10, max_step=0.002)
    vz = tr.v[:, 2]
    print(f"x0={x0:+.1f}: z(0.5)={tr.x[-1, 2]:+.4f}  min vz={vz.min():+.3f}  max vz={vz.max():+.3f}")

# map of the sign of J_z on a small grid
xs = np.linspace(-0.5, 0.5, 11)
zs = np.linspace(-0.5, 0.5, 11)
X, Z = np.meshgrid(xs, zs, indexing="ij")
pts = np.stack([X, np.zeros_like(X), Z], axis=-1)
jz = pair.current(pts.reshape(-1, 3), 0.0)[:, 2].reshape(X.shape)
for row in jz.T[::-1]:
    print("".join("-" if v < 0 else "+" for v in row))
