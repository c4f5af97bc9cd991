# First arrivals of a free packet, and what spin does to them.
import numpy as np

from bohmarrival import (
    GaussianPacket,
    PlaneZ,
    SpinVector,
    WaveguideSpinField,
    full_signal_distribution,
    mc_first_arrival,
)
from bohmarrival.arrivals import expected_bin_mass
from bohmarrival.guidance import Disk
from bohmarrival.povm import gtz_sum_test

packet = GaussianPacket(sigma=1.0, momentum=(0, 0, 5.0))
screen = PlaneZ(10.0)
h = mc_first_arrival(packet, screen, 20000, seed=7, t_max=6.0, bins=30, threads=4)
flux = expected_bin_mass(packet, screen, h.bin_edges)
print(" t      MC      flux")
for t, m, f in zip(h.centers, h.counts["first"] / h.n_total, flux):
    if f > 1e-3:
        print(f"{t:4.2f}  {m:.4f}  {f:.4f}")

# a spin-1/2 packet in a waveguide: the full signal does not care about spin
tau = np.linspace(0.25, 10, 40)
full = {s: full_signal_distribution(WaveguideSpinField(SpinVector.axis(s)), Disk(2.0, 8.0), 1.0, tau).value
        for s in ("+z", "-z", "+x", "-x")}
print("full signal, max |P+z + P-z - P+x - P-x| =", gtz_sum_test(full, tau).max_deviation)

# the trajectories' first arrivals do
hists = {s: mc_first_arrival(WaveguideSpinField(SpinVector.axis(s)), PlaneZ(2.0), 2000, seed=i, t_max=12.0, bins=24, threads=4)
         for i, s in enumerate(("+z", "-z", "+x", "-x"))}
first = gtz_sum_test({s: hh.density("first") for s, hh in hists.items()}, hists["+z"].centers)
print(" tau   z-sum   x-sum")
for t, a, b in zip(hists["+z"].centers, first.lhs, first.rhs):
    print(f"{t:5.2f}  {a:.4f}  {b:.4f}")
