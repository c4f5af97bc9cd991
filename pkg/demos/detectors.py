# Absorbing slabs and matched layers: what they reflect, transmit and absorb.
import math

import numpy as np

from bohmarrival.detectors import (
    PMLProfile,
    SlabDetector,
    mean_incident_slope,
    pml_detection_probability,
    scattering_reflection,
    slab_absorption_budget,
    slab_scatter,
)

k = 2 * math.pi
slab = SlabDetector(N=0.5, f0=0.05 + 0.2j, d=1.5)
print("theta   |R|^2     |T|^2     absorbed  budget check")
for theta in np.linspace(0, 1.3, 6):
    res = slab_scatter(k, theta, slab)
    b = slab_absorption_budget(k, theta, slab)
    print(f"{theta:5.2f}  {abs(res.R)**2:.6f}  {abs(res.T)**2:.6f}  {res.absorption:.6f}  "
          f"{b['flux_in_minus_out'] - b['volume_absorption']:+.1e}")

# reflection tilts the incoming Bohmian paths
print("mean slope dz/dx in front of the slab:", mean_incident_slope(k, 0.6, slab), "free:", 1 / math.tan(0.6))

# matched layer
prof = PMLProfile(chi0=1.0, d=2.0, a=25.0)
print("design wave |R|     =", abs(scattering_reflection(prof, prof.kz)))
print("20% faster wave |R| =", abs(scattering_reflection(prof, 1.2 * prof.kz)))
print("backward wave |R|   =", abs(scattering_reflection(prof, prof.kz, incoming="backward")))
for a in (25.0, 1e4, 1e8):
    p = PMLProfile(1.0, 2.0, a)
    print(f"a={a:g}: smooth {pml_detection_probability(p):.10f}  step {pml_detection_probability(p, smooth=False):.10f}")
