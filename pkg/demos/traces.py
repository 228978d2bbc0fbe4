"""Pressure traces one unit from a small ball source, for each catalog model."""

import numpy as np

from attenuspec.attenuation import (
    linear,
    modified_szabo,
    nachman_smith_waag,
    power_law,
    propagation_speed,
    thermo_viscous,
)
from attenuspec.signals import ball_source, causality_check, front_time, fwhm, synthesize

src = ball_source(0.1)
detector = np.array([0.0, 0.0, 1.0])
print(f"{'model':<20} {'speed':>7} {'front':>7} {'peak':>10} {'fwhm':>7} {'acausal':>9}")
for m in (linear(1), power_law(1, 0.5), modified_szabo(1, 0.5), nachman_smith_waag(1, 2, 1), thermo_viscous(1)):
    tr = synthesize(m, src, detector)
    print(f"{m.name:<20} {propagation_speed(m):7.3f} {front_time(tr):7.3f} {np.max(np.abs(tr.values)):10.3e} "
          f"{fwhm(tr):7.3f} {causality_check(tr):9.1e}")
