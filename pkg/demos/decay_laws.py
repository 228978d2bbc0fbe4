"""Compare eigenvalue decay of a strong and a weak attenuation law on a coarse grid.

Runs in well under a minute; use strong.json / weak.json with the CLI for the
full-size computation.
"""

from attenuspec.attenuation import nachman_smith_waag, thermo_viscous
from attenuspec.geometry import BallGeometry
from attenuspec.operator import discretize, gram
from attenuspec.spectra import compare_decay, eigen_spectrum, fit_power, fit_stretched

disc = discretize(BallGeometry(1.0, 0.2), 256, 0.2)
strong = eigen_spectrum(gram(thermo_viscous(1.0), disc)).eigenvalues
weak = eigen_spectrum(gram(nachman_smith_waag(1.0, 2.0, 1.0), disc)).eigenvalues
print(f"{disc.n_interior} source points")

st = fit_stretched(strong, 1 / 6, (5, 64))
pw = fit_power(weak, (5, len(weak) // 4))
print(f"thermo-viscous: exp(-{st.c:.2f} n^(1/6)), R2 = {st.r_squared:.4f}")
print(f"NSW:            n^-{pw.p:.3f},             R2 = {pw.r_squared:.4f}")
print(f"strong below weak from n = {compare_decay(weak, strong).crossover}")

for n in (1, 10, 50, 100):
    print(f"  lambda_{n:<3d} strong {strong[n - 1]:.3e}   weak {weak[n - 1]:.3e}")
