"""Uniform strip: modes, flux normalization and the Dirichlet-to-Neumann map.

With eps = 1 every mode is exp(i xi x1) psi_n(x2) with xi^2 = omega2 - kappa_n^2,
so each number below can be checked by hand.
"""

import math

import numpy as np

from floquet_waveguide import TraceOperatorSpec, analyze, desk1, dtn_matrix, flux, monodromy

an = analyze(desk1())
fam = an.family

print("characteristic values in the validated strip")
for cv, _ in an.charvals:
    print(f"  xi = {cv.xi.real:+.6f} {cv.xi.imag:+.6f}i   multiplicities {cv.partial_null_multiplicities}")

# one right-moving and one left-moving wave, normalized so that q(v, v) = +-i
vp, vm = fam.plus[0], fam.minus[0]
print("q(v+, v+) =", np.round(flux(vp, vp), 12), "  q(v-, v-) =", np.round(flux(vm, vm), 12))

print("family quasi-momenta:", [complex(np.round(v.xi, 6)) for v in fam.family])

# evanescent modes decay like exp(-sqrt(kappa^2 - 2) x1); the slowest sets the monodromy radius
mf = monodromy(fam, TraceOperatorSpec.robin())
print(f"spectral radius on decaying traces {mf.spectral_radius_evanescent:.8f}  exp(-sqrt 2) = {math.exp(-math.sqrt(2)):.8f}")

# DtN is diagonal: i xi_n on psi_n
D = dtn_matrix(fam)
print("DtN diagonal:", np.round(np.diag(D), 6))
print("expected    :", np.round([1j] + [-math.sqrt(k * k - 2) for k in range(2, 7)], 6))
