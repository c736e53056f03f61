"""Band edge of the uniform strip at omega2 = 1.

At xi = 0 the two waves +-sqrt(omega2 - 1) merge.  The characteristic value
has a Jordan chain of length two: besides the periodic mode psi_1 there is a
mode growing linearly in x1, and one cell shift acts as a 2x2 Jordan block.
"""

import numpy as np

from floquet_waveguide import analyze, desk2, flux, group_velocity, modes_from_chain, translation_matrix

an = analyze(desk2())
cv, chains = next(p for p in an.charvals if abs(p[0].xi) < 1e-8)
print("xi =", cv.xi, " partial multiplicities", cv.partial_null_multiplicities, " kernel dim", cv.kernel_dim)

v0, v1 = modes_from_chain(cv, chains, an.cell)
T = translation_matrix([v0, v1])
print("translation by one cell in the chain basis:\n", np.round(T.raw, 12))
print("Jordan form:\n", np.round(T.jordan, 12))

# the band is flat at the edge, so no energy is carried by either chain mode alone
print("lambda'(0) =", group_velocity(v0)[0])

# the flux form still separates two combinations: one outgoing, one incoming
prop = an.family.propagating
print("q-Gram of the normalized pair:\n", np.round([[flux(b, a) for a in prop] for b in prop], 12))
