"""Layered medium in a band gap: boundary value problem and decay rate.

eps is 1 on the first half of each cell and 4 on the second.  At
omega2 = 0.3 no wave propagates, so the radiating solution of any boundary
problem decays, at the rate of the slowest evanescent mode.
"""

import numpy as np

from floquet_waveguide import (
    TraceOperatorSpec,
    analyze,
    assemble_F,
    check_estimates,
    desk3,
    solve_bvp,
    verify_disk_localization,
)

an = analyze(desk3())
fam = an.family
print("propagating modes:", fam.n_bar)
print("slowest decay Im xi_1 =", round(fam.family[0].xi.imag, 6))

# high-lying values sit inside small disks around i kappa_n
rep = verify_disk_localization(an.raws, an.cover, an.cell)
print(f"cover from N = {an.cover.N}: {len(an.cover.components)} components, all inside: {rep.all_inside}, "
      f"counts match: {rep.counts_match}")

est = check_estimates(fam, an.cover, count=5)
print("estimate margin over the five lowest covered modes:", f"{est.margin:.3e}")

spec = TraceOperatorSpec.robin(1.0)
F = assemble_F(fam.family, spec)
f = np.zeros(F.n, dtype=complex)
f[0] = 1.0
sol = solve_bvp(f, spec, F, fam)
print("cell norms for x1 in [0, 8):", np.round(sol.cell_norms(np.arange(8.0)), 6))
print("fitted decay rate on [2, 6]:", round(sol.decay_rate(2.0, 6.0), 6))
