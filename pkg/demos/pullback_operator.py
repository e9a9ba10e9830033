# How a circle homeomorphism acts on the field: the M and N blocks.
import numpy as np

from gmcweld.homeo import moebius, sine_perturbation, wp_energy
from gmcweld.pullback import build_density, compute_blocks, cov_defect, hs_norm_N, symplectic_defect
from gmcweld.sleweld import shift_pre

G = 2 ** 14

# Moebius maps preserve the field law up to a shift: N vanishes
for a in (0.2, 0.5, 0.3 + 0.4j):
    b = compute_blocks(moebius(a), 32, G)
    print("moebius(%s): |N|_HS = %.1e, symplectic defects %.1e %.1e" % ((a, hs_norm_N(b)) + symplectic_defect(b)))

# a first harmonic bump is Moebius to first order, a second harmonic is not
print("\n eps   |N|_HS (k=1)   |N|_HS (k=2)")
for eps in (0.05, 0.1, 0.2, 0.4):
    n1 = hs_norm_N(compute_blocks(sine_perturbation(eps, 1), 32, G))
    n2 = hs_norm_N(compute_blocks(sine_perturbation(eps / 2, 2), 32, G)) if eps < 0.4 else float("nan")
    print("%5.2f  %12.3e  %12.3e" % (eps, n1, n2))

phi = sine_perturbation(0.2)
print("\nsine(0.2): WP energy %.5f, covariance defect %.5f" % (wp_energy(phi), cov_defect(compute_blocks(phi, 32, G))))

# the Gaussian density on the first K modes
model = build_density(compute_blocks(phi, 16, G), shift_pre(phi, 1.0, 16))
x = np.random.default_rng(1).standard_normal((50000, 32))
rho = model.density(x)
print("largest eigenvalue of AA* - I: %.4f" % np.abs(model.eigvals).max())
print("E[rho] ~ %.4f, E[rho^2] ~ %.4f (closed form %.4f)" % (rho.mean(), (rho ** 2).mean(), model.expected_rho_squared()))
