# A tour of the sampler: field -> chaos -> welding homeomorphism.
import numpy as np

from gmcweld import gmc, sleweld
from gmcweld.spectra import evaluate, sample_lgf, truncated_variance

gamma, order, size = 1.0, 256, 4096
rng = np.random.default_rng(2024)

# one draw of the truncated log-correlated field
h = sample_lgf(order, rng)
grid = evaluate(h, size, 0.5)
print("field range on the grid: %.2f .. %.2f" % (grid.values.min(), grid.values.max()))
print("pointwise variance at N=%d: %.3f (2 log N + 2 euler gamma = %.3f)"
      % (order, truncated_variance(order, 1).values[0], 2 * np.log(order) + 2 * np.euler_gamma))

# chaos measure, normalized to total mass one
mu = gmc.normalize(gmc.gmc_measure(grid, truncated_variance(order, size, 0.5), gamma))
heaviest = np.argsort(mu.masses)[-5:]
print("five heaviest cells carry %.1f%% of the mass" % (100 * mu.masses[heaviest].sum()))

# the welding homeomorphism sends arclength to normalized mass
phi = gmc.welding_homeo(mu)
for t in (np.pi / 2, np.pi, 3 * np.pi / 2):
    print("phi(%.3f) = %.3f" % (t, phi(t)))

# SLE-type weldings: two independent fields, one with a marked point at 1
ens = sleweld.sample_ensemble(sleweld.sle_generator(gamma, 128), 400, seed=7)
vals = np.array([np.mod(s.map(np.pi), 2 * np.pi) for s in ens])
print("psi(pi) over 400 samples: mean %.3f, quartiles %s" % (vals.mean(), np.round(np.percentile(vals, [25, 50, 75]), 3)))

# compare with the rotation-averaged construction
rot = sleweld.sample_ensemble(sleweld.rotated_generator(gamma, 128), 400, seed=8)
rep = sleweld.marginal_diagnostics(ens, [np.pi / 2, np.pi], other=rot)
for row in rep.rows:
    print("angle %.3f: KS %.3f (critical %.3f), supports overlap: %s"
          % (row["angle"], row["ks"], row["critical"], row["support_overlap"]))
