# Deforming the welding law by a smooth homeomorphism: does the density
# reweight the undeformed samples correctly?
from gmcweld.homeo import sine_perturbation
from gmcweld.sleweld import importance_identity

for side, phi in (("pre", sine_perturbation(0.2)), ("post", sine_perturbation(0.3, 2))):
    rep = importance_identity(1.0, phi, samples=5000, order=128, dim=64, seed=0, side=side)
    print("%s-composition, E[rho^2] = %.4f" % (side, rep.params["expected_rho_squared"]))
    for r in rep.rows:
        if "z" in r:
            print("  %-22s E1 %.4f  E2 %.4f  z %.2f" % (r["statistic"], r["E1"], r["E2"], r["z"]))
        else:
            print("  %-22s %.4f +- %.4f" % (r["statistic"], r["E2"], r["se2"]))
