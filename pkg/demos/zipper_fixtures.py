# Weldings of explicit curves with the geodesic zipper.
from gmcweld.homeo import moebius, sup_distance, wp_energy
from gmcweld.weldsolve import circle, ellipse, fixture_curves, normalize_curve, zipper_welding

# an off-center circle welds to a Moebius map, with conformal radius 1 - c^2
psi, scale = zipper_welding(circle(256, 1.0, 0.5))
print("off-center circle: distance to moebius(0.5) %.1e, conformal radius %.6f" % (sup_distance(psi, moebius(0.5)), scale))

# second order convergence under refinement
levels = [fixture_curves(m) for m in (128, 256, 512)]
for i, c in enumerate(levels[0]):
    name = c.name
    maps = [zipper_welding(lv[i])[0] for lv in levels]
    d1, d2 = sup_distance(maps[0], maps[1]), sup_distance(maps[1], maps[2])
    print("%-18s refinement ratio %.2f" % (name, d1 / d2 if d2 > 0 else float("inf")))

# the ellipse welding has finite, stable WP energy
for m in (128, 256, 512, 1024):
    psi, scale = zipper_welding(ellipse(m))
    print("ellipse m=%4d: wp_energy %.5f, conformal radius %.6f" % (m, wp_energy(psi), scale))
e = ellipse(256)
print("rescaled ellipse radius: %.6f" % zipper_welding(normalize_curve(e, zipper_welding(e)[1]))[1])
