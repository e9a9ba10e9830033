"""Conformal welding of Jordan curves by the geodesic zipper.

The zipper maps the complement of the first edge to the upper half-plane and
then opens the curve one vertex at a time with the slit map

    f_zeta(z) = sqrt((z / (1 - r z))^2 + d^2),  r = Re zeta / |zeta|^2,
                                               d = |zeta|^2 / Im zeta,

which removes the circular arc from 0 to zeta orthogonal to the real line.
Each opened vertex leaves two boundary images on the real line, one seen
from the bounded side and one from the unbounded side. Mapping both half
planes to the disk (bounded side) and the exterior disk (unbounded side),
with the first vertex sent to 1 in each, gives the welding g^{-1} o f.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .homeo import CircleMap

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class JordanCurve:
    vertices: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.array(self.vertices, dtype=complex).reshape(-1)
        if v.size >= 2 and v[0] == v[-1]:
            v = v[:-1]
        if v.size < 4:
            raise ValueError("a curve needs at least 4 vertices")
        if np.any(np.abs(np.diff(np.append(v, v[0]))) == 0):
            raise ValueError("consecutive vertices coincide")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def contains_origin(self) -> bool:
        return abs(winding_number(self.vertices)) == 1

    def to_dict(self) -> dict:
        return {"name": self.name, "vertices": [[float(z.real), float(z.imag)] for z in self.vertices]}

    @classmethod
    def from_dict(cls, d) -> "JordanCurve":
        if isinstance(d, list):
            d = {"vertices": d}
        v = np.array([complex(a, b) for a, b in d["vertices"]])
        return cls(v, d.get("name", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def winding_number(v: np.ndarray, z0: complex = 0.0) -> int:
    w = np.append(v, v[0]) - z0
    return int(np.rint(np.sum(np.angle(w[1:] / w[:-1])) / TWO_PI))


def signed_area(v: np.ndarray) -> float:
    w = np.append(v, v[0])
    return 0.5 * float(np.sum(w[:-1].real * w[1:].imag - w[1:].real * w[:-1].imag))


def resample_curve(curve: JordanCurve, m: int) -> JordanCurve:
    """m points equally spaced in arclength along the polygon, starting at
    vertex 0."""
    v = curve.vertices
    w = np.append(v, v[0])
    seg = np.abs(np.diff(w))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = s[-1] * np.arange(m) / m
    re = np.interp(t, s, w.real)
    im = np.interp(t, s, w.imag)
    return JordanCurve(re + 1j * im, curve.name)


def _sqrt_upper(u: np.ndarray) -> np.ndarray:
    """Square root with values in the closed upper half-plane."""
    return 1j * np.sqrt(-u)


def zipper_welding(curve: JordanCurve, m: int | None = None) -> tuple[CircleMap, float]:
    """Welding g^{-1} o f on the curve vertices and the conformal radius |f'(0)|.

    f maps the disk onto the bounded side with f(0) = 0 and g maps the
    exterior disk onto the unbounded side with g(inf) = inf; both send 1 to
    vertex 0. With ``m`` the polygon is first resampled by arclength.
    """
    if m is not None and m != curve.vertices.size:
        curve = resample_curve(curve, m)
    v = np.asarray(curve.vertices)
    if not curve.contains_origin:
        raise ValueError("curve must wind once around 0")
    if signed_area(v) < 0:
        v = np.concatenate([v[:1], v[:0:-1]])
    n = v.size
    z0, z1 = v[0], v[1]

    # points tracked: vertices 2..n-1 (unzipped), the origin and infinity
    with np.errstate(divide="ignore", invalid="ignore"):
        pts = 1j * np.sqrt((v[2:] - z1) / (v[2:] - z0))
    origin = 1j * np.sqrt(z1 / z0)
    dorigin = 1j * (z1 - z0) / (z0 * z0) / (2.0 * np.sqrt(z1 / z0))
    infinity = 1j + 0j
    # opened vertices keep an image from each side: inner (bounded side) on
    # the left of the direction of travel, outer on the right
    inner = np.zeros(n)
    outer = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    done[1] = True  # vertex 1 sits at the tip 0
    q = 0.0  # reciprocal of the image of vertex 0, which starts at infinity

    for k in range(2, n):
        zeta = pts[k - 2]
        if not zeta.imag > 1e-14 * max(1.0, abs(zeta)):
            raise ValueError(f"slit step failed at vertex {k}: curve is not simple")
        r = zeta.real / (zeta.real ** 2 + zeta.imag ** 2)
        d = abs(zeta) ** 2 / zeta.imag

        def wmap(z):
            return z / (1.0 - r * z)

        # unzipped points and the tracked interior points
        rest = pts[k - 1:]
        w = wmap(rest)
        pts[k - 1:] = _sqrt_upper(w * w + d * d)
        pts[k - 2] = 0.0
        wo = wmap(origin)
        fo = _sqrt_upper(wo * wo + d * d)
        dorigin = dorigin * wo / fo / (1.0 - r * origin) ** 2
        origin = fo
        wi = wmap(infinity)
        infinity = _sqrt_upper(wi * wi + d * d)
        # boundary images on the real line
        idx = np.nonzero(done)[0]
        for arr, side in ((inner, -1.0), (outer, 1.0)):
            x = arr[idx]
            wx = x / (1.0 - r * x)
            sgn = np.where(wx == 0.0, side, np.sign(wx))
            arr[idx] = sgn * np.sqrt(wx * wx + d * d)
        q = (q - r) / np.sqrt(1.0 + d * d * (q - r) ** 2)
        done[k] = True
        inner[k] = outer[k] = 0.0

    # last arc from the tip (vertex n-1) to vertex 0 is sent to a ray, then
    # the plane is folded; vertex 0 goes to infinity
    def final(z):
        w = z / (1.0 - q * z)
        return w * w

    wo = origin / (1.0 - q * origin)
    dorigin = dorigin * 2.0 * wo / (1.0 - q * origin) ** 2
    origin = final(origin)
    infinity = final(infinity)
    xin = final(inner)
    xout = final(outer)
    if origin.imag < 0:
        origin, infinity, xin, xout, dorigin = -origin, -infinity, -xin, -xout, -dorigin
    if not (origin.imag > 0 and infinity.imag < 0):
        raise ValueError("zipper did not separate the two sides of the curve")

    # half planes to the disk / exterior disk, vertex 0 (x = inf) to 1
    a_in = np.angle((xin - origin) / (xin - origin.conjugate()))
    a_out = np.angle((xout - infinity.conjugate()) / (xout - infinity))
    a_in[0] = a_out[0] = 0.0
    a_in = np.mod(a_in, TWO_PI)
    a_out = np.mod(a_out, TWO_PI)
    a_in[0] = a_out[0] = 0.0
    bad = np.nonzero((np.diff(a_in) <= 0) | (np.diff(a_out) <= 0))[0]
    if bad.size:
        raise ValueError(f"boundary correspondence folds at vertex {int(bad[0]) + 1}: "
                         "curve self-intersects or is under-resolved")
    scale = abs(1.0 / (dorigin / (origin - origin.conjugate())))
    return CircleMap(a_in, a_out), float(scale)


def normalize_curve(curve: JordanCurve, scale: float) -> JordanCurve:
    if not scale > 0:
        raise ValueError("scale must be positive")
    return JordanCurve(curve.vertices / scale, curve.name)


def circle(m: int, radius: float = 1.0, center: complex = 0.0, name: str = "") -> JordanCurve:
    t = TWO_PI * np.arange(m) / m
    return JordanCurve(center + radius * np.exp(1j * t), name or f"circle(r={radius},c={center})")


def ellipse(m: int, a: float = 2.0, b: float = 1.0) -> JordanCurve:
    """Vertices equally spaced in arclength on the ellipse with semi-axes a, b."""
    t = np.linspace(0.0, TWO_PI, 64 * m + 1)
    z = a * np.cos(t) + 1j * b * np.sin(t)
    s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(z)))])
    tt = np.interp(s[-1] * np.arange(m) / m, s, t)
    return JordanCurve(a * np.cos(tt) + 1j * b * np.sin(tt), f"ellipse({a},{b})")


def star(m: int, eps: float = 0.2, k: int = 3) -> JordanCurve:
    """r(theta) = 1 + eps cos(k theta), equally spaced in arclength."""
    t = np.linspace(0.0, TWO_PI, 64 * m + 1)
    z = (1.0 + eps * np.cos(k * t)) * np.exp(1j * t)
    s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(z)))])
    tt = np.interp(s[-1] * np.arange(m) / m, s, t)
    return JordanCurve((1.0 + eps * np.cos(k * tt)) * np.exp(1j * tt), f"star({eps},{k})")


def fixture_curves(m: int = 256) -> list[JordanCurve]:
    return [
        circle(m, 1.0, 0.0, "unit_circle"),
        circle(m, 2.0, 0.0, "circle_r2"),
        circle(m, 1.0, 0.5, "circle_offset"),
        ellipse(m, 2.0, 1.0),
        star(m, 0.2, 3),
    ]


def welding_fixture_suite(m: int = 256) -> list[tuple[JordanCurve, CircleMap]]:
    """Canonical curves with their zippered weldings."""
    return [(c, zipper_welding(c)[0]) for c in fixture_curves(m)]


FIXTURE_VERSION = 1


def fixtures_payload(m: int = 256) -> dict:
    out = []
    for c in fixture_curves(m):
        psi, scale = zipper_welding(c)
        out.append({"curve": c.to_dict(), "welding": psi.to_dict(), "scale": scale})
    return {"version": FIXTURE_VERSION, "samples": m, "fixtures": out}


def load_fixtures() -> list[tuple[JordanCurve, CircleMap, float]]:
    """Fixtures shipped with the package."""
    text = resources.files("gmcweld").joinpath("data", f"fixtures_v{FIXTURE_VERSION}.json").read_text()
    d = json.loads(text)
    return [(JordanCurve.from_dict(f["curve"]), CircleMap.from_dict(f["welding"]), float(f["scale"]))
            for f in d["fixtures"]]
