"""Orientation-preserving circle homeomorphisms as piecewise-linear lifts."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .spectra import GridFunction, pi0, sobolev_norm

TWO_PI = 2.0 * np.pi

DEFAULT_SIZE = 2 ** 14


def _mod2pi(x: np.ndarray) -> np.ndarray:
    r = np.mod(x, TWO_PI)
    return np.where(r >= TWO_PI, r - TWO_PI, r)


@dataclass(frozen=True)
class CircleMap:
    """Degree-one lift F with F(theta + 2 pi) = F(theta) + 2 pi.

    The lift is linear between consecutive knots, including the wrap-around
    segment from the last knot to the first knot plus 2 pi.
    """

    knots: np.ndarray
    lift: np.ndarray

    def __post_init__(self):
        k = np.array(self.knots, dtype=float).reshape(-1)
        f = np.array(self.lift, dtype=float).reshape(-1)
        if k.size == 0 or k.size != f.size:
            raise ValueError("knots and lift must be nonempty and of equal length")
        if k[0] < 0 or k[-1] >= TWO_PI:
            raise ValueError("knots must lie in [0, 2pi)")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(np.diff(f) <= 0) or not f[0] + TWO_PI > f[-1]:
            raise ValueError("lift must be strictly increasing with winding number one")
        k.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "lift", f)

    @classmethod
    def from_function(cls, lift_fn, size: int = DEFAULT_SIZE) -> "CircleMap":
        theta = TWO_PI * np.arange(size) / size
        return cls(theta, lift_fn(theta))

    @property
    def size(self) -> int:
        return self.knots.size

    def __call__(self, theta) -> np.ndarray:
        """Evaluate the lift at arbitrary real angles."""
        theta = np.asarray(theta, dtype=float)
        t0 = self.knots[0]
        wraps = np.floor((theta - t0) / TWO_PI)
        r = theta - TWO_PI * wraps
        xk = np.append(self.knots, t0 + TWO_PI)
        fk = np.append(self.lift, self.lift[0] + TWO_PI)
        return np.interp(r, xk, fk) + TWO_PI * wraps

    def on_circle(self, theta) -> np.ndarray:
        return np.exp(1j * self(theta))

    def sample(self, size: int) -> np.ndarray:
        return self(TWO_PI * np.arange(size) / size)

    def to_dict(self) -> dict:
        return {"knots": self.knots.tolist(), "lift": self.lift.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CircleMap":
        return cls(np.asarray(d["knots"], float), np.asarray(d["lift"], float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CircleMap":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "F"])
        for t, v in zip(self.knots, self.lift):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()


def _strict(knots: np.ndarray, lift: np.ndarray, tol: float = 1e-13):
    """Drop knots that would break strict monotonicity after round-off."""
    order = np.argsort(knots, kind="stable")
    knots, lift = knots[order], lift[order]
    keep = np.ones(knots.size, dtype=bool)
    keep[1:] = (np.diff(knots) > tol) & (np.diff(lift) > tol)
    if not (np.all(np.diff(knots[keep]) > tol) and np.all(np.diff(lift[keep]) > tol)):
        last_k, last_f = knots[0], lift[0]
        for i in range(1, knots.size):
            if knots[i] - last_k <= tol or lift[i] - last_f <= tol:
                keep[i] = False
            else:
                keep[i] = True
                last_k, last_f = knots[i], lift[i]
    knots, lift = knots[keep], lift[keep]
    while knots.size > 1 and lift[0] + TWO_PI - lift[-1] <= tol:
        knots, lift = knots[:-1], lift[:-1]
    return knots, lift


def invert(phi: CircleMap) -> CircleMap:
    """Piecewise-linear inverse obtained by swapping knots and lift values."""
    wraps = np.floor(phi.lift / TWO_PI)
    y = phi.lift - TWO_PI * wraps
    y = np.where(y >= TWO_PI, y - TWO_PI, y)
    x = phi.knots - TWO_PI * wraps
    order = np.argsort(y, kind="stable")
    y, x = y[order], x[order]
    if np.any(np.diff(y) <= 0):
        raise ValueError("lift values tie; map is not invertible")
    return CircleMap(y, x)


def compose(outer: CircleMap, inner: CircleMap) -> CircleMap:
    """outer o inner, exact on the union-refined knot set."""
    pre = _mod2pi(invert(inner)(outer.knots))
    knots = np.concatenate([inner.knots, pre])
    lift = outer(inner(knots))
    knots, lift = _strict(knots, lift)
    return CircleMap(knots, lift)


def resample(phi: CircleMap, size: int) -> CircleMap:
    """Interpolate onto the uniform grid of ``size`` knots starting at 0."""
    return CircleMap.from_function(phi, size)


def fix_one(phi: CircleMap) -> CircleMap:
    """Post-rotate so that the lift vanishes at theta = 0."""
    return CircleMap(phi.knots, phi.lift - float(phi(0.0)))


def sup_distance(a: CircleMap, b: CircleMap, size: int = DEFAULT_SIZE) -> float:
    theta = TWO_PI * np.arange(size) / size
    return float(np.max(np.abs(a(theta) - b(theta))))


def _uniform_size(phi: CircleMap, size: int | None) -> int:
    if size is not None:
        return int(size)
    m = phi.size
    if np.allclose(phi.knots, TWO_PI * np.arange(m) / m, rtol=0, atol=1e-12):
        return m
    return max(m, 1024)


def qs_ratio(phi: CircleMap, probes: int) -> float:
    """Largest sampled symmetric chord ratio, a lower bound for the
    quasisymmetry constant. Uses ``probes`` base points and ``probes``
    half-widths t = pi k / probes."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    theta = TWO_PI * np.arange(probes) / probes
    t = np.pi * np.arange(1, probes + 1) / probes
    f0 = phi(theta)[:, None]
    fp = phi(theta[:, None] + t[None, :])
    fm = phi(theta[:, None] - t[None, :])
    right = np.abs(np.sin((fp - f0) / 2.0))
    left = np.abs(np.sin((f0 - fm) / 2.0))
    ratio = right / left
    return float(np.max(np.maximum(ratio, 1.0 / ratio)))


def log_deriv(phi: CircleMap, size: int | None = None) -> GridFunction:
    """Centered-difference log-derivative of the lift on a uniform grid."""
    g = _uniform_size(phi, size)
    f = phi.sample(g)
    ahead = np.roll(f, -1)
    ahead[-1] += TWO_PI
    behind = np.roll(f, 1)
    behind[0] -= TWO_PI
    q = (ahead - behind) / (2.0 * TWO_PI / g)
    if np.any(q <= 0):
        j = int(np.argmax(q <= 0))
        raise ValueError(f"nonpositive difference quotient at grid index {j}")
    return GridFunction(np.log(q))


def wp_energy(phi: CircleMap, size: int | None = None) -> float:
    """Squared Dirichlet norm of the mean-zero part of log phi'."""
    ld = log_deriv(phi, size)
    if np.ptp(ld.values) <= 1e-13:
        return 0.0  # constant log-derivative: a rotation
    return sobolev_norm(pi0(ld), 0.5) ** 2


def log_ratio(phi: CircleMap, base_index: int = 0, size: int | None = None) -> GridFunction:
    """log|phi(z) - phi(z0)| - log|z - z0| on the uniform grid, z0 = grid
    point ``base_index``; the value at z0 is the mean of its two neighbours."""
    g = _uniform_size(phi, size)
    theta = TWO_PI * np.arange(g) / g
    f = phi(theta)
    j0 = int(base_index) % g
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.log(2.0 * np.abs(np.sin((f - f[j0]) / 2.0)))
        den = np.log(2.0 * np.abs(np.sin((theta - theta[j0]) / 2.0)))
        vals = num - den
    vals[j0] = 0.5 * (vals[(j0 - 1) % g] + vals[(j0 + 1) % g])
    return GridFunction(vals)


def mollify(phi: CircleMap, delta: float, size: int | None = None, retries: int = 8) -> CircleMap:
    """Smooth the periodic part F(theta) - theta with a wrapped Gaussian of
    width ``delta``. If round-off breaks monotonicity, delta is halved up to
    ``retries`` times before giving up."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    g = size or max(2 ** 12, 1 << int(np.ceil(np.log2(4 * phi.size))))
    theta = TWO_PI * np.arange(g) / g
    d = phi(theta) - theta
    spec = np.fft.rfft(d)
    n = np.arange(spec.size)
    for _ in range(retries + 1):
        smooth = np.fft.irfft(spec * np.exp(-0.5 * (n * delta) ** 2), n=g)
        lift = theta + smooth
        if np.all(np.diff(lift) > 0) and lift[0] + TWO_PI > lift[-1]:
            return CircleMap(theta, lift)
        delta *= 0.5
    raise ValueError("smoothing could not preserve monotonicity")


def identity(size: int = DEFAULT_SIZE) -> CircleMap:
    return CircleMap.from_function(lambda t: t, size)


def rotation(a: float, size: int = DEFAULT_SIZE) -> CircleMap:
    return CircleMap.from_function(lambda t: t + a, size)


def moebius(a: complex, size: int = DEFAULT_SIZE) -> CircleMap:
    """Boundary values of z -> (z - a)/(1 - conj(a) z)."""
    a = complex(a)
    if not abs(a) < 1:
        raise ValueError("moebius parameter must lie in the open unit disk")

    def lift(t):
        z = np.exp(1j * t)
        return t + np.angle(1.0 - a / z) - np.angle(1.0 - np.conj(a) * z)

    return CircleMap.from_function(lift, size)


def sine_perturbation(eps: float, k: int = 1, delta0: float = 0.0,
                      size: int = DEFAULT_SIZE) -> CircleMap:
    """Lift theta + eps sin(k theta + delta0), post-rotated to fix 1."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if abs(eps * k) >= 1:
        raise ValueError("|eps k| >= 1 gives a non-injective map")
    shift = eps * np.sin(delta0)
    return CircleMap.from_function(lambda t: t + eps * np.sin(k * t + delta0) - shift, size)


_KINDS = {
    "identity": (identity, 0),
    "rotation": (rotation, 1),
    "moebius": (moebius, 2),
    "sine": (sine_perturbation, 3),
    "sine_perturbation": (sine_perturbation, 3),
}


def standard_maps(kind: str, *params, size: int = DEFAULT_SIZE) -> CircleMap:
    """Build a named map.

    identity; rotation(a); moebius(a) with a = re or (re, im);
    sine_perturbation(eps, k=1, delta0=0).
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown map kind {kind!r}; choose from {sorted(_KINDS)}")
    fn, maxp = _KINDS[kind]
    if len(params) > maxp:
        raise ValueError(f"{kind} takes at most {maxp} parameters")
    if fn is moebius:
        if not params:
            raise ValueError("moebius needs a parameter")
        params = (complex(*params),)
    if fn is sine_perturbation:
        if not params:
            raise ValueError("sine_perturbation needs eps")
        params = (float(params[0]),) + tuple(
            int(p) if i == 0 else float(p) for i, p in enumerate(params[1:])
        )
    if fn is rotation and not params:
        raise ValueError("rotation needs an angle")
    return fn(*params, size=size)


def parse_map_spec(spec: str, size: int = DEFAULT_SIZE) -> CircleMap:
    """Parse ``kind:p1,p2,...`` such as ``moebius:0.3`` or ``sine:0.2,1,0``."""
    kind, _, rest = spec.partition(":")
    params = [float(p) for p in rest.split(",") if p.strip()] if rest else []
    return standard_maps(kind.strip(), *params, size=size)
