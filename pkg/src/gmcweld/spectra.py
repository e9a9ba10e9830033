"""Fourier fields on the unit circle.

A real field is stored through its positive-frequency Fourier coefficients

    h(e^{i theta}) = mean + 2 Re sum_{n=1}^{N} c_n e^{i n theta}.

The log-correlated Gaussian field uses the orthonormal trigonometric basis
sqrt(2/n) cos(n theta), sqrt(2/n) sin(n theta) of the Dirichlet space, so
its covariance kernel is -2 log|e^{i theta} - e^{i theta'}|.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FourierField:
    """Real trigonometric polynomial of degree ``order``."""

    order: int
    coeffs: np.ndarray
    mean: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if self.order < 1:
            raise ValueError("order must be a positive integer")
        if c.size != self.order:
            raise ValueError(f"expected {self.order} coefficients, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "mean", float(self.mean))

    @property
    def xi(self) -> np.ndarray:
        """Coordinates in the real trigonometric basis, length 2N."""
        n = np.arange(1, self.order + 1)
        scale = np.sqrt(2.0 * n)
        out = np.empty(2 * self.order)
        out[0::2] = scale * self.coeffs.real
        out[1::2] = -scale * self.coeffs.imag
        return out

    @classmethod
    def from_xi(cls, xi, mean: float = 0.0) -> "FourierField":
        xi = np.asarray(xi, dtype=float)
        if xi.size % 2 or xi.size == 0:
            raise ValueError("xi must have positive even length")
        order = xi.size // 2
        n = np.arange(1, order + 1)
        return cls(order, (xi[0::2] - 1j * xi[1::2]) / np.sqrt(2.0 * n), mean)

    def __call__(self, theta) -> np.ndarray:
        """Direct evaluation at arbitrary angles (O(N) per point)."""
        theta = np.asarray(theta, dtype=float)
        n = np.arange(1, self.order + 1)
        phase = np.exp(1j * np.multiply.outer(theta, n))
        return self.mean + 2.0 * (phase @ self.coeffs).real

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coeffs": [[float(z.real), float(z.imag)] for z in self.coeffs],
            "mean": self.mean,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FourierField":
        c = np.array([complex(re, im) for re, im in d["coeffs"]])
        return cls(int(d["order"]), c, float(d.get("mean", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FourierField":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GridFunction:
    """Samples on the uniform grid theta_j = 2 pi (j + offset) / G.

    ``offset`` is 0 for grid points and 0.5 for cell midpoints.
    """

    values: np.ndarray
    offset: float = 0.0
    size: int = field(init=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size == 0:
            raise ValueError("empty grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "size", v.size)

    @property
    def theta(self) -> np.ndarray:
        return TWO_PI * (np.arange(self.size) + self.offset) / self.size

    def integral(self) -> float:
        return float(self.values.sum() * TWO_PI / self.size)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "value"])
        for t, v in zip(self.theta, self.values):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()


def _check_order(order: int) -> int:
    if int(order) != order or order < 1:
        raise ValueError(f"invalid truncation order {order!r}; need N >= 1")
    return int(order)


def lgf_coefficients(order: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw Fourier coefficients of the truncated LGF.

    Returns shape (N,) or (size, N). The normals are consumed in the order
    xi_1, xi_2, ... so batched and single draws agree for the same stream.
    """
    order = _check_order(order)
    shape = (2 * order,) if size is None else (size, 2 * order)
    xi = rng.standard_normal(shape)
    n = np.arange(1, order + 1)
    return (xi[..., 0::2] - 1j * xi[..., 1::2]) / np.sqrt(2.0 * n)


def sample_lgf(order: int, rng: np.random.Generator) -> FourierField:
    """Sample sum_{k<=2N} xi_k h_k with i.i.d. standard normal xi_k."""
    return FourierField(_check_order(order), lgf_coefficients(order, rng), 0.0)


def synthesize(coeffs: np.ndarray, size: int, mean=0.0, offset: float = 0.0) -> np.ndarray:
    """Evaluate mean + 2 Re sum c_n e^{in theta_j} on a grid, batched over
    leading axes of ``coeffs``."""
    coeffs = np.asarray(coeffs, dtype=complex)
    order = coeffs.shape[-1]
    if size < 2 * order:
        raise ValueError(f"grid size {size} < 2N = {2 * order} would alias")
    if offset:
        coeffs = coeffs * np.exp(1j * TWO_PI * offset * np.arange(1, order + 1) / size)
    spec = np.zeros(coeffs.shape[:-1] + (size // 2 + 1,), dtype=complex)
    spec[..., 1:order + 1] = coeffs
    if 2 * order == size:
        # irfft reads only the real part of the Nyquist bin and does not mirror it
        spec[..., order] = 2.0 * coeffs[..., -1].real
    vals = np.fft.irfft(spec, n=size, axis=-1) * size
    return vals + (np.asarray(mean)[..., None] if np.ndim(mean) else mean)


def evaluate(field: FourierField, size: int, offset: float = 0.0) -> GridFunction:
    """Values of the field on the G-point grid (shifted by ``offset`` cells)."""
    return GridFunction(synthesize(field.coeffs, size, field.mean, offset), offset)


def analyze(grid: GridFunction, order: int | None = None) -> FourierField:
    """Forward transform of grid samples into a FourierField.

    The default order is floor(G/2); the Nyquist coefficient is halved so
    that synthesis reproduces the samples.
    """
    g = grid.size
    spec = np.fft.rfft(grid.values) / g
    if grid.offset:
        k = np.arange(spec.size)
        spec = spec * np.exp(-1j * TWO_PI * grid.offset * k / g)
    top = g // 2
    order = top if order is None else min(int(order), top)
    c = spec[1:order + 1].copy()
    if g % 2 == 0 and order == top:
        c[-1] = 0.5 * c[-1]
    return FourierField(max(order, 1), c if order else np.zeros(1), float(spec[0].real))


def truncated_variance(order: int, size: int, offset: float = 0.0) -> GridFunction:
    """Pointwise variance sum_{k<=2N} h_k^2 = sum_{n<=N} 2/n (constant)."""
    order = _check_order(order)
    v = 2.0 * np.sum(1.0 / np.arange(1, order + 1))
    return GridFunction(np.full(size, v), offset)


def sobolev_norm(f, s: float) -> float:
    """(2 sum_n n^{2s} |c_n|^2)^{1/2}; s = 1/2 gives the Dirichlet-space norm."""
    if isinstance(f, GridFunction):
        f = analyze(f)
    if s <= 0 and abs(f.mean) > 1e-12 * max(1.0, np.abs(f.coeffs).max(initial=0.0)):
        raise ValueError("field has nonzero mean; apply pi0 first for s <= 0")
    n = np.arange(1, f.order + 1, dtype=float)
    return float(np.sqrt(2.0 * np.sum(n ** (2.0 * s) * np.abs(f.coeffs) ** 2)))


def h_half_double_integral(f: GridFunction) -> float:
    """Trapezoid value of the double integral of |f(x)-f(y)|^2/|x-y|^2 over
    the torus, dropping the band |j - j'| <= 1 around the diagonal.

    Uses the autocorrelation so the cost is O(G log G).
    """
    v = f.values
    g = v.size
    spec = np.fft.rfft(v)
    auto = np.fft.irfft(np.abs(spec) ** 2, n=g)  # sum_j v_j v_{j+k}
    k = np.arange(2, g - 1)
    diff_sq = 2.0 * np.dot(v, v) - 2.0 * auto[k]
    chord_sq = (2.0 * np.sin(np.pi * k / g)) ** 2
    h = TWO_PI / g
    return float(np.sum(diff_sq / chord_sq) * h * h)


def pi0(f: GridFunction) -> GridFunction:
    """Remove the mean."""
    return GridFunction(f.values - f.values.mean(), f.offset)


def log_singularity(alpha: float, cap: float, size: int, offset: float = 0.0) -> GridFunction:
    """min(-alpha log|e^{i theta} - 1|, cap) on the grid."""
    if not cap > 0:
        raise ValueError("cap must be positive")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    theta = TWO_PI * (np.arange(size) + offset) / size
    chord = 2.0 * np.abs(np.sin(theta / 2.0))
    with np.errstate(divide="ignore"):
        prof = -alpha * np.log(chord) if alpha else np.zeros(size)
    return GridFunction(np.minimum(prof, cap), offset)


def default_cap(gamma: float, order: int) -> float:
    """Insertion cap (2/gamma) log N tied to the truncation scale."""
    return 2.0 / gamma * np.log(max(order, 2))


def lgf_covariance(theta1, theta2) -> np.ndarray:
    """Exact kernel -2 log|e^{i theta1} - e^{i theta2}|."""
    d = np.asarray(theta1) - np.asarray(theta2)
    return -2.0 * np.log(2.0 * np.abs(np.sin(d / 2.0)))


def empirical_covariance(order: int, angles, samples: int, rng: np.random.Generator,
                         chunk: int = 5000) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo E[h(a) h(b)] over all angle pairs and its standard error.

    The field is centered, so the mean of products is the covariance. Values
    at the angles are summed directly, without a grid.
    """
    order = _check_order(order)
    th = np.asarray(angles, float)
    basis = np.exp(1j * np.outer(np.arange(1, order + 1), th))
    s1 = np.zeros((th.size, th.size))
    s2 = np.zeros_like(s1)
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        vals = 2.0 * np.real(lgf_coefficients(order, rng, b) @ basis)
        prod = vals[:, :, None] * vals[:, None, :]
        s1 += prod.sum(axis=0)
        s2 += (prod * prod).sum(axis=0)
        done += b
    mean = s1 / samples
    se = np.sqrt(np.maximum(s2 / samples - mean ** 2, 0.0) / (samples - 1))
    return mean, se
