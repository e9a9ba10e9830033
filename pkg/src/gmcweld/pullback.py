"""Matrix blocks of the pullback operator f -> pi0(f o phi).

In the basis e_n = z^n/sqrt(n), f_n = conj(e_n) the operator has the block
form [[M, N], [conj(N), conj(M)]] with

    M_mn = sqrt(m/n) (1/2pi) int phi^n e^{-im theta} d theta,
    N_mn = sqrt(m/n) (1/2pi) int phi^{-n} e^{-im theta} d theta.

Blocks are stored with K rows (output frequencies) and C >= K columns.
Identities such as MM* - NN* = I sum over every column, so cutting the
columns at K would add a spurious truncation defect in the last rows.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .homeo import CircleMap, log_deriv
from .spectra import FourierField, GridFunction, analyze, pi0

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class OperatorBlocks:
    dim: int
    M: np.ndarray
    N: np.ndarray
    quadrature_size: int

    @property
    def cols(self) -> int:
        return self.M.shape[1]

    def square(self) -> tuple[np.ndarray, np.ndarray]:
        """K x K compressions of M and N."""
        return self.M[:, : self.dim], self.N[:, : self.dim]

    def complex_matrix(self) -> np.ndarray:
        """[[M, N], [conj N, conj M]] of shape (2K, 2C)."""
        return np.block([[self.M, self.N], [self.N.conj(), self.M.conj()]])

    def real_matrix(self) -> np.ndarray:
        """Action on interleaved (cos, sin) coordinates, shape (2K, 2C)."""
        P, Q = self.M + self.N, self.M - self.N
        A = np.empty((2 * self.dim, 2 * self.cols))
        A[0::2, 0::2] = P.real
        A[0::2, 1::2] = Q.imag
        A[1::2, 0::2] = -P.imag
        A[1::2, 1::2] = Q.real
        return A

    def to_dict(self) -> dict:
        def pairs(X):
            return [[[float(z.real), float(z.imag)] for z in row] for row in X]

        return {"dim": self.dim, "cols": self.cols, "quadrature_size": self.quadrature_size,
                "M": pairs(self.M), "N": pairs(self.N)}

    @classmethod
    def from_dict(cls, d: dict) -> "OperatorBlocks":
        def arr(X):
            a = np.asarray(X, float)
            return a[..., 0] + 1j * a[..., 1]

        return cls(int(d["dim"]), arr(d["M"]), arr(d["N"]), int(d["quadrature_size"]))


def default_cols(phi: CircleMap, dim: int, size: int) -> int:
    """Columns needed so that rows 1..K see essentially all their mass.

    Row m of M collects powers phi^n whose local frequency n phi' is near m,
    so columns run to about K / min(phi') plus a margin for the band tails.
    """
    slope = np.exp(log_deriv(phi, size).values)
    c = int(np.ceil(1.25 * dim / max(slope.min(), 1e-3))) + 24
    return max(dim, min(c, size // 8))


def compute_blocks(phi: CircleMap, dim: int = 32, size: int = 2 ** 14,
                   cols: int | None = None, chunk: int = 32) -> OperatorBlocks:
    """Fill M and N by FFT quadrature of phi^n and phi^{-n} on ``size`` points."""
    if dim < 1:
        raise ValueError("dim must be positive")
    if size < 8 * dim:
        raise ValueError(f"quadrature size {size} < 8K = {8 * dim}")
    cols = default_cols(phi, dim, size) if cols is None else int(cols)
    if cols < dim:
        raise ValueError("cols must be >= dim")
    F = phi.sample(size)
    m = np.arange(1, dim + 1)
    M = np.empty((dim, cols), dtype=complex)
    N = np.empty((dim, cols), dtype=complex)
    for start in range(0, cols, chunk):
        n = np.arange(start + 1, min(start + chunk, cols) + 1)
        phase = np.multiply.outer(n, F)
        w = np.sqrt(np.outer(m, 1.0 / n))
        fp = np.fft.fft(np.exp(1j * phase), axis=1)[:, 1:dim + 1] / size
        fm = np.fft.fft(np.exp(-1j * phase), axis=1)[:, 1:dim + 1] / size
        M[:, n - 1] = w * fp.T
        N[:, n - 1] = w * fm.T
    return OperatorBlocks(dim, M, N, size)


def symplectic_defect(b: OperatorBlocks) -> tuple[float, float]:
    """(||MM* - NN* - I||_HS, ||MN^t - NM^t||_HS) over the K output rows."""
    M, N = b.M, b.N
    d1 = M @ M.conj().T - N @ N.conj().T - np.eye(b.dim)
    d2 = M @ N.T - N @ M.T
    return float(np.linalg.norm(d1)), float(np.linalg.norm(d2))


def hs_norm_N(b: OperatorBlocks) -> float:
    """Frobenius norm of the stored N block."""
    return float(np.linalg.norm(b.N))


def cov_defect(b: OperatorBlocks) -> float:
    """Frobenius norm of the real 2K x 2K matrix of P(Pi Pi* - I)P."""
    A = b.real_matrix()
    return float(np.linalg.norm(A @ A.T - np.eye(2 * b.dim)))


def cov_defect_factorized(b: OperatorBlocks) -> float:
    """Same quantity via Pi Pi* - I = 2 Pi [[0, N^t], [N*, 0]]; equal to
    cov_defect whenever the symplectic identities hold."""
    M, N = b.M, b.N
    top = np.hstack([N @ N.conj().T, M @ N.T])
    bottom = np.hstack([M.conj() @ N.conj().T, N.conj() @ N.T])
    return float(2.0 * np.linalg.norm(np.vstack([top, bottom])))


def apply(b: OperatorBlocks, field: FourierField) -> FourierField:
    """Coefficients of the truncated image of a field (first K frequencies)."""
    if field.order > b.cols:
        raise ValueError(f"field order {field.order} exceeds block columns {b.cols}")
    n = np.arange(1, field.order + 1)
    z = np.sqrt(n) * field.coeffs
    out = b.M[:, : field.order] @ z + b.N[:, : field.order] @ z.conj()
    return FourierField(b.dim, out / np.sqrt(np.arange(1, b.dim + 1)), 0.0)


def mean_of_pullback(phi: CircleMap, field: FourierField, size: int = 2 ** 14) -> float:
    """(1/2pi) int h(phi(theta)) d theta by the rectangle rule."""
    return float(np.mean(field(phi.sample(size))))


def pullback_grid(phi: CircleMap, field: FourierField, size: int) -> GridFunction:
    """pi0(h o phi) sampled on the grid."""
    return pi0(GridFunction(field(phi.sample(size))))


def log_deriv_shift(phi: CircleMap, gamma: float, order: int, size: int | None = None) -> FourierField:
    """pi0(Q log|phi'|) truncated to ``order`` frequencies, Q = 2/gamma + gamma/2."""
    q = 2.0 / gamma + gamma / 2.0
    ld = log_deriv(phi, size)
    f = analyze(GridFunction(q * ld.values), order)
    return FourierField(f.order, f.coeffs, 0.0)


@dataclass(frozen=True)
class DensityModel:
    """Gaussian density ratio d law(A x + beta) / d law(x) on the first K modes.

    ``basis`` columns are eigenvectors of AA* - I in interleaved (cos, sin)
    coordinates, ``eigvals`` the eigenvalues a_k and ``mean_coords`` the
    coordinates b_k of beta in that basis.
    """

    dim: int
    eigvals: np.ndarray
    mean_coords: np.ndarray
    basis: np.ndarray

    def log_density(self, x: np.ndarray) -> np.ndarray:
        """log rho at real coordinates x of shape (..., 2K)."""
        y = np.asarray(x)[..., : 2 * self.dim] @ self.basis
        a, bk = self.eigvals, self.mean_coords
        return np.sum(-0.5 * np.log1p(a) - (y - bk) ** 2 / (2.0 * (1.0 + a)) + 0.5 * y ** 2, axis=-1)

    def density(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density(x))

    def hs_defect(self) -> float:
        return float(np.sqrt(np.sum(self.eigvals ** 2)))

    def expected_rho_squared(self) -> float:
        """E[rho^2] = prod (1 - a^2)^{-1/2} exp(b^2 / (1 - a)), +inf unless |a| < 1."""
        a, bk = self.eigvals, self.mean_coords
        if np.any(np.abs(a) >= 1):
            return float("inf")
        return float(np.exp(np.sum(-0.5 * np.log1p(-a * a) + bk * bk / (1.0 - a))))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "eigvals": self.eigvals.tolist(),
                "mean_coords": self.mean_coords.tolist(), "basis": self.basis.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DensityModel":
        return cls(int(d["dim"]), np.asarray(d["eigvals"], float),
                   np.asarray(d["mean_coords"], float), np.asarray(d["basis"], float))


EIG_FLOOR = -1.0 + 1e-12


def build_density(b: OperatorBlocks, shift: FourierField | None = None) -> DensityModel:
    """Eigen-decompose P(AA* - I)P in real coordinates and project the shift."""
    A = b.real_matrix()
    D = A @ A.T - np.eye(2 * b.dim)
    D = 0.5 * (D + D.T)
    a, V = np.linalg.eigh(D)
    if np.any(a <= EIG_FLOOR):
        k = int(np.argmin(a))
        raise ValueError(f"degenerate deformed covariance: eigenvalue {a[k]:.3e} at index {k}")
    beta = np.zeros(2 * b.dim)
    if shift is not None:
        if abs(shift.mean) > 1e-12:
            raise ValueError("shift must have mean zero")
        xi = shift.xi[: 2 * b.dim]
        beta[: xi.size] = xi
    return DensityModel(b.dim, a, V.T @ beta, V)


def eval_density(model: DensityModel, field: FourierField) -> float:
    """rho at the first K modes of ``field``."""
    if field.order < model.dim:
        raise ValueError(f"field order {field.order} below model dimension {model.dim}")
    return float(model.density(field.xi))


def trend_report(phi: CircleMap, dims=(32, 64), size: int = 2 ** 14) -> list[dict]:
    """hs_norm_N, cov_defect and symplectic defects for each K."""
    rows = []
    for k in dims:
        b = compute_blocks(phi, k, size)
        s1, s2 = symplectic_defect(b)
        rows.append({"K": k, "G": size, "cols": b.cols, "hs_norm_N": hs_norm_N(b),
                     "cov_defect": cov_defect(b), "sym_defect_1": s1, "sym_defect_2": s2})
    for prev, cur in zip(rows, rows[1:]):
        rel = abs(cur["hs_norm_N"] - prev["hs_norm_N"]) / max(prev["hs_norm_N"], 1e-300)
        cur["hs_trend_rel_change"] = rel
    return rows


def report_csv(rows: list[dict]) -> str:
    keys = ["K", "G", "cols", "hs_norm_N", "cov_defect", "sym_defect_1", "sym_defect_2"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([r[k] if isinstance(r[k], int) else repr(float(r[k])) for k in keys])
    return buf.getvalue()


def report_json(rows: list[dict]) -> str:
    return json.dumps(rows, sort_keys=True)
