"""Samplers for the SLE welding law and quasi-invariance experiments.

With independent truncated LGFs h1, h2 the SLE_kappa welding (kappa = gamma^2)
is represented by

    psi = (phi_{h2 - gamma log|. - 1|})^{-1} o phi_{h1},

where phi_h sends angle to normalized chaos mass. Every sample owns one
random stream, drawn from a SeedSequence split, and consumes it in a fixed
way: h1, h2 and the rotation each read their own child stream. Batched and
one-at-a-time code paths therefore agree exactly, and fields at orders N
and 2N share their first N modes.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

from . import gmc
from .homeo import CircleMap, compose, fix_one, invert, log_deriv, log_ratio
from .pullback import build_density, compute_blocks
from .spectra import (FourierField, GridFunction, analyze, default_cap, evaluate,
                      lgf_coefficients, sobolev_norm, synthesize, truncated_variance)

TWO_PI = 2.0 * np.pi
ROUNDOFF = 1e-12  # absolute slack so exact agreements are not judged by a zero error bar


@dataclass(frozen=True)
class WeldingSample:
    gamma: float
    seed: tuple
    map: CircleMap
    provenance: str

    @property
    def kappa(self) -> float:
        return self.gamma ** 2

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "kappa": self.kappa, "seed": list(self.seed),
                "provenance": self.provenance, "map": self.map.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "WeldingSample":
        return cls(float(d["gamma"]), tuple(d["seed"]), CircleMap.from_dict(d["map"]),
                   d["provenance"])


@dataclass
class ExperimentReport:
    name: str
    params: dict
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.get("pass", True) for r in self.rows)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.params, "rows": self.rows,
                "passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        import csv
        import io

        keys = sorted({k for r in self.rows for k in r})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in self.rows:
            w.writerow([r.get(k, "") for k in keys])
        return buf.getvalue()


def seed_streams(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def _seed_tag(seq: np.random.SeedSequence) -> tuple:
    return (int(seq.entropy),) + tuple(int(k) for k in seq.spawn_key)


def _streams(rng) -> tuple[list[np.random.Generator], tuple]:
    """Three child generators (h1, h2, rotation) and a reproducibility tag.

    An explicit (h1, h2, rotation) triple of generators is used as given.
    """
    if isinstance(rng, (list, tuple)) and len(rng) == 3:
        return list(rng), ()
    if isinstance(rng, (int, np.integer)):
        rng = np.random.SeedSequence(int(rng))
    if isinstance(rng, np.random.SeedSequence):
        kids = [np.random.SeedSequence(rng.entropy, spawn_key=tuple(rng.spawn_key) + (k,))
                for k in range(3)]
        return [np.random.default_rng(k) for k in kids], _seed_tag(rng)
    if isinstance(rng, np.random.Generator):
        return list(rng.spawn(3)), ()
    raise TypeError("rng must be a seed, SeedSequence or Generator")


def default_size(order: int) -> int:
    """Grid size used when none is given: 16 cells per resolved wavelength."""
    return max(1024, 16 * order)


# ---------------------------------------------------------------------------
# cumulative-mass arrays, shared by the single and batched paths

def _cmf_batch(coeffs: np.ndarray, size: int, gamma: float, weights=None) -> np.ndarray:
    """Normalized cmf arrays (B, G+1) for fields with coefficients (B, N)."""
    order = coeffs.shape[-1]
    vals = synthesize(coeffs, size, 0.0, 0.5)
    var = truncated_variance(order, 1).values[0]
    m = gmc.cell_masses(vals, var, gamma)
    if weights is not None:
        m = m * weights
    c = gmc._cmf_from_masses(m)
    return c / c[..., -1:]


def _forward(cmf: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Lift of phi_h at theta for one cmf row."""
    g = cmf.size - 1
    wraps = np.floor(theta / TWO_PI)
    r = theta - TWO_PI * wraps
    return TWO_PI * (np.interp(r, TWO_PI * np.arange(g + 1) / g, cmf) + wraps)


def _backward(cmf: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Lift of phi_h^{-1} at y for one cmf row."""
    g = cmf.size - 1
    wraps = np.floor(y / TWO_PI)
    r = y / TWO_PI - wraps
    return np.interp(r, cmf, TWO_PI * np.arange(g + 1) / g) + TWO_PI * wraps


def _cmf_to_map(cmf: np.ndarray) -> CircleMap:
    g = cmf.size - 1
    return CircleMap(TWO_PI * np.arange(g) / g, TWO_PI * cmf[:-1])


def _insertion(order: int, size: int, gamma: float, alpha: float | None, cap: float | None):
    alpha = gamma if alpha is None else alpha
    cap = default_cap(gamma, order) if cap is None else cap
    if alpha == 0:
        return None
    return gmc.insertion_weights(size, float(gamma), float(alpha), float(cap))


# ---------------------------------------------------------------------------
# single-sample samplers

def _draw_pair(order: int, gens) -> tuple[np.ndarray, np.ndarray]:
    return lgf_coefficients(order, gens[0]), lgf_coefficients(order, gens[1])


def sample_sle_welding(gamma: float, order: int, size: int | None, rng,
                       alpha: float | None = None, cap: float | None = None) -> WeldingSample:
    """(phi_{h2 + insertion})^{-1} o phi_{h1}; fixes 1."""
    gamma = gmc._check_gamma(gamma)
    size = size or default_size(order)
    gens, tag = _streams(rng)
    c1, c2 = _draw_pair(order, gens)
    var = truncated_variance(order, size, 0.5)
    mu1 = gmc.normalize(gmc.gmc_measure(evaluate(FourierField(order, c1), size, 0.5), var, gamma))
    a = gamma if alpha is None else alpha
    cp = default_cap(gamma, order) if cap is None else cap
    field2 = evaluate(FourierField(order, c2), size, 0.5)
    if a == 0:
        mu2 = gmc.normalize(gmc.gmc_measure(field2, var, gamma))
    else:
        mu2 = gmc.normalize(gmc.gmc_with_insertion(field2, var, gamma, a, cp))
    psi = compose(invert(gmc.welding_homeo(mu2)), gmc.welding_homeo(mu1))
    return WeldingSample(gamma, tag, psi, "insertion")


def sample_rotated_welding(gamma: float, order: int, size: int | None, rng,
                           angle: float | None = None, normalize: bool = True) -> WeldingSample:
    """(phi_{h2})^{-1} o R_a o phi_{h1} with a uniform rotation R_a, then
    post-rotated to fix 1 unless ``normalize`` is False."""
    gamma = gmc._check_gamma(gamma)
    size = size or default_size(order)
    gens, tag = _streams(rng)
    c1, c2 = _draw_pair(order, gens)
    a = gens[2].uniform(0.0, TWO_PI) if angle is None else float(angle)
    var = truncated_variance(order, size, 0.5)
    phi1 = gmc.welding_homeo(gmc.normalize(gmc.gmc_measure(
        evaluate(FourierField(order, c1), size, 0.5), var, gamma)))
    phi2 = gmc.welding_homeo(gmc.normalize(gmc.gmc_measure(
        evaluate(FourierField(order, c2), size, 0.5), var, gamma)))
    rotated = CircleMap(phi1.knots, phi1.lift + a)
    psi = compose(invert(phi2), rotated)
    if normalize:
        psi = fix_one(psi)
    return WeldingSample(gamma, tag, psi, "rotated")


Generator = Callable[[object], WeldingSample]


def sle_generator(gamma: float, order: int, size: int | None = None, **kw) -> Generator:
    return lambda rng: sample_sle_welding(gamma, order, size, rng, **kw)


def rotated_generator(gamma: float, order: int, size: int | None = None, **kw) -> Generator:
    return lambda rng: sample_rotated_welding(gamma, order, size, rng, **kw)


def _require_fixes_one(phi: CircleMap, tol: float = 1e-12) -> None:
    f0 = float(phi(0.0))
    if abs(f0) > tol:
        raise ValueError(f"deformation must fix 1, got lift(0) = {f0:.3e}")


def deform(gen: Generator, phi: CircleMap, side: str = "pre") -> Generator:
    """psi o phi (pre) or phi^{-1} o psi (post) applied to every sample."""
    _require_fixes_one(phi)
    if side == "pre":
        return lambda rng: _relabel(gen(rng), lambda m: compose(m, phi), "pre")
    if side == "post":
        inv = invert(phi)
        return lambda rng: _relabel(gen(rng), lambda m: compose(inv, m), "post")
    raise ValueError("side must be 'pre' or 'post'")


def _relabel(s: WeldingSample, op, side: str) -> WeldingSample:
    return WeldingSample(s.gamma, s.seed, op(s.map), f"{s.provenance}+{side}")


def gmc_welding_samplers(gamma1: float, gamma2: float, form: str = "AJKS",
                         order: int = 256, size: int | None = None,
                         same_field: bool = False) -> Generator:
    """Generators for phi_{ht}^{g2} o (phi_h^{g1})^{-1} (AJKS) or
    (phi_h^{g1})^{-1} o phi_{ht}^{g2} (inverse)."""
    g1, g2 = gmc._check_gamma(gamma1), gmc._check_gamma(gamma2)
    if form not in ("AJKS", "inverse"):
        raise ValueError("form must be 'AJKS' or 'inverse'")
    size = size or default_size(order)

    def gen(rng) -> WeldingSample:
        gens, tag = _streams(rng)
        c1, c2 = _draw_pair(order, gens)
        if same_field:
            c2 = c1
        phi = _cmf_to_map(_cmf_batch(c1[None], size, g1)[0])
        phit = _cmf_to_map(_cmf_batch(c2[None], size, g2)[0])
        m = compose(phit, invert(phi)) if form == "AJKS" else compose(invert(phi), phit)
        return WeldingSample(g1, tag, m, f"gmc-{form}:{g1},{g2}")

    return gen


def sample_ensemble(gen: Generator, n: int, seed: int, threads: int = 1) -> list[WeldingSample]:
    """n samples from independent child streams; output order is fixed."""
    seqs = seed_streams(seed, n)
    if threads <= 1:
        return [gen(s) for s in seqs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(gen, seqs))


# ---------------------------------------------------------------------------
# diagnostics

def ks_critical(n: int, m: int, level: float = 0.01) -> float:
    c = np.sqrt(-0.5 * np.log(level / 2.0))
    return float(c * np.sqrt((n + m) / (n * m)))


def _values_at(ensemble, angles) -> np.ndarray:
    maps = [s.map if isinstance(s, WeldingSample) else s for s in ensemble]
    ang = np.asarray(angles, float)
    return np.array([np.mod(m(ang), TWO_PI) for m in maps])


def marginal_diagnostics(ensemble: Sequence, angles: Sequence[float], other: Sequence | None = None,
                         level: float = 0.01) -> ExperimentReport:
    """KS distances of psi(e^{i theta}) marginals: ensemble halves against each
    other, or ensemble against ``other``."""
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    a = _values_at(ensemble, angles)
    if other is None:
        half = len(a) // 2
        a, b = a[:half], a[half:]
    else:
        b = _values_at(other, angles)
    rows = []
    for j, th in enumerate(angles):
        x, y = a[:, j], b[:, j]
        ks = float(sps.ks_2samp(x, y).statistic) if len(x) and len(y) else 0.0
        crit = ks_critical(max(len(x), 1), max(len(y), 1), level)
        overlap = max(x.min(), y.min()) < min(x.max(), y.max()) if len(x) and len(y) else False
        rows.append({"angle": float(th), "ks": ks, "critical": crit, "above_critical": ks > crit,
                     "support_overlap": bool(overlap),
                     "range_a": [float(x.min()), float(x.max())] if len(x) else [],
                     "range_b": [float(y.min()), float(y.max())] if len(y) else []})
    return ExperimentReport("marginal_diagnostics", {"level": level, "n": len(ensemble)}, rows)


# ---------------------------------------------------------------------------
# importance identity

@dataclass(frozen=True)
class Statistic:
    """Bounded test statistic of psi evaluated at fixed angles."""

    name: str
    angles: tuple
    fn: Callable[[np.ndarray], np.ndarray]


def default_statistics() -> list[Statistic]:
    return [
        Statistic("upper_half_at_pi", (np.pi,), lambda v: (np.sin(v[..., 0]) > 0).astype(float)),
        Statistic("cos_at_half_pi", (0.5 * np.pi,), lambda v: np.cos(v[..., 0])),
        Statistic("arc_fraction_at_3pi_2", (1.5 * np.pi,), lambda v: np.mod(v[..., 0], TWO_PI) / TWO_PI),
    ]


def shift_pre(phi: CircleMap, gamma: float, dim: int) -> FourierField:
    """pi0(Q log|phi'|) on the first ``dim`` frequencies."""
    q = 2.0 / gamma + gamma / 2.0
    f = analyze(GridFunction(q * log_deriv(phi).values), dim)
    return FourierField(f.order, f.coeffs, 0.0)


def shift_post(phi: CircleMap, gamma: float, dim: int, alpha: float | None = None) -> FourierField:
    """pi0(Q log|phi'| - alpha log|(phi(z) - 1)/(z - 1)|) on the first ``dim``
    frequencies; alpha defaults to gamma."""
    alpha = gamma if alpha is None else alpha
    q = 2.0 / gamma + gamma / 2.0
    ld = log_deriv(phi).values
    lr = log_ratio(phi, 0, ld.size).values
    f = analyze(GridFunction(q * ld - alpha * lr), dim)
    return FourierField(f.order, f.coeffs, 0.0)


def _require_half_seminorm(phi: CircleMap, tol: float = 0.05) -> float:
    """Seminorm of log_ratio(phi, 1) at two resolutions; refuse if unstable."""
    m = phi.size
    a = sobolev_norm(log_ratio(phi, 0, m), 0.5)
    b = sobolev_norm(log_ratio(phi, 0, m // 2), 0.5)
    if not np.isfinite(a) or abs(a - b) > tol * max(a, 1e-12):
        raise ValueError("log ratio at 1 has no stable H^1/2 seminorm; post-side experiment refused")
    return a


def importance_identity(gamma: float, phi: CircleMap, statistics: Sequence[Statistic] | None = None,
                        samples: int = 10_000, order: int = 128, dim: int | None = None,
                        size: int | None = None, seed: int = 0, side: str = "pre",
                        batches: int = 20, chunk: int = 500, threads: int = 1) -> ExperimentReport:
    """Compare E1 = mean g(deformed psi) with E2 = mean rho g(psi).

    For ``side='pre'`` the density acts on the first ``dim`` modes of h1 with
    shift pi0(Q log|phi'|). For ``side='post'`` it acts on h2 with the shift
    including -gamma log|(phi(z)-1)/(z-1)|. ``dim`` defaults to 2N and is
    capped at N, the number of sampled frequencies.
    """
    gamma = gmc._check_gamma(gamma)
    _require_fixes_one(phi)
    if side not in ("pre", "post"):
        raise ValueError("side must be 'pre' or 'post'")
    if samples < batches:
        raise ValueError("need at least one sample per batch")
    statistics = list(statistics or default_statistics())
    dim = min(2 * order if dim is None else int(dim), order)
    size = size or default_size(order)
    blocks = compute_blocks(phi, dim, max(8 * dim, 2 ** 14))
    if side == "pre":
        beta = shift_pre(phi, gamma, dim)
    else:
        _require_half_seminorm(phi)
        beta = shift_post(phi, gamma, dim)
    model = build_density(blocks, beta)

    angles = np.array([a for s in statistics for a in s.angles], float)
    weights = _insertion(order, size, gamma, None, None)
    inv = invert(phi)
    phi_angles = phi(angles)
    seqs = seed_streams(seed, samples)

    def run_chunk(lo: int):
        hi = min(lo + chunk, samples)
        c1 = np.empty((hi - lo, order), complex)
        c2 = np.empty_like(c1)
        for i, s in enumerate(seqs[lo:hi]):
            c1[i], c2[i] = _draw_pair(order, _streams(s)[0])
        cm1 = _cmf_batch(c1, size, gamma)
        cm2 = _cmf_batch(c2, size, gamma, weights)
        base = np.empty((hi - lo, angles.size))
        moved = np.empty_like(base)
        for i in range(hi - lo):
            base[i] = _backward(cm2[i], _forward(cm1[i], angles))
            if side == "pre":
                moved[i] = _backward(cm2[i], _forward(cm1[i], phi_angles))
            else:
                moved[i] = inv(base[i])
        coeff = c1 if side == "pre" else c2
        xi = np.empty((hi - lo, 2 * order))
        n = np.sqrt(2.0 * np.arange(1, order + 1))
        xi[:, 0::2] = n * coeff.real
        xi[:, 1::2] = -n * coeff.imag
        return base, moved, model.log_density(xi)

    starts = list(range(0, samples, chunk))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run_chunk, starts))
    else:
        parts = [run_chunk(lo) for lo in starts]
    base = np.concatenate([p[0] for p in parts])
    moved = np.concatenate([p[1] for p in parts])
    rho = np.exp(np.concatenate([p[2] for p in parts]))

    rows = []
    col = 0
    bidx = np.array_split(np.arange(samples), batches)

    def batch_se(x):
        means = np.array([x[b].mean() for b in bidx])
        return float(means.std(ddof=1) / np.sqrt(batches))

    for s in statistics:
        k = len(s.angles)
        g_base = s.fn(base[:, col:col + k])
        g_moved = s.fn(moved[:, col:col + k])
        col += k
        w = rho * g_base
        e1, e2 = float(g_moved.mean()), float(w.mean())
        se1, se2 = batch_se(g_moved), batch_se(w)
        comb = float(np.hypot(se1, se2))
        rows.append({"statistic": s.name, "E1": e1, "E2": e2, "se1": se1, "se2": se2,
                     "se_combined": comb, "se_paired": batch_se(g_moved - w),
                     "discrepancy": abs(e1 - e2), "z": abs(e1 - e2) / comb if comb else 0.0,
                     "pass": abs(e1 - e2) <= 3.0 * comb + ROUNDOFF})
    rows.append({"statistic": "rho_mean", "E1": 1.0, "E2": float(rho.mean()), "se2": batch_se(rho),
                 "discrepancy": abs(float(rho.mean()) - 1.0),
                 "pass": abs(float(rho.mean()) - 1.0) <= 3.0 * batch_se(rho) + ROUNDOFF})
    params = {"gamma": gamma, "samples": samples, "order": order, "dim": dim, "size": size,
              "seed": seed, "side": side, "batches": batches, "cols": blocks.cols,
              "hs_defect": model.hs_defect(), "shift_norm": float(np.linalg.norm(model.mean_coords)),
              "expected_rho_squared": model.expected_rho_squared()}
    return ExperimentReport("importance_identity", params, rows)
