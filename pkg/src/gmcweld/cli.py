"""Command-line front end.

Subcommands share one set of options, which may also come from a key=value
config file (``--config``); flags override file values. Exit status is 0 on
success, 1 on invalid input and 2 when a numerical routine aborts.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import gmc, io, pullback, sleweld, weldsolve
from .homeo import CircleMap, parse_map_spec

COMMANDS = ("sample", "operator", "gmc-check", "weld", "quasi-invariance", "fixtures")
STOCHASTIC = ("sample", "quasi-invariance")
THREADS_ENV = "GMCWELD_THREADS"

EPILOG = """\
outputs:
  sample            JSON lines, one welding per line (knots and lift in radians);
                    csv: columns index,angle,value with psi evaluated at 64 angles (radians)
  operator          rows K,G,cols,hs_norm_N,cov_defect,sym_defect_1,sym_defect_2
                    (norms are dimensionless Frobenius norms)
  gmc-check         Apery quadrature value and target; with --samples also one row per
                    arc: start,end,length (radians), mean_mass, se, z
  weld              welding knots/lift (radians) and the conformal radius scale
  quasi-invariance  one row per statistic: E1, E2, standard errors, discrepancy, z
  fixtures          versioned JSON with curves and zippered weldings

config files hold one key=value per line; '#' starts a comment.
exit status: 0 success, 1 invalid input, 2 numerical abort.
"""


class ConfigError(Exception):
    """Invalid configuration; exit status 1."""


@dataclass
class ExperimentConfig:
    command: str = ""
    gamma: float = 1.0
    N: int = 256
    G: int | None = None
    K: int = 32
    samples: int = 10
    seed: int | None = None
    map: str = "sine:0.2,1,0"
    out: str | None = None
    format: str = "json"
    threads: int = 1
    m: int = 256
    curve: str = "ellipse"
    side: str = "pre"
    apery: bool = False


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str):
    t = _TYPES[key]
    if "bool" in t:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if "int" in t:
        return int(raw)
    if "float" in t:
        return float(raw)
    return raw.strip()


def read_config_file(path: str) -> dict:
    """key=value lines -> {key: (value, 'path:line')}."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    out = {}
    for i, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES or key == "command":
            raise ConfigError(f"{path}:{i}: unknown key {key!r}")
        out[key] = (val, f"{path}:{i}")
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gmcweld", description="Random conformal weldings from Gaussian multiplicative chaos.",
                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value file; flags override its values")
    p.add_argument("--gamma", help="coupling in (0, 2)")
    p.add_argument("--N", help="field truncation order")
    p.add_argument("--G", help="grid / quadrature size")
    p.add_argument("--K", help="operator block dimension")
    p.add_argument("--samples", help="Monte Carlo sample count")
    p.add_argument("--seed", help="seed (required for stochastic commands)")
    p.add_argument("--map", help="map spec kind:p1,p2 e.g. moebius:0.3, sine:0.2,1,0")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", help="json or csv")
    p.add_argument("--threads", help=f"worker threads (env {THREADS_ENV})")
    p.add_argument("--m", help="boundary samples for weld/fixtures")
    p.add_argument("--curve", help="weld: fixture name or JSON file of [re, im] pairs")
    p.add_argument("--side", help="quasi-invariance: pre or post")
    p.add_argument("--apery", action="store_const", const="true", help="gmc-check: Apery quadrature only")
    return p


def parse_config(argv, config_file: str | None = None, env=None) -> ExperimentConfig:
    env = os.environ if env is None else env
    ns = build_parser().parse_args(argv)
    path = ns.config or config_file
    file_vals = read_config_file(path) if path else {}
    cfg = ExperimentConfig(command=ns.command)
    if THREADS_ENV in env:
        try:
            cfg.threads = int(env[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}={env[THREADS_ENV]!r} is not an integer") from None
    for key, (raw, loc) in file_vals.items():
        try:
            setattr(cfg, key, _convert(key, raw))
        except ValueError:
            msg = f"{loc}: {key} expects {_TYPES[key]}, got {raw!r}"
            if getattr(ns, key, None) is not None:
                msg += f" (also set by flag --{key})"
            raise ConfigError(msg) from None
    for key in _TYPES:
        raw = getattr(ns, key, None)
        if key == "command" or raw is None:
            continue
        try:
            setattr(cfg, key, _convert(key, raw))
        except ValueError:
            msg = f"--{key}: expects {_TYPES[key]}, got {raw!r}"
            if key in file_vals:
                msg += f" (file value at {file_vals[key][1]})"
            raise ConfigError(msg) from None
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if not 0.0 < cfg.gamma < 2.0:
        raise ConfigError(f"gamma={cfg.gamma} outside (0, 2)")
    for key in ("N", "K", "samples", "threads", "m"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be >= 1")
    uses_field = cfg.command in STOCHASTIC or (cfg.command == "gmc-check" and not cfg.apery)
    if uses_field and cfg.G is not None and cfg.G < 2 * cfg.N:
        raise ConfigError(f"G={cfg.G} < 2N={2 * cfg.N}")
    if cfg.format not in ("json", "csv"):
        raise ConfigError(f"format must be json or csv, got {cfg.format!r}")
    if cfg.side not in ("pre", "post"):
        raise ConfigError("side must be pre or post")
    if cfg.command in STOCHASTIC and cfg.seed is None:
        raise ConfigError(f"{cfg.command} needs --seed")
    if cfg.command == "gmc-check" and not cfg.apery and cfg.seed is None:
        raise ConfigError("gmc-check without --apery samples the chaos and needs --seed")
    if cfg.out is not None:
        folder = os.path.dirname(os.path.abspath(cfg.out))
        if not os.path.isdir(folder) or not os.access(folder, os.W_OK):
            raise ConfigError(f"cannot write output to {cfg.out}: directory missing or not writable")


def _map(cfg: ExperimentConfig) -> CircleMap:
    try:
        return parse_map_spec(cfg.map)
    except ValueError as e:
        raise ConfigError(f"--map {cfg.map!r}: {e}") from None


def _curve(cfg: ExperimentConfig) -> weldsolve.JordanCurve:
    named = {c.name: c for c in weldsolve.fixture_curves(cfg.m)}
    named["ellipse"] = named["ellipse(2.0,1.0)"]
    named["star"] = named["star(0.2,3)"]
    if cfg.curve in named:
        return named[cfg.curve]
    try:
        with open(cfg.curve) as fh:
            return weldsolve.JordanCurve.from_dict(json.load(fh))
    except OSError:
        raise ConfigError(f"--curve {cfg.curve!r}: not a fixture name ({', '.join(sorted(named))}) "
                          "or readable file") from None
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"--curve {cfg.curve!r}: malformed curve: {e}") from None


def _emit(cfg: ExperimentConfig, text: str, summary: str) -> None:
    if cfg.out:
        io.atomic_write(cfg.out, text)
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def cmd_sample(cfg):
    gen = sleweld.sle_generator(cfg.gamma, cfg.N, cfg.G)
    ens = sleweld.sample_ensemble(gen, cfg.samples, cfg.seed, cfg.threads)
    if cfg.format == "json":
        text = io.jsonl(s.to_dict() for s in ens)
    else:
        ang = 2 * np.pi * np.arange(64) / 64
        rows = [{"index": i, "angle": float(a), "value": float(v)}
                for i, s in enumerate(ens) for a, v in zip(ang, s.map(ang))]
        text = io.csv_table(rows, ["index", "angle", "value"])
    return text, f"sample: {len(ens)} weldings gamma={cfg.gamma} N={cfg.N} seed={cfg.seed}", True


def cmd_operator(cfg):
    phi = _map(cfg)
    size = cfg.G or 2 ** 14
    rows = pullback.trend_report(phi, (cfg.K, 2 * cfg.K), size)
    text = pullback.report_csv(rows) if cfg.format == "csv" else pullback.report_json(rows) + "\n"
    r = rows[0]
    ok = max(r["sym_defect_1"], r["sym_defect_2"]) < 1e-6
    summary = (f"operator: map={cfg.map} K={cfg.K} hs_norm_N={r['hs_norm_N']:.3e} "
               f"cov_defect={r['cov_defect']:.3e} symplectic={_verdict(ok)}")
    return text, summary, ok


def cmd_gmc_check(cfg):
    size = cfg.G or 1024
    value = gmc.apery_check(size)
    target = gmc.APERY_TARGET
    rows = [{"check": "apery", "G": size, "value": value, "target": target,
             "abs_error": abs(value - target), "abs_error_magnitude": abs(abs(value) - abs(target))}]
    ok = True
    parts = [f"apery value={value:.6f} target={target:.6f} (-7 zeta(3)/pi^2); "
             f"|value|-|target|={abs(value) - abs(target):+.1e}"]
    if not cfg.apery:
        arcs = gmc.martingale_check(cfg.gamma, cfg.N, cfg.samples, cfg.seed, size=cfg.G)
        ok = all(a["pass"] for a in arcs)
        rows += [dict(check="martingale", **a) for a in arcs]
        parts.append(f"martingale {_verdict(ok)} max z={max(a['z'] for a in arcs):.2f}")
    text = io.csv_table(rows) if cfg.format == "csv" else io.jsonl(rows)
    return text, "gmc-check: " + "; ".join(parts), ok


def cmd_weld(cfg):
    curve = _curve(cfg)
    psi, scale = weldsolve.zipper_welding(curve, cfg.m)
    if cfg.format == "csv":
        text = io.csv_table([{"knot": float(k), "lift": float(v)} for k, v in zip(psi.knots, psi.lift)],
                            ["knot", "lift"])
    else:
        text = json.dumps({"curve": curve.name, "m": cfg.m, "scale": scale, "welding": psi.to_dict()},
                          sort_keys=True) + "\n"
    return text, f"weld: {curve.name} m={cfg.m} scale={scale:.6f}", True


def cmd_quasi_invariance(cfg):
    phi = _map(cfg)
    rep = sleweld.importance_identity(cfg.gamma, phi, samples=cfg.samples, order=cfg.N, dim=cfg.K,
                                      size=cfg.G, seed=cfg.seed, side=cfg.side,
                                      batches=min(20, cfg.samples), threads=cfg.threads)
    text = rep.to_csv() if cfg.format == "csv" else rep.to_json() + "\n"
    worst = max((r.get("z", 0.0) for r in rep.rows), default=0.0)
    return text, f"quasi-invariance: map={cfg.map} side={cfg.side} max z={worst:.2f} {_verdict(rep.passed)}", rep.passed


def cmd_fixtures(cfg):
    payload = weldsolve.fixtures_payload(cfg.m)
    if cfg.format == "csv":
        rows = [{"name": f["curve"]["name"], "scale": f["scale"], "vertices": len(f["curve"]["vertices"])}
                for f in payload["fixtures"]]
        text = io.csv_table(rows, ["name", "scale", "vertices"])
    else:
        text = json.dumps(payload, sort_keys=True) + "\n"
    return text, f"fixtures: {len(payload['fixtures'])} curves at m={cfg.m}", True


HANDLERS = {"sample": cmd_sample, "operator": cmd_operator, "gmc-check": cmd_gmc_check,
            "weld": cmd_weld, "quasi-invariance": cmd_quasi_invariance, "fixtures": cmd_fixtures}


def run(cfg: ExperimentConfig) -> int:
    try:
        text, summary, _ = HANDLERS[cfg.command](cfg)
        _emit(cfg, text, summary)
    except ConfigError as e:
        print(f"gmcweld: invalid input: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"gmcweld: cannot write output: {e}", file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"gmcweld: numerical abort: {e}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as e:
        print(f"gmcweld: invalid input: {e}", file=sys.stderr)
        return 1
    return run(cfg)


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


if __name__ == "__main__":
    sys.exit(main())
