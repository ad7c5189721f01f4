"""Command-line front end.

Every command reads a JSON config (``"schema": "coordsim/1"``), lets flags
override its fields, and writes deterministic JSON/CSV into ``--out``. Each
output carries the SHA-256 of the effective config and the seed.

Exit status: 0 success, 1 failed check, 2 usage or config error, 3 budget
exceeded.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import converse, region, scheme
from . import probcore as pc
from .channel import S, SHAT, X, Y, DMChannel, Source, induced_joint
from .probcore import CondPmf, JointPmf

SCHEMA = "coordsim/1"
COMMANDS = ("region-check", "min-r0", "simulate", "sweep", "verify-lemmas", "converse-audit")
STOCHASTIC = {"simulate", "sweep", "verify-lemmas", "converse-audit", "min-r0", "region-check"}

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config handling


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def load_config(command: str, path: str | None, overrides: dict) -> dict:
    cfg: dict = {}
    if path is not None:
        try:
            cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    if cfg.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError(f"unsupported schema {cfg.get('schema')!r}")
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    cfg["schema"] = SCHEMA
    cfg["command"] = command
    if command in STOCHASTIC and "seed" not in cfg:
        raise ConfigError(f"{command} needs a seed (config field or --seed)")
    if "seed" in cfg:
        if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    if "tol" in cfg and not (isinstance(cfg["tol"], (int, float)) and cfg["tol"] > 0):
        raise ConfigError("tolerances must be positive")
    if "budget" in cfg and not (isinstance(cfg["budget"], int) and cfg["budget"] > 0):
        raise ConfigError("budget must be a positive integer")
    return cfg


def _need(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing config fields: {', '.join(missing)}")
    return [cfg[k] for k in keys]


def factorization_from(cfg: dict) -> scheme.TargetFactorization:
    (f,) = _need(cfg, "factorization")
    try:
        return scheme.TargetFactorization(
            f["p_s"], f["u_given_s"], f["x_given_us"], f["y_given_x"], f["shat_given_uy"])
    except KeyError as exc:
        raise ConfigError(f"factorization lacks {exc}") from exc


def query_from(cfg: dict, R0: float | None = None) -> region.RegionQuery:
    (q,) = _need(cfg, "query")
    try:
        t = np.asarray(q["target"], dtype=float)
        w = np.asarray(q["channel"], dtype=float)
        p_s = np.asarray(q["p_s"], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"query lacks {exc}") from exc
    ns, nx, ny, nh = t.shape
    target = JointPmf([(S, ns), (X, nx), (Y, ny), (SHAT, nh)], t)
    return region.RegionQuery(
        target, DMChannel(CondPmf([(X, nx)], [(Y, ny)], w)), Source(JointPmf([(S, ns)], p_s)),
        float(q.get("R0", 0.0) if R0 is None else R0), q.get("u_card"))


# ---------------------------------------------------------------------------
# output


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(out: Path, name: str, cfg: dict, body: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    doc = {"schema": SCHEMA, "command": cfg["command"], "config_hash": config_hash(cfg),
           "seed": cfg.get("seed"), **_clean(body)}
    path = out / name
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def sweep_csv(rows: list[dict], cfg: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# {SCHEMA} config_hash={config_hash(cfg)} seed={cfg.get('seed')}\n")
    w = csv.DictWriter(buf, fieldnames=scheme.SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_region_check(cfg: dict) -> tuple[int, dict]:
    q = query_from(cfg)
    residual = region.validate_decomposition(q)
    if residual >= region.DECOMP_TOL:
        return EXIT_FAIL, {"error": "target does not factor through source and channel",
                           "residual": residual}
    settings = _settings(cfg)
    inner = region.check_inner(q, settings)
    outer = region.check_outer(q, settings)
    body = {"query": q.to_dict(), "residual": residual, "inner": inner.to_dict(),
            "outer": outer.to_dict(), "I(X;Y)": region.target_ixy(q)}
    return EXIT_OK, body


def cmd_min_r0(cfg: dict) -> tuple[int, dict]:
    q = query_from(cfg, R0=0.0)
    residual = region.validate_decomposition(q)
    if residual >= region.DECOMP_TOL:
        return EXIT_FAIL, {"error": "target does not factor through source and channel",
                           "residual": residual}
    res = region.min_common_randomness(q, _settings(cfg))
    body = {"query": q.to_dict(), "result": res.to_dict(), "search_log": list(res.log),
            "note": "upper bound on the minimum over the searched witnesses"}
    return EXIT_OK, body


def _settings(cfg: dict) -> region.SearchSettings:
    s = {k: v for k, v in cfg.get("search", {}).items() if k in ("resolution", "max_lp", "restarts", "steps")}
    return region.SearchSettings(**s, seed=cfg["seed"], budget=cfg.get("budget"))


def cmd_simulate(cfg: dict) -> tuple[int, dict]:
    fact = factorization_from(cfg)
    n, R0, Rt, samples = _need(cfg, "n", "R0", "Rtilde", "samples")
    budget = cfg.get("budget")
    bseed, mseed = np.random.SeedSequence(cfg["seed"]).spawn(2)
    inst = scheme.build_scheme(fact, int(n), float(R0), float(Rt), int(bseed.generate_state(1)[0]), budget)
    exact = scheme.induced_scheme_joint(inst, budget).weights
    counts = scheme.simulate_scheme(inst, int(samples), np.random.default_rng(mseed))
    z = z_scores(counts, exact, int(samples))
    sig = float(cfg.get("sigmas", 3.0))
    bad = int((np.abs(z) > sig).sum())
    body = {"n": n, "R0": R0, "Rtilde": Rt, "samples": samples, "cells": int(exact.size),
            "support": int((exact > 0).sum()), "max_abs_z": float(np.abs(z).max()),
            "cells_beyond": bad, "sigmas": sig, "passed": bad == 0}
    return (EXIT_OK if bad == 0 else EXIT_FAIL), body


def z_scores(counts: np.ndarray, exact: np.ndarray, samples: int) -> np.ndarray:
    """Per-cell ``(count - N p) / sqrt(N p (1 - p))``; zero-probability cells must be empty."""
    counts = np.asarray(counts, dtype=float).ravel()
    p = np.asarray(exact, dtype=float).ravel()
    sd = np.sqrt(samples * p * (1 - p))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, (counts - samples * p) / np.where(sd > 0, sd, 1), np.where(counts > 0, np.inf, 0.0))
    return z


def cmd_sweep(cfg: dict) -> tuple[int, dict, str]:
    fact = factorization_from(cfg)
    R0, Rt, n_list, n_seeds = _need(cfg, "R0", "Rtilde", "n_list", "seeds")
    seeds = [cfg["seed"] + i for i in range(int(n_seeds))]
    rows = scheme.scheme_sweep(fact, float(R0), float(Rt), [int(n) for n in n_list], seeds, cfg.get("budget"))
    summary = scheme.summarize_sweep(rows)
    first, last = summary[min(summary)], summary[max(summary)]
    decreasing = last["mean"] < first["mean"]
    body = {"summary": {str(k): v for k, v in summary.items()}, "rates_admissible": fact.rates_admissible(R0, Rt),
            "quantities": fact.quantities(), "mean_decreases": decreasing}
    ok = decreasing or not cfg.get("expect_decrease", False)
    return (EXIT_OK if ok else EXIT_FAIL), body, sweep_csv(rows, cfg)


def cmd_verify_lemmas(cfg: dict) -> tuple[int, dict]:
    trials = int(cfg.get("trials", 500))
    tol = float(cfg.get("tol", 1e-9))
    rng = np.random.default_rng(cfg["seed"])
    checks = {}
    viol = half = 0
    done = 0
    while done < trials:
        d = int(rng.integers(2, 7))
        p, q = rng.dirichlet(np.ones(d) * rng.choice([0.3, 1.0, 4.0]), size=2)
        if 0.5 * np.abs(p - q).sum() > 0.5:
            continue
        c = converse.lemma_continuity(p, q)
        viol += not c.holds_l1
        half += not c.holds_half
        done += 1
    checks["entropy_continuity"] = {"trials": trials, "violations": viol, "half_l1_form_violations": half}
    viol = 0
    for _ in range(trials):
        nx, ny = (int(v) for v in rng.integers(2, 5, size=2))
        p = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
        q = (1 - rng.uniform()) * p + rng.uniform() * rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
        q /= q.sum()
        viol += not converse.lemma_conditional_tv(p, q).holds
    checks["conditional_tv"] = {"trials": trials, "violations": viol}
    viol = 0
    for _ in range(trials):
        n = int(rng.integers(2, 5))
        d = 2 if n == 4 else int(rng.integers(2, 4))
        pb = rng.dirichlet(np.ones(d))
        iid = converse_iid(pb, n)
        lam = rng.uniform(0, 0.2)
        p = (1 - lam) * iid + lam * rng.dirichlet(np.full(d ** n, 0.3)).reshape(iid.shape)
        viol += not converse.lemma_sum_mi(p, pb, n).holds
    checks["sum_mi"] = {"trials": trials, "violations": viol}
    viol = 0
    for _ in range(trials):
        nw, nv = (int(v) for v in rng.integers(1, 5, size=2))
        p = rng.dirichlet(np.full(nw * nv * nv, 0.5)).reshape(nw, nv, nv)
        viol += scheme.identity_coupling_gap(p) > 2 * scheme.mismatch_prob(p) + tol
    checks["coupling_bound"] = {"trials": trials, "violations": viol}
    eps_grid = [0.5 / 2 ** k for k in range(12)]
    fs = [converse.f_budget(e, 1.0, 2) for e in eps_grid]
    checks["f_monotone"] = {"violations": int(sum(b >= a for a, b in zip(fs, fs[1:])))}
    passed = all(v["violations"] == 0 for v in checks.values())
    return (EXIT_OK if passed else EXIT_FAIL), {"checks": checks, "passed": passed}


def converse_iid(pb: np.ndarray, n: int) -> np.ndarray:
    out = np.ones(())
    for _ in range(n):
        out = np.multiply.outer(out, pb)
    return out


def cmd_converse_audit(cfg: dict) -> tuple[int, dict]:
    p_s, enc1, w, dec1, n, R0 = _need(cfg, "p_s", "x_given_s", "channel", "shat_given_y", "n", "R0")
    codes = int(cfg.get("codes", 100))
    mix_max = float(cfg.get("mix_max", 0.3))
    tol = float(cfg.get("tol", converse.SLACK_TOL))
    p_s, enc1, w, dec1 = (np.asarray(a, dtype=float) for a in (p_s, enc1, w, dec1))
    src = Source(JointPmf([(S, p_s.size)], p_s))
    ch = DMChannel(CondPmf([(X, w.shape[0])], [(Y, w.shape[1])], w))
    target = converse.composite_target(src, enc1, ch, dec1)
    rng = np.random.default_rng(cfg["seed"])
    audits, failed = [], 0
    worst = {"channel": np.inf, "common randomness": np.inf, "markov_residual": 0.0}
    for i in range(codes):
        code = converse.random_code(int(n), float(R0), enc1, dec1, rng, rng.uniform(0, mix_max))
        joint = induced_joint(code, src, ch, cfg.get("budget"))
        a = converse.channel_chain(joint, int(n))
        b = converse.r0_chain(joint, int(n), target, float(R0))
        res = max(max(r) for r in converse.auxiliary_markov_residuals(joint, int(n)))
        ok = a.min_slack >= -tol and b.min_slack >= -tol and res < tol
        failed += not ok
        worst["channel"] = min(worst["channel"], a.min_slack)
        worst["common randomness"] = min(worst["common randomness"], b.min_slack)
        worst["markov_residual"] = max(worst["markov_residual"], res)
        if i < int(cfg.get("report_codes", 3)) or not ok:
            audits.append({"code": i, "channel": a.to_dict(), "common_randomness": b.to_dict(),
                           "markov_residual": res})
    body = {"codes": codes, "failed": failed, "worst": worst, "audits": audits, "passed": failed == 0}
    return (EXIT_OK if failed == 0 else EXIT_FAIL), body


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coordsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="seed (overrides config)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--budget", type=int, help="enumeration budget in cells")
        p.add_argument("--tol", type=float, help="numeric tolerance for checks")
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    out = Path(args.out)
    try:
        cfg = load_config(args.command, args.config,
                          {"seed": args.seed, "budget": args.budget, "tol": args.tol})
        stem = args.command.replace("-", "_")
        if args.command == "sweep":
            status, body, table = cmd_sweep(cfg)
            out.mkdir(parents=True, exist_ok=True)
            (out / "sweep.csv").write_text(table)
        else:
            handler = {
                "region-check": cmd_region_check,
                "min-r0": cmd_min_r0,
                "simulate": cmd_simulate,
                "verify-lemmas": cmd_verify_lemmas,
                "converse-audit": cmd_converse_audit,
            }[args.command]
            status, body = handler(cfg)
        write_json(out, f"{stem}.json", cfg, {"status": status, **body})
        return status
    except pc.CapacityError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, pc.StructuralError, ValueError, KeyError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
