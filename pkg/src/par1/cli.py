"""``par1`` command line: simulate, estimate, mc, limit and report.

Exit codes: 0 success, 2 configuration or input error, 3 path overflow,
4 failed theory check in ``mc --check-theory``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path as FsPath
from typing import Any, Sequence

import numpy as np

from par1 import __version__, rng
from par1 import limitdist as ld
from par1.errors import ConfigError, NotExplosive, OverflowAtStep, Par1Error
from par1.estimators import estimate
from par1.innovation import InnovationSpec, InnovationStream, generate
from par1.model import FAMILIES, PARModel, phi, regime
from par1.montecarlo import ExperimentConfig, MCSummary, estimator_ids, run_experiment
from par1.simulate import Path, simulate_path
from par1.stats import ks_two_sample

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OVERFLOW = 3
EXIT_CHECK = 4

REPORT_ROWS = (
    ("mean", ("mean",)),
    ("median", ("median",)),
    ("error mean", ("error", "mean")),
    ("error sigma", ("error", "sigma")),
    ("u. whisker", ("error", "u_whisker")),
    ("u. hinge", ("error", "u_hinge")),
    ("error median", ("error", "median")),
    ("l. hinge", ("error", "l_hinge")),
    ("l. whisker", ("error", "l_whisker")),
    ("abs 0.95", ("error", "abs_0.95")),
)


# -- config handling ---------------------------------------------------------

def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(config: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form; insensitive to key order and whitespace."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_digest: str
    master_seed: int
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config_digest": self.config_digest,
            "master_seed": self.master_seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": list(self.outputs),
        }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _read_json(path: str) -> Any:
    try:
        text = FsPath(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _parse_coeffs(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"--coeffs: {exc}") from exc


def _config_dict(args: argparse.Namespace) -> dict[str, Any]:
    """Config file (if any) with the inline flags layered on top."""
    d: dict[str, Any] = {}
    if getattr(args, "config", None):
        d = _read_json(args.config)
        if not isinstance(d, dict):
            raise ConfigError(f"{args.config}: expected a JSON object at top level")
    if getattr(args, "family", None) is not None:
        if args.family not in FAMILIES:
            raise ConfigError(f"--family must be one of {sorted(FAMILIES)}")
        d["model"] = FAMILIES[args.family].to_dict()
    if getattr(args, "coeffs", None) is not None:
        coeffs = _parse_coeffs(args.coeffs)
        d["model"] = {"period": args.period or len(coeffs), "coeffs": coeffs}
    elif getattr(args, "period", None) is not None:
        if "model" not in d:
            raise ConfigError("--period given without --coeffs or a model in the config")
        d["model"] = dict(d["model"], period=args.period)
    inn = dict(d.get("innovation", {}))
    for flag in ("law", "m", "sd"):
        val = getattr(args, flag, None)
        if val is not None:
            inn[flag] = val
    d["innovation"] = inn
    if getattr(args, "x0", None) is not None:
        d["x0"] = args.x0
    if getattr(args, "n", None) is not None:
        d["n_cycles"] = args.n
    if getattr(args, "reps", None) is not None:
        d["replications"] = args.reps
    if getattr(args, "seed", None) is not None:
        d["master_seed"] = args.seed
        d.pop("seed", None)
    if "model" not in d:
        raise ConfigError("no model: pass --config, --family or --coeffs")
    return d


def _experiment(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig.from_dict(_config_dict(args))


def _add_inline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inline configuration (overrides --config)")
    g.add_argument("--config", help="experiment JSON")
    g.add_argument("--family", type=int, help="built-in coefficient family 1-4")
    g.add_argument("--period", type=int)
    g.add_argument("--coeffs", help="comma or space separated a_1..a_P")
    g.add_argument("--x0", type=float)
    g.add_argument("--n", type=int, help="number of P-cycles")
    g.add_argument("--seed", type=int)
    g.add_argument("--law", choices=("gaussian", "uniform", "constant"))
    g.add_argument("--m", type=int, help="moving-average order of the innovation")
    g.add_argument("--sd", type=float)


def _write_json(path: str, obj: Any) -> None:
    FsPath(path).write_text(json.dumps(obj, indent=2) + "\n")


def _write_manifest(path: str, man: RunManifest) -> None:
    man.finished = _now()
    _write_json(path, man.to_dict())


# -- simulate / estimate -------------------------------------------------------

def write_path_csv(path: Path, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["k", "X_k", "u_k"])
    u = path.u
    for k, x in enumerate(path.x.tolist()):
        w.writerow([k, repr(x), "" if k == 0 or u is None else repr(float(u[k - 1]))])


def read_path_csv(fh, period: int, coeffs: Sequence[float] | None = None) -> Path:
    """Rebuild a :class:`Path` from ``k,X_k,u_k`` rows."""
    rows = list(csv.DictReader(fh))
    if not rows or {"k", "X_k"} - set(rows[0]):
        raise ConfigError("path CSV needs a header with columns k, X_k (and optionally u_k)")
    try:
        x = np.array([float(r["X_k"]) for r in rows])
        u_col = [r.get("u_k", "") for r in rows[1:]]
        u = np.array([float(v) for v in u_col]) if u_col and all(u_col) else None
    except ValueError as exc:
        raise ConfigError(f"path CSV: {exc}") from exc
    N = x.size - 1
    if N % period:
        raise ConfigError(f"path has {N} steps, not a multiple of the period {period}")
    model = PARModel(period, tuple(coeffs) if coeffs else (1.0,) * period)
    stream = InnovationStream(u, InnovationSpec()) if u is not None else None
    x.setflags(write=False)
    return Path(x, model, stream, float(x[0]), N // period)


def simulate_from_config(cfg: ExperimentConfig) -> Path:
    N = cfg.n_cycles * cfg.model.period
    stream = generate(cfg.innovation, N, cfg.master_seed)
    x0 = float(cfg.x0.draw(rng.generator(cfg.master_seed, rng.INITIAL), 1)[0])
    return simulate_path(cfg.model, stream, x0, cfg.n_cycles)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    ph = phi(cfg.model)
    info = f"phi={ph:.12g} regime={regime(cfg.model).value}"
    path = simulate_from_config(cfg)
    if args.out in (None, "-"):
        print(info, file=sys.stderr)
        write_path_csv(path, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            write_path_csv(path, fh)
        print(info)
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    coeffs = _parse_coeffs(args.coeffs) if args.coeffs else None
    if coeffs is not None and len(coeffs) != args.period:
        raise ConfigError(f"--coeffs has {len(coeffs)} values, period is {args.period}")
    if args.input == "-":
        path = read_path_csv(sys.stdin, args.period, coeffs)
    else:
        try:
            with open(args.input, newline="") as fh:
                path = read_path_csv(fh, args.period, coeffs)
        except OSError as exc:
            raise ConfigError(f"{args.input}: {exc.strerror}") from exc
    if args.diagnostics and coeffs is None:
        raise ConfigError("--diagnostics needs --coeffs")
    report = estimate(path, diagnostics=args.diagnostics)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        FsPath(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


# -- mc --------------------------------------------------------------------------

def theory_check(summary: MCSummary, n_draws: int, seed: int, tol: float = ld.DEFAULT_TOL) -> dict[str, dict]:
    """KS distance of every estimator's scaled errors to its limiting law."""
    cfg = summary.config
    lseed = rng.derive_seed(seed, rng.THEORY_CHECK)
    out = {}
    for est in estimator_ids(cfg.model.period):
        if est.startswith("a_"):
            lim = ld.sample_limit_a(cfg.model, cfg.innovation, int(est[2:]), cfg.x0, tol, n_draws, lseed)
        elif est == "phi_hat":
            lim = ld.sample_limit_hat_phi(cfg.model, cfg.innovation, cfg.x0, tol, n_draws, lseed)
        else:
            lim = ld.sample_limit_tilde_phi(cfg.model, cfg.innovation, cfg.x0, tol, n_draws, lseed)
        stat, crit = ks_two_sample(summary.estimators[est].scaled_errors, lim.values)
        out[est] = {"ks": stat, "critical_1pct": crit, "pass": stat < crit}
    return out


def write_hist_csv(summary: MCSummary, path: str, n_bins: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimator", "bin_lo", "bin_hi", "count"])
        for est in summary.estimators:
            edges, counts = summary.histogram(est, n_bins)
            for lo, hi, c in zip(edges[:-1].tolist(), edges[1:].tolist(), counts.tolist()):
                w.writerow([est, repr(lo), repr(hi), c])


def cmd_mc(args: argparse.Namespace) -> int:
    if args.check_theory and args.seed is None:
        raise ConfigError("--check-theory requires an explicit --seed")
    cfg = _experiment(args)
    man = RunManifest("mc", config_digest(cfg.to_dict()), cfg.master_seed, started=_now())
    summary = run_experiment(cfg)
    doc = summary.to_dict()
    code = EXIT_OK
    if args.check_theory:
        if abs(phi(cfg.model)) <= 1:
            raise NotExplosive(phi(cfg.model))
        check = theory_check(summary, args.limit_draws or summary.n_ok, cfg.master_seed)
        doc["theory_check"] = check
        for est, res in check.items():
            status = "PASS" if res["pass"] else "FAIL"
            print(f"{status} {est}: ks={res['ks']:.4f} critical={res['critical_1pct']:.4f}")
        if not all(r["pass"] for r in check.values()):
            code = EXIT_CHECK
    _write_json(args.out, doc)
    man.outputs.append(args.out)
    if args.hist_out:
        write_hist_csv(summary, args.hist_out, args.bins)
        man.outputs.append(args.hist_out)
    _write_manifest(args.manifest or args.out + ".manifest.json", man)
    fails = sum(summary.failures.values())
    print(f"{summary.n_ok} replications ok, {fails} failed; phi={summary.to_dict()['phi']:.12g}")
    return code


# -- limit -----------------------------------------------------------------------

def cmd_limit(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    kw = dict(x0_law=cfg.x0, tol=args.tol, n_draws=args.draws, seed=cfg.master_seed)
    if args.kind == "a_r":
        sample = ld.sample_limit_a(cfg.model, cfg.innovation, args.r, **kw)
    else:
        sample = ld.sample_limit(args.kind, cfg.model, cfg.innovation, **kw)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value"])
        for v in sample.values.tolist():
            w.writerow([repr(v)])
    header = dict(sample.header(), seed=cfg.master_seed, config_digest=config_digest(cfg.to_dict()))
    _write_json(args.header_out or args.out + ".json", header)
    print(f"{sample.values.size} draws, truncation depth {sample.truncation_depth}, tail bound {sample.tail_bound:.3g}")
    return EXIT_OK


# -- report ----------------------------------------------------------------------

def _dig(d: dict, keys: tuple[str, ...]) -> float:
    for k in keys:
        d = d[k]
    return float(d)


def report_blocks(summaries: Sequence[dict]) -> list[dict]:
    """One table block per summary: rows are statistics, columns estimators."""
    blocks = []
    for s in summaries:
        try:
            cfg = s["config"]
            cols = list(s["estimators"])
            rows = {label: [_dig(s["estimators"][c], keys) for c in cols] for label, keys in REPORT_ROWS}
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"not a summary file (missing {exc})") from exc
        inn = cfg["innovation"]
        title = (
            f"coeffs={cfg['model']['coeffs']} phi={s['phi']:.6g} n={cfg['n_cycles']} "
            f"law={inn['law']} m={inn['m']} replications={cfg['replications']}"
        )
        blocks.append({"title": title, "columns": cols, "rows": rows})
    return blocks


def format_blocks(blocks: Sequence[dict]) -> str:
    lines = []
    for b in blocks:
        lines.append(b["title"])
        width = max(len(label) for label in b["rows"])
        lines.append(" " * width + "".join(f"{c:>11}" for c in b["columns"]))
        for label, vals in b["rows"].items():
            spec = ">11.4g" if label in ("mean", "median") else ">11.0e"
            lines.append(f"{label:<{width}}" + "".join(format(v, spec) for v in vals))
        lines.append("")
    return "\n".join(lines)


def cmd_report(args: argparse.Namespace) -> int:
    blocks = report_blocks([_read_json(p) for p in args.summaries])
    text = json.dumps(blocks, indent=2) if args.format == "json" else format_blocks(blocks)
    if args.out:
        FsPath(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="par1", description="Explosive PAR(1) simulation and estimation")
    parser.add_argument("--version", action="version", version=f"par1 {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one path and write it as CSV")
    _add_inline_flags(p)
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate coefficients from a path CSV")
    p.add_argument("--input", required=True, help="CSV with columns k,X_k,u_k ('-' for stdin)")
    p.add_argument("--period", type=int, required=True)
    p.add_argument("--coeffs", help="true coefficients, needed for --diagnostics")
    p.add_argument("--diagnostics", action="store_true", help="also report the innovation sums C_n")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mc", help="run a Monte Carlo experiment")
    _add_inline_flags(p)
    p.add_argument("--reps", type=int, help="number of replications")
    p.add_argument("--out", required=True, help="summary JSON")
    p.add_argument("--hist-out", help="histogram CSV of the scaled errors")
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--manifest", help="run manifest JSON (default: <out>.manifest.json)")
    p.add_argument("--check-theory", action="store_true", help="KS-compare scaled errors with the limit laws")
    p.add_argument("--limit-draws", type=int, help="limit draws for --check-theory (default: replications)")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("limit", help="sample a limiting law")
    _add_inline_flags(p)
    p.add_argument("--kind", choices=("a_r", "tilde", "hat"), required=True)
    p.add_argument("--r", type=int, default=1, help="phase for --kind a_r")
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--tol", type=float, default=ld.DEFAULT_TOL)
    p.add_argument("--out", required=True, help="single-column CSV of draws")
    p.add_argument("--header-out", help="JSON header (default: <out>.json)")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("report", help="merge summary JSON files into tables")
    p.add_argument("summaries", nargs="+")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OverflowAtStep as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (ConfigError, NotExplosive, Par1Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
