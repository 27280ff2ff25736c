"""Command-line front end.

Every persisted run writes ``<out>/<command>-<hash>.json`` where the hash is
taken over the canonical JSON of the run configuration.  A second run with
the same configuration is skipped unless ``--force`` is given.  Exit codes:
0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import acceptance, exponent, geometry, matanalysis, momentmap
from .oscquad import BudgetExceeded, QuadratureConfig, unit_square_integral
from .phasepoly import CoefficientFileError, load_coefficients

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

DEFAULT_SAMPLES = {
    "gram-scan": 100_000,
    "shells": 100_000,
    "slab": 1_000_000,
    "tail": 1_000,
}


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int
    sample_counts: dict
    output_dir: str
    format: str = "json"
    quadrature: dict = field(default_factory=dict)
    slab: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def identity(self) -> dict:
        """Everything that determines the persisted files."""
        d = asdict(self)
        d.pop("output_dir")
        return d

    def digest(self) -> str:
        text = json.dumps(self.identity(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# -- config handling ------------------------------------------------------------------


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """Flags over config file over defaults."""
    cfg = read_config_file(args.config) if args.config else {}
    merged = {}
    for key, default in defaults.items():
        val = getattr(args, key, None)
        if val is None:
            val = cfg.get(key, default)
        merged[key] = val
    return merged


# -- persistence ------------------------------------------------------------------------


def record_path(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir) / f"{cfg.command}-{cfg.digest()}.json"


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def persist(cfg: RunConfig, outputs: dict, warn: list[str], rows: list[dict] | None = None,
            extra_files: dict[str, str] | None = None) -> Path:
    path = record_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {
        "config": asdict(cfg),
        "meta": {"created": datetime.now(timezone.utc).isoformat(), "version": _version(), "hash": cfg.digest()},
        "outputs": _jsonable(outputs),
        "warnings": warn,
    }
    if cfg.format in ("json", "both"):
        path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    else:
        # the record is always kept so re-runs can be detected
        path.write_text(json.dumps(record, sort_keys=True) + "\n")
    if cfg.format in ("csv", "both") and rows is not None:
        path.with_suffix(".csv").write_text(_csv_text(rows))
    for suffix, text in (extra_files or {}).items():
        path.with_suffix(suffix).write_text(text)
    return path


def load_record(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read run record {path}: {exc}") from exc


def _base_config(args, command: str, samples_default: int | None, params: dict, **kw) -> RunConfig:
    g = _merge(args, {"seed": 0, "samples": samples_default, "out": "runs", "format": "json"})
    counts = {} if samples_default is None else {command: int(g["samples"])}
    if counts and counts[command] < 1:
        raise UsageError("--samples must be >= 1")
    if g["format"] not in ("json", "csv", "both"):
        raise UsageError(f"unknown format {g['format']!r}")
    return RunConfig(command, int(g["seed"]), counts, str(g["out"]), str(g["format"]), params=params, **kw)


def _skip_existing(cfg: RunConfig, force: bool) -> bool:
    path = record_path(cfg)
    if path.exists() and not force:
        print(f"exists: {path} (use --force to recompute)")
        return True
    return False


# -- commands -----------------------------------------------------------------------------


def cmd_eval(args) -> int:
    try:
        poly = load_coefficients(args.coeff_file)
    except (OSError, CoefficientFileError) as exc:
        raise UsageError(str(exc)) from exc
    f = float(poly(args.x, args.y))
    try:
        est = unit_square_integral(poly, QuadratureConfig())
    except BudgetExceeded as exc:
        raise NumericalFailure(str(exc)) from exc
    print(json.dumps({
        "x": args.x,
        "y": args.y,
        "F": f,
        "I_real": est.value.real,
        "I_imag": est.value.imag,
        "I_abs": abs(est.value),
        "abs_error_estimate": est.abs_error_estimate,
    }))
    return EXIT_OK


def cmd_gram_scan(args) -> int:
    p = _merge(args, {"threshold": 1e-12})
    cfg = _base_config(args, "gram-scan", DEFAULT_SAMPLES["gram-scan"], {"threshold": float(p["threshold"])})
    if _skip_existing(cfg, args.force):
        return EXIT_OK
    rep = momentmap.degeneracy_scan(cfg.sample_counts["gram-scan"], cfg.params["threshold"], cfg.seed)
    out = json.loads(rep.to_json())
    path = persist(cfg, out, [], [out])
    print(json.dumps(out, sort_keys=True))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_shells(args) -> int:
    cfg = _base_config(args, "shells", DEFAULT_SAMPLES["shells"], {})
    if _skip_existing(cfg, args.force):
        return EXIT_OK
    h = matanalysis.shell_histogram(cfg.sample_counts["shells"], cfg.seed)
    warn = []
    if h.unclassifiable:
        warn.append(f"{h.unclassifiable} samples with G0 <= 0 left unclassified")
    if h.above_ceiling:
        warn.append(f"{h.above_ceiling} samples above 2^52")
    rows = [{"p": p, "count": c, "fraction": f} for p, c, f in h.rows()]
    path = persist(cfg, json.loads(h.to_json()), warn, rows)
    sys.stdout.write(h.to_csv())
    print(f"wrote {path}")
    return EXIT_OK


SYSTEMS = {
    "circle": lambda: geometry.sphere_system(2),
    "sphere": lambda: geometry.sphere_system(3),
    "plane": lambda: geometry.hyperplane_system(3),
    "tarry": geometry.tarry_system,
}


def cmd_slab(args) -> int:
    p = _merge(args, {"system": "circle", "u": None, "h_seq": "0.1 0.05 0.025", "eta": None})
    system = str(p["system"])
    if system not in SYSTEMS:
        raise UsageError(f"unknown system {system!r}; choose from {sorted(SYSTEMS)}")
    hs = _floats(p["h_seq"])
    eta = float(p["eta"]) if p["eta"] is not None else (geometry.TARRY_ETA if system == "tarry" else 1e-12)
    sysobj = SYSTEMS[system]()
    u = _floats(p["u"]) if p["u"] is not None else ([0.0] * 9 if system == "tarry" else
                                                      [0.5] if system == "plane" else [1.0])
    if len(u) != sysobj.n_constraints:
        raise UsageError(f"system {system} needs {sysobj.n_constraints} level values")
    cfg = _base_config(args, "slab", DEFAULT_SAMPLES["slab"], {"system": system, "u": u, "h_sequence": hs})
    slab_cfg = geometry.SlabConfig(h=hs[0], n_samples=cfg.sample_counts["slab"], eta=eta, seed=cfg.seed)
    cfg.slab = asdict(slab_cfg)
    if _skip_existing(cfg, args.force):
        return EXIT_OK
    if system == "tarry":
        out = geometry.tarry_probe_report(slab_cfg, hs)
        warn = list(out.get("warnings", []))
        rows = [{"h": h, "estimate": e} for h, e in zip(out["h_sequence"], out["estimates"])]
        status = EXIT_OK
    else:
        try:
            est = geometry.surface_measure(sysobj, u, slab_cfg, hs)
        except geometry.ExtrapolationUnstable as exc:
            persist(cfg, {"error": str(exc)}, [str(exc)])
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        out, warn, status = est.as_dict(), [], EXIT_OK
        rows = [{"h": h, "estimate": v, "stderr": e, "accepted": c} for h, v, e, c in est.per_h]
    path = persist(cfg, out, warn, rows)
    print(json.dumps(_jsonable(out), sort_keys=True))
    print(f"wrote {path}")
    return status


def tail_report(family: str, k2: int, shells: list[exponent.TailShell]) -> tuple[dict, list[str]]:
    warn = []
    for s in shells:
        if s.dropped:
            warn.append(f"R={s.R!r}: dropped {s.dropped}/{s.n_samples} samples over budget")
    fit_d = verdict_d = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            fit = exponent.decay_fit(shells)
        except exponent.InsufficientShells as exc:
            warn.append(str(exc))
        else:
            v = exponent.verdict(fit)
            fit_d = asdict(fit)
            verdict_d = {"status": v.status.value, "fitted_total_exponent": v.fitted_total_exponent,
                         "margin": v.margin}
    warn += [str(w.message) for w in caught]
    return {
        "phase_family": family,
        "k2": k2,
        "shells": [s.as_dict() for s in shells],
        "fit": fit_d,
        "verdict": verdict_d,
    }, warn


def plot_data(shells: list[exponent.TailShell]) -> str:
    lines = ["# log2(R) log2(estimate)"]
    for s in shells:
        if s.estimate > 0:
            lines.append(f"{math.log2(s.R)!r} {math.log2(s.estimate)!r}")
    return "\n".join(lines) + "\n"


def cmd_tail(args) -> int:
    p = _merge(args, {"family": "quadratic", "k2": 2, "radii": "10 20 40 80"})
    fam = str(p["family"])
    try:
        family = exponent.get_family(fam)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    k2 = int(p["k2"])
    if k2 < 0 or k2 % 2:
        raise UsageError("--k2 must be a non-negative even integer")
    radii = _floats(p["radii"])
    if not radii or min(radii) <= 0:
        raise UsageError("--radii must be positive")
    qcfg = QuadratureConfig()
    cfg = _base_config(args, "tail", DEFAULT_SAMPLES["tail"], {"family": fam, "k2": k2, "radii": radii},
                       quadrature=asdict(qcfg))
    if _skip_existing(cfg, args.force):
        return EXIT_OK
    n = cfg.sample_counts["tail"]
    shells = [exponent.tail_shell(family.dim, family, k2, R, n, cfg.seed, qcfg) for R in radii]
    out, warn = tail_report(fam, k2, shells)
    rows = [{k: v for k, v in s.as_dict().items() if k != "strata"} for s in shells]
    path = persist(cfg, out, warn, rows, {".plot.dat": plot_data(shells)})
    print(json.dumps(_jsonable(out), sort_keys=True))
    print(f"wrote {path}")
    return EXIT_OK if out["fit"] is not None else EXIT_NUMERIC


def cmd_fit(args) -> int:
    rec = load_record(args.report)
    try:
        outputs = rec["outputs"]
        shells = [exponent.TailShell.from_dict(d) for d in outputs["shells"]]
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{args.report} is not a tail report") from exc
    source = hashlib.sha256(Path(args.report).read_bytes()).hexdigest()[:16]
    cfg = _base_config(args, "fit", None, {"source": source})
    if _skip_existing(cfg, args.force):
        return EXIT_OK
    out, warn = tail_report(outputs.get("phase_family", ""), int(outputs.get("k2", 0)), shells)
    out = {"source": str(args.report), "fit": out["fit"], "verdict": out["verdict"]}
    rows = [{**out["fit"], **out["verdict"]}] if out["fit"] else []
    path = persist(cfg, out, warn, rows)
    print(json.dumps(out, sort_keys=True))
    print(f"wrote {path}")
    return EXIT_OK if out["fit"] is not None else EXIT_NUMERIC


QUICK = {
    "known_exponent": {"n_samples": 1000},
    "gram_ceiling": {"n_samples": 20_000},
    "degeneracy": {"n_samples": 20_000},
    "surface_oracles": {"n_samples": 500_000},
    "matrix_bounds": {"n_matrices": 500, "n_mc": 200_000},
    "soft_probe": {"n_samples": 10},
}


def cmd_oracles(args) -> int:
    cfg = _base_config(args, "oracles", None, {"quick": bool(args.quick)})
    if _skip_existing(cfg, args.force):
        return EXIT_OK
    results = []
    for fn in acceptance.BATTERY:
        kw = dict(QUICK.get(fn.__name__, {})) if args.quick else {}
        if fn not in (acceptance.parseval, acceptance.stationary_phase):
            kw["seed"] = cfg.seed
        try:
            res = fn(**kw)
        except Exception as exc:  # a crashing check is a failed check; keep going
            res = acceptance.CriterionResult(0, fn.__name__, False, 0.0, 0.0, True, {"error": repr(exc)})
        print(res.line(), flush=True)
        results.append(res)
    failed = [r for r in results if r.gating and not r.ok]
    rows = [{"number": r.number, "name": r.name, "ok": r.ok, "seconds": r.seconds} for r in results]
    # timings vary between runs, so they stay out of the numerical payload
    out = {"results": [{k: v for k, v in r.as_dict().items() if k != "seconds"} for r in results]}
    path = persist(cfg, out, [f"criterion {r.number} failed" for r in failed], rows)
    print(f"wrote {path}")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_report(args) -> int:
    out_dir = Path(_merge(args, {"out": "runs"})["out"])
    paths = sorted(out_dir.glob("*.json"))
    if not paths:
        print(f"no run records in {out_dir}")
        return EXIT_OK
    for path in paths:
        rec = load_record(path)
        cfg = rec.get("config", {})
        summary = _summarize(cfg.get("command", "?"), rec.get("outputs", {}))
        warn = rec.get("warnings", [])
        print(f"{path.name}\tseed={cfg.get('seed')}\t{summary}" + (f"\twarnings={len(warn)}" if warn else ""))
    return EXIT_OK


def _summarize(command: str, outputs: dict) -> str:
    if command == "gram-scan":
        return f"fraction_gram={outputs.get('fraction_gram')!r} fraction_minor={outputs.get('fraction_minor')!r}"
    if command == "shells":
        return f"max_g0={outputs.get('max_g0')!r} shells={len(outputs.get('counts', {}))}"
    if command == "slab":
        val = outputs.get("value", outputs.get("extrapolated"))
        return f"value={val!r} stderr={outputs.get('stderr')!r}"
    if command in ("tail", "fit"):
        v = outputs.get("verdict") or {}
        return f"verdict={v.get('status')} slope={v.get('fitted_total_exponent')!r}"
    if command == "oracles":
        res = outputs.get("results", [])
        bad = [r["number"] for r in res if r["gating"] and not (r["passed"] and r["in_time"])]
        return f"criteria={len(res)} failed={bad}"
    return ""


# -- parser ---------------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    common.add_argument("--samples", type=_positive_int, default=None, help="Monte Carlo sample count")
    common.add_argument("--out", default=None, help="output directory (default ./runs)")
    common.add_argument("--format", choices=("json", "csv", "both"), default=None)
    common.add_argument("--force", action="store_true", help="recompute even if a record exists")
    common.add_argument("--config", default=None, help="flat key = value file; flags take precedence")

    parser = argparse.ArgumentParser(prog="tarrylab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="phase value and oscillatory integral for a coefficient file")
    p.add_argument("coeff_file")
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--y", type=float, default=0.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gram-scan", parents=[common], help="fraction of near-degenerate points")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_gram_scan)

    p = sub.add_parser("shells", parents=[common], help="dyadic shell histogram of G0")
    p.set_defaults(func=cmd_shells)

    p = sub.add_parser("slab", parents=[common], help="slab surface-measure estimate")
    p.add_argument("--system", default=None, help="circle, sphere, plane or tarry")
    p.add_argument("--u", default=None, help="level values, comma separated")
    p.add_argument("--h-seq", dest="h_seq", default=None, help="decreasing slab half-widths")
    p.add_argument("--eta", type=float, default=None)
    p.set_defaults(func=cmd_slab)

    p = sub.add_parser("tail", parents=[common], help="dyadic tail shells and decay verdict")
    p.add_argument("--family", default=None, help=f"one of {', '.join(exponent.FAMILIES)}")
    p.add_argument("--k2", type=int, default=None, help="even exponent 2k")
    p.add_argument("--radii", default=None, help="inner radii, comma separated")
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("fit", parents=[common], help="refit a persisted tail report")
    p.add_argument("report")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("oracles", parents=[common], help="run the acceptance battery")
    p.add_argument("--quick", action="store_true", help="reduced sample sizes (smoke test)")
    p.set_defaults(func=cmd_oracles)

    p = sub.add_parser("report", parents=[common], help="summarise persisted runs")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (BudgetExceeded, geometry.ExtrapolationUnstable, geometry.ZeroAcceptance,
            matanalysis.DegenerateSpectrum) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK
