"""Command-line interface: ``jsrcert {bounds,certify,kozyakin,verify}``.

Reports are JSON documents.  Every float is written as a decimal string with
17 significant digits, so values survive a round trip bit for bit.  The
report ``body`` is hashed (``body_sha256``); wall-clock timings and the thread
count live outside the body, so identical inputs give identical bodies.

Exit codes: 0 ok/certified, 1 internal inconsistency, 2 partial (budget),
3 no certificate or undecided, 4 invalid input.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import criteria, kozyakin, smallmat
from .bounds import BoundsReport, refine
from .criteria import Certificate, CertifyConfig
from .errors import ConditionKError, CrossValidationError, DocumentError, JSRError
from .words import MatrixSet, root_spectral_radius

log = logging.getLogger("jsrcert")

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_INCONSISTENT, EXIT_PARTIAL, EXIT_NONE, EXIT_INVALID = 0, 1, 2, 3, 4


# ---------------------------------------------------------------------------
# number encoding


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def encode(obj: Any) -> Any:
    """JSON-ready copy of ``obj`` with floats as 17-digit strings."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if dataclasses.is_dataclass(obj):
        return encode(dataclasses.asdict(obj))
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _canonical(obj: Any) -> bytes:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True).encode()


def sha256(obj: Any) -> str:
    return hashlib.sha256(_canonical(obj)).hexdigest()


# ---------------------------------------------------------------------------
# set documents


def set_document(mset: MatrixSet, model: kozyakin.KozyakinModel | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "dim": mset.dim,
        "matrices": [{"name": name, "rows": encode(m)} for name, m in zip(mset.names, mset.members)],
    }
    if model is not None:
        doc["kozyakin"] = encode(model.params())
    return doc


def set_hash(mset: MatrixSet) -> str:
    return sha256(set_document(mset)["matrices"])


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise DocumentError(f"{where}: expected a number, got {json.dumps(value)}")
    try:
        x = float(value)
    except ValueError:
        raise DocumentError(f"{where}: cannot parse {value!r} as a number") from None
    if not math.isfinite(x):
        raise DocumentError(f"{where}: non-finite value {value!r}")
    return x


def parse_document(doc: Any) -> tuple[MatrixSet, kozyakin.KozyakinModel | None]:
    """Validate a set document; errors name the offending field."""
    if not isinstance(doc, dict):
        raise DocumentError("document: expected a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DocumentError(f"schema_version: expected \"{SCHEMA_VERSION}\", got {json.dumps(version)}")
    model = None
    if "kozyakin" in doc:
        block = doc["kozyakin"]
        if not isinstance(block, dict):
            raise DocumentError("kozyakin: expected an object")
        unknown = set(block) - {"a", "b", "c", "d", "alpha", "beta"}
        if unknown:
            raise DocumentError(f"kozyakin: unknown field {sorted(unknown)[0]!r}")
        params = {}
        for key in ("a", "b", "c", "d", "alpha", "beta"):
            if key not in block:
                if key in ("alpha", "beta"):
                    params[key] = 1.0
                    continue
                raise DocumentError(f"kozyakin.{key}: missing")
            params[key] = _number(block[key], f"kozyakin.{key}")
        model = kozyakin.build_model(**params)
    mats = doc.get("matrices")
    if mats is None and model is not None:
        return model.matrix_set, model
    dim = doc.get("dim")
    if isinstance(dim, bool) or not isinstance(dim, int) or not 1 <= dim <= smallmat.MAX_DIM:
        raise DocumentError(f"dim: expected an integer in 1..{smallmat.MAX_DIM}, got {json.dumps(dim)}")
    if not isinstance(mats, list) or not mats:
        raise DocumentError("matrices: expected a non-empty list")
    names: list[str] = []
    members = []
    for i, entry in enumerate(mats):
        where = f"matrices[{i}]"
        if not isinstance(entry, dict):
            raise DocumentError(f"{where}: expected an object")
        name = entry.get("name", f"A{i + 1}")
        if not isinstance(name, str) or not name:
            raise DocumentError(f"{where}.name: expected a non-empty string")
        if name in names:
            raise DocumentError(f"{where}.name: duplicate matrix name {name!r}")
        rows = entry.get("rows")
        if not isinstance(rows, list):
            raise DocumentError(f"{where}.rows: expected a list of rows")
        if len(rows) != dim:
            raise DocumentError(f"matrix {name} has {len(rows)} rows, expected {dim}")
        m = np.empty((dim, dim))
        for r, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != dim:
                got = len(row) if isinstance(row, list) else "no"
                raise DocumentError(f"matrix {name} row {r + 1} has {got} entries, expected {dim}")
            for c, value in enumerate(row):
                m[r, c] = _number(value, f"matrix {name} row {r + 1} column {c + 1}")
        names.append(name)
        members.append(m)
    mset = MatrixSet(tuple(members), tuple(names))
    if model is not None:
        if mset.K != 2 or mset.dim != 2 or not all(
                smallmat.approx_equal(x, y, 1e-12) for x, y in zip(mset.members, (model.A0, model.A1))):
            raise DocumentError("kozyakin: parameters do not match the listed matrices")
    return mset, model


def load_document(path: str) -> Any:
    """Read JSON from a file, ``-`` (stdin) or ``fixture:NAME``."""
    if path.startswith("fixture:"):
        name = path.split(":", 1)[1]
        res = resources.files("jsrcert") / "fixtures" / f"{name}.json"
        if not res.is_file():
            raise DocumentError(f"unknown fixture {name!r}; available: {', '.join(fixture_names())}")
        text, label = res.read_text(), path
    elif path == "-":
        text, label = sys.stdin.read(), "<stdin>"
    else:
        try:
            text, label = Path(path).read_text(), path
        except OSError as exc:
            raise DocumentError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{label}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def fixture_names() -> list[str]:
    base = resources.files("jsrcert") / "fixtures"
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))


def parse_set(path: str) -> tuple[MatrixSet, kozyakin.KozyakinModel | None]:
    return parse_document(load_document(path))


# ---------------------------------------------------------------------------
# report pieces


def bounds_dict(rep: BoundsReport) -> dict:
    return {
        "lower": rep.lower,
        "lower_witness": list(rep.lower_witness),
        "lower_depth": rep.lower_depth,
        "upper": rep.upper,
        "upper_depth": rep.upper_depth,
        "upper_source": rep.upper_source,
        "gap": rep.gap,
        "complete": rep.complete,
        "tol": rep.tol,
        "budget": rep.budget,
        "products": rep.products,
        "per_depth": [{"n": r.n, "lower": r.lower, "lower_word": list(r.lower_word),
                       "upper": r.upper, "running_upper": r.running_upper} for r in rep.per_depth],
        "tree": [{"level": r.level, "survivors": r.survivors, "lower": r.lower, "upper": r.upper}
                 for r in rep.tree],
    }


def certificate_dict(cert: Certificate) -> dict:
    return {
        "criterion": cert.criterion,
        "value": cert.value,
        "word": list(cert.word) if cert.word is not None else None,
        "optimal_word": list(cert.optimal_word) if cert.optimal_word is not None else None,
        "witness": dict(cert.witness),
        "tolerances": dict(cert.tolerances),
        "notes": list(cert.notes),
        "details": dict(cert.details),
    }


def frequency_dict(an: kozyakin.KozyakinAnalysis) -> dict:
    out: dict[str, Any] = {"model": an.model.params()}
    if an.estimate is not None:
        out.update(dataclasses.asdict(an.estimate))
    ap = an.approx
    if ap is not None:
        out["norm"] = {"grid": ap.grid_size, "iterations": ap.iterations, "rho_hat": ap.rho_hat,
                       "lo": ap.lo, "hi": ap.hi, "residual": ap.residual, "converged": ap.converged,
                       "bracket_history": [list(h) for h in ap.history]}
    out["upper"] = an.upper
    out["upper_source"] = an.upper_source
    if isinstance(an.outcome, Certificate):
        out["outcome"] = "certificate"
    else:
        out["outcome"] = "undecided"
        out["reason"] = an.outcome.reason
        if an.outcome.candidate_word is not None:
            out["candidate_word"] = list(an.outcome.candidate_word)
            out["candidate_value"] = an.outcome.candidate_value
    return out


def _config_dicts(args) -> dict:
    cc, kc = certify_config(args), kozyakin_config(args)
    skip = {"threads", "kozyakin", "cor3_roles", "run_kozyakin"}
    return {
        "bounds": {"tol": args.tol, "depth": args.depth, "budget": args.budget,
                   "max_level": args.max_level},
        "certify": {k: v for k, v in dataclasses.asdict(cc).items() if k not in skip},
        "kozyakin": dataclasses.asdict(kc),
    }


def certify_config(args) -> CertifyConfig:
    return CertifyConfig(n_max=args.nmax, threads=args.threads, refine_tol=args.tol,
                         refine_depth=args.depth, refine_budget=args.budget,
                         refine_max_level=args.max_level, kozyakin=kozyakin_config(args))


def kozyakin_config(args) -> kozyakin.KozyakinConfig:
    return kozyakin.KozyakinConfig(grid=args.grid, horizon=args.horizon, q_max=args.qmax)


class Run:
    """Collects the report body, timings and figure payloads for one command."""

    def __init__(self, command: str, args):
        self.command = command
        self.args = args
        self.body: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "command": command}
        self.timing: dict[str, float] = {}
        self.figures: dict[str, Any] = {}
        self._t0 = time.perf_counter()

    def timed(self, phase: str, fn, *a, **kw):
        t = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timing[phase] = round((time.perf_counter() - t) * 1000.0, 3)

    def finish(self, status: str, code: int) -> tuple[dict, int]:
        self.body["status"] = status
        self.body["exit_code"] = code
        body = encode(self.body)
        self.timing["total"] = round((time.perf_counter() - self._t0) * 1000.0, 3)
        report = {"body": body, "body_sha256": sha256(body),
                  "runtime": {"timing_ms": self.timing, "threads": self.args.threads}}
        return report, code


def _input_echo(mset: MatrixSet, model) -> dict:
    echo = {"sha256": set_hash(mset), "K": mset.K, "dim": mset.dim, "names": list(mset.names),
            "matrices": [m for m in mset.members]}
    if model is not None:
        echo["kozyakin"] = model.params()
    return echo


# ---------------------------------------------------------------------------
# commands


def cmd_bounds(args) -> tuple[dict, int, dict]:
    run = Run("bounds", args)
    mset, model = parse_set(args.set)
    run.body["input"] = _input_echo(mset, model)
    run.body["config"] = _config_dicts(args)["bounds"]
    rep = run.timed("bounds", refine, mset, args.tol, args.budget, args.depth, args.max_level,
                    args.threads)
    run.body["bounds"] = bounds_dict(rep)
    run.figures["bounds"] = rep
    if rep.complete:
        return (*run.finish("complete", EXIT_OK), run.figures)
    return (*run.finish("partial", EXIT_PARTIAL), run.figures)


def cmd_certify(args) -> tuple[dict, int, dict]:
    run = Run("certify", args)
    mset, model = parse_set(args.set)
    cfg = certify_config(args)
    cfg.run_kozyakin = False
    run.body["input"] = _input_echo(mset, model)
    run.body["config"] = _config_dicts(args)
    rep = run.timed("bounds", refine, mset, args.tol, args.budget, args.depth, args.max_level,
                    args.threads)
    run.body["bounds"] = bounds_dict(rep)
    run.figures["bounds"] = rep
    if kozyakin.is_example9_shape(mset):
        run.body["example9_case"] = kozyakin.example9_case(*mset.members)
    try:
        certs = run.timed("certify", criteria.certify, mset, cfg, rep)
        model = model or kozyakin.model_from_set(mset)
        if model is not None:
            an = run.timed("kozyakin", kozyakin.analyze, model, cfg.kozyakin)
            run.body["frequency"] = frequency_dict(an)
            run.figures["kozyakin"] = an
            if isinstance(an.outcome, Certificate):
                certs.append(an.outcome)
        for cert in certs:
            criteria.cross_validate(mset, cert, rep, cfg.crossval_tol)
    except CrossValidationError as exc:
        run.body["certificates"] = []
        run.body["error"] = str(exc)
        return (*run.finish("cross-validation failure", EXIT_INCONSISTENT), run.figures)
    run.body["certificates"] = [certificate_dict(c) for c in certs]
    if certs:
        return (*run.finish("certified", EXIT_OK), run.figures)
    return (*run.finish("no certificate", EXIT_NONE), run.figures)


def _model_from_args(args) -> tuple[MatrixSet, kozyakin.KozyakinModel]:
    flags = [args.a, args.b, args.c, args.d]
    if args.set is not None:
        if any(f is not None for f in flags):
            raise DocumentError("give either a set document or --a/--b/--c/--d, not both")
        mset, model = parse_set(args.set)
        model = model or kozyakin.model_from_set(mset)
        if model is None:
            raise DocumentError("set is not a Kozyakin pair satisfying condition (K)")
        return mset, model
    if any(f is None for f in flags):
        raise DocumentError("kozyakin needs a set document or all of --a --b --c --d")
    model = kozyakin.build_model(args.a, args.b, args.c, args.d, args.alpha, args.beta)
    return model.matrix_set, model


def cmd_kozyakin(args) -> tuple[dict, int, dict]:
    run = Run("kozyakin", args)
    mset, model = _model_from_args(args)
    cfg = certify_config(args)
    run.body["input"] = _input_echo(mset, model)
    run.body["config"] = _config_dicts(args)["kozyakin"]
    an = run.timed("kozyakin", kozyakin.analyze, model, cfg.kozyakin)
    run.body["frequency"] = frequency_dict(an)
    run.figures["kozyakin"] = an
    if not isinstance(an.outcome, Certificate):
        run.body["certificates"] = []
        return (*run.finish("undecided", EXIT_NONE), run.figures)
    rep = run.timed("bounds", refine, mset, args.tol, args.budget, args.depth, args.max_level,
                    args.threads)
    run.body["bounds"] = bounds_dict(rep)
    run.figures["bounds"] = rep
    try:
        criteria.cross_validate(mset, an.outcome, rep, cfg.crossval_tol)
    except CrossValidationError as exc:
        run.body["certificates"] = []
        run.body["error"] = str(exc)
        return (*run.finish("cross-validation failure", EXIT_INCONSISTENT), run.figures)
    run.body["certificates"] = [certificate_dict(an.outcome)]
    return (*run.finish("certified", EXIT_OK), run.figures)


def _rerun(mset: MatrixSet, crit: str, details: dict, cfg: CertifyConfig) -> Certificate | None:
    if details.get("example9_case") == 5:
        return kozyakin.example9_dispatch(*mset.members, config=cfg).certificate
    if crit == "Thm1":
        return criteria.check_theorem1(mset, int(details.get("n", 1)), cfg.membership_tol, cfg.budget)
    if crit == "Kozyakin":
        model = kozyakin.model_from_set(mset)
        if model is None:
            return None
        out = kozyakin.theorem8_decide(model, cfg.kozyakin)
        return out if isinstance(out, Certificate) else None
    table = {
        "ThmA": lambda: criteria.check_symmetric(mset, cfg.sym_tol),
        "ThmB": lambda: criteria.check_normal(mset, cfg.eq_tol),
        "ThmC": lambda: criteria.check_transpose_closed(mset, cfg.eq_tol, cfg.membership_tol),
        "ThmD": lambda: criteria.check_sign_pair(mset, cfg),
        "ThmE": lambda: criteria.check_negative_determinants(mset),
        "ThmF": lambda: criteria.check_swap_conjugate(mset, cfg.eq_tol),
        "ThmG": lambda: criteria.check_offdiag_flip(mset, cfg.eq_tol),
        "ThmH": lambda: criteria.check_rank_one(mset, cfg),
        "Cor3": lambda: criteria.check_corollary3(mset, cfg.eq_tol),
        "Cor4": lambda: criteria.check_corollary4(mset, cfg.eq_tol),
        "Prop5": lambda: criteria.check_prop5(mset, cfg.eq_tol),
    }
    if crit not in table:
        raise DocumentError(f"unknown criterion {crit!r}")
    return table[crit]()


def verify_report(report: Any, mset: MatrixSet, args) -> tuple[list[str], list[str]]:
    """Re-derive every certificate in ``report`` from ``mset``.

    Returns ``(passed, failed)`` check descriptions.
    """
    if not isinstance(report, dict) or not isinstance(report.get("body"), dict):
        raise DocumentError("report: missing body")
    body = report["body"]
    ok: list[str] = []
    bad: list[str] = []
    if sha256(body) == report.get("body_sha256"):
        ok.append("body hash matches")
    else:
        bad.append("body hash mismatch: report was modified after it was written")
    echo = body.get("input", {})
    if echo.get("sha256") == set_hash(mset):
        ok.append("set matches the report input")
    else:
        bad.append("set differs from the report input: " + _set_diff(echo, mset))
        return ok, bad
    cfg = certify_config(args)
    for i, c in enumerate(body.get("certificates") or []):
        crit = c.get("criterion")
        label = f"certificate[{i}] {crit}"
        try:
            value = float(c["value"])
            tols = {k: float(v) for k, v in c.get("tolerances", {}).items()}
        except (KeyError, TypeError, ValueError):
            bad.append(f"{label}: malformed")
            continue
        wtol = tols.get("word", criteria.WORD_TOL)
        word = c.get("word")
        if word is not None:
            again = root_spectral_radius(mset, [int(k) for k in word])
            if abs(again - value) <= wtol * (1.0 + value):
                ok.append(f"{label}: word {word} reproduces the value")
            else:
                bad.append(f"{label}: word {word} gives {fmt(again)}, report says {fmt(value)}")
        fresh = _rerun(mset, crit, c.get("details", {}), cfg)
        if fresh is None:
            bad.append(f"{label}: criterion does not apply to this set")
        elif abs(fresh.value - value) <= cfg.crossval_tol * (1.0 + value):
            ok.append(f"{label}: criterion re-derived ({fmt(fresh.value)})")
        else:
            bad.append(f"{label}: re-derived value {fmt(fresh.value)} differs from {fmt(value)}")
    return ok, bad


def _set_diff(echo: dict, mset: MatrixSet) -> str:
    names = echo.get("names", [])
    mats = echo.get("matrices", [])
    if names != list(mset.names) or len(mats) != mset.K:
        return f"names {names} vs {list(mset.names)}"
    diffs = []
    for name, old, new in zip(names, mats, mset.members):
        old = np.array([[float(x) for x in row] for row in old])
        if old.shape != new.shape:
            diffs.append(f"{name} shape {old.shape} vs {new.shape}")
            continue
        idx = np.argwhere(old != new)
        if len(idx):
            r, c = idx[0]
            diffs.append(f"{name}[{r + 1},{c + 1}] {fmt(old[r, c])} vs {fmt(new[r, c])}"
                         + (f" (+{len(idx) - 1} more)" if len(idx) > 1 else ""))
    return "; ".join(diffs) or "hash differs"


def cmd_verify(args) -> tuple[dict, int, dict]:
    run = Run("verify", args)
    report = load_document(args.report)
    mset, _ = parse_set(args.set)
    ok, bad = run.timed("verify", verify_report, report, mset, args)
    run.body["passed"] = ok
    run.body["failed"] = bad
    for line in bad:
        print(f"verify: {line}", file=sys.stderr)
    if bad:
        return (*run.finish("mismatch", EXIT_INCONSISTENT), run.figures)
    return (*run.finish("verified", EXIT_OK), run.figures)


# ---------------------------------------------------------------------------


def render_figures(figs: dict, directory: Path, stem: str) -> list[Path]:
    from . import plotting

    paths = []
    if "bounds" in figs:
        paths.append(plotting.plot_bounds(figs["bounds"], directory / f"{stem}_bounds.png"))
    an = figs.get("kozyakin")
    if an is not None and an.approx is not None:
        paths.append(plotting.plot_unit_ball(an.approx, directory / f"{stem}_unit_ball.png"))
        paths.append(plotting.plot_bracket(an.approx.history, directory / f"{stem}_bracket.png"))
        if an.trajectory and an.estimate is not None:
            target = an.estimate.p / an.estimate.q
            paths.append(plotting.plot_frequency(an.trajectory, an.estimate.burn_in,
                                                 directory / f"{stem}_frequency.png", target))
    return paths


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--tol", type=float, default=1e-9, help="target gap upper - lower (default 1e-9)")
    g.add_argument("--depth", type=int, default=8, help="full enumeration depth (default 8)")
    g.add_argument("--budget", type=int, default=200_000, help="product budget for refine")
    g.add_argument("--max-level", type=int, default=64, help="deepest search-tree level")
    g.add_argument("--nmax", type=int, default=4, help="largest n for the Gram criterion")
    g.add_argument("--grid", type=int, default=4096, help="angular grid size for the extremal norm")
    g.add_argument("--horizon", type=int, default=100_000, help="trajectory length after burn-in")
    g.add_argument("--qmax", type=int, default=64, help="largest denominator for p/q")
    g.add_argument("--threads", type=int, default=1, help="worker threads (output is identical)")
    g.add_argument("--out", type=Path, help="write the report here instead of stdout")
    g.add_argument("--figures", type=Path, metavar="DIR",
                   help="directory for PNG figures (default: next to --out)")
    g.add_argument("--no-figures", action="store_true", help="do not render figures")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="jsrcert", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("bounds", parents=[common], help="two-sided bounds on the joint spectral radius")
    p.add_argument("set", help="set document (path, '-', or fixture:NAME)")
    p = sub.add_parser("certify", parents=[common], help="run every finiteness criterion")
    p.add_argument("set")
    p = sub.add_parser("kozyakin", parents=[common], help="switching frequency and finiteness decision")
    p.add_argument("set", nargs="?", help="optional set document instead of parameter flags")
    for name in ("a", "b", "c", "d"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p = sub.add_parser("verify", parents=[common], help="re-check a report against its set")
    p.add_argument("report")
    p.add_argument("set")
    sub.add_parser("fixtures", help="list bundled fixtures")
    return parser


COMMANDS = {"bounds": cmd_bounds, "certify": cmd_certify, "kozyakin": cmd_kozyakin,
            "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "fixtures":
        print("\n".join(fixture_names()))
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.tol <= 0 or args.depth < 1 or args.budget < 1 or args.threads < 1:
        print("jsrcert: --tol, --depth, --budget and --threads must be positive", file=sys.stderr)
        return EXIT_INVALID
    try:
        report, code, figs = COMMANDS[args.command](args)
    except ConditionKError as exc:
        print(f"jsrcert: condition (K): {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DocumentError, JSRError, ValueError) as exc:
        print(f"jsrcert: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = json.dumps(report, indent=2) + "\n"
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    fig_dir = args.figures or (args.out.parent if args.out is not None else None)
    if fig_dir is not None and not args.no_figures and figs:
        stem = args.out.stem if args.out is not None else args.command
        for path in render_figures(figs, fig_dir, stem):
            log.info("wrote %s", path)
    return code


if __name__ == "__main__":
    sys.exit(main())
