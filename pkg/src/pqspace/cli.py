"""Command-line entry point: ``pqspace <subcommand> ...``.

Exit codes: 0 success, 1 domain failure, 2 usage or IO error.  Output format
follows the extension of ``--out`` (``.json`` or ``.csv``); without ``--out``
results go to stdout.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from importlib import resources
from pathlib import Path

from . import cube as cubemod
from . import product, seqsim
from .concentration import (
    MAX_EXACT_POINTS,
    alpha_curve,
    alpha_monte_carlo_curve,
    levy_diagnostics,
)
from .core import SIDES, FinitePQSpace, as_fraction, validate
from .generators import two_point_space
from .serialization import dumps_report, dumps_space, loads_space, write_rows_csv


class UsageError(Exception):
    """Bad input files or flags: exit 2."""


class DomainError(Exception):
    """Valid request whose answer is a failure: exit 1."""


def _data_path(name: str) -> Path:
    return Path(str(resources.files("pqspace.data").joinpath(name)))


def _read_text(path: str) -> str:
    if path.startswith("data:"):
        path = str(_data_path(path[5:]))
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc


def load_space_arg(src: str) -> FinitePQSpace:
    """A space file, ``data:NAME`` for a bundled fixture, ``two-point:N`` or ``cube:N[:variant]``."""
    kind, _, rest = src.partition(":")
    try:
        if kind == "two-point" and rest:
            return two_point_space(int(rest))
        if kind == "cube" and rest:
            n, _, variant = rest.partition(":")
            return cubemod.materialize(cubemod.CubeSpec(int(n), variant or "metric"), exact=True)
    except ValueError as exc:
        raise UsageError(f"bad space spec {src!r}: {exc}") from exc
    try:
        return loads_space(_read_text(src))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{src}: {exc}") from exc


def _load_json(path: str) -> dict:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("PQSPACE_SEED")
    if env is None:
        raise UsageError("randomized run needs --seed or PQSPACE_SEED")
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"PQSPACE_SEED must be an integer, got {env!r}") from exc


def _parse_grid(text: str | None):
    if text is None or text == "auto":
        return None
    try:
        return [as_fraction(t) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad grid {text!r}") from exc


def _emit(args, payload: dict, header: list[str] | None = None, rows=None) -> None:
    """Write JSON when --out ends in .json, otherwise CSV rows (or JSON when there are none)."""
    out = args.out
    as_json = rows is None or (out is not None and out.endswith(".json"))
    if out is not None and not as_json and not out.endswith(".csv"):
        raise UsageError(f"--out must end in .csv or .json: {out}")
    text = dumps_report(payload) if as_json else write_rows_csv(None, header, rows)
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc.strerror or exc}") from exc


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(args) -> int:
    space = load_space_arg(args.space)
    report = validate(space, max_witnesses=args.max_witnesses)
    _emit(args, {"space": args.space, "n": space.n, **report.to_dict(space.labels)})
    _say(f"{args.space}: {'quasi-metric' if report.is_quasimetric else f'{report.violation_count} violation(s)'}")
    return 0 if report.is_quasimetric else 1


def _load_matrix(src: str) -> seqsim.ScoreMatrix:
    if src.lower() == "blosum62":
        return seqsim.load_blosum62()
    try:
        return seqsim.parse_score_matrix(_read_text(src))
    except seqsim.ParseError as exc:
        raise UsageError(f"{src}: {exc}") from exc


def _gap_from_args(args) -> seqsim.GapPenalty:
    try:
        if args.scorer_config:
            return seqsim.GapPenalty.from_dict(_load_json(args.scorer_config).get("gap", {}))
        kind = "affine" if args.gap_open else "linear"
        return seqsim.GapPenalty(kind, args.gamma, args.gap_open)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_convert(args) -> int:
    matrix = _load_matrix(args.matrix)
    gap = _gap_from_args(args)
    try:
        records = seqsim.read_fasta(_read_text(args.fasta), matrix.alphabet)
    except (seqsim.ParseError, ValueError) as exc:
        raise UsageError(f"{args.fasta}: {exc}") from exc
    if not records:
        raise UsageError(f"{args.fasta}: no sequences")
    seqs = [s for _, s in records]
    try:
        space, report = seqsim.score_to_pqspace(seqs, seqsim.Scorer(matrix, gap), labels=[h.split()[0] if h else s for h, s in records])
    except seqsim.DuplicateSequenceError as exc:
        raise DomainError(str(exc)) from exc
    text = dumps_space(space)
    if args.out is None:
        sys.stdout.write(text)
    else:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    _say(f"{space.n} sequences; " + ("quasi-metric" if report.is_quasimetric else f"{report.violation_count} violation(s): {report.counts()}"))
    return 0 if report.is_quasimetric else 1


def cmd_score_check(args) -> int:
    matrix = _load_matrix(args.matrix)
    cond = seqsim.check_score_conditions(matrix)
    k = len(matrix.alphabet)
    phi = seqsim.check_phi_triangle(seqsim.back_derive_phi(matrix), [1 / k] * k, matrix.alphabet.symbols)
    payload = {
        "matrix": args.matrix,
        "symbols": list(matrix.alphabet.symbols),
        "counts": cond.counts(),
        "conditions": cond.to_text().splitlines(),
        "phi_violations": len(phi.violations),
        "phi_equivalent": phi.equivalent,
        "phi": phi.to_text().splitlines(),
    }
    if args.out is not None and args.out.endswith(".txt"):
        try:
            Path(args.out).write_text(cond.to_text() + phi.to_text())
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    else:
        _emit(args, payload)
    counts = " ".join(f"{k}={v}" for k, v in cond.counts().items())
    _say(f"{counts} phi={len(phi.violations)}")
    return 1 if args.strict and not (cond.ok and phi.ok) else 0


def cmd_concentration(args) -> int:
    space = load_space_arg(args.space)
    grid = _parse_grid(args.eps)
    if args.samples:
        if grid is None:
            raise UsageError("sampling mode needs an explicit --eps grid")
        curve = alpha_monte_carlo_curve(space, grid, SIDES, samples=args.samples, seed=_resolve_seed(args.seed))
    else:
        if space.n > MAX_EXACT_POINTS:
            raise DomainError(
                f"exact enumeration is capped at {MAX_EXACT_POINTS} points (space has {space.n}); "
                "rerun with --samples for Monte Carlo lower bounds"
            )
        curve = alpha_curve(space, grid)
    rows = curve.to_rows()
    payload = {
        "space": args.space,
        "method": curve.method,
        "rows": [dict(zip(curve.CSV_HEADER, r)) for r in rows],
    }
    _emit(args, payload, curve.CSV_HEADER, rows)
    return 0


def _cube_settings(args) -> dict:
    cfg = _load_json(args.config) if args.config else {}
    for key in ("n", "variant", "check", "samples", "seed", "eps"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if "n" not in cfg:
        raise UsageError("cube needs --n or a config with 'n'")
    cfg.setdefault("variant", "metric")
    cfg.setdefault("check", "gamma")
    return cfg


def cmd_cube(args) -> int:
    cfg = _cube_settings(args)
    try:
        spec = cubemod.CubeSpec(int(cfg["n"]), cfg["variant"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    check = cfg["check"]
    grid = cfg.get("eps")
    grid = _parse_grid(grid) if isinstance(grid, str) else grid
    if check.startswith("gamma") and spec.variant == "metric":
        raise DomainError("the metric cube is symmetric, so Gamma is identically 0; use --variant asymmetric")
    n = spec.n
    if check == "gamma":
        law = cubemod.gamma_law_exact(n)
        rows = law.to_rows()
        _emit(args, {"n": n, "exact": law.exact, "pmf": [{"gamma": g, "probability": p} for g, p in rows]}, ["gamma", "probability"], rows)
        return 0
    if check == "gamma-bound":
        report = cubemod.check_gamma_bound(cubemod.gamma_law_exact(n), grid)
        return _emit_bound(args, report)
    if check == "gamma-mc":
        samples = int(cfg.get("samples", 1_000_000))
        est = cubemod.gamma_monte_carlo(n, samples, _resolve_seed(cfg.get("seed")), grid, threads=args.threads)
        law = cubemod.gamma_law_exact(n)
        header = ["eps", "estimate", "stderr", "exact", "z"]
        rows = []
        for t in est:
            exact = float(law.tail(t.eps))
            rows.append([t.eps, t.estimate, t.stderr, exact, cubemod.z_score(t, exact)])
        _emit(args, {"n": n, "samples": samples, "rows": [dict(zip(header, r)) for r in rows]}, header, rows)
        return 0 if all(r[4] <= 4 for r in rows) else 1
    if check == "hamming":
        _, report = cubemod.cube_alpha_exact(spec, grid, side=args.side)
        return _emit_bound(args, report)
    if check == "majority":
        return _emit_bound(args, cubemod.majority_bound_report(n, spec.variant, args.side))
    raise UsageError(f"unknown check {check!r}")


def _emit_bound(args, report: cubemod.BoundReport) -> int:
    header = ["eps", "value", "bound", "margin", "ok"]
    rows = [[r.eps, r.value, r.bound, r.margin, r.ok] for r in report.rows]
    _emit(args, report.to_dict(), header, rows)
    if not report.ok:
        _say(f"{report.name}: {len(report.violations)} violation(s)")
    return 0 if report.ok else 1


def cmd_talagrand(args) -> int:
    cfg = _load_json(args.config)
    try:
        base = product.BasePenalty.from_lists(cfg["base"]["h"], cfg["base"].get("mu"))
        N = int(cfg["N"])
        u_grid = [float(u) for u in cfg["u_grid"]]
        samples = int(args.samples or cfg.get("samples", 100_000))
        seed = _resolve_seed(args.seed if args.seed is not None else cfg.get("seed"))
        A = product.sample_product_set(base, N, float(cfg.get("target_mass", 0.5)), seed, cfg.get("dims"))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.config}: {exc}") from exc
    norms = product.penalty_norms(base)
    if norms.sup_norm == 0:
        _say("warning: penalty is identically zero; bounds are vacuous (1/pA)")
    rows_t = product.product_tail_monte_carlo(base, N, A, u_grid, samples, seed, threads=args.threads)
    header = ["u", "empirical", "stderr", "bound", "dominated"]
    rows = [[r.u, r.empirical, r.stderr, r.bound, r.dominated] for r in rows_t]
    payload = {
        "N": N,
        "set_mass": A.mass,
        "set_size": len(A.points),
        "set_dims": A.dims,
        "sup_norm": norms.sup_norm,
        "l2_norm": norms.l2_norm,
        "rows": [dict(zip(header, r)) for r in rows],
    }
    _emit(args, payload, header, rows)
    return 0 if all(r.dominated for r in rows_t) else 1


def cmd_levy(args) -> int:
    sources: list[str] = []
    for pattern in args.spaces:
        hits = sorted(glob.glob(pattern))
        sources.extend(hits if hits else [pattern])
    if args.two_point:
        lo, hi = args.two_point
        sources.extend(f"two-point:{n}" for n in range(lo, hi + 1))
    if args.cube:
        lo, hi = args.cube
        sources.extend(f"cube:{n}:{args.variant}" for n in range(lo, hi + 1))
    if len(sources) < 3:
        raise DomainError(f"a Levy family needs at least 3 spaces, got {len(sources)}")
    spaces = [load_space_arg(s) for s in sources]
    if max(s.n for s in spaces) > MAX_EXACT_POINTS:
        raise DomainError(f"exact enumeration is capped at {MAX_EXACT_POINTS} points")
    sizes = None
    if args.two_point or args.cube:
        sizes = [int(s.split(":")[1]) if s.startswith(("two-point:", "cube:")) else i + 1 for i, s in enumerate(sources)]
    report = levy_diagnostics(spaces, _parse_grid(args.eps), sizes=sizes)
    _emit(args, {"sources": sources, **report.to_dict()})
    for side, verdict in report.verdicts().items():
        _say(f"{side}: {verdict}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def _default_threads() -> int:
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqspace", description="Finite quasi-metric spaces with probability measures.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        p.add_argument("-o", "--out", help="output file (.csv or .json); stdout when omitted")
        p.add_argument("--threads", type=int, default=_default_threads(), help="worker threads (default: all cores)")
        p.add_argument("--seed", type=int, help="RNG seed (falls back to PQSPACE_SEED)")
        return p

    space_help = "space JSON, data:NAME, two-point:N or cube:N[:variant]"

    p = add("validate", cmd_validate, "check the quasi-metric axioms of a space")
    p.add_argument("space", help=space_help)
    p.add_argument("--max-witnesses", type=int, default=10_000, help="cap on listed violations")

    p = add("convert", cmd_convert, "turn FASTA sequences into a space via q(x,y) = s(x,x) - s(x,y)")
    p.add_argument("--matrix", required=True, help="substitution matrix file, or 'blosum62'")
    p.add_argument("--fasta", required=True, help="FASTA file")
    p.add_argument("--gamma", type=float, default=0.5, help="per-position gap cost")
    p.add_argument("--gap-open", type=float, default=0.0, help="per-run gap opening cost (affine when > 0)")
    p.add_argument("--scorer-config", help='JSON like {"gap": {"kind": "linear", "gamma": 0.5}}')

    p = add("score-check", cmd_score_check, "check substitution-matrix conditions and the phi triangle")
    p.add_argument("--matrix", default="blosum62", help="substitution matrix file, or 'blosum62'")
    p.add_argument("--strict", action="store_true", help="exit 1 when any condition fails")

    p = add("concentration", cmd_concentration, "left, right and associated concentration functions")
    p.add_argument("space", help=space_help)
    p.add_argument("--eps", help="comma-separated grid (fractions allowed) or 'auto'")
    p.add_argument("--samples", type=int, help="Monte Carlo lower bounds from this many sampled sets")

    p = add("cube", cmd_cube, "Hamming-cube laws and bounds")
    p.add_argument("--config", help="JSON with n, variant, check and optional samples/seed/eps")
    p.add_argument("--n", type=int, help="cube dimension")
    p.add_argument("--variant", choices=cubemod.VARIANTS, help="metric or asymmetric")
    p.add_argument(
        "--check",
        choices=("gamma", "gamma-bound", "gamma-mc", "hamming", "majority"),
        help="gamma pmf, its tail bound, Monte Carlo tails, exact alpha vs Hamming bound, or majority sets",
    )
    p.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.add_argument("--eps", help="comma-separated grid")
    p.add_argument("--side", default="associated", choices=SIDES, help="side for hamming/majority checks")

    p = add("talagrand", cmd_talagrand, "product-space tails against the Talagrand-type bound")
    p.add_argument("config", help="JSON config (or data:NAME)")
    p.add_argument("--samples", type=int, help="override the config sample count")

    p = add("levy", cmd_levy, "Levy-family diagnostics over a family of spaces")
    p.add_argument("spaces", nargs="*", help="space files or globs, in family order")
    p.add_argument("--two-point", nargs=2, type=int, metavar=("LO", "HI"), help="append two-point spaces n=LO..HI")
    p.add_argument("--cube", nargs=2, type=int, metavar=("LO", "HI"), help="append cubes n=LO..HI")
    p.add_argument("--variant", default="asymmetric", choices=cubemod.VARIANTS, help="cube variant for --cube")
    p.add_argument("--eps", help="comma-separated positive grid")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        _say(f"error: {exc}")
        return 2
    except DomainError as exc:
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
