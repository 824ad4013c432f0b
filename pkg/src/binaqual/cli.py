"""Command-line interface: ``binaqual compare|batch|synth|stats``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

from . import __version__
from .audio_io import read_wav, write_wav
from .errors import BinaqualError, InvalidSpec, IoFailure
from .harness import box_cox, fmt_float, pearson, read_manifest, round9, run_batch, spearman
from .metric import MetricConfig, binaqual
from .synthkit import FixtureSet

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2, 3
LOCKFILE_NAME = "synth.lock.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(category: str, detail: str) -> None:
    detail = " ".join(str(detail).split())
    print(f"error: {category}: {detail}", file=sys.stderr)


def _dump(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _round_tree(obj):
    if isinstance(obj, float):
        return round9(obj)
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    return obj


def cmd_compare(args) -> int:
    config = MetricConfig(align_search_frames=args.align_search)
    result = binaqual(read_wav(args.ref), read_wav(args.test), config)
    if args.json or args.diagnostics:
        _dump(_round_tree(result.to_dict(diagnostics=args.diagnostics)))
    else:
        print(f"LS={result.ls:.9f} NSIM_L={result.left.nsim:.9f} NSIM_R={result.right.nsim:.9f}")
        for w in result.warnings:
            print(f"warning: {w.code}: {w.detail}", file=sys.stderr)
    return EXIT_OK


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def cmd_batch(args) -> int:
    entries, base_dir = read_manifest(args.manifest)
    report = run_batch(entries, MetricConfig(align_search_frames=args.align_search), jobs=args.jobs,
                       base_dir=base_dir, boxcox_lambda=args.boxcox_lambda,
                       boxcox_epsilon=args.boxcox_epsilon)
    if args.format == "json":
        text = report.to_json()
        if args.out:
            _write_text(args.out, text)
        else:
            sys.stdout.write(text)
    else:
        if args.out:
            stem, _ = os.path.splitext(args.out)
            _write_text(args.out, report.rows_csv())
            _write_text(stem + ".groups.csv", report.groups_csv())
        else:
            sys.stdout.write(report.rows_csv())
    for f in report.failures:
        _fail("entry-failed", f"#{f.index} {f.label}: {f.error}")
    return report.exit_status


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def cmd_synth(args) -> int:
    try:
        with open(args.spec, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {args.spec}: {exc.strerror or exc}") from exc
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"{args.spec} is not valid JSON: {exc}") from None
    fixtures = FixtureSet.from_dict(manifest)
    os.makedirs(args.out_dir, exist_ok=True)

    files = []
    for stem, seed, buf in fixtures.render():
        name = stem + ".wav"
        path = os.path.join(args.out_dir, name)
        write_wav(buf, path, fixtures.bit_depth)
        files.append({"path": name, "seed": seed, "frames": buf.n_frames,
                      "channels": buf.channel_count, "sha256": _sha256_file(path)})
    lock = {
        "schema_version": 1,
        "generator": f"binaqual {__version__}",
        "spec_sha256": hashlib.sha256(raw.encode()).hexdigest(),
        "sample_rate_hz": fixtures.sample_rate_hz,
        "bit_depth": fixtures.bit_depth,
        "files": files,
    }
    _write_text(os.path.join(args.out_dir, LOCKFILE_NAME), json.dumps(lock, indent=2) + "\n")
    if args.json:
        _dump(lock)
    else:
        for f in files:
            print(f"{f['path']} {f['sha256']}")
    return EXIT_OK


def _read_columns(path: str, names: list[str]) -> list[list[float]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise InvalidSpec(f"{path} has no data rows")
    cols = [[] for _ in names]
    for lineno, row in enumerate(rows, start=2):
        for col, name in zip(cols, names):
            if name not in row:
                raise InvalidSpec(f"column {name!r} not found in {path}")
            try:
                col.append(float(row[name]))
            except (TypeError, ValueError):
                raise InvalidSpec(f"{path} line {lineno}: {name}={row[name]!r} is not a number") from None
    return cols


def cmd_stats(args) -> int:
    if args.stat == "corr":
        x, y = _read_columns(args.csv, [args.x, args.y])
        out = {"n": len(x), "pearson": pearson(x, y), "spearman": spearman(x, y)}
        if args.json:
            _dump(_round_tree({"stat": "corr", "x": args.x, "y": args.y, **out}))
        else:
            print(f"n={out['n']} pearson={fmt_float(out['pearson'])} spearman={fmt_float(out['spearman'])}")
    else:
        (v,) = _read_columns(args.csv, [args.column])
        t = box_cox(v, args.boxcox_lambda, args.epsilon).tolist()
        if args.json:
            _dump(_round_tree({"stat": "boxcox", "column": args.column, "lambda": args.boxcox_lambda,
                               "epsilon": args.epsilon, "values": t}))
        else:
            for a, b in zip(v, t):
                print(f"{fmt_float(a)},{fmt_float(b)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="binaqual", description="Binaural localization similarity metric.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compare", help="score one reference/test pair")
    c.add_argument("ref")
    c.add_argument("test")
    c.add_argument("--json", action="store_true", help="emit the full result as JSON")
    c.add_argument("--diagnostics", action="store_true", help="include per-patch and per-band pre-clamp scores")
    c.add_argument("--align-search", type=int, default=0, metavar="K",
                   help="search test patches within +/-K frames (default 0: same-index pairing)")
    c.set_defaults(func=cmd_compare)

    b = sub.add_parser("batch", help="score every pair listed in a CSV manifest")
    b.add_argument("manifest")
    b.add_argument("--out", help="report path (stdout when omitted)")
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--jobs", type=int, default=1, metavar="N")
    b.add_argument("--lambda", dest="boxcox_lambda", type=float, default=None,
                   help="add a Box-Cox transformed LS column with this lambda")
    b.add_argument("--boxcox-epsilon", type=float, default=0.0,
                   help="shift added to LS before Box-Cox (needed when some LS are 0)")
    b.add_argument("--align-search", type=int, default=0, metavar="K")
    b.set_defaults(func=cmd_batch)

    s = sub.add_parser("synth", help="render a JSON fixture manifest to WAV files")
    s.add_argument("spec")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--json", action="store_true", help="print the lockfile as JSON")
    s.set_defaults(func=cmd_synth)

    st = sub.add_parser("stats", help="correlation or Box-Cox on CSV columns")
    st_sub = st.add_subparsers(dest="stat", required=True, parser_class=_Parser)
    corr = st_sub.add_parser("corr", help="Pearson and Spearman correlation of two columns")
    corr.add_argument("csv")
    corr.add_argument("--x", required=True)
    corr.add_argument("--y", required=True)
    corr.add_argument("--json", action="store_true")
    bc = st_sub.add_parser("boxcox", help="Box-Cox transform of one column")
    bc.add_argument("csv")
    bc.add_argument("--column", required=True)
    bc.add_argument("--lambda", dest="boxcox_lambda", type=float, required=True)
    bc.add_argument("--epsilon", type=float, default=0.0)
    bc.add_argument("--json", action="store_true")
    st.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _fail("usage", exc)
        return EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        _fail("usage", "--jobs must be >= 1")
        return EXIT_USAGE
    if getattr(args, "align_search", 0) < 0:
        _fail("usage", "--align-search must be >= 0")
        return EXIT_USAGE
    try:
        return args.func(args)
    except BinaqualError as exc:
        _fail(exc.category, exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
