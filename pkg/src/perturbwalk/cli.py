"""Command line entry point and result persistence.

Subcommands::

    perturbwalk run CONFIG --out DIR [--workers K] [--seed S]
    perturbwalk oracle LAW_SPEC --nmax N [--out FILE]
    perturbwalk check CONFIG

Exit codes: 0 all flags pass, 1 some threshold failed, 2 configuration
error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, oracle
from .conditionb import condition_b_check
from .config import config_hash, parse_config
from .errors import ConfigError, PerturbWalkError
from .experiments import CLAIMS, ExperimentResult, ExperimentSpec, run_experiment
from .laws import law_from_dict

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

CSV_HEADER = ["experiment", "horizon", "statistic", "value", "lower", "upper"]
PLOT_HEADER = ["x", "y", "y_lo", "y_hi"]


@dataclass
class RunManifest:
    config_hash: str
    master_seed: int | None
    replicates: dict[str, int]
    workers: int
    tool_version: str
    outputs: dict[str, str] = field(default_factory=dict)  # relative path -> sha256
    errors: dict[str, str] = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    passed: bool = True

    @property
    def exit_code(self) -> int:
        if self.errors:
            return EXIT_RUNTIME
        return EXIT_PASS if self.passed else EXIT_FAIL


def fmt(v) -> str:
    """Shortest round-trip decimal text for a number."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([c if isinstance(c, str) else fmt(c) for c in r])
    return buf.getvalue().encode("utf-8")


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class _Writer:
    def __init__(self, out: Path):
        self.out = out
        self.hashes: dict[str, str] = {}

    def write(self, rel: str, data: bytes) -> None:
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.hashes[rel] = _sha256(data)


def result_csv(result: ExperimentResult) -> bytes:
    return _csv_bytes(CSV_HEADER, [(result.name, r.horizon, r.statistic, r.value, r.lower, r.upper)
                                   for r in result.rows])


def _report(results: list[ExperimentResult], errors: dict[str, str]) -> str:
    lines = ["# Perturbed random walk experiments", ""]
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        lines.append(f"## {res.name} ({res.kind}): {status}")
        lines.append("")
        lines.append(f"Claim under test: {CLAIMS[res.kind]}.")
        lines.append("")
        for k, v in res.flags.items():
            lines.append(f"- {k}: {'pass' if v else 'fail'}")
        for n in res.notes:
            lines.append(f"- note: {n}")
        lines.append("")
    for name, err in errors.items():
        lines.append(f"## {name}: ERROR")
        lines.append("")
        lines.append(err.strip().splitlines()[-1] if err.strip() else "unknown error")
        lines.append("")
    return "\n".join(lines)


def ensure_writable(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise PerturbWalkError(f"output directory {out_dir} is not writable: {exc}") from None


def run_all(specs: Sequence[ExperimentSpec], workers: int, out_dir, cfg_hash: str = "",
            master_seed: int | None = None) -> RunManifest:
    """Run every experiment, persist CSV/JSON/plot/report files and return the manifest."""
    out = Path(out_dir)
    ensure_writable(out)
    t0 = time.perf_counter()
    writer = _Writer(out)
    results: list[ExperimentResult] = []
    errors: dict[str, str] = {}
    for spec in specs:
        try:
            res = run_experiment(spec, workers=workers)
        except Exception:  # partial-failure mode: keep going, index the error
            errors[spec.name] = traceback.format_exc()
            continue
        res.provenance["config_hash"] = cfg_hash
        results.append(res)
        writer.write(f"{spec.name}.csv", result_csv(res))
        for pname, arr in res.plots.items():
            writer.write(f"plots/{spec.name}__{pname}.csv", _csv_bytes(PLOT_HEADER, np.asarray(arr).tolist()))
    summary = {
        res.name: {"kind": res.kind, "passed": res.passed, "flags": res.flags, "summary": res.summary,
                   "notes": res.notes, "provenance": res.provenance}
        for res in results
    }
    writer.write("summary.json", (json.dumps(jsonable(summary), indent=2, sort_keys=True) + "\n").encode())
    writer.write("results.csv", _csv_bytes(CSV_HEADER, [(r.name, x.horizon, x.statistic, x.value, x.lower, x.upper)
                                                        for r in results for x in r.rows]))
    writer.write("report.md", _report(results, errors).encode())
    if errors:
        writer.write("errors.json", (json.dumps(errors, indent=2, sort_keys=True) + "\n").encode())
    manifest = RunManifest(
        config_hash=cfg_hash,
        master_seed=master_seed,
        replicates={s.name: s.replicates for s in specs},
        workers=workers,
        tool_version=__version__,
        outputs=dict(writer.hashes),
        errors={k: v.strip().splitlines()[-1] for k, v in errors.items()},
        wall_clock_seconds=time.perf_counter() - t0,
        passed=all(r.passed for r in results),
    )
    (out / "manifest.json").write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")
    return manifest


def verify_manifest(out_dir) -> list[str]:
    """Paths whose current bytes no longer match the manifest's hashes."""
    out = Path(out_dir)
    data = json.loads((out / "manifest.json").read_text())
    bad = []
    for rel, digest in data["outputs"].items():
        p = out / rel
        if not p.exists() or _sha256(p.read_bytes()) != digest:
            bad.append(rel)
    return bad


# --------------------------------------------------------------------------
# subcommands

def _read_config(path: str, seed: int | None):
    text = Path(path).read_text(encoding="utf-8")
    specs = parse_config(text, seed)
    return specs, config_hash(json.loads(text)), json.loads(text).get("seed")


def cmd_run(args) -> int:
    specs, h, seed = _read_config(args.config, args.seed)
    manifest = run_all(specs, args.workers, args.out, h, args.seed if args.seed is not None else seed)
    for name, res in json.loads((Path(args.out) / "summary.json").read_text()).items():
        print(f"{name}: {'PASS' if res['passed'] else 'FAIL'}")
    for name, err in manifest.errors.items():
        print(f"{name}: ERROR {err}", file=sys.stderr)
    return manifest.exit_code


def _load_law(text: str):
    p = Path(text)
    raw = p.read_text(encoding="utf-8") if p.exists() else text
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"law spec is neither a file nor valid JSON: {exc.msg}", "law") from None
    return law_from_dict(doc, "law")


def cmd_oracle(args) -> int:
    law = _load_law(args.law)
    if law.kind == "SimpleNeighbor" and law.dim == 2:
        src = oracle.srw2_return_probs(args.nmax)
    elif law.kind == "LazySimpleNeighbor" and law.dim == 2:
        src = oracle.lazy_srw2_return_probs(args.nmax, law.p0)
    else:
        src = oracle.build_grid(law, args.nmax, args.window)
    table = oracle.return_tail_exact(src)
    if args.out:
        table.to_csv(args.out)
    else:
        rows = [(k, *vals) for k, *vals in table.rows()]
        sys.stdout.write(_csv_bytes(["k", "U_k", "U_lower", "U_upper", "R_k", "R_lower", "R_upper"], rows).decode())
    print(f"period {table.period}", file=sys.stderr)
    return EXIT_PASS


def cmd_check(args) -> int:
    specs, h, _ = _read_config(args.config, None)
    print(f"config ok: {len(specs)} experiment(s), hash {h}")
    for spec in specs:
        line = f"{spec.name}: {spec.kind}, base {spec.base.kind}, |A| = {len(spec.membrane)}"
        if spec.base.is_finite:
            rep = condition_b_check(spec.base, spec.membrane, args.search_radius)
            line += (f"; aperiodic={rep.aperiodic} (index {rep.generated_subgroup_index}), "
                     f"accessible={rep.accessibility_ok}, period={rep.period}")
        print(line)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perturbwalk", description="Locally perturbed random walk experiments")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiments of a config file")
    r.add_argument("config")
    r.add_argument("--out", required=True)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--seed", type=int, default=None, help="override every experiment seed")
    r.set_defaults(func=cmd_run)
    o = sub.add_parser("oracle", help="export the exact return-tail table of a finite law")
    o.add_argument("law", help="law JSON text or path to a JSON file")
    o.add_argument("--nmax", type=int, required=True)
    o.add_argument("--window", type=int, default=None)
    o.add_argument("--out", default=None)
    o.set_defaults(func=cmd_oracle)
    c = sub.add_parser("check", help="validate a config and report Condition B")
    c.add_argument("config")
    c.add_argument("--search-radius", type=int, default=4)
    c.set_defaults(func=cmd_check)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
