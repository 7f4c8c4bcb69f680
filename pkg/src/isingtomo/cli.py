"""Command-line front end.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import ising, reconstruction, tomography, vqe
from .errors import DataError, NumericalError
from .pipeline import BENCHMARK_COLUMNS, ConfigError, RunConfig, benchmark, build_model, generate_data, solve

log = logging.getLogger("isingtomo")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Subcommands repeat the flags with suppressed defaults so that a value
    # given before the subcommand is not reset.
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat key/value YAML config file", **kw)
    p.add_argument("--seed", type=int, help="override the config seed", **kw)
    p.add_argument("--out", help="output directory (default: config 'out')", **kw)
    p.add_argument("--verbose", "-v", action="store_true", **kw)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = _Parser(prog="isingtomo", parents=[_global_flags(suppress=False)],
                     description="Two-qubit tomography via Ising mapping and a simulated VQE.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("gen-data", parents=[common], help="write synthetic count and probability files")

    p = sub.add_parser("solve", parents=[common], help="map data to an Ising model and run the VQE")
    p.add_argument("data", help="count file or probability file")
    p.add_argument("--oracle", action="store_true", help="also brute-force the ground state")

    p = sub.add_parser("reconstruct", parents=[common], help="turn a bitstring distribution into a state")
    p.add_argument("distribution")
    p.add_argument("--reference", help="state file to compare against")
    p.add_argument("--model", help="Ising model file (needed for boltzmann aggregation)")
    p.add_argument("--trace", help="trace CSV path recorded in the report")

    sub.add_parser("benchmark", parents=[common], help="compare all methods over seeds and noise levels")

    p = sub.add_parser("oracle", parents=[common], help="brute-force ground state of an Ising model file")
    p.add_argument("model")
    return parser


def _config(args) -> RunConfig:
    overrides = {"seed": args.seed, "out": args.out}
    if args.config:
        return RunConfig.load(args.config, **overrides)
    return RunConfig.from_mapping({}, **overrides)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def cmd_gen_data(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    data = generate_data(cfg.state, cfg.weights, cfg.mean_counts, cfg.noise, cfg.seed)
    tomography.save_counts(data.counts, out / "counts.csv")
    tomography.save_probabilities(data.exact, out / "exact.csv")
    reconstruction.save_state(data.rho, out / "state.json", cfg.state)
    print(f"wrote {out / 'counts.csv'}, {out / 'exact.csv'}, {out / 'state.json'}")
    return EXIT_OK


def _oracle_dict(model: ising.IsingModel) -> dict:
    bits, energy = ising.brute_force_minimum(model)
    return {"bitstring": ising.bits_to_str(bits), "energy": energy}


def cmd_solve(cfg: RunConfig, data_path: str, oracle: bool) -> int:
    out = _outdir(cfg)
    m = tomography.load_measurements(data_path)
    model = build_model(m, cfg.encoding_scale)
    model.save(out / "ising.json")
    sol = solve(model, cfg)
    _write_json(out / "theta.json", {
        "family": sol.spec.family, "depth": sol.spec.depth, "n_qubits": sol.spec.n_qubits,
        "theta": [float(x) for x in sol.theta], "energy": sol.final_energy,
        "evaluations": len(sol.trace), "converged": sol.trace.converged,
    })
    sol.trace.write_csv(out / "trace.csv")
    sol.distribution.save(out / "distribution.json")
    print(f"final energy {sol.final_energy:.9g} after {len(sol.trace)} evaluations; "
          f"modal bitstring {sol.distribution.mode()}")
    if oracle:
        o = _oracle_dict(model)
        o["vqe_energy"] = sol.final_energy
        o["gap"] = sol.final_energy - o["energy"]
        _write_json(out / "oracle.json", o)
        print(f"oracle energy {o['energy']:.9g} at {o['bitstring']}; gap {o['gap']:.3g}")
    return EXIT_OK


def cmd_reconstruct(cfg: RunConfig, dist_path: str, reference: str | None,
                    model_path: str | None, trace_path: str | None) -> int:
    out = _outdir(cfg)
    dist = vqe.BitstringDistribution.load(dist_path)
    model = ising.IsingModel.load(model_path) if model_path else None
    ref, label = (None, None)
    if reference:
        ref, label = reconstruction.load_state(reference)
    report = reconstruction.reconstruct(dist, ref, cfg.aggregation, model, cfg.beta, "vqe",
                                        label, trace_path)
    report.save(out / "report.json")
    report.write_heatmap(out / "heatmap.csv")
    f = report.fidelity_vs_reference
    print("fidelity " + (f"{f:.6f}" if f is not None else "n/a (no reference)"))
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    rows = benchmark(cfg)
    with open(out / "benchmark.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCHMARK_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"wrote {len(rows)} rows to {out / 'benchmark.csv'} ({failed} not ok)")
    for method in cfg.methods:
        f = [r["fidelity"] for r in rows if r["method"] == method and r["fidelity"] != ""]
        if f:
            print(f"  {method:17s} median fidelity {np.median(f):.6f}")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, model_path: str) -> int:
    out = _outdir(cfg)
    o = _oracle_dict(ising.IsingModel.load(model_path))
    _write_json(out / "oracle.json", o)
    print(f"ground state {o['bitstring']} energy {o['energy']:.9g}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "gen-data":
            return cmd_gen_data(cfg)
        if args.command == "solve":
            return cmd_solve(cfg, args.data, args.oracle)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, args.distribution, args.reference, args.model, args.trace)
        if args.command == "benchmark":
            return cmd_benchmark(cfg)
        return cmd_oracle(cfg, args.model)
    except ConfigError as exc:
        print(f"isingtomo: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"isingtomo: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"isingtomo: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"isingtomo: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
