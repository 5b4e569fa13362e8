"""Command-line entry point: run the verification suite, list scenarios,
or dump an operator in triplet text form.

Exit codes: 0 all checks passed or were skipped, 2 at least one check
failed (or a scenario errored), 3 the configuration could not be parsed.
"""

import argparse
import concurrent.futures
import os
import sys

from .config import ConfigError, load_config
from .lattice import LatticeSpec, build_lattice, ramp_field
from .operators import (build_boundary_field, build_field_hamiltonian,
                        build_hamiltonian, build_order_parameter,
                        build_staggered_sy, dump_triplets, fourier_spin)
from .reporting import (assemble_payload, lattice_inventory, render_figures,
                        write_report_json, write_scaling_csv,
                        write_structure_csv)
from .scenarios import CATALOG, run_scenario

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 2
EXIT_CONFIG_ERROR = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stagheis",
        description="Finite-lattice verification suite for the "
                    "staggered-field Heisenberg antiferromagnet")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the verification scenarios")
    run_p.add_argument("--config", metavar="PATH", default=None,
                       help="INI run configuration (defaults used if absent)")
    run_p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (overrides config)")
    run_p.add_argument("--threads", type=int, default=None,
                       help="worker pool size (overrides config)")
    run_p.add_argument("--seed", type=int, default=None,
                       help="random seed (overrides config)")
    run_p.add_argument("--scenarios", nargs="*", default=None,
                       help="subset of scenario names to run")
    run_p.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")
    run_p.add_argument("--corrupt-hamiltonian", action="store_true",
                       help="negative-control hook: jitter the boundary-field "
                            "bond weights so checks must fail")

    sub.add_parser("list", help="print the scenario catalog")

    dump_p = sub.add_parser("dump-operator",
                            help="write an operator as `row col re im` text")
    dump_p.add_argument("--which", required=True,
                        choices=["hamiltonian", "order-parameter",
                                 "staggered-sy", "boundary-field",
                                 "field-hamiltonian", "fourier-spin"])
    dump_p.add_argument("--d", type=int, default=1)
    dump_p.add_argument("--L", type=int, default=2)
    dump_p.add_argument("--S", type=float, default=0.5)
    dump_p.add_argument("--B", type=float, default=0.0)
    dump_p.add_argument("--R", type=int, default=1)
    dump_p.add_argument("--component", type=int, default=2,
                        help="spin component for fourier-spin (1, 2, 3)")
    dump_p.add_argument("--momentum-index", type=int, nargs="*", default=None,
                        help="integer momentum labels n_i (p_i = pi n_i / L)")
    dump_p.add_argument("--out", default="operator.txt")
    return parser


def cmd_run(args):
    try:
        cfg = load_config(args.config)
        cfg.apply_environment()
        if args.out:
            cfg.out_dir = args.out
        if args.threads:
            cfg.threads = args.threads
        if args.seed is not None:
            cfg.seed = args.seed
        if args.scenarios is not None:
            cfg.scenarios = args.scenarios
        if args.corrupt_hamiltonian:
            cfg.corrupt_hamiltonian = True
        if args.no_plots:
            cfg.plots = False
        cfg.validate()
        selected = cfg.scenarios or list(CATALOG)
        unknown = [s for s in selected if s not in CATALOG]
        if unknown:
            raise ConfigError(f"unknown scenarios: {unknown}; "
                              f"known: {list(CATALOG)}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    os.makedirs(cfg.out_dir, exist_ok=True)
    if cfg.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(lambda n: run_scenario(n, cfg), selected))
    else:
        results = [run_scenario(n, cfg) for n in selected]
    results.sort(key=lambda r: r.name)

    payload = assemble_payload(cfg, results, inventory=lattice_inventory(cfg))
    write_report_json(os.path.join(cfg.out_dir, "report.json"), payload)
    write_scaling_csv(os.path.join(cfg.out_dir, "scaling.csv"), results)
    write_structure_csv(os.path.join(cfg.out_dir, "structure.csv"), results)
    if cfg.plots:
        render_figures(cfg.out_dir, results)

    any_failed = False
    for res in results:
        n_rep = len(res.reports) + len(res.scaling)
        n_bad = res.n_failed()
        status = "ERROR" if res.error else ("FAIL" if n_bad else "pass")
        any_failed = any_failed or n_bad > 0
        extra = f"  [{res.error}]" if res.error else ""
        print(f"{res.name:28s} {status:5s}  checks={n_rep - n_bad}/{n_rep}"
              f"  skips={len(res.skips)}{extra}")
    summary = payload["summary"]
    print(f"total: {summary['n_pass']} passed, {summary['n_fail']} failed, "
          f"{summary['n_skip']} skipped -> {cfg.out_dir}")
    return EXIT_VERIFICATION_FAILED if any_failed else EXIT_OK


def cmd_list(_args):
    width = max(len(name) for name in CATALOG)
    for name, entry in CATALOG.items():
        print(f"{name:{width}s}  {entry['anchor']}")
        print(f"{'':{width}s}  params: {entry['schema']}")
    print(f"{len(CATALOG)} scenarios")
    return EXIT_OK


def cmd_dump(args):
    lat = build_lattice(LatticeSpec(d=args.d, L=args.L, S=args.S))
    which = args.which
    if which == "hamiltonian":
        handle = build_hamiltonian(lat, args.B)
    elif which == "order-parameter":
        handle = build_order_parameter(lat)
    elif which == "staggered-sy":
        handle = build_staggered_sy(lat, args.R, clip=True)
    elif which == "boundary-field":
        handle, _ = build_boundary_field(lat, ramp_field(lat, args.R,
                                                         clip=True))
    elif which == "field-hamiltonian":
        handle = build_field_hamiltonian(lat, args.B,
                                         ramp_field(lat, args.R, clip=True))
    else:
        import numpy as np
        n = args.momentum_index or [0] * args.d
        handle = fourier_spin(lat, np.pi * np.asarray(n, float) / args.L,
                              args.component)
    dump_triplets(handle, args.out)
    print(f"wrote {handle.label} ({handle.dim}x{handle.dim}, "
          f"nnz={handle.nnz}) to {args.out}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "list":
        return cmd_list(args)
    return cmd_dump(args)


if __name__ == "__main__":
    sys.exit(main())
