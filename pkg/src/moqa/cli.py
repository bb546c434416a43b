"""Command line interface: ``moqa {build,solve,study,landscape,resources}``.

Exit codes: 0 success, 2 invalid input, 3 refused for exceeding a resource
budget, 1 any other library error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .annealer import AnnealSchedule, anneal
from .exceptions import MOQAError, ResourceBudgetError, ValidationError
from .expansion import DEFAULT_BUDGET, threshold
from .estimators import _EXPANDERS
from .generators import (
    ConstrainedProblem,
    constrained_to_multiobjective,
    partition_problem,
    random_multiobjective,
    random_partition_problem,
    spp_problem,
)
from .hamiltonian import SparsePauliHamiltonian, mask_to_bits
from .harness import (
    ExperimentConfig,
    dump_landscapes,
    dump_resources,
    run_gap_binning,
    run_study,
    write_gap_binning,
    write_landscape_csv,
)
from .io import load_constraints, load_graph, load_problem, save_problem
from .oracle import landscape_p, spectrum
from .qubo import compute_shift, apply_shift

log = logging.getLogger("moqa")

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3

# shared defaults, applied after merging --config; n, m and p default per command
DEFAULTS = {"ns": 500, "gamma": [10.0, 40.0], "constraints": [1, 4], "seed": 0,
            "shift": "spectral"}


def _common(parser, n_many=False, p_many=False):
    parser.add_argument("--n", type=int, nargs="+" if n_many else None,
                        help="number of variables" + (" (one or more)" if n_many else ""))
    parser.add_argument("--m", type=int, help="number of objectives")
    parser.add_argument("--p", type=int, nargs="+" if p_many else None,
                        help="approximation level" + ("(s)" if p_many else ""))
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--shift", choices=["spectral", "exact"], help="positivity shift mode")
    parser.add_argument("--out", help="output file or directory")
    parser.add_argument("--config", help="JSON file with the same keys as the flags")


def build_parser():
    parser = argparse.ArgumentParser(prog="moqa", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="compile a problem into a JSON-lines Hamiltonian")
    _common(b)
    src = b.add_mutually_exclusive_group()
    src.add_argument("--problem", help="problem JSON file")
    src.add_argument("--graph", help="partition graph JSON file")
    src.add_argument("--spp", type=float, nargs="+", help="set partitioning weights")
    src.add_argument("--family", choices=["generic", "partition"], help="generate a random instance")
    b.add_argument("--constraints", dest="constraint_file",
                   help="constraint list JSON; --problem then holds the single base objective")
    b.add_argument("--gamma", type=float, nargs="+", help="penalty strength (first value used)")
    b.add_argument("--method", choices=sorted(_EXPANDERS), default="auto")
    b.add_argument("--theta", type=float, default=0.0, help="drop terms with |C| below this")
    b.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    b.add_argument("--save-problem", help="also write the shifted problem JSON here")

    s = sub.add_parser("solve", help="minimise a Hamiltonian file")
    s.add_argument("hamiltonian", help="JSON-lines Hamiltonian")
    s.add_argument("--solver", choices=["anneal", "brute"], default="anneal")
    s.add_argument("--sweeps", type=int, default=5000)
    s.add_argument("--restarts", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write the result JSON here instead of stdout")
    s.add_argument("--config", help="JSON file with the same keys as the flags")

    st = sub.add_parser("study", help="error-metric sweep over random instances")
    st.add_argument("study", choices=["generic", "partition", "constrained"])
    _common(st, n_many=True, p_many=True)
    st.add_argument("--ns", type=int, help="samples per configuration")
    st.add_argument("--gamma", type=float, nargs="+", help="penalty strengths (constrained)")
    st.add_argument("--constraints", type=int, nargs="+", help="constraint counts (constrained)")
    st.add_argument("--route", choices=["auto", "direct", "sparse", "dense", "symmetry"])
    st.add_argument("--jobs", type=int, help="parallel workers")
    st.add_argument("--bins", type=int, default=10, help="gap-ratio bins per p")
    st.add_argument("--full-scale", action="store_true", default=None,
                    help="full-size sample counts and grid (slow)")

    ls = sub.add_parser("landscape", help="dump per-bitstring curves as CSV")
    _common(ls, p_many=True)
    ls.add_argument("--hamiltonian", help="dump the landscape of this Hamiltonian file instead")

    r = sub.add_parser("resources", help="closed-form resource table as CSV")
    _common(r, n_many=True)
    return parser


def _merge_config(args):
    merged = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fp:
                merged.update(json.load(fp))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
    for key, value in vars(args).items():
        if value is not None:
            merged[key] = value
    for key, value in DEFAULTS.items():
        merged.setdefault(key, value)
    return merged


def _first(value):
    return value[0] if isinstance(value, (list, tuple)) else value


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple, range)) else [value]


def _opt(opts, key, default):
    value = opts.get(key)
    return default if value is None else value


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_build(opts):
    n, m, seed = int(_first(_opt(opts, "n", 6))), int(_opt(opts, "m", 2)), int(opts["seed"])
    if opts.get("problem") and opts.get("constraint_file"):
        base = load_problem(opts["problem"])
        if base.M != 1:
            raise ValidationError("a constrained build needs a problem with exactly one objective")
        cp = ConstrainedProblem(base[0], load_constraints(opts["constraint_file"]),
                                float(_first(opts["gamma"])))
        problem = constrained_to_multiobjective(cp)
    elif opts.get("problem"):
        problem = load_problem(opts["problem"])
    elif opts.get("graph"):
        problem = partition_problem(load_graph(opts["graph"]))
    elif opts.get("spp"):
        problem = spp_problem(opts["spp"])
    elif opts.get("family") == "partition":
        problem = random_partition_problem(n, seed)
    else:
        problem = random_multiobjective(n, m, seed)
    problem = apply_shift(problem, compute_shift(problem, opts["shift"]))
    level = int(_first(_opt(opts, "p", 2)))
    ham = _EXPANDERS[opts.get("method", "auto")](problem, level, budget=opts.get("budget", DEFAULT_BUDGET))
    ham = threshold(ham, opts.get("theta", 0.0))
    if opts.get("save_problem"):
        save_problem(problem, opts["save_problem"])
    out = opts.get("out")
    if out:
        with open(out, "w") as fp:
            ham.to_jsonl(fp)
    else:
        ham.to_jsonl(sys.stdout)
    log.info("wrote %d terms (n=%d, p=%d, M=%d)", len(ham), ham.n, ham.p, ham.M)


def cmd_solve(opts):
    with open(opts["hamiltonian"]) as fp:
        ham = SparsePauliHamiltonian.from_jsonl(fp)
    if opts["solver"] == "brute":
        gaps = spectrum(landscape_p(ham))
        index, energy = gaps.argmin_index, gaps.ground
    else:
        res = anneal(ham, AnnealSchedule(opts["sweeps"], restarts=opts["restarts"], seed=opts["seed"]))
        index, energy = res.index, res.energy
    result = {"solver": opts["solver"], "index": index, "bits": mask_to_bits(index, ham.n),
              "energy": energy}
    _emit(json.dumps(result) + "\n", opts.get("out"))


def cmd_study(opts):
    cfg = ExperimentConfig(
        study=opts["study"],
        n_list=_as_list(_opt(opts, "n", [4, 8, 12])),
        M=int(_opt(opts, "m", 2)),
        constraints_list=_as_list(opts["constraints"]),
        p_list=_as_list(_opt(opts, "p", [1, 2, 3, 4, 5, 6])),
        N_s=int(opts["ns"]),
        gamma_list=[float(g) for g in _as_list(opts["gamma"])],
        seed=int(opts["seed"]),
        shift_mode=opts["shift"],
        output_dir=opts.get("out") or f"results/{opts['study']}",
        route=opts.get("route", "auto"),
        n_jobs=opts.get("jobs"),
        full_scale=bool(opts.get("full_scale")),
    )
    reports = run_study(cfg)
    out = Path(cfg.output_dir)
    if cfg.study != "constrained":
        for n in cfg.n_list:
            for p in cfg.p_list:
                cell = [r for r in reports if r.n == n and r.p == p]
                binning = run_gap_binning(cell, p, bins=opts.get("bins", 10))
                write_gap_binning(binning, out / f"{cfg.study}_gap_bins_n{n}_p{p}.csv")
    for r in reports:
        gamma = "" if r.gamma is None else f" gamma={r.gamma:g}"
        nu = "" if r.nu is None else f" nu={r.nu:.4f}"
        print(f"n={r.n} M={r.M} p={r.p}{gamma} eps={r.epsilon:.4f} delta={r.delta:.5f}{nu}")


def cmd_landscape(opts):
    out = opts.get("out") or "landscape.csv"
    if opts.get("hamiltonian"):
        with open(opts["hamiltonian"]) as fp:
            ham = SparsePauliHamiltonian.from_jsonl(fp)
        write_landscape_csv(landscape_p(ham), ham.n, out)
        return
    n = int(_first(_opt(opts, "n", 6)))
    m = int(_opt(opts, "m", 4))
    p_list = _as_list(_opt(opts, "p", [1, 2, 4, 8]))
    dump_landscapes(n, m, p_list, int(opts["seed"]), opts["shift"], path=out)


def cmd_resources(opts):
    n_list = _as_list(_opt(opts, "n", list(range(1, 41))))
    p = int(_first(_opt(opts, "p", 4)))
    m = int(_opt(opts, "m", 10))
    rows = dump_resources(n_list, p, m, path=opts.get("out"))
    if not opts.get("out"):
        keys = list(rows[0])
        print(",".join(keys))
        for row in rows:
            print(",".join(str(row[k]) for k in keys))


COMMANDS = {
    "build": cmd_build,
    "solve": cmd_solve,
    "study": cmd_study,
    "landscape": cmd_landscape,
    "resources": cmd_resources,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = _merge_config(args)
        COMMANDS[args.command](opts)
    except ResourceBudgetError as exc:
        log.error("%s", exc)
        return EXIT_BUDGET
    except (ValidationError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except MOQAError as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
