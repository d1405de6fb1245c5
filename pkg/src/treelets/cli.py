"""Command-line interface: ``treelets <subcommand> [flags]``.

Matrices are read and written as CSV, or as TLMX binary when the path ends
in ``.tlmx``/``.bin``. Every run writes its resolved configuration to
``<primary output>.config``. Exit status: 0 on success, 2 on usage or
validation errors, 1 on other failures.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import io
from .baselines import pca, subspace_angle, univariate_screen
from .datagen import GENERATOR_NAME, BlockCovSpec, bootstrap_stability
from .datagen import gen_block_cov, gen_latent_factor, mvn_sample
from .exceptions import ConfigError, ShapeError
from .selection import GridSpec, cv_energy, cv_risk
from .treelet import SIMILARITIES, best_k_basis, energy_score, fit, forward, inverse


def parse_blocks(text):
    """``"4x5"`` -> (5, 5, 5, 5); ``"5,5,3"`` -> (5, 5, 3)."""
    text = str(text).strip()
    try:
        if "x" in text:
            count, size = text.split("x")
            return (int(size),) * int(count)
        return tuple(int(t) for t in text.split(",") if t)
    except ValueError:
        raise ConfigError(f"cannot parse block list {text!r}") from None


def parse_int_list(text):
    """Comma list with optional ``a:b`` half-open ranges, e.g. ``"0,5,10:13"``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                lo, hi = part.split(":")
                out.extend(range(int(lo), int(hi)))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"cannot parse integer list {text!r}") from None
    if not out:
        raise ConfigError(f"empty integer list {text!r}")
    return out


def resolve_threads(args):
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("TREELET_THREADS")
    return max(1, int(env)) if env else 1


def write_config(out_path, args):
    skip = {"func", "config", "command"}
    items = [("command", args.command)]
    items += sorted((k, v) for k, v in vars(args).items() if k not in skip and v is not None)
    io.write_keyvalue(f"{out_path}.config", items)


def _level(model, level):
    return model.n_levels if level is None else level


def cmd_gen(args):
    sizes = parse_blocks(args.blocks)
    p = sum(sizes) if args.p is None else args.p
    spec = BlockCovSpec(p=p, block_sizes=sizes, within_corr=args.rho,
                        across_corr=args.across, variance=args.sigma2)
    X = mvn_sample(gen_block_cov(spec), args.n, args.seed)
    io.write_matrix(args.out, X)
    io.write_keyvalue(f"{args.out}.meta", [
        ("generator", GENERATOR_NAME),
        ("seed", args.seed),
        ("n", args.n),
        ("p", p),
        ("blocks", ",".join(map(str, sizes))),
        ("within_corr", io.fmt(args.rho)),
        ("across_corr", io.fmt(args.across)),
        ("variance", io.fmt(args.sigma2)),
    ])
    write_config(args.out, args)


def cmd_fit(args):
    X = io.read_matrix(args.input)
    model = fit(X, args.levels, args.similarity)
    io.save_model(args.model_out, model)
    write_config(args.model_out, args)


def _load_pair(args):
    model = io.load_model(args.model)
    X = io.read_matrix(args.input)
    if X.shape[1] != model.p:
        raise ShapeError(f"input has {X.shape[1]} columns, model expects {model.p}")
    return model, X


def cmd_transform(args):
    model, X = _load_pair(args)
    level = _level(model, args.level)
    if args.k is None:
        io.write_matrix(args.out, forward(model, level, X),
                        [f"coef_{j}" for j in range(model.p)])
    else:
        basis = best_k_basis(model, X, level, args.k)
        io.write_matrix(args.out, X @ basis.vectors,
                        [f"coef_{j}" for j in basis.indices])
        Path(f"{args.out}.indices").write_text("".join(f"{j}\n" for j in basis.indices))
    write_config(args.out, args)


def cmd_inverse(args):
    model, C = _load_pair(args)
    io.write_matrix(args.out, inverse(model, _level(model, args.level), C))
    write_config(args.out, args)


def cmd_energy(args):
    model, X = _load_pair(args)
    level = _level(model, args.level)
    # rows ranked by training energy; all p vectors unless --k is given
    basis = best_k_basis(model, X, level, model.p if args.k is None else args.k)
    score = energy_score(X, basis)
    rows = [(rank, j, kind, lev, float(e))
            for rank, (j, kind, lev, e) in enumerate(
                zip(basis.indices, basis.kinds, basis.levels, score.per_vector_energy))]
    text = io.csv_text(["rank", "index", "kind", "level", "energy"], rows)
    text += f"total,,,,{io.fmt(score.total_energy)}\nnormalized,,,,{io.fmt(score.normalized)}\n"
    Path(args.out).write_text(text)
    write_config(args.out, args)


def _grid(args, p):
    levels = parse_int_list(args.grid_levels) if args.grid_levels else list(range(p))
    ks = parse_int_list(args.grid_ks) if args.grid_ks else list(range(1, p + 1))
    return GridSpec(levels=levels, ks=ks, folds=args.folds, seed=args.seed)


def _report_text(report):
    rows = report.rows()
    L, K = report.chosen
    rows.append((L, K, "chosen", report.mean_score(L, K)))
    return io.csv_text(["L", "K", "fold", "score"], rows)


def _risk(X, y, grid, args, threads):
    return cv_risk(X, y, grid, args.predictor, args.similarity, lam=args.lam,
                   k_neighbors=args.k_neighbors, n_jobs=threads)


def cmd_select(args):
    X = io.read_matrix(args.input)
    grid = _grid(args, X.shape[1])
    threads = resolve_threads(args)
    if args.criterion == "cv_risk":
        if not args.outcome:
            raise ConfigError("criterion cv_risk needs --outcome")
        report = _risk(X, io.read_vector(args.outcome), grid, args, threads)
    else:
        report = cv_energy(X, grid, args.similarity, n_jobs=threads)
    Path(args.out).write_text(_report_text(report))
    write_config(args.out, args)


def cmd_reduce(args):
    X = io.read_matrix(args.input)
    y = io.read_vector(args.outcome)
    if not 1 <= args.m <= X.shape[1]:
        raise ConfigError(f"--m must lie in [1, {X.shape[1]}]")
    keep = univariate_screen(X, y, args.m)
    Xr = X[:, keep]
    report = _risk(Xr, y, _grid(args, args.m), args, resolve_threads(args))
    L, K = report.chosen
    model = fit(Xr, L, args.similarity)
    basis = best_k_basis(model, Xr, L, K)
    io.write_matrix(args.out, Xr @ basis.vectors,
                    [f"coef_{keep[j]}" for j in basis.indices])
    text = _report_text(report)
    text += "".join(f"screened,{rank},{j},\n" for rank, j in enumerate(keep))
    Path(f"{args.out}.report.csv").write_text(text)
    write_config(args.out, args)


def cmd_bench(args):
    sizes = parse_blocks(args.blocks)
    K0 = len(sizes)
    k = K0 if args.k is None else args.k
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in parse_int_list(args.ns):
        for seed in parse_int_list(args.seeds):
            X, W = gen_latent_factor(n, args.p, K0, sizes, args.noise_sd, seed)
            model = fit(X, args.level, args.similarity)
            tb = best_k_basis(model, X, model.n_levels, k).vectors
            rows.append(("treelet", n, seed, subspace_angle(tb, W)))
            rows.append(("pca", n, seed, subspace_angle(pca(X).eigenvectors[:, :k], W)))
    io.write_csv(out_dir / "bench.csv", ["method", "n", "seed", "angle"], rows)
    write_config(out_dir / "bench.csv", args)


def cmd_stability(args):
    X = io.read_matrix(args.input)
    rep = bootstrap_stability(X, args.B, args.levels, args.seed, args.similarity,
                              n_jobs=resolve_threads(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_csv(out_dir / "agreement.csv", ["level", "agreement"],
                 [(lev, float(a)) for lev, a in enumerate(rep.agreement, start=1)])
    p = X.shape[1]
    io.write_csv(out_dir / "comerge.csv", ["i", "j", "frequency"],
                 [(i, j, float(rep.co_merge[i, j])) for i in range(p) for j in range(p)])
    write_config(out_dir / "agreement.csv", args)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; explicit flags win")
    common.add_argument("--threads", type=int, help="worker cap (default $TREELET_THREADS or 1)")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--similarity", choices=SIMILARITIES, default="abs_correlation")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid-levels", help="levels, e.g. 0,5,10 or 0:20 (default all)")
    grid.add_argument("--grid-ks", help="basis sizes, e.g. 1:6 (default all)")
    grid.add_argument("--folds", type=int, default=5)
    grid.add_argument("--seed", type=int, default=0)
    grid.add_argument("--predictor", choices=("ridge", "knn"), default="ridge")
    grid.add_argument("--lam", type=float, default=1e-3)
    grid.add_argument("--k-neighbors", type=int, default=5)

    parser = argparse.ArgumentParser(prog="treelets", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("gen", parents=[common], help="sample block-correlated data")
    p.add_argument("--blocks", required=True, help='block sizes, "4x5" or "5,5,3"')
    p.add_argument("--p", type=int, help="total variables (default: sum of blocks)")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--across", type=float, default=0.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="data.csv")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", parents=[common, sim], help="build a treelet model")
    p.add_argument("--input", required=True)
    p.add_argument("--levels", type=int, help="tree height L (default p - 1)")
    p.add_argument("--model-out", default="model.txt")
    p.set_defaults(func=cmd_fit)

    for name, func, helptext in (("transform", cmd_transform, "treelet coefficients"),
                                 ("inverse", cmd_inverse, "coefficients back to data"),
                                 ("energy", cmd_energy, "per-vector energy report")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--model", required=True)
        p.add_argument("--input", required=True)
        p.add_argument("--level", type=int, help="basis level (default: model height)")
        if name != "inverse":
            p.add_argument("--k", type=int, help="keep the K highest-energy vectors")
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("select", parents=[common, sim, grid], help="cross-validate (L, K)")
    p.add_argument("--input", required=True)
    p.add_argument("--outcome")
    p.add_argument("--criterion", choices=("heldout_energy", "cv_risk"), default="heldout_energy")
    p.add_argument("--out", default="select.csv")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("reduce", parents=[common, sim, grid], help="screen, then treelet features")
    p.add_argument("--input", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--m", type=int, required=True, help="variables kept by screening")
    p.add_argument("--out", default="features.csv")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("bench", parents=[common, sim], help="treelet vs PCA subspace recovery")
    p.add_argument("--blocks", default="4x5")
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--noise-sd", type=float, default=0.7)
    p.add_argument("--ns", default="25,50,100")
    p.add_argument("--seeds", default="0:30")
    p.add_argument("--k", type=int, help="span dimension (default: number of blocks)")
    p.add_argument("--level", type=int, help="treelet height (default p - 1)")
    p.add_argument("--out-dir", default="bench")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stability", parents=[common, sim], help="bootstrap merge agreement")
    p.add_argument("--input", required=True)
    p.add_argument("--B", type=int, default=50)
    p.add_argument("--levels", type=int, help="tree height (default p - 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="stability")
    p.set_defaults(func=cmd_stability)
    return parser


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv):
    parser = build_parser()
    path = _config_path(argv)
    command = next((tok for tok in argv if tok in parser.subcommands), None)
    if path and command:
        try:
            values = {k.replace("-", "_"): v for k, v in io.read_keyvalue(path).items()}
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {path}: {exc}")
        values.pop("command", None)
        subparser = parser.subcommands[command]
        known = {a.dest for a in subparser._actions}
        unknown = set(values) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        subparser.set_defaults(**values)
        for action in subparser._actions:
            if action.dest in values:
                action.required = False
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        args.func(args)
    except ValueError as exc:
        print(f"treelets {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"treelets {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
