"""
Command-line interface
Subcommands: ph, dist, gram, gen-orbits, svm-cv, kfdr, bench, replay, serve.

Results go to stdout and output files; every output file gets a JSON sidecar that
records the invocation so `replay` can run it again. Logging goes to stderr.
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ValidationError

from pfkernel import __version__
from pfkernel.core.diagram import EssentialPolicy, load_diagram, save_diagram
from pfkernel.core.homology import load_point_cloud, rips_persistence, save_point_cloud
from pfkernel.core.kernels import (
    PFParams,
    ProbGaussParams,
    PSSParams,
    PWGParams,
    SWParams,
    gram,
    off_diagonal,
    quantile_t,
)
from pfkernel.core.measure import SmoothingParams
from pfkernel.core.metric import fim
from pfkernel.modules.datagen import orbit_dataset
from pfkernel.modules.experiments import CvConfig, KernelSearch, benchmark_fim, cross_validate
from pfkernel.modules.learn import KfdrConfig, kfdr_argmax, kfdr_scan
from pfkernel.modules.manifest import load_diagrams, read_labeled_manifest, read_manifest
from pfkernel.modules.results_writer import (
    get_output_path,
    read_sidecar,
    write_matrix_csv,
    write_sidecar,
    write_table_csv,
)
from pfkernel.utils.errors import PFKernelError, UsageError
from pfkernel.utils.logger import setup_logger
from pfkernel.utils.settings import get_settings

logger = setup_logger(__name__)

KERNELS = ("pf", "pss", "pwg", "sw", "prob")


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(message)


def _policy(args) -> EssentialPolicy:
    return EssentialPolicy.parse(args.essential)


def _accel(args) -> Dict[str, Any]:
    if args.fgt_eps is None:
        return {"accel": "exact", "epsilon": get_settings().fgt_epsilon}
    return {"accel": "fgt", "epsilon": args.fgt_eps}


def _sidecar(path: Path, args, extra: Optional[Dict[str, Any]] = None) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("handler", "argv")}
    metadata = {"command": args.command, "argv": args.argv, "params": params}
    if extra:
        metadata.update(extra)
    write_sidecar(path, metadata)


def _kernel_params(args, sigma: float, t: float = 1.0) -> BaseModel:
    if args.kernel == "pf":
        return PFParams(t=t, sigma=sigma, **_accel(args))
    if args.kernel == "pss":
        return PSSParams(sigma=sigma, **_accel(args))
    if args.kernel == "pwg":
        return PWGParams(C=args.pwg_c, q=args.pwg_q, sigma=sigma, tau=args.tau)
    if args.kernel == "sw":
        return SWParams(M=args.sw_m, sigma=sigma)
    return ProbGaussParams(sigma=sigma, bandwidth=args.bandwidth, grid_size=args.grid_size)


def _single_gram(args, diagrams, ids):
    """Gram matrix for one parameter setting; PF t from --t or --t-quantile."""
    if args.kernel == "pf" and args.t is None and args.t_quantile is None:
        raise UsageError("the pf kernel needs --t or --t-quantile")
    params = _kernel_params(args, args.sigma, args.t if args.t is not None else 1.0)
    matrix = gram(diagrams, params, ids, n_jobs=args.n_jobs)
    if args.kernel == "pf" and args.t is None:
        t = quantile_t(off_diagonal(matrix.distances), args.t_quantile)
        logger.info(f"t = {t!r} from the {args.t_quantile}% quantile of d_FIM")
        matrix = matrix.with_t(t)
    return matrix


def cmd_ph(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.manifest:
        clouds, labels = read_labeled_manifest(args.manifest)
    else:
        if not args.clouds:
            raise UsageError("give point cloud files or --manifest")
        clouds, labels = [Path(p) for p in args.clouds], None
    max_scale = np.inf if args.max_scale is None else args.max_scale

    written: List[str] = []
    for path in clouds:
        diagram = rips_persistence(load_point_cloud(path), args.dim, max_scale)[args.dim]
        dest = out_dir / f"{Path(path).stem}_h{args.dim}.txt"
        save_diagram(diagram, dest)
        written.append(dest.name)

    if labels is None:
        manifest = out_dir / "diagrams.txt"
        manifest.write_text("".join(f"{name}\n" for name in written), encoding="utf-8")
    else:
        manifest = write_table_csv([{"path": name, "label": label} for name, label in zip(written, labels)],
                                   out_dir / "diagrams.csv")
    _sidecar(manifest, args)
    print(manifest)
    return 0


def cmd_dist(args) -> int:
    policy = _policy(args)
    dg_i, dg_j = load_diagram(args.diagram_i, policy), load_diagram(args.diagram_j, policy)
    result = fim(dg_i, dg_j, SmoothingParams(sigma=args.sigma, **_accel(args)))
    if args.out:
        path = write_table_csv([{"diagram_i": args.diagram_i, "diagram_j": args.diagram_j,
                                 "d_fim": result.value, "support_size": result.support_size,
                                 "accel_used": result.accel_used}], get_output_path(args.out))
        _sidecar(path, args)
    print(repr(result.value))
    return 0


def cmd_gram(args) -> int:
    paths = read_manifest(args.manifest)
    diagrams = load_diagrams(paths, _policy(args))
    ids = [p.name for p in paths]
    matrix = _single_gram(args, diagrams, ids)
    path = write_matrix_csv(matrix.values, ids, get_output_path(args.out))
    _sidecar(path, args, {"kernel": matrix.kernel.model_dump(), "diagram_ids": ids})
    print(path)
    return 0


def cmd_gen_orbits(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, (cloud, label) in enumerate(orbit_dataset(args.r, args.per_class, args.n_points, args.seed)):
        name = f"orbit_{k:05d}.txt"
        save_point_cloud(cloud, out_dir / name)
        rows.append({"path": name, "label": label})
    manifest = write_table_csv(rows, out_dir / "labels.csv")
    _sidecar(manifest, args, {"seed": args.seed})
    print(manifest)
    return 0


def _search(args) -> KernelSearch:
    if args.kernel == "pf" and not (args.t or args.t_quantile):
        raise UsageError("the pf kernel needs --t or --t-quantile")
    fields: Dict[str, Any] = {
        "kernel": args.kernel,
        "sigmas": args.sigma,
        "t_values": args.t or [],
        "t_quantiles": args.t_quantile or [],
        "C_values": args.C,
        "pwg_C": [args.pwg_c],
        "pwg_q": [args.pwg_q],
        "taus": [args.tau],
        "sw_M": [args.sw_m],
        "bandwidths": [args.bandwidth],
        "grid_size": args.grid_size,
        **_accel(args),
    }
    return KernelSearch(**fields)


def cmd_svm_cv(args) -> int:
    paths, labels = read_labeled_manifest(args.manifest)
    diagrams = load_diagrams(paths, _policy(args))
    config = CvConfig(protocol=args.protocol, test_fraction=args.test_fraction, repeats=args.repeats,
                      folds=args.folds, seed=args.seed, n_jobs=args.n_jobs)
    report = cross_validate(diagrams, labels, _search(args), config)
    path = write_table_csv(report.to_frame(), get_output_path(args.out))
    _sidecar(path, args, {"seed": args.seed, "mean": report.mean, "std": report.std,
                          "summary": report.summary})
    print(f"{args.kernel}: {report.summary}")
    return 0


def cmd_kfdr(args) -> int:
    paths = read_manifest(args.manifest)
    diagrams = load_diagrams(paths, _policy(args))
    matrix = _single_gram(args, diagrams, [p.name for p in paths])
    gamma = get_settings().kfdr_gamma if args.gamma is None else args.gamma
    config = KfdrConfig(gamma=gamma, candidate_range=tuple(args.range) if args.range else None)
    scores = kfdr_scan(matrix, config)
    change_point = kfdr_argmax(scores)
    path = write_table_csv([{"index": tau, "score": s} for tau, s in scores], get_output_path(args.out))
    _sidecar(path, args, {"kernel": matrix.kernel.model_dump(), "change_point": change_point})
    print(change_point)
    return 0


def cmd_bench(args) -> int:
    epsilon = args.fgt_eps if args.fgt_eps is not None else get_settings().fgt_epsilon
    table = benchmark_fim(args.sizes, args.sigma, epsilon, args.seed)
    path = write_table_csv(table, get_output_path(args.out))
    _sidecar(path, args, {"seed": args.seed, "epsilon": epsilon})
    print(table.to_string(index=False))
    return 0


def cmd_replay(args) -> int:
    metadata = read_sidecar(args.sidecar)
    argv = metadata.get("argv")
    if not argv:
        raise UsageError(f"{args.sidecar} does not record an invocation")
    if argv[0] == "replay":
        raise UsageError("refusing to replay a replay")
    logger.info(f"replaying: {' '.join(argv)}")
    return main(argv)


def cmd_serve(args) -> int:
    from pfkernel.main import run

    run(args.host, args.port)
    return 0


def _add_common(p: argparse.ArgumentParser, out_default: Optional[str] = None) -> None:
    p.add_argument("--out", default=out_default, help="output file or directory")
    p.add_argument("--essential", default="drop", help="essential points: drop or cap:<value>")
    p.add_argument("--n-jobs", type=int, default=None, help="joblib workers (default PF_N_JOBS)")


def _add_kernel_args(p: argparse.ArgumentParser, grid: bool) -> None:
    many = {"nargs": "+"} if grid else {}
    p.add_argument("--kernel", choices=KERNELS, default="pf")
    p.add_argument("--sigma", type=float, required=True, **many)
    if grid:
        p.add_argument("--t", type=float, nargs="+", default=None)
        p.add_argument("--t-quantile", type=float, nargs="+", default=None)
        p.add_argument("--C", type=float, nargs="+", default=[0.01, 0.1, 1.0, 10.0, 100.0])
    else:
        t = p.add_mutually_exclusive_group()
        t.add_argument("--t", type=float, default=None)
        t.add_argument("--t-quantile", type=float, default=None)
    p.add_argument("--fgt-eps", type=float, default=None, help="use the FGT with this tolerance")
    p.add_argument("--pwg-c", type=float, default=1.0)
    p.add_argument("--pwg-q", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--sw-m", type=int, default=10)
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--grid-size", type=int, default=20)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pfkernel", description="Persistence Fisher kernel toolkit")
    parser.add_argument("--version", action="version", version=f"pfkernel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        return p

    p = add("ph", cmd_ph, "point clouds -> Vietoris-Rips diagrams")
    p.add_argument("clouds", nargs="*")
    p.add_argument("--manifest", help="labeled CSV manifest (path,label) of point clouds")
    p.add_argument("--dim", type=int, choices=(0, 1), default=1)
    p.add_argument("--max-scale", type=float, default=None)
    _add_common(p, "diagrams")

    p = add("dist", cmd_dist, "d_FIM between two diagram files")
    p.add_argument("diagram_i")
    p.add_argument("diagram_j")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--fgt-eps", type=float, default=None)
    _add_common(p)

    p = add("gram", cmd_gram, "Gram matrix of the diagrams in a manifest")
    p.add_argument("manifest")
    _add_kernel_args(p, grid=False)
    _add_common(p, "gram.csv")

    p = add("gen-orbits", cmd_gen_orbits, "linked twist map orbits with a labels manifest")
    p.add_argument("--r", type=float, nargs="+", default=[2.5, 3.5, 4.0, 4.1, 4.3])
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--n-points", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p, "orbits")

    p = add("svm-cv", cmd_svm_cv, "cross-validated SVM accuracy on labeled diagrams")
    p.add_argument("manifest", help="CSV manifest with path,label columns")
    _add_kernel_args(p, grid=True)
    p.add_argument("--protocol", choices=("split", "paired"), default="split")
    p.add_argument("--test-fraction", type=float, default=0.3)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p, "svm_cv.csv")

    p = add("kfdr", cmd_kfdr, "KFDR change-point scan over an ordered manifest")
    p.add_argument("manifest")
    _add_kernel_args(p, grid=False)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--range", type=int, nargs=2, metavar=("LO", "HI"), default=None)
    _add_common(p, "kfdr.csv")

    p = add("bench", cmd_bench, "exact vs FGT timing of d_FIM")
    p.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000, 5000])
    p.add_argument("--sigma", type=float, default=1.0,
                   help="smoothing bandwidth of the timed d_FIM")
    p.add_argument("--fgt-eps", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p, "bench.csv")

    p = add("replay", cmd_replay, "re-run the invocation recorded in a sidecar")
    p.add_argument("sidecar")

    p = add("serve", cmd_serve, "run the HTTP service")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _error_line(e: Exception) -> str:
    code = e.code if isinstance(e, PFKernelError) else (
        "invalid_parameter" if isinstance(e, ValidationError) else
        "io" if isinstance(e, OSError) else "invalid_argument")
    message = " ".join(str(e).split())
    return f"error: {code}: {message}"


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on any validation or input error (one line on stderr)
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        args.argv = argv
        return args.handler(args)
    except (PFKernelError, ValueError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        print(_error_line(e), file=sys.stderr)
        return 1
