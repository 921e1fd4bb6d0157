"""
Command-line entry point: synthetic cloud generation, per-point dimension and
curvature estimation, curvature-aware clustering, eta sweeps and the averaging
experiment over Gaussian-random-field noise.
"""
import argparse
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO

import numpy as np

from clustering import ClusterParams, curvature_clustering
from config import GeneratorConfig, RunConfig, load_config_file, settings
from curvature import curvature_field, eta_sweep
from error_handler import EXIT_OK, CliErrorHandler, UsageError
from logging_config import setup_structured_logging
from monitoring import RunMonitor
from pointcloud import PointCloud, SpatialIndex, diameter, format_float, read_cloud, subsample, write_cloud
from report_writer import (
    cluster_summary,
    lln_summary,
    summarize_records,
    write_cluster_csv,
    write_estimate_csv,
    write_json,
    write_lln_csv,
)
from synthetic import (
    CapKind,
    GrfModel,
    Surface,
    gen_cylinder_with_caps,
    gen_noisy_manifold,
    gen_paraboloid,
    gen_sphere,
    lln_experiment,
)

logger = logging.getLogger(__name__)

LLN_DEFAULT_DELTA = 0.005
LLN_DEFAULT_N = 1000
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class CurvatureArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2"""

    def error(self, message: str):
        raise UsageError(message)


@contextmanager
def _open_output(path: Optional[Path]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as stream:
        yield stream


def _parse_sign(value: str) -> int:
    if value in ("+", "+1", "1"):
        return 1
    if value in ("-", "-1"):
        return -1
    raise argparse.ArgumentTypeError(f"sign must be + or -, got {value!r}")


def _parse_multipliers(value: str) -> List[float]:
    try:
        multipliers = [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"multipliers must be comma-separated numbers, got {value!r}")
    if not multipliers or any(not k > 0 for k in multipliers):
        raise argparse.ArgumentTypeError("multipliers must be positive")
    return multipliers


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--eta", type=float, help="absolute eta")
    parser.add_argument("--eta-mult", type=float, dest="eta_mult", help="eta as a multiple of the diameter")
    parser.add_argument("--delta", type=float, help="eigenvalue threshold")
    parser.add_argument("--bins", type=int, help="curvature histogram bins")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.add_argument("--workers", type=int, help="threads for the per-point pipeline")
    parser.add_argument("-o", "--output", type=Path, help="CSV output (stdout when omitted)")
    parser.add_argument("--summary", type=Path, help="JSON summary output")
    parser.add_argument("--svg", type=Path, help="SVG figure output")
    parser.add_argument("--config", type=Path, help="key=value parameter file")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")


def _add_input_flags(parser: argparse.ArgumentParser):
    parser.add_argument("input", type=Path, help="point cloud file")
    parser.add_argument("--format", choices=("xyz", "csv", "ply-ascii"),
                        help="input format (guessed from the suffix when omitted)")
    parser.add_argument("--subsample", type=int, help="use a seeded random subset of this many points")


def build_parser() -> argparse.ArgumentParser:
    parser = CurvatureArgumentParser(prog="curvature", description=__doc__.strip().splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CurvatureArgumentParser)

    generate = commands.add_parser("generate", help="write a synthetic point cloud")
    generate.add_argument("kind", choices=("paraboloid", "sphere", "cylinder", "noisy"))
    generate.add_argument("--sign", type=_parse_sign, default=-1, help="paraboloid: - for -x^2-y^2, + for x^2-y^2")
    generate.add_argument("--n", type=int, default=3000, help="number of points")
    generate.add_argument("--radius", type=float, default=0.5, help="sphere radius")
    generate.add_argument("--caps", choices=[c.value for c in CapKind], default=CapKind.DISC.value)
    generate.add_argument("--n-side", dest="n_side", type=int, default=1500)
    generate.add_argument("--n-cap", dest="n_cap", type=int, default=750)
    generate.add_argument("--cap-height", dest="cap_height", type=float, default=0.9)
    generate.add_argument("--labels", action="store_true", help="append the part-label column")
    generate.add_argument("--surface", choices=[s.value for s in Surface], default=Surface.PLANE.value)
    generate.add_argument("--sigma", type=float, default=0.1, help="noise scale of the noisy surface")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--format", choices=("xyz", "csv"), default="xyz")
    generate.add_argument("-o", "--output", type=Path, required=True)
    generate.add_argument("--log-level", dest="log_level")

    estimate = commands.add_parser("estimate", help="dimension and curvature at every point")
    _add_input_flags(estimate)
    _add_common_flags(estimate)

    cluster = commands.add_parser("cluster", help="curvature-aware single-linkage clustering")
    _add_input_flags(cluster)
    _add_common_flags(cluster)
    cluster.add_argument("--t", type=float, help="curvature scaling (default 4)")
    cluster.add_argument("--d", type=float, help="curvature threshold (default 0.5)")
    cluster.add_argument("--d-prime", dest="d_prime", type=float, help="linkage threshold (default t/2)")
    cluster.add_argument("--merge-heights", dest="merge_heights", action="store_true",
                         help="include single-linkage merge heights in the summary")

    sweep = commands.add_parser("sweep", help="curvature fields for eta = k * diameter")
    _add_input_flags(sweep)
    _add_common_flags(sweep)
    sweep.add_argument("--multipliers", type=_parse_multipliers, default=[1.0, 2.0, 3.0, 4.0],
                       help="comma-separated k values")

    lln = commands.add_parser("lln", help="mean curvature over independent noise draws")
    _add_common_flags(lln)
    lln.add_argument("--surface", choices=[s.value for s in Surface], default=Surface.PLANE.value)
    lln.add_argument("--sigma", type=float, help="noise scale (default 0.1)")
    lln.add_argument("--runs", type=int, help="number of noise draws (default 50)")
    lln.add_argument("--n", type=int, default=LLN_DEFAULT_N, help="number of base points")

    return parser


def resolve_config(args: argparse.Namespace, **defaults: Any) -> RunConfig:
    """
    Merge parameters with precedence CLI flag > --config file > defaults

    Args:
        args: Parsed command-line arguments
        **defaults: Command-specific defaults applied before the config file

    Returns:
        Validated RunConfig
    """
    values: Dict[str, Any] = {
        "delta": settings.default_delta,
        "bins": settings.histogram_bins,
        "workers": settings.workers,
    }
    values.update(defaults)
    if getattr(args, "config", None) is not None:
        values.update(load_config_file(args.config))

    given = {name: getattr(args, name) for name in RunConfig.model_fields
             if getattr(args, name, None) is not None}
    if "eta" in given or "eta_mult" in given:
        values.pop("eta", None)
        values.pop("eta_mult", None)
    values.update(given)
    return RunConfig.build(**values)


def _load_input(config: RunConfig, args: argparse.Namespace, monitor: RunMonitor) -> PointCloud:
    with monitor.stage("load"):
        cloud = read_cloud(config.input, config.format)
        if config.subsample is not None:
            cloud = subsample(cloud, config.subsample, config.seed)
    logger.info(f"Loaded {cloud.size} points in R^{cloud.dim} from {config.input}",
                extra={"n_points": cloud.size})
    return cloud


def _suffixed(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}{suffix}{path.suffix}")


def cmd_generate(args: argparse.Namespace, monitor: RunMonitor) -> int:
    """Write a synthetic cloud and print N, diameter and seed"""
    config = GeneratorConfig.build(n=args.n, radius=args.radius, n_side=args.n_side, n_cap=args.n_cap,
                                   cap_height=args.cap_height, sigma=args.sigma, seed=args.seed)
    with monitor.stage("generate", kind=args.kind):
        if args.kind == "paraboloid":
            cloud = gen_paraboloid(args.sign, config.n, config.seed)
        elif args.kind == "sphere":
            cloud = gen_sphere(config.radius, config.n, config.seed)
        elif args.kind == "cylinder":
            cloud = gen_cylinder_with_caps(CapKind(args.caps), config.n_side, config.n_cap, config.seed,
                                           cap_height=config.cap_height)
        else:
            model = GrfModel.sample_base(Surface(args.surface), config.n, config.sigma, config.seed)
            cloud = gen_noisy_manifold(model, config.seed)

    if args.labels and cloud.labels is None:
        raise UsageError(f"--labels is only available for cylinder clouds, not {args.kind}")

    with _open_output(args.output) as stream:
        write_cloud(cloud, stream, args.format, with_labels=args.labels)
    print(f"N={cloud.size} diameter={format_float(diameter(cloud))} seed={args.seed}")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace, monitor: RunMonitor) -> int:
    """Per-point CSV, JSON summary and optional figures"""
    config = resolve_config(args)
    cloud = _load_input(config, args, monitor)
    index = SpatialIndex(cloud)
    diam = diameter(cloud)
    eta = config.resolve_eta(diam)

    with monitor.stage("curvature_field", n_points=cloud.size):
        records = curvature_field(cloud, eta, config.delta, workers=config.workers, index=index)
    monitor.record_records(records)

    with _open_output(config.output) as stream:
        write_estimate_csv(cloud, records, stream)
    if args.summary is not None:
        summary = {"eta": eta, "delta": config.delta, "diameter": diam, **summarize_records(records, config.bins)}
        with _open_output(args.summary) as stream:
            write_json(summary, stream)
    if args.svg is not None:
        from plotting import plot_curvature_cloud, plot_dimension_cloud, plot_histogram

        plot_curvature_cloud(cloud, records, args.svg)
        plot_dimension_cloud(cloud, records, _suffixed(args.svg, "_dim"))
        plot_histogram(np.array([r.curvature for r in records if r.ok], dtype=float), config.bins,
                       _suffixed(args.svg, "_hist"))
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace, monitor: RunMonitor) -> int:
    """Cluster CSV with labels and a JSON summary of cluster sizes"""
    config = resolve_config(args)
    cloud = _load_input(config, args, monitor)
    eta = config.resolve_eta(diameter(cloud))
    params = ClusterParams(t=config.t, d=config.d, d_prime=config.resolved_d_prime)

    with monitor.stage("curvature_field", n_points=cloud.size):
        records = curvature_field(cloud, eta, config.delta, workers=config.workers)
    monitor.record_records(records)
    with monitor.stage("single_linkage"):
        labeling = curvature_clustering(cloud, records, params)
    logger.info(f"{labeling.cluster_count} clusters at d'={params.d_prime}")

    with _open_output(config.output) as stream:
        write_cluster_csv(cloud, records, labeling, stream)
    if args.summary is not None:
        with _open_output(args.summary) as stream:
            write_json(cluster_summary(labeling, params, include_merge_heights=args.merge_heights), stream)
    if args.svg is not None:
        from plotting import plot_clusters

        plot_clusters(cloud, labeling, args.svg)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, monitor: RunMonitor) -> int:
    """One estimate CSV per multiplier k plus a JSON summary keyed by k"""
    config = resolve_config(args)
    if config.output is None:
        raise UsageError("sweep needs -o/--output; one file per multiplier is written next to it")
    cloud = _load_input(config, args, monitor)

    with monitor.stage("eta_sweep", n_points=cloud.size):
        fields = eta_sweep(cloud, config.delta, multipliers=args.multipliers, workers=config.workers)

    diam = diameter(cloud)
    per_k = {}
    for k, records in fields.items():
        monitor.record_records(records)
        with _open_output(_suffixed(config.output, f"_k{k:g}")) as stream:
            write_estimate_csv(cloud, records, stream)
        per_k[f"{k:g}"] = {"eta": k * diam, **summarize_records(records, config.bins)}

    if args.summary is not None:
        with _open_output(args.summary) as stream:
            write_json({"delta": config.delta, "diameter": diam, "sweeps": per_k}, stream)
    return EXIT_OK


def cmd_lln(args: argparse.Namespace, monitor: RunMonitor) -> int:
    """Per-base-point mean curvature over noise draws"""
    config = resolve_config(args, delta=LLN_DEFAULT_DELTA)
    eta_mult = config.eta_mult
    if config.eta is None and eta_mult is None:
        eta_mult = settings.default_eta_mult
    if args.n < 1:
        raise UsageError("--n must be >= 1")

    model = GrfModel.sample_base(Surface(args.surface), args.n, config.sigma, config.seed)
    with monitor.stage("lln", n_points=model.size):
        result = lln_experiment(model, config.runs, config.eta, config.delta, config.seed,
                                eta_mult=eta_mult, workers=config.workers)
    monitor.metrics.points_processed += int(result.per_run.size)
    monitor.metrics.points_ok += int(np.sum(result.ok_runs))

    with _open_output(config.output) as stream:
        write_lln_csv(model, result, stream)
    if args.summary is not None:
        summary = {"surface": model.surface.value, "sigma": config.sigma, "delta": config.delta,
                   "eta": config.eta, "eta_mult": eta_mult, "seed": config.seed, **lln_summary(result)}
        with _open_output(args.summary) as stream:
            write_json(summary, stream)
    if args.svg is not None:
        from plotting import plot_histogram

        plot_histogram(result.mean_curvature, config.bins, args.svg, title="Mean curvature per base point")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "cluster": cmd_cluster,
    "sweep": cmd_sweep,
    "lln": cmd_lln,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code"""
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        log_level = (args.log_level or settings.log_level).upper()
        if log_level not in LOG_LEVELS:
            raise UsageError(f"unknown log level {log_level!r}")
        setup_structured_logging(log_level=log_level,
                                 log_file=settings.log_file or None,
                                 log_format=settings.log_format)
        monitor = RunMonitor(command)
        code = COMMANDS[command](args, monitor)
        monitor.log_summary()
        return code
    except Exception as e:
        return CliErrorHandler.handle(e, command=command)


if __name__ == "__main__":
    sys.exit(main())
