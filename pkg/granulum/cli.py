"""Command line of granulum.

::

    granulum generate --config presets/generate/smoke.yaml --out data/smoke seed=3
    granulum ingest --edges edges.csv --granularity granularity.csv --out data/mine
    granulum score data/smoke --models psn,psi,psna --damping 0.85
    granulum evaluate data/smoke --k-groups 3,4,6,8,10,12,14

Every subcommand accepts trailing ``key=value`` overrides of its structured
config. Exit codes: 0 success, 1 validation error, 2 numerical
non-convergence (results are still written).
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from omegaconf import DictConfig, OmegaConf

from . import GranulumException, Metadata, __version__
from .bundle import RunManifest, ingest, load_bundle, write_bundle, write_table
from .callback import instantiate_callbacks
from .configure import (
    EvaluateConfig,
    GenConfig,
    ScoreConfig,
    config_to_dict,
    load_config,
    presets_directory,
)
from .core import build_response_matrix
from .scenario import EvaluationScenario, ScoringScenario
from .synthetic import generate_dataset

logger = logging.getLogger("granulum")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2


class GranulumArgumentParser(argparse.ArgumentParser):
    """Parser that turns named flags into config overrides.

    Flags registered with ``override=<config key>`` are collected as
    ``key=value`` strings, placed before the free-form overrides so that the
    latter win.
    """

    def __init__(self, *args, **kwargs):
        self._overrides = {}
        super().__init__(*args, **kwargs)

    def add_argument(self, *args, override: Optional[str] = None, **kwargs):
        action = super().add_argument(*args, **kwargs)
        if override is not None:
            self._overrides[action.dest] = override
        return action

    def overrides(self, namespace: argparse.Namespace) -> List[str]:
        collected = []
        for dest, key in self._overrides.items():
            value = getattr(namespace, dest, None)
            if value is None or value is False:
                continue
            if isinstance(value, bool):
                value = "true"
            collected.append(f"{key}={value}")
        return collected + list(getattr(namespace, "overrides", []))

    def parse_args(self, args=None, namespace=None):
        # ``key=value`` tokens after a flag are left over once the positionals
        # have been filled; they belong to the overrides.
        namespace, extras = self.parse_known_args(args, namespace)
        unknown = [token for token in extras if token.startswith("-") or "=" not in token]
        if unknown:
            self.error(f"unrecognized arguments: {' '.join(unknown)}")
        if extras:
            namespace.overrides = list(getattr(namespace, "overrides", None) or []) + extras
        return namespace


def _list_value(text: str) -> str:
    return "[" + ",".join(part.strip() for part in text.split(",") if part.strip()) + "]"


def build_parser() -> GranulumArgumentParser:
    parser = GranulumArgumentParser(
        prog="granulum", description="Privacy risk scoring of social network users."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=GranulumArgumentParser)

    generate = subparsers.add_parser("generate", help="generate a synthetic dataset bundle")
    generate.add_argument("--config", type=Path, help="generator YAML config")
    generate.add_argument("--out", type=Path, required=True, help="bundle directory to create")
    generate.add_argument("--seed", type=int, override="seed")
    generate.add_argument("--levels", type=int, override="levels")

    ingest_parser = subparsers.add_parser("ingest", help="validate input files into a bundle")
    ingest_parser.add_argument("--edges", type=Path, help="edges.csv (source,target)")
    data = ingest_parser.add_mutually_exclusive_group(required=True)
    data.add_argument("--granularity", type=Path, help="granularity.csv (user_id,item_id,bytes)")
    data.add_argument("--responses", type=Path, help="responses.csv (user_id,item_id,shared)")
    ingest_parser.add_argument("--out", type=Path, required=True, help="bundle directory to create")

    score = subparsers.add_parser("score", help="compute privacy scores")
    score.add_argument("bundle", type=Path)
    score.add_argument("--out", type=Path, help="output directory (default: <bundle>/results)")
    score.add_argument("--config", type=Path, help="score YAML config")
    score.add_argument("--models", type=_list_value, override="models")
    score.add_argument("--damping", type=float, override="damping")
    score.add_argument("--levels", type=int, override="levels")
    score.add_argument("--centrality", override="centrality")
    score.add_argument("--intrinsic", override="intrinsic")
    score.add_argument("--seed", type=int, override="fit.seed")
    score.add_argument("--compat-eq33", action="store_true", override="compat_eq33")
    score.add_argument("--normalized-betweenness", action="store_true", override="normalized_betweenness")

    evaluate = subparsers.add_parser("evaluate", help="compare the scored models")
    evaluate.add_argument("bundle", type=Path)
    evaluate.add_argument("--scores", type=Path, help="directory of a score run (default: <bundle>/results)")
    evaluate.add_argument("--out", type=Path, help="report directory (default: <scores>/report)")
    evaluate.add_argument("--config", type=Path, help="evaluation YAML config")
    evaluate.add_argument("--k-groups", type=_list_value, override="k_groups")
    evaluate.add_argument("--alpha", type=float, override="alpha")
    evaluate.add_argument("--spearman", action="store_true", override="spearman")

    for subparser in (generate, ingest_parser, score, evaluate):
        subparser.add_argument(
            "--callbacks",
            type=lambda text: [part for part in text.split(",") if part],
            help="comma-separated callback classes (default: the main preset's list)",
        )
        subparser.add_argument("overrides", nargs="*", help="key=value config overrides")
        subparser.set_defaults(command_parser=subparser)
    return parser


def load_main_preset() -> DictConfig:
    """The ``main`` preset (callbacks and per-command defaults), empty if absent."""
    path = presets_directory / "main.yaml"
    return OmegaConf.load(path) if path.exists() else OmegaConf.create({})


def _load(schema, section: str, path: Optional[Path], overrides: Sequence[str]):
    base = load_main_preset().get(section) if path is None else None
    return load_config(schema, path, overrides, base=base)


def cmd_generate(args, overrides: Sequence[str]) -> int:
    config = load_config(GenConfig, args.config, overrides)
    dataset = generate_dataset(config)
    manifest = RunManifest(
        command="generate",
        inputs={"config": str(args.config) if args.config else ""},
        config={"generator": config_to_dict(config)},
        seed=config.seed,
    )
    bundle = write_bundle(
        args.out,
        manifest,
        build_response_matrix(dataset.granularity),
        dataset.granularity,
        dataset.graph,
    )
    truth = dataset.truth
    write_table(args.out / "truth" / "items.csv", truth.items_frame())
    write_table(args.out / "truth" / "users.csv", truth.users_frame())
    levels = dataset.granularity._replace(cells=truth.levels).to_long_frame("level")
    write_table(args.out / "truth" / "levels.csv", levels)
    logger.info(
        f"Generated {dataset.graph.N} users, {dataset.graph.n_edges} edges and "
        f"{dataset.granularity.n} items into {args.out} (manifest {bundle.manifest.hash})."
    )
    return EXIT_OK


def cmd_ingest(args, overrides: Sequence[str]) -> int:
    responses, gm, graph, report = ingest(
        edges=args.edges, granularity=args.granularity, responses=args.responses, logger=logger
    )
    manifest = RunManifest(
        command="ingest",
        inputs={
            name: str(path)
            for name, path in (
                ("source_edges", args.edges),
                ("source_granularity", args.granularity),
                ("source_responses", args.responses),
            )
            if path is not None
        },
    )
    bundle = write_bundle(args.out, manifest, responses, gm, graph, report)
    logger.info(
        f"Ingested {report.users} users, {report.items} items and {report.edges} edges "
        f"into {args.out} (manifest {bundle.manifest.hash})."
    )
    return EXIT_OK


def cmd_score(args, overrides: Sequence[str]) -> int:
    bundle = load_bundle(args.bundle)
    config = _load(ScoreConfig, "score", args.config, overrides)
    out = args.out if args.out is not None else args.bundle / "results"
    return ScoringScenario(bundle, out, config).run()


def cmd_evaluate(args, overrides: Sequence[str]) -> int:
    bundle = load_bundle(args.bundle)
    config = _load(EvaluateConfig, "evaluate", args.config, overrides)
    scores = args.scores if args.scores is not None else args.bundle / "results"
    out = args.out if args.out is not None else scores / "report"
    return EvaluationScenario(bundle, scores, out, config).run()


COMMANDS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``granulum`` command; returns the exit code."""
    args = build_parser().parse_args(argv)
    overrides = args.command_parser.overrides(args)
    names = args.callbacks
    if names is None:
        names = list(load_main_preset().get("callbacks", []))
    callbacks = instantiate_callbacks(names)
    try:
        with Metadata({"logger": logger, "callbacks": callbacks}):
            status = COMMANDS[args.command](args, overrides)
    except (GranulumException, ValueError, KeyError) as e:
        logger.error(str(e))
        return EXIT_INVALID
    if status == EXIT_NOT_CONVERGED:
        logger.warning("Finished with non-converged computations; results are flagged.")
    return status


def run():
    sys.exit(main())
