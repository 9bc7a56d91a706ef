"""Orchestration of the scoring and evaluation pipelines over a dataset bundle.

A scenario owns one bundle, fits each model at most once and writes its
results next to a run manifest. Methods decorated with ``@apply_callbacks()``
report their outputs to the callbacks of the active metadata.
"""

import io
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from . import GranulumBase, ValidationError, apply_callbacks
from .bundle import (
    Bundle,
    RunManifest,
    canonical_json,
    read_scores,
    write_scores,
    write_table,
    write_text,
)
from .callback import FitHistoryCallback
from .configure import EvaluateConfig, ScoreConfig, config_to_dict
from .core import GranularityLevelMatrix, ScoreVector
from .evaluation import (
    GradedIrtModel,
    IrtShareModel,
    NaiveGradedModel,
    NaiveShareModel,
    accepted_counts,
    correlation_matrix,
    damping_sweep,
    goodness_of_fit,
    goodness_of_fit_graded,
    partition_by_attitude,
    sensitivity_comparison,
)
from .granularity import build_level_matrix, granularity_stats, level_assignments
from .graph import graph_stats, score_psc, score_psna
from .irt import FitResult, fit_2pl, fit_grm, icc_table, score_psgi, score_psi
from .naive import score_psgn, score_psn

MODEL_KEYS = {
    "psn": "PSN",
    "psi": "PSI",
    "psgn": "PSGN",
    "psgi": "PSGI",
    "psc:prc": "PSC-PRC",
    "psc:evc": "PSC-EVC",
    "psc:cc": "PSC-CC",
    "psc:bc": "PSC-BC",
    "psna": "PSNA",
}

INTRINSIC_KEYS = ("psn", "psi", "psgn", "psgi")


def normalize_model_key(key: str, centrality: str = "prc") -> str:
    key = key.strip().lower()
    if key == "psc":
        key = f"psc:{centrality.lower()}"
    if key not in MODEL_KEYS:
        raise ValidationError(
            f"Unknown model '{key}', expected one of {', '.join(MODEL_KEYS)} or psc."
        )
    return key


def score_file_name(key: str) -> str:
    return key.replace(":", "-") + ".csv"


def _scalar_items(diagnostics: Dict) -> Dict:
    return {
        key: value
        for key, value in diagnostics.items()
        if isinstance(value, (bool, int, float, str))
    }


class Scenario(GranulumBase):
    """Base of the pipelines run on one bundle."""

    command = "scenario"

    def __init__(self, bundle: Bundle, output_directory: Path, config):
        self.bundle = bundle
        self.output_directory = Path(output_directory)
        self.config = config
        self.converged = True
        self.manifest = RunManifest(
            command=self.command,
            inputs={"bundle": str(bundle.manifest.hash)},
            config=config_to_dict(config),
            seed=bundle.manifest.seed,
            parent=bundle.manifest.hash,
        )

    def run(self) -> int:
        """Run the pipeline and return the exit status (0, or 2 on non-convergence)."""
        raise NotImplementedError

    @property
    def status(self) -> int:
        return 0 if self.converged else 2


class ScoringScenario(Scenario):
    """Computes the requested privacy scores of a bundle.

    Writes ``scores/<model>.csv`` per model, item parameters and fit
    diagnostics of the IRT models, and ``levels.csv`` with the granularity
    level boundaries of every item.
    """

    command = "score"

    def __init__(self, bundle: Bundle, output_directory: Path, config: Optional[ScoreConfig] = None):
        super().__init__(bundle, output_directory, config if config is not None else ScoreConfig())
        self.keys = [normalize_model_key(key, self.config.centrality) for key in self.config.models]
        self.intrinsic = normalize_model_key(self.config.intrinsic)
        if self.intrinsic not in INTRINSIC_KEYS:
            raise ValidationError(
                f"PSNA intrinsic scores must come from one of {', '.join(INTRINSIC_KEYS)}."
            )
        self.manifest.models = [MODEL_KEYS[key] for key in self.keys]
        self.scores: Dict[str, ScoreVector] = {}
        self._fits: Dict[str, FitResult] = {}
        self._glm: Optional[GranularityLevelMatrix] = None
        self._assignments = None

    @property
    def level_matrix(self) -> GranularityLevelMatrix:
        if self._glm is None:
            gm = self.bundle.require_granularity("PSGN/PSGI")
            self._assignments = level_assignments(gm, self.config.levels)
            self._glm = build_level_matrix(gm, self.config.levels, self._assignments)
        return self._glm

    def fit(self, model: str) -> FitResult:
        """Fit (once) the 2PL model on the share flags or the GRM on the level matrix."""
        if model not in self._fits:
            self.logger.info(f"Fitting the {model} model...")
            if model == "2PL":
                self._fits[model] = fit_2pl(self.bundle.responses, self.config.fit)
            else:
                self._fits[model] = fit_grm(self.level_matrix, self.config.fit)
            result = self._fits[model]
            if result.excluded:
                self.logger.warning(
                    f"{model}: excluded items {', '.join(result.excluded)}."
                )
        return self._fits[model]

    def _with_fit(self, vector: ScoreVector, result: FitResult) -> ScoreVector:
        diagnostics = dict(vector.diagnostics, **result.diagnostics())
        return ScoreVector(vector.registry, vector.model, vector.values, diagnostics)

    def intrinsic_scores(self) -> ScoreVector:
        """Intrinsic scores fed to PSNA, shifted to be non-negative when needed."""
        rho = self.scores.get(self.intrinsic) or self.compute_score(self.intrinsic)
        minimum = float(rho.values.min())
        if minimum < 0:
            self.logger.warning(
                f"{rho.model} scores are negative (min {minimum:.4g}); shifting them by "
                f"{-minimum:.4g} before propagation."
            )
            rho = ScoreVector(
                rho.registry, rho.model, rho.values - minimum, dict(rho.diagnostics, shift=-minimum)
            )
        return rho

    @apply_callbacks()
    def compute_score(self, key: str) -> ScoreVector:
        """Score vector of one model key (``psn``, ``psc:bc``, ...), computed once."""
        if key in self.scores:
            return self.scores[key]
        config = self.config
        label = MODEL_KEYS[key]
        if key == "psn":
            vector = score_psn(self.bundle.responses, compat_eq33=config.compat_eq33)
        elif key == "psi":
            result = self.fit("2PL")
            vector = self._with_fit(score_psi(result.params, result.abilities), result)
        elif key == "psgn":
            vector = score_psgn(self.level_matrix)
        elif key == "psgi":
            result = self.fit("GRM")
            vector = self._with_fit(score_psgi(result.params, result.abilities), result)
        elif key.startswith("psc:"):
            vector = score_psc(
                self.bundle.require_graph(label),
                key.split(":")[1],
                damping=config.damping,
                tol=config.tolerance,
                max_iter=config.max_iterations,
                normalized_betweenness=config.normalized_betweenness,
            )
        else:
            graph = self.bundle.require_graph(label)
            vector = score_psna(
                graph, self.intrinsic_scores(), config.damping, config.tolerance, config.max_iterations
            )
        self.scores[key] = vector
        return vector

    def write_fit(self, model: str, result: FitResult):
        header = {"manifest": self.manifest.hash, "model": model}
        write_table(
            self.output_directory / f"item_params_{model.lower()}.csv",
            result.params.to_frame(),
            header,
        )
        write_text(
            self.output_directory / f"fit_{model.lower()}.json",
            canonical_json(
                dict(result.diagnostics(), history=[float(value) for value in result.history])
            ),
        )

    def write_levels(self):
        records = []
        for assignment in self._assignments:
            lower = [1] + [int(b) for b in assignment.boundaries]
            for k, mean in enumerate(assignment.cluster_means, start=1):
                records.append(
                    {
                        "item_id": self.bundle.catalog[assignment.item],
                        "level": k,
                        "min_bytes": lower[k - 1],
                        "mean_bytes": repr(float(mean)),
                    }
                )
        frame = pd.DataFrame.from_records(
            records, columns=["item_id", "level", "min_bytes", "mean_bytes"]
        )
        write_table(self.output_directory / "levels.csv", frame, {"manifest": self.manifest.hash})

    def run(self) -> int:
        for key in self.keys:
            vector = self.compute_score(key)
            self.converged = self.converged and vector.converged
            write_scores(
                self.output_directory / "scores" / score_file_name(key),
                vector,
                self.manifest.hash,
                **{k: v for k, v in _scalar_items(vector.diagnostics).items() if k != "manifest"},
            )
        for model, result in self._fits.items():
            self.write_fit(model, result)
        if self._assignments is not None:
            self.write_levels()
        for callback in self._metadata["callbacks"]:
            if isinstance(callback, FitHistoryCallback):
                callback.dump_data(self.output_directory / "fit_history.csv")
        self.manifest.write(self.output_directory / "run.json")
        return self.status


class EvaluationScenario(Scenario):
    """Compares the models scored on a bundle.

    Reads the score files of a ``score`` run and writes goodness-of-fit tables,
    the correlation matrix, item characteristic curves, per-item byte
    statistics, sensitivity comparisons, the damping sweep, graph statistics
    and ``summary.txt``.
    """

    command = "evaluate"

    def __init__(
        self,
        bundle: Bundle,
        scores_directory: Path,
        output_directory: Path,
        config: Optional[EvaluateConfig] = None,
        score_config: Optional[ScoreConfig] = None,
    ):
        super().__init__(bundle, output_directory, config if config is not None else EvaluateConfig())
        self.scores_directory = Path(scores_directory)
        run_path = self.scores_directory / "run.json"
        if not run_path.exists():
            raise ValidationError(f"No score run found in {self.scores_directory} (missing run.json).")
        self.score_run = RunManifest.read(run_path)
        if score_config is None:
            score_config = ScoreConfig(models=[])
            fit = self.score_run.config.get("fit", {})
            score_config.fit = type(score_config.fit)(**fit) if fit else score_config.fit
            for name in ("damping", "levels", "tolerance", "max_iterations", "compat_eq33"):
                if name in self.score_run.config:
                    setattr(score_config, name, self.score_run.config[name])
        self.scorer = ScoringScenario(bundle, self.output_directory, score_config)
        self.manifest.inputs["scores"] = self.score_run.hash
        self.scores = self.read_scores()
        self.tables: Dict[str, pd.DataFrame] = {}

    def read_scores(self) -> Dict[str, ScoreVector]:
        scores = {}
        for label in self.score_run.models:
            key = next(k for k, v in MODEL_KEYS.items() if v == label)
            path = self.scores_directory / "scores" / score_file_name(key)
            if not path.exists():
                raise ValidationError(f"Missing score file {path} for model {label}.")
            scores[key] = read_scores(path, self.bundle.registry)
        return scores

    def goodness_of_fit(self) -> List:
        config = self.config
        r = self.bundle.responses
        results = []
        binary, graded = [], []
        if "psn" in self.scores:
            binary.append((NaiveShareModel(r), r.column_counts()))
        if "psi" in self.scores:
            fit = self.scorer.fit("2PL")
            self.converged = self.converged and fit.converged
            binary.append((IrtShareModel(fit.params, fit.abilities), fit.abilities))
        if "psgn" in self.scores or "psgi" in self.scores:
            glm = self.scorer.level_matrix
            if "psgn" in self.scores:
                graded.append((NaiveGradedModel(glm), glm.cells.sum(axis=0)))
            if "psgi" in self.scores:
                fit = self.scorer.fit("GRM")
                self.converged = self.converged and fit.converged
                graded.append((GradedIrtModel(fit.params, fit.abilities), fit.abilities))
        for K in config.k_groups:
            for model, attitude in binary:
                partition = partition_by_attitude(attitude, K, r.registry)
                results.extend(goodness_of_fit(r, model, partition, config.alpha))
            for model, attitude in graded:
                partition = partition_by_attitude(attitude, K, r.registry)
                for k in range(1, self.scorer.level_matrix.levels + 1):
                    results.extend(
                        goodness_of_fit_graded(
                            self.scorer.level_matrix, model, partition, config.alpha, k
                        )
                    )
        return results

    def curves(self) -> pd.DataFrame:
        config = self.config
        steps = int(round((config.theta_max - config.theta_min) / config.theta_step))
        grid = np.round(config.theta_min + config.theta_step * np.arange(steps + 1), 10)
        frames = []
        for key, model in (("psi", "2PL"), ("psgi", "GRM")):
            if key in self.scores:
                table = icc_table(self.scorer.fit(model).params, grid)
                table.insert(0, "model", model)
                frames.append(table)
        if not frames:
            return pd.DataFrame(columns=["model", "item_id", "level", "theta", "probability"])
        return pd.concat(frames, ignore_index=True)

    def run(self) -> int:
        config = self.config
        out = self.output_directory
        header = {"manifest": self.manifest.hash}

        gof = self.goodness_of_fit()
        gof_frame = pd.DataFrame(
            [
                {
                    "K": result.K,
                    "model": result.model,
                    "level": result.level if result.level is not None else 0,
                    "item_id": result.item_id,
                    "chi_square": result.chi_square,
                    "df": result.degrees_of_freedom,
                    "p_value": result.p_value,
                    "accepted": int(result.accepted),
                }
                for result in gof
            ],
            columns=["K", "model", "level", "item_id", "chi_square", "df", "p_value", "accepted"],
        )
        self.tables["gof"] = gof_frame
        self.tables["accepted"] = accepted_counts(gof)
        write_table(out / "gof.csv", gof_frame, dict(header, alpha=config.alpha))
        write_table(out / "gof_summary.csv", self.tables["accepted"], dict(header, alpha=config.alpha))

        method = "spearman" if config.spearman else "pearson"
        correlations = correlation_matrix(list(self.scores.values()), method=method)
        self.tables["correlations"] = correlations
        write_table(
            out / "correlations.csv",
            correlations.reset_index(names="model"),
            dict(header, method=method),
        )

        write_table(out / "curves.csv", self.curves(), header)

        if self.bundle.granularity is not None:
            write_table(
                out / "granularity_stats.csv",
                granularity_stats(self.bundle.granularity).reset_index(),
                header,
            )

        if "psi" in self.scores:
            graded = self.scorer.fit("GRM").params if "psgi" in self.scores else None
            glm = self.scorer.level_matrix if graded is not None else None
            items, levels, agreement = sensitivity_comparison(
                self.bundle.responses, self.scorer.fit("2PL").params, glm, graded
            )
            write_table(out / "sensitivities.csv", items, dict(header, spearman=agreement))
            if levels is not None:
                write_table(out / "sensitivities_levels.csv", levels, header)

        if self.bundle.graph is not None:
            stats = graph_stats(self.bundle.graph)
            self.tables["graph_stats"] = stats.to_frame()
            write_table(out / "graph_stats.csv", self.tables["graph_stats"], header)
            swept = [self.scores[key] for key in config.sweep_models if key in self.scores]
            if swept:
                sweep = damping_sweep(
                    self.bundle.graph,
                    swept,
                    config.dampings,
                    self.scorer.config.tolerance,
                    self.scorer.config.max_iterations,
                )
                write_table(out / "damping_sweep.csv", sweep, header)

        write_text(out / "summary.txt", self.summary())
        self.manifest.write(out / "run.json")
        return self.status

    def summary(self) -> str:
        """Human-readable report rendered with rich tables."""
        console = Console(file=io.StringIO(), width=110, record=True, color_system=None)
        bundle = self.bundle
        shape = Table(title="Dataset")
        shape.add_column("users", justify="right")
        shape.add_column("items", justify="right")
        shape.add_column("edges", justify="right")
        shape.add_row(
            str(bundle.registry.N),
            str(bundle.catalog.n),
            str(bundle.graph.n_edges) if bundle.graph is not None else "-",
        )
        console.print(shape)

        if "graph_stats" in self.tables:
            stats = Table(title="Graph statistics")
            for column in ("metric", "value", "reference"):
                stats.add_column(column, justify="right")
            for row in self.tables["graph_stats"].itertuples(index=False):
                reference = "" if row.reference is None or pd.isna(row.reference) else f"{row.reference:g}"
                stats.add_row(row.metric, f"{row.value:.4g}", reference)
            console.print(stats)

        if self.scorer._fits:
            fits = Table(title="IRT fits")
            for column in ("model", "log-likelihood", "iterations", "converged", "excluded"):
                fits.add_column(column)
            for model, result in self.scorer._fits.items():
                fits.add_row(
                    model,
                    f"{result.log_likelihood:.4f}",
                    str(result.iterations),
                    str(result.converged),
                    ", ".join(result.excluded) or "-",
                )
            console.print(fits)

        accepted = self.tables.get("accepted")
        if accepted is not None and len(accepted):
            table = Table(title=f"Accepted items (alpha = {self.config.alpha})")
            table.add_column("K", justify="right")
            columns = sorted(
                {(row.model, row.level) for row in accepted.itertuples(index=False)}
            )
            for model, level in columns:
                table.add_column(model if level == 0 else f"{model} >={level}", justify="right")
            for K, group in accepted.groupby("K", sort=True):
                cells = {
                    (row.model, row.level): f"{row.accepted}/{row.tested}"
                    for row in group.itertuples(index=False)
                }
                table.add_row(str(K), *[cells.get(column, "-") for column in columns])
            console.print(table)
            console.print("Degrees of freedom: K-1 for Naive models, K-2 for IRT models.")

        correlations = self.tables.get("correlations")
        if correlations is not None:
            table = Table(title="Correlations")
            table.add_column("")
            for label in correlations.columns:
                table.add_column(label, justify="right")
            for label, row in correlations.iterrows():
                table.add_row(label, *["-" if pd.isna(v) else f"{v:.3f}" for v in row])
            console.print(table)
        return console.export_text()
