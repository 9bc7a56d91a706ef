"""Contains callbacks.

Callbacks are lightweight event handlers, used mainly for logging.

To make a method trigger callbacks, decorate it with ``@apply_callbacks()``;
its output is then passed to every callback registered in the active
:class:`granulum.Metadata` block::

    with Metadata({"logger": logger, "callbacks": [FitProgressLogger()]}):
        fit_2pl(r)

The ``granulum`` command line instantiates the callbacks listed under
``callbacks:`` in ``presets/main.yaml``.
"""

import importlib
import time
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

import granulum
from granulum.__internal.base import GranulumBase


class Callback(GranulumBase, ABC):
    """Base class for callbacks.

    Callback objects are used to perform in response to some method being called.
    """

    cooldown: Optional[float] = None

    def __init__(self, log_level: str = "info"):
        """Initialize a callback object.

        Args:
            log_level: name of the logger method used for messages
        """
        super().__init__()
        self.log = getattr(self._metadata["logger"], log_level)
        self.exception = self._metadata["logger"].exception
        self.__last_trigger = 0.0

    @abstractmethod
    def is_target_event(self, obj, method: str, output) -> bool:
        pass

    @abstractmethod
    def on_function_call(self, obj, method: str, output):
        pass

    def on_launch(self):
        pass

    def on_termination(self, res):
        pass

    def ready(self, t: float) -> bool:
        if not self.cooldown:
            return True
        return t - self.__last_trigger > self.cooldown

    def trigger_cooldown(self, t: float):
        self.__last_trigger = t

    def __call__(self, obj, method: str, output):
        t = time.time()
        try:
            if self.is_target_event(obj, method, output):
                if self.ready(t):
                    self.on_function_call(obj, method, output)
                    self.trigger_cooldown(t)
        except granulum.GranulumException:
            raise
        except Exception as e:
            self.log(f"Callback {self.__class__.__name__} failed.")
            self.exception(e)


class HistoricalCallback(Callback, ABC):
    """Callback (base) responsible for recording tabular data during a run."""

    def __init__(self, *args, **kwargs):
        """Initialize an instance of HistoricalCallback."""
        super().__init__(*args, **kwargs)
        self.data = pd.DataFrame()
        self.save_directory: Optional[Path] = None

    def add_datum(self, datum: Dict[str, Any]):
        if self.data.empty:
            self.data = pd.DataFrame({key: [value] for key, value in datum.items()})
        else:
            self.data.loc[len(self.data)] = datum

    def clear_recent_data(self):
        self.data = pd.DataFrame()

    def dump_data(self, path: Union[str, Path]):
        if not self.data.empty:
            self.data.to_csv(path, index=False, lineterminator="\n")

    def dump_and_clear_data(self, path: Union[str, Path]):
        self.dump_data(path)
        self.clear_recent_data()


class FitProgressLogger(Callback):
    """Logs the progress of the EM fits of the IRT models, at most once per second."""

    cooldown = 1.0

    def is_target_event(self, obj, method, output):
        return isinstance(obj, granulum.irt.LatentTraitModel) and method == "em_step"

    def on_function_call(self, obj, method: str, output: Dict[str, Any]):
        self.log(
            f"{output['model']} EM iteration {output['iteration']}/{obj.config.max_iterations}: "
            f"log-likelihood {output['log_likelihood']:.4f}, "
            f"max change {output['max_change']:.2e}"
        )


class FitHistoryCallback(HistoricalCallback):
    """Records the marginal log-likelihood of every EM iteration.

    The scenario dumps the table to ``fit_history.csv`` of the output directory.
    """

    def is_target_event(self, obj, method, output):
        return isinstance(obj, granulum.irt.LatentTraitModel) and method == "em_step"

    def on_function_call(self, obj, method: str, output: Dict[str, Any]):
        self.add_datum(
            {
                "model": output["model"],
                "iteration": output["iteration"],
                "log_likelihood": output["log_likelihood"],
                "max_change": output["max_change"],
            }
        )


class ScoreSummaryLogger(Callback):
    """Logs summary statistics of every score vector a scenario computes."""

    def is_target_event(self, obj, method, output):
        return (
            isinstance(obj, granulum.scenario.Scenario)
            and method == "compute_score"
            and isinstance(output, granulum.core.ScoreVector)
        )

    def on_function_call(self, obj, method: str, output):
        values = output.values
        self.log(
            f"{output.model}: mean {values.mean():.4f}, std {values.std():.4f}, "
            f"min {values.min():.4f}, max {values.max():.4f} ({output.registry.N} users)"
        )


class ConvergenceMonitor(Callback):
    """Collects iterative computations that stopped without converging.

    Listens to score vectors and to the fixed-point solvers of the graph
    models, and reports all failures once the run terminates.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.failures: List[str] = []

    def is_target_event(self, obj, method, output):
        if isinstance(obj, granulum.graph.PowerIteration) and method == "solve":
            return True
        return (
            isinstance(obj, granulum.scenario.Scenario)
            and method == "compute_score"
            and isinstance(output, granulum.core.ScoreVector)
        )

    def on_function_call(self, obj, method, output):
        if isinstance(output, granulum.core.ScoreVector):
            if not output.converged:
                self.failures.append(output.model)
        elif not output.converged:
            self.failures.append(f"{obj.name} ({output.iterations} iterations)")

    def on_termination(self, res):
        if self.failures:
            self._metadata["logger"].warning(
                f"Not converged: {', '.join(self.failures)}."
            )


def instantiate_callbacks(names: Sequence[str]) -> List[Callback]:
    """Create callbacks from ``module.ClassName`` paths (as listed in a preset)."""
    callbacks = []
    for name in names:
        module_name, _, class_name = name.rpartition(".")
        module = importlib.import_module(module_name or "granulum.callback")
        callbacks.append(getattr(module, class_name)())
    return callbacks
