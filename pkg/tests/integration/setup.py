from pathlib import Path
from typing import Dict, List, Sequence

from granulum.cli import main
from granulum.configure import presets_directory


class PipelineSetup:
    """One generate → score → evaluate run of the command line."""

    def __init__(
        self,
        preset: str,
        generate: Sequence[str] = (),
        score: Sequence[str] = (),
        evaluate: Sequence[str] = (),
    ):
        self.preset = preset
        self.generate = list(generate)
        self.score = list(score)
        self.evaluate = list(evaluate)

    @property
    def config_path(self) -> Path:
        return presets_directory / "generate" / f"{self.preset}.yaml"

    def __call__(self, directory: Path) -> Dict[str, int]:
        bundle = str(directory)
        return {
            "generate": main(
                ["generate", "--config", str(self.config_path), "--out", bundle, *self.generate]
            ),
            "score": main(["score", bundle, *self.score]),
            "evaluate": main(["evaluate", bundle, *self.evaluate]),
        }

    def __str__(self):
        return "_".join([self.preset, *self.generate]).replace("=", "-")


basic: List[PipelineSetup] = [
    PipelineSetup("smoke"),
    PipelineSetup(
        "smoke",
        generate=["levels=1", "byte_ranges=[[10,80]]", "n_users=150"],
        score=["--models", "psn,psi,psc:prc,psna", "--damping", "0.5"],
        evaluate=["--k-groups", "3,6", "--spearman"],
    ),
]

full: List[PipelineSetup] = basic + [
    PipelineSetup("full_scale"),
    PipelineSetup("ego"),
    PipelineSetup("binary", score=["--models", "psn,psi,psc,psna"]),
]
