"""On-disk dataset bundles, result files and run manifests.

A bundle is a plain directory::

    bundle/
        manifest.json      # what the bundle holds and where it came from
        edges.csv          # source,target (optional)
        granularity.csv    # user_id,item_id,bytes  (or responses.csv: user_id,item_id,shared)
        validation.json    # ingest report
        truth/             # ground truth of generated bundles only

All CSV files are UTF-8, comma-separated, with a header row and LF line
endings. Input files start with the header row. Result files put
``# key=value`` metadata lines, among them the hash of the manifest that
produced them, before the header row; read them with ``comment="#"``.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import ValidationError, __version__
from .core import (
    GranularityMatrix,
    ItemCatalog,
    ResponseMatrix,
    ScoreVector,
    UserRegistry,
    build_response_matrix,
)
from .graph import SocialGraph

BUNDLE_FORMAT = "granulum-bundle"
BUNDLE_VERSION = 1

EDGE_COLUMNS = ["source", "target"]
GRANULARITY_COLUMNS = ["user_id", "item_id", "bytes"]
RESPONSE_COLUMNS = ["user_id", "item_id", "shared"]
SCORE_COLUMNS = ["user_id", "score"]

PathLike = Union[str, Path]


def canonical_json(content: Any) -> str:
    return json.dumps(content, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def content_hash(content: Any) -> str:
    """Short SHA-256 digest of the canonical JSON of ``content``."""
    return hashlib.sha256(canonical_json(content).encode("utf-8")).hexdigest()[:16]


def file_hash(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


@dataclass
class RunManifest:
    """Provenance of a bundle or of a command run on it.

    Wall-clock timestamps are not recorded, so that identical runs produce
    identical files.
    """

    command: str
    inputs: Dict[str, str] = field(default_factory=dict)
    models: List[str] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    artifact_version: str = __version__
    parent: Optional[str] = None

    @property
    def config_hash(self) -> str:
        return content_hash(self.config)

    @property
    def hash(self) -> str:
        return content_hash(self.to_dict(with_hash=False))

    def to_dict(self, with_hash: bool = True) -> Dict[str, Any]:
        content = asdict(self)
        content["config_hash"] = self.config_hash
        if with_hash:
            content["hash"] = self.hash
        return content

    def write(self, path: PathLike):
        write_text(path, canonical_json(self.to_dict()))

    @classmethod
    def read(cls, path: PathLike) -> "RunManifest":
        content = json.loads(Path(path).read_text(encoding="utf-8"))
        content.pop("hash", None)
        content.pop("config_hash", None)
        return cls(**content)


def write_text(path: PathLike, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def write_table(
    path: PathLike, frame: pd.DataFrame, header: Optional[Mapping[str, Any]] = None
):
    """Write a CSV with optional ``# key=value`` header lines and LF endings."""
    lines = [f"# {key}={value}\n" for key, value in (header or {}).items()]
    body = frame.to_csv(index=False, lineterminator="\n")
    write_text(path, "".join(lines) + body)


def read_header(path: PathLike) -> Dict[str, str]:
    header = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
    return header


def read_table(
    path: PathLike, columns: Sequence[str], integer_columns: Sequence[str] = ()
) -> pd.DataFrame:
    """Read and check a CSV input file.

    Raises:
        ValidationError: missing file or columns, malformed row or
            non-integer value; the message names the file and line.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path}: file not found.")
    try:
        frame = pd.read_csv(
            path, dtype=str, comment="#", keep_default_na=False, skip_blank_lines=True
        )
    except pd.errors.ParserError as e:
        raise ValidationError(f"{path}: malformed row ({e}).") from e
    except pd.errors.EmptyDataError as e:
        raise ValidationError(f"{path}: file is empty, a header row is required.") from e
    frame.columns = [column.strip() for column in frame.columns]
    if list(frame.columns) != list(columns):
        raise ValidationError(
            f"{path}: expected header {','.join(columns)}, got {','.join(frame.columns)}."
        )
    first_line = 2 + sum(1 for _ in read_header(path))
    for column in frame.columns:
        frame[column] = frame[column].str.strip()
        empty = frame[column] == ""
        if empty.any():
            line = first_line + int(np.flatnonzero(empty.to_numpy())[0])
            raise ValidationError(f"{path}, line {line}: empty '{column}' value.")
    for column in integer_columns:
        numeric = pd.to_numeric(frame[column], errors="coerce")
        bad = numeric.isna() | (numeric != numeric.round())
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ValidationError(
                f"{path}, line {first_line + row}: '{column}' must be an integer, "
                f"got '{frame[column].iloc[row]}'."
            )
        frame[column] = numeric.astype(np.int64)
    frame.attrs["first_line"] = first_line
    return frame


@dataclass
class ValidationReport:
    """What ingest found and fixed in its inputs."""

    users: int = 0
    items: int = 0
    edges: int = 0
    duplicate_edges: int = 0
    self_loops: int = 0
    users_only_in_edges: List[str] = field(default_factory=list)
    isolated_users: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class Bundle:
    """A validated dataset loaded from (or about to be written to) a bundle directory."""

    path: Path
    manifest: RunManifest
    responses: ResponseMatrix
    granularity: Optional[GranularityMatrix] = None
    graph: Optional[SocialGraph] = None

    @property
    def registry(self) -> UserRegistry:
        return self.responses.registry

    @property
    def catalog(self) -> ItemCatalog:
        return self.responses.catalog

    def require_graph(self, model: str) -> SocialGraph:
        if self.graph is None:
            raise ValidationError(f"Model {model} needs a social graph; bundle {self.path} has none.")
        return self.graph

    def require_granularity(self, model: str) -> GranularityMatrix:
        if self.granularity is None:
            raise ValidationError(
                f"Model {model} needs granularity data; bundle {self.path} holds share flags only."
            )
        return self.granularity


def _cells_from_frame(
    path: Path,
    frame: pd.DataFrame,
    value: str,
    registry: UserRegistry,
    catalog: ItemCatalog,
) -> np.ndarray:
    duplicated = frame.duplicated(["user_id", "item_id"])
    if duplicated.any():
        row = int(np.flatnonzero(duplicated.to_numpy())[0])
        raise ValidationError(
            f"{path}, line {frame.attrs['first_line'] + row}: duplicate (user_id, item_id) pair."
        )
    cells = np.zeros((catalog.n, registry.N), dtype=np.int64)
    cells[catalog.indices(frame["item_id"]), registry.indices(frame["user_id"])] = frame[
        value
    ].to_numpy()
    return cells


def ingest(
    edges: Optional[PathLike] = None,
    granularity: Optional[PathLike] = None,
    responses: Optional[PathLike] = None,
    logger=None,
) -> Tuple[ResponseMatrix, Optional[GranularityMatrix], Optional[SocialGraph], ValidationReport]:
    """Read and validate input files into core objects.

    Exactly one of ``granularity`` and ``responses`` must be given. Users are
    sorted by identifier; items keep the order of first appearance. Users
    that appear only in the edges file get all-zero rows; users that appear
    only in the data file become isolated nodes.
    """
    if (granularity is None) == (responses is None):
        raise ValidationError("Give exactly one of a granularity file and a responses file.")
    data_path = Path(granularity if granularity is not None else responses)
    value = "bytes" if granularity is not None else "shared"
    data = read_table(
        data_path,
        GRANULARITY_COLUMNS if granularity is not None else RESPONSE_COLUMNS,
        integer_columns=[value],
    )
    if len(data) == 0:
        raise ValidationError(f"{data_path}: no data rows.")
    if value == "bytes" and (data["bytes"] < 0).any():
        row = int(np.flatnonzero((data["bytes"] < 0).to_numpy())[0])
        raise ValidationError(
            f"{data_path}, line {data.attrs['first_line'] + row}: negative byte count "
            f"{data['bytes'].iloc[row]}."
        )
    if value == "shared" and (~data["shared"].isin([0, 1])).any():
        row = int(np.flatnonzero((~data["shared"].isin([0, 1])).to_numpy())[0])
        raise ValidationError(
            f"{data_path}, line {data.attrs['first_line'] + row}: 'shared' must be 0 or 1."
        )

    edge_frame = read_table(edges, EDGE_COLUMNS) if edges is not None else None
    data_users = set(data["user_id"])
    edge_users = (
        set(edge_frame["source"]) | set(edge_frame["target"]) if edge_frame is not None else set()
    )
    registry = UserRegistry(sorted(data_users | edge_users))
    catalog = ItemCatalog(pd.unique(data["item_id"]))
    cells = _cells_from_frame(data_path, data, value, registry, catalog)

    report = ValidationReport(users=registry.N, items=catalog.n)
    warn = logger.warning if logger is not None else (lambda message: None)
    report.users_only_in_edges = sorted(edge_users - data_users)
    if report.users_only_in_edges:
        warn(
            f"{len(report.users_only_in_edges)} user(s) appear only in {edges}; "
            "they are added with no shared items."
        )

    graph = None
    if edge_frame is not None:
        graph = SocialGraph.from_user_pairs(
            registry, zip(edge_frame["source"], edge_frame["target"])
        )
        report.edges = graph.n_edges
        report.duplicate_edges = graph.dropped_duplicates
        report.self_loops = graph.dropped_self_loops
        isolated = np.flatnonzero(graph.degrees == 0)
        report.isolated_users = [registry[j] for j in isolated]
        if report.isolated_users:
            warn(f"{len(report.isolated_users)} user(s) have no connections (isolated nodes).")

    if value == "bytes":
        gm = GranularityMatrix(catalog, registry, cells)
        return build_response_matrix(gm), gm, graph, report
    return ResponseMatrix(catalog, registry, cells), None, graph, report


def write_bundle(
    directory: PathLike,
    manifest: RunManifest,
    responses: ResponseMatrix,
    granularity: Optional[GranularityMatrix] = None,
    graph: Optional[SocialGraph] = None,
    report: Optional[ValidationReport] = None,
) -> Bundle:
    """Persist core objects in the bundle file formats and write the manifest last."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    if granularity is not None:
        write_table(directory / "granularity.csv", granularity.to_long_frame("bytes"))
        files["granularity"] = "granularity.csv"
    else:
        write_table(directory / "responses.csv", responses.to_long_frame("shared"))
        files["responses"] = "responses.csv"
    if graph is not None:
        users = np.array(graph.registry.users, dtype=object)
        edges = graph.edges
        write_table(
            directory / "edges.csv",
            pd.DataFrame({"source": users[edges[:, 0]], "target": users[edges[:, 1]]}),
        )
        files["edges"] = "edges.csv"
    if report is not None:
        write_text(directory / "validation.json", canonical_json(report.to_dict()))
    manifest.config = dict(
        manifest.config,
        format=BUNDLE_FORMAT,
        format_version=BUNDLE_VERSION,
        files={name: file_hash(directory / path) for name, path in files.items()},
        users=responses.N,
        items=responses.n,
    )
    manifest.inputs = dict(manifest.inputs, **files)
    manifest.write(directory / "manifest.json")
    return Bundle(directory, manifest, responses, granularity, graph)


def load_bundle(directory: PathLike) -> Bundle:
    """Load and re-validate a bundle directory.

    Raises:
        ValidationError: missing manifest, stale files (content changed after
            the manifest was written) or invalid data.
    """
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"{directory} is not a bundle (no manifest.json).")
    manifest = RunManifest.read(manifest_path)
    if manifest.config.get("format") != BUNDLE_FORMAT:
        raise ValidationError(f"{manifest_path}: not a {BUNDLE_FORMAT} manifest.")
    for name, digest in manifest.config.get("files", {}).items():
        path = directory / manifest.inputs[name]
        if not path.exists() or file_hash(path) != digest:
            raise ValidationError(f"{path} changed since the bundle manifest was written.")
    inputs = manifest.inputs
    responses, gm, graph, _ = ingest(
        edges=directory / inputs["edges"] if "edges" in inputs else None,
        granularity=directory / inputs["granularity"] if "granularity" in inputs else None,
        responses=directory / inputs["responses"] if "responses" in inputs else None,
    )
    return Bundle(directory, manifest, responses, gm, graph)


def write_scores(path: PathLike, scores: ScoreVector, manifest_hash: str, **header: Any):
    """Write ``user_id,score`` sorted by user id, scores as shortest round-trip decimals."""
    frame = scores.to_frame().sort_values("user_id", kind="stable")
    frame["score"] = [repr(float(value)) for value in frame["score"]]
    write_table(path, frame, {"manifest": manifest_hash, "model": scores.model, **header})


def read_scores(path: PathLike, registry: Optional[UserRegistry] = None) -> ScoreVector:
    """Read a score file back into a ScoreVector (in registry order when given)."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"Score file {path} not found.")
    header = read_header(path)
    frame = pd.read_csv(path, comment="#", dtype={"user_id": str, "score": float})
    if list(frame.columns) != SCORE_COLUMNS:
        raise ValidationError(f"{path}: expected header {','.join(SCORE_COLUMNS)}.")
    if registry is None:
        registry = UserRegistry(frame["user_id"])
    if len(frame) != registry.N or frame["user_id"].duplicated().any():
        raise ValidationError(f"{path}: {len(frame)} scores for {registry.N} users.")
    try:
        positions = registry.indices(frame["user_id"])
    except KeyError as e:
        raise ValidationError(f"{path}: {e.args[0]}") from e
    values = np.zeros(registry.N)
    values[positions] = frame["score"].to_numpy()
    diagnostics = {key: value for key, value in header.items() if key not in ("model",)}
    if "converged" in diagnostics:
        diagnostics["converged"] = diagnostics["converged"] == "True"
    return ScoreVector(registry, header.get("model", path.stem.upper()), values, diagnostics)
