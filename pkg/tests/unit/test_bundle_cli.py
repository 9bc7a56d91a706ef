from pathlib import Path

from granulum import ValidationError
from granulum.bundle import (
    RunManifest,
    ingest,
    load_bundle,
    read_header,
    read_scores,
    write_bundle,
    write_scores,
)
from granulum.cli import GranulumArgumentParser, build_parser, main
from granulum.configure import presets_directory
from granulum.core import ScoreVector, UserRegistry
from granulum.scenario import normalize_model_key, score_file_name
import numpy as np
import pandas as pd
import pytest


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def inputs(tmp_path):
    edges = write(tmp_path / "edges.csv", "source,target\na,b\nb,a\nb,c\nd,e\n")
    granularity = write(
        tmp_path / "granularity.csv",
        "user_id,item_id,bytes\n"
        "a,about,120\n"
        "a,birthday,10\n"
        "b,about,0\n"
        "c,birthday,10\n"
        "f,about,35\n",
    )
    return edges, granularity


def test_ingest(inputs):
    edges, granularity = inputs
    responses, gm, graph, report = ingest(edges=edges, granularity=granularity)
    assert list(responses.registry) == ["a", "b", "c", "d", "e", "f"]
    assert list(responses.catalog) == ["about", "birthday"]
    assert gm.cells[:, 0].tolist() == [120, 10]
    assert responses.cells[:, 1].tolist() == [0, 0]
    assert graph.n_edges == 3
    assert report.duplicate_edges == 1
    assert report.users_only_in_edges == ["d", "e"]
    assert report.isolated_users == ["f"]


def test_ingest_rejects_bad_rows(tmp_path):
    negative = write(
        tmp_path / "negative.csv", "user_id,item_id,bytes\na,about,3\nb,about,-4\n"
    )
    with pytest.raises(ValidationError, match="line 3"):
        ingest(granularity=negative)
    header = write(tmp_path / "header.csv", "user,item,bytes\na,about,3\n")
    with pytest.raises(ValidationError, match="expected header"):
        ingest(granularity=header)
    empty = write(tmp_path / "empty.csv", "user_id,item_id,bytes\n")
    with pytest.raises(ValidationError, match="no data rows"):
        ingest(granularity=empty)
    duplicate = write(
        tmp_path / "duplicate.csv", "user_id,item_id,shared\na,about,1\na,about,0\n"
    )
    with pytest.raises(ValidationError, match="duplicate"):
        ingest(responses=duplicate)
    flags = write(tmp_path / "flags.csv", "user_id,item_id,shared\na,about,2\n")
    with pytest.raises(ValidationError, match="0 or 1"):
        ingest(responses=flags)
    with pytest.raises(ValidationError):
        ingest()


def test_bundle_round_trip(tmp_path, inputs):
    edges, granularity = inputs
    responses, gm, graph, report = ingest(edges=edges, granularity=granularity)
    bundle = write_bundle(
        tmp_path / "bundle", RunManifest(command="ingest"), responses, gm, graph, report
    )
    loaded = load_bundle(tmp_path / "bundle")
    assert loaded.responses.same_as(responses)
    assert loaded.granularity.same_as(gm)
    assert np.array_equal(loaded.graph.edges, graph.edges)
    assert loaded.manifest.hash == bundle.manifest.hash
    assert (tmp_path / "bundle" / "validation.json").exists()


def test_stale_bundle_is_rejected(tmp_path, inputs):
    edges, granularity = inputs
    responses, gm, graph, _ = ingest(edges=edges, granularity=granularity)
    write_bundle(tmp_path / "bundle", RunManifest(command="ingest"), responses, gm, graph)
    with open(tmp_path / "bundle" / "edges.csv", "a", encoding="utf-8") as f:
        f.write("a,c\n")
    with pytest.raises(ValidationError, match="changed"):
        load_bundle(tmp_path / "bundle")
    with pytest.raises(ValidationError, match="no manifest"):
        load_bundle(tmp_path)


def test_manifest_hash_tracks_content():
    first = RunManifest(command="score", config={"damping": 0.85}, seed=1)
    second = RunManifest(command="score", config={"damping": 0.85}, seed=1)
    assert first.hash == second.hash and len(first.hash) == 16
    second.config["damping"] = 0.5
    assert first.hash != second.hash
    assert first.config_hash != second.config_hash


def test_score_file_round_trip(tmp_path):
    registry = UserRegistry(["u2", "u1", "u3"])
    scores = ScoreVector(registry, "PSNA", [0.1, 1 / 3, 2.5], {"converged": True})
    path = tmp_path / "psna.csv"
    write_scores(path, scores, "abc123", damping=0.85, converged=True)
    header = read_header(path)
    assert header == {"manifest": "abc123", "model": "PSNA", "damping": "0.85", "converged": "True"}
    lines = path.read_text(encoding="utf-8").splitlines()
    assert all(line.startswith("# ") and "=" in line for line in lines[:4])
    assert lines[4:] == ["user_id,score", "u1,0.3333333333333333", "u2,0.1", "u3,2.5"]
    loaded = read_scores(path, registry)
    assert np.array_equal(loaded.values, scores.values)
    assert loaded.model == "PSNA" and loaded.converged
    with pytest.raises(ValidationError):
        read_scores(path, UserRegistry(["u1", "u2"]))


def test_model_keys():
    assert normalize_model_key("PSC", centrality="bc") == "psc:bc"
    assert normalize_model_key(" psi ") == "psi"
    assert score_file_name("psc:prc") == "psc-prc.csv"
    with pytest.raises(ValidationError):
        normalize_model_key("psx")


def test_argument_parser_collects_overrides():
    parser = build_parser()
    args = parser.parse_args(
        ["score", "data", "--models", "psn,psna", "--damping", "0.5", "--compat-eq33", "levels=2"]
    )
    overrides = args.command_parser.overrides(args)
    assert overrides == ["models=[psn,psna]", "damping=0.5", "compat_eq33=true", "levels=2"]
    assert isinstance(args.command_parser, GranulumArgumentParser)


def test_generate_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["generate", "--config", str(presets_directory / "generate" / "smoke.yaml"),
                     "--out", str(tmp_path / name), "--callbacks", "", "n_users=60"]) == 0
    for name in ("manifest.json", "granularity.csv", "edges.csv", "truth/items.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_generate_without_seed_fails(tmp_path):
    assert main(["generate", "--out", str(tmp_path / "x"), "n_users=50"]) == 1
    assert not (tmp_path / "x").exists()


def test_score_on_all_zero_responses(tmp_path):
    rows = "".join(f"u{j},about,0\nu{j},birthday,0\n" for j in range(5))
    responses = write(tmp_path / "responses.csv", "user_id,item_id,shared\n" + rows)
    assert main(["ingest", "--responses", str(responses), "--out", str(tmp_path / "b")]) == 0
    assert main(["score", str(tmp_path / "b"), "--models", "psn"]) == 0
    scores = read_scores(tmp_path / "b" / "results" / "scores" / "psn.csv")
    assert np.all(scores.values == 0)


def test_score_graph_models_need_edges(tmp_path, inputs):
    _, granularity = inputs
    assert main(["ingest", "--granularity", str(granularity), "--out", str(tmp_path / "b")]) == 0
    assert main(["score", str(tmp_path / "b"), "--models", "psc"]) == 1
    assert main(["score", str(tmp_path / "b"), "--models", "psgn", "--levels", "2"]) == 0


def test_psna_records_damping(tmp_path, inputs):
    edges, granularity = inputs
    assert main(["ingest", "--edges", str(edges), "--granularity", str(granularity),
                 "--out", str(tmp_path / "b")]) == 0
    status = main(["score", str(tmp_path / "b"), "--models", "psna", "--intrinsic", "psn"])
    assert status == 0
    header = read_header(tmp_path / "b" / "results" / "scores" / "psna.csv")
    assert header["damping"] == "0.85"
    assert header["intrinsic"] == "PSN"


def test_unknown_model_is_a_validation_error(tmp_path, inputs):
    _, granularity = inputs
    main(["ingest", "--granularity", str(granularity), "--out", str(tmp_path / "b")])
    assert main(["score", str(tmp_path / "b"), "--models", "psx"]) == 1


def test_evaluate_writes_granularity_stats(tmp_path, inputs):
    _, granularity = inputs
    bundle = str(tmp_path / "b")
    assert main(["ingest", "--granularity", str(granularity), "--out", bundle]) == 0
    assert main(["score", bundle, "--models", "psn,psgn", "--levels", "2"]) == 0
    assert main(["evaluate", bundle, "--k-groups", "2"]) == 0
    report = tmp_path / "b" / "results" / "report"
    stats = pd.read_csv(report / "granularity_stats.csv", comment="#").set_index("item_id")
    assert list(stats.columns) == ["shared", "mean_bytes", "std_bytes", "distinct"]
    assert stats.loc["about", "shared"] == 2
    assert stats.loc["about", "mean_bytes"] == 77.5
    assert stats.loc["birthday", "distinct"] == 1
    assert read_header(report / "granularity_stats.csv")["manifest"]


def test_literal_denominators_flag_keeps_scores(tmp_path, inputs):
    edges, granularity = inputs
    bundle = str(tmp_path / "b")
    assert main(["ingest", "--edges", str(edges), "--granularity", str(granularity),
                 "--out", bundle]) == 0
    for name, flags in (("default", []), ("literal", ["--compat-eq33"])):
        out = str(tmp_path / name)
        assert main(["score", bundle, "--models", "psn", "--out", out, *flags]) == 0
    default = read_scores(tmp_path / "default" / "scores" / "psn.csv")
    literal = read_scores(tmp_path / "literal" / "scores" / "psn.csv")
    assert np.allclose(literal.values, default.values, rtol=1e-12, atol=0)
    assert read_header(tmp_path / "default" / "scores" / "psn.csv")["compat_eq33"] == "False"
    assert read_header(tmp_path / "literal" / "scores" / "psn.csv")["compat_eq33"] == "True"


def test_trailing_overrides_reach_the_config():
    args = build_parser().parse_args(
        ["evaluate", "data", "--alpha", "0.01", "spearman=true", "k_groups=[3]"]
    )
    overrides = args.command_parser.overrides(args)
    assert overrides == ["alpha=0.01", "spearman=true", "k_groups=[3]"]
    with pytest.raises(SystemExit):
        build_parser().parse_args(["score", "data", "--damping", "0.5", "--bogus"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["score", "data", "--damping", "0.5", "stray"])
