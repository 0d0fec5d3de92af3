import hashlib
import json
from importlib import resources

import pytest

from dialogsim.cli import main


@pytest.fixture(scope="module")
def data_paths(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    schema = root / "schema.json"
    seeds = root / "seeds.txt"
    schema.write_text(
        (resources.files("dialogsim.data") / "demo_schema.json").read_text(encoding="utf-8"),
        encoding="utf-8",
    )
    seeds.write_text(
        (resources.files("dialogsim.data") / "demo_seeds.txt").read_text(encoding="utf-8"),
        encoding="utf-8",
    )
    return schema, seeds


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_generate_is_deterministic(data_paths, tmp_path):
    schema, seeds = data_paths
    out1, out2 = tmp_path / "c1.txt", tmp_path / "c2.txt"
    args = ["generate", "--schema", str(schema), "--seeds", str(seeds),
            "--n", "50", "--mix", "golden=0.4,markov=0.6", "--seed", "7"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert _sha(out1) == _sha(out2)
    assert out1.read_text(encoding="utf-8").count("U-1:") == 50


def test_generate_single_dialog(data_paths, tmp_path, capsys):
    schema, seeds = data_paths
    assert main(["generate", "--schema", str(schema), "--seeds", str(seeds), "--n", "1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# sampler=")


def test_metrics_subcommand(data_paths, tmp_path):
    schema, seeds = data_paths
    corpus = tmp_path / "corpus.txt"
    main(["generate", "--schema", str(schema), "--seeds", str(seeds),
          "--n", "40", "--seed", "3", "--out", str(corpus)])
    report_path = tmp_path / "report.json"
    assert main(["metrics", "--schema", str(schema), "--out", str(report_path), str(corpus)]) == 0
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["n_dialogs"] == 40
    assert 0 < report["fraction_unique"] <= 1


def test_export_training_files(data_paths, tmp_path):
    schema, seeds = data_paths
    corpus = tmp_path / "corpus.txt"
    main(["generate", "--schema", str(schema), "--seeds", str(seeds),
          "--n", "20", "--seed", "4", "--out", str(corpus)])
    out_dir = tmp_path / "train"
    assert main(["export-training", "--schema", str(schema), "--out", str(out_dir), str(corpus)]) == 0
    for kind in ("ner", "action_prediction", "argument_filling"):
        path = out_dir / f"{kind}.jsonl"
        assert path.exists()
        rows = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
        assert rows and all(r["kind"] == kind for r in rows)


def test_validate_ok(data_paths):
    schema, seeds = data_paths
    assert main(["validate", "--schema", str(schema), "--seeds", str(seeds)]) == 0


def test_validate_dangling_reference(data_paths, tmp_path, capsys):
    schema, _ = data_paths
    doc = json.loads(schema.read_text(encoding="utf-8"))
    doc["domains"][0]["entity_types"] = [
        t for t in doc["domains"][0]["entity_types"] if t["name"] != "showInfo"
    ]
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["validate", "--schema", str(broken)]) == 1
    assert "showInfo" in capsys.readouterr().out


def test_validate_warns_on_uncovered_signature(data_paths, tmp_path, capsys):
    schema, seeds = data_paths
    doc = json.loads(schema.read_text(encoding="utf-8"))
    doc["domains"][0]["utterance_templates"] = [
        u for u in doc["domains"][0]["utterance_templates"]
        if "inform(entity:theater)" not in u["acts"]
    ]
    trimmed = tmp_path / "trimmed.json"
    trimmed.write_text(json.dumps(doc), encoding="utf-8")
    # no seed informs a bare theater value either, so the signature is bare
    assert main(["validate", "--schema", str(trimmed), "--seeds", str(seeds)]) == 0
    assert "inform(entity:theater)" in capsys.readouterr().out


def test_fit_dump_reloads(data_paths, tmp_path):
    schema, seeds = data_paths
    model_path = tmp_path / "model.json"
    assert main(["fit", "--schema", str(schema), "--seeds", str(seeds),
                 "--out", str(model_path)]) == 0
    doc = json.loads(model_path.read_text(encoding="utf-8"))
    assert doc["start"] == {"FindMovies": 0.8, "SelectShow": 0.2}
    assert doc["transition"]["BookTickets"] == {"END": 1.0}
    # the dump is usable for generation
    out = tmp_path / "from_model.txt"
    assert main(["generate", "--schema", str(schema), "--seeds", str(seeds),
                 "--n", "5", "--seed", "1", "--model", str(model_path),
                 "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8").count("U-1:") == 5


def test_missing_schema_is_error(tmp_path, capsys):
    assert main(["validate", "--schema", str(tmp_path / "nope.json")]) == 1


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        main(["generate"])  # --schema/--seeds required
    assert err.value.code == 2
