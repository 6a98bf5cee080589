import json
from pathlib import Path

import pytest

from makged.cli import main, toy_kg_path
from makged.config import validate_config
from makged.errors import ConfigError

DATA = Path(__file__).parent / "data"
GOLDEN = DATA / "golden"
CONFIG = DATA / "toy_run.yaml"
SUBCOMMANDS = ["ingest", "build-dataset", "train-encoder", "detect", "evaluate", "transcript"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help(capsys, cmd):
    code, out, _ = run(capsys, cmd, "--help")
    assert code == 0 and "usage: makged " + cmd in out


def test_no_command_is_usage_error(capsys):
    assert run(capsys)[0] == 2


def test_rate_out_of_range(capsys, tmp_path):
    code, _, err = run(capsys, "build-dataset", "--kg", "@toy", "--rate", "1.5", "--out", tmp_path)
    assert code == 2 and "rate must be in (0, 1)" in err


def test_ingest_roundtrip(capsys, tmp_path):
    first, second = tmp_path / "a.tsv", tmp_path / "b.tsv"
    code, out, _ = run(capsys, "ingest", "--kg", "@toy", "--out", first)
    assert code == 0 and out.startswith("triples=50 entities=33 relations=9")
    assert run(capsys, "ingest", "--kg", first, "--out", second)[0] == 0
    assert first.read_bytes() == second.read_bytes()


def test_ingest_malformed(capsys, tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tr\tb\nonly two\tfields\n")
    code, _, err = run(capsys, "ingest", "--kg", bad)
    assert code == 1 and err.startswith("error: MalformedLine:") and "line 2" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "ingest", "--kg", tmp_path / "nope.tsv")
    assert code == 1 and err.startswith("error: IOError:")


# -- config ------------------------------------------------------------------------


def test_empty_config_defaults(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("")
    cfg = validate_config(path)
    assert cfg.encoder.hidden == 128 and cfg.encoder.dim == 64 and cfg.encoder.lr == 0.001
    assert cfg.corruption.rate == 0.3 and cfg.protocol.max_rounds == 3


@pytest.mark.parametrize(
    "text, field",
    [
        ("protocol:\n  max_rounds: 5\n", "protocol.max_rounds"),
        ("corruption:\n  rate: 1.2\n", "corruption.rate"),
        ("encoder:\n  hiden: 12\n", "encoder.hiden"),
        ("kg: missing.tsv\n", "<root>"),
        ("backends:\n  default:\n    type: carrier-pigeon\n", "backends.default"),
        ("- just\n- a list\n", "<root>"),
    ],
)
def test_invalid_config(tmp_path, text, field):
    path = tmp_path / "c.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError) as info:
        validate_config(path)
    assert info.value.field == field


def test_relative_paths_resolve_against_config(tmp_path):
    (tmp_path / "kg.tsv").write_text("a\tr\tb\n")
    (tmp_path / "sub").mkdir()
    path = tmp_path / "sub" / "c.yaml"
    path.write_text("kg: ../kg.tsv\n")
    assert validate_config(path).kg.resolve() == (tmp_path / "kg.tsv").resolve()


def test_detect_requires_backends(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("protocol:\n  max_rounds: 2\n")
    code, _, err = run(
        capsys, "detect", "--kg", "@toy", "--dataset", GOLDEN / "dataset" / "test.jsonl",
        "--config", cfg, "--out", tmp_path / "d.jsonl",
    )
    assert code == 1 and "ConfigError" in err


# -- evaluate / transcript ---------------------------------------------------------


def test_evaluate_perfect(capsys, tmp_path):
    gold = GOLDEN / "dataset" / "train.jsonl"
    pred = tmp_path / "pred.jsonl"
    with open(pred, "w") as fh:
        for line in gold.read_text().splitlines():
            ex = json.loads(line)
            fh.write(json.dumps({
                "triple": {k: ex[k] for k in ("head", "relation", "tail")},
                "label": ex["label"], "method": "consensus", "rounds_used": 0, "turns": [],
            }) + "\n")
    code, out, _ = run(capsys, "evaluate", "--pred", pred, "--gold", gold, "--json", tmp_path / "r.json")
    assert code == 0
    assert out.splitlines()[1] == "1.0000 1.0000 1.0000 1.0000"
    assert json.loads((tmp_path / "r.json").read_text())["metrics"]["accuracy"] == 1.0


def test_evaluate_misaligned(capsys):
    code, _, err = run(capsys, "evaluate", "--pred", GOLDEN / "decisions.jsonl", "--gold", GOLDEN / "dataset" / "test.jsonl")
    assert code == 1 and err.startswith("error: MisalignedInputs:")


def test_transcript(capsys):
    first = json.loads((GOLDEN / "decisions.jsonl").read_text().splitlines()[0])
    key = "|".join(first["triple"][k] for k in ("head", "relation", "tail"))
    code, out, _ = run(capsys, "transcript", GOLDEN / "decisions.jsonl", "--triple", key)
    assert code == 0
    assert out.startswith("Triple: (")
    assert "[Analysis]" in out and f"Final: {first['label']} (by {first['method']}" in out
    assert out.count("_Agent:") == len(first["turns"])


def test_transcript_unknown_triple(capsys):
    code, _, err = run(capsys, "transcript", GOLDEN / "decisions.jsonl", "--triple", "x|y|z")
    assert code == 1 and "not found" in err


# -- end to end --------------------------------------------------------------------


def pipeline(capsys, out_dir: Path, parallelism: int) -> dict[str, bytes]:
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = out_dir / "dataset"
    assert run(capsys, "ingest", "--kg", "@toy", "--out", out_dir / "kg.tsv")[0] == 0
    assert run(capsys, "build-dataset", "--kg", out_dir / "kg.tsv", "--config", CONFIG, "--out", ds)[0] == 0
    assert run(
        capsys, "detect", "--kg", out_dir / "kg.tsv", "--dataset", ds / "train.jsonl", "--config", CONFIG,
        "--out", out_dir / "decisions.jsonl", "--parallelism", parallelism,
    )[0] == 0
    code, report, _ = run(capsys, "evaluate", "--pred", out_dir / "decisions.jsonl", "--gold", ds / "train.jsonl")
    assert code == 0
    files = {f"dataset/{p.name}": p.read_bytes() for p in sorted(ds.glob("*.jsonl"))}
    files["decisions.jsonl"] = (out_dir / "decisions.jsonl").read_bytes()
    files["report.txt"] = report.encode()
    return files


def test_end_to_end_matches_golden(capsys, tmp_path):
    files = pipeline(capsys, tmp_path, parallelism=1)
    for name, data in files.items():
        assert data == (GOLDEN / name).read_bytes(), name


def test_end_to_end_parallel_is_identical(capsys, tmp_path):
    a = pipeline(capsys, tmp_path / "p1", parallelism=1)
    b = pipeline(capsys, tmp_path / "p4", parallelism=4)
    assert a == b


def test_train_encoder_cli(capsys, tmp_path):
    ckpt = tmp_path / "enc.json"
    code, out, _ = run(
        capsys, "train-encoder", "--dataset", GOLDEN / "dataset", "--kg", "@toy", "--out", ckpt,
        "--epochs", 3, "--hidden", 16, "--dim", 8,
    )
    assert code == 0 and "train_accuracy=" in out
    doc = json.loads(ckpt.read_text())
    assert doc["format"] == "makged-gcn/1" and doc["config"]["hidden"] == 16


def test_bundled_toy_kg_exists():
    assert toy_kg_path().is_file()
