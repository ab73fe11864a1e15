import json

import pytest

from src.main import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_VALIDATION, run
from tests.conftest import GRAMMARS


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def campaign_spec(tmp_path, stub_config_file):
    def make(stub: str) -> str:
        spec = {
            "name": "binary",
            "grammar_path": str(GRAMMARS / "binary.cqg"),
            "language_config_path": stub_config_file(stub).name,
            "size_range": [0, 16],
            "num_buckets": 4,
            "per_bucket_target": 3,
            "runs": 2,
            "seed": 3,
            "workers": 2,
            "output_dir": f"campaign-{stub}",
            "sampler": {"max_tries": 4},
        }
        return str(write(tmp_path / f"spec-{stub}.json", json.dumps(spec)))

    return make


# ----------------------------------------------------------------------
# check
# ----------------------------------------------------------------------
def test_check_valid_grammar(capsys):
    assert run(["check", str(GRAMMARS / "paren.cqg")]) == EXIT_OK

    out = capsys.readouterr().out
    assert "Grammar statistics" in out
    assert "finite" in out


def test_check_unproductive_grammar(tmp_path, capsys):
    grammar = write(tmp_path / "loop.cqg", "S : S ;")

    assert run(["check", str(grammar)]) == EXIT_VALIDATION
    assert "unproductive" in capsys.readouterr().out


def test_check_syntax_error(tmp_path):
    grammar = write(tmp_path / "bad.cqg", 'S : "a" |')

    assert run(["check", str(grammar)]) == EXIT_VALIDATION


def test_check_missing_file(tmp_path):
    assert run(["check", str(tmp_path / "absent.cqg")]) == EXIT_IO


# ----------------------------------------------------------------------
# sample
# ----------------------------------------------------------------------
def sample_args(out, config, seed="5", target="3"):
    return [
        "sample", "--grammar", str(GRAMMARS / "binary.cqg"), "--config", str(config),
        "--range", "0:16", "--buckets", "4", "--target", target, "--seed", seed, "--out", str(out),
    ]


def test_sample_writes_manifest(tmp_path, stub_config_file, capsys):
    out = tmp_path / "campaign"

    assert run(sample_args(out, stub_config_file("accept"))) == EXIT_OK

    manifest = out / "samples" / "run-0" / "manifest.jsonl"
    records = manifest.read_text(encoding="utf-8").splitlines()
    assert 0 < len(records) <= 12
    assert "run 0:" in capsys.readouterr().out


def test_sample_is_seed_deterministic(tmp_path, stub_config_file):
    config = stub_config_file("accept")
    run(sample_args(tmp_path / "one", config))
    run(sample_args(tmp_path / "two", config))

    first = (tmp_path / "one" / "samples" / "run-0" / "manifest.jsonl").read_bytes()
    second = (tmp_path / "two" / "samples" / "run-0" / "manifest.jsonl").read_bytes()
    assert first == second


def test_sample_with_zero_target(tmp_path, stub_config_file):
    out = tmp_path / "campaign"

    assert run(sample_args(out, stub_config_file("accept"), target="0")) == EXIT_OK
    assert (out / "samples" / "run-0" / "manifest.jsonl").read_text(encoding="utf-8") == ""


@pytest.mark.parametrize("size_range", ["0-16", "0:10"])
def test_sample_rejects_bad_ranges(tmp_path, stub_config_file, size_range):
    args = sample_args(tmp_path / "c", stub_config_file("accept"))
    args[args.index("--range") + 1] = size_range

    assert run(args) == EXIT_CONFIG


# ----------------------------------------------------------------------
# measure / report
# ----------------------------------------------------------------------
def test_measure_and_report(tmp_path, campaign_spec, capsys):
    assert run(["measure", "--spec", campaign_spec("accept")]) == EXIT_OK
    assert "mean CQ 100.000%" in capsys.readouterr().out

    campaign = tmp_path / "campaign-accept"
    assert (campaign / "report" / "cq_summary.csv").exists()
    assert (campaign / "results" / "run-1.jsonl").exists()

    assert run(["report", "--campaign", str(campaign)]) == EXIT_OK
    assert "mean CQ 100.000%" in capsys.readouterr().out


def test_measure_rejecting_compiler(campaign_spec, capsys):
    assert run(["measure", "--spec", campaign_spec("reject"), "--runs", "1"]) == EXIT_OK
    assert "mean CQ 0.000%" in capsys.readouterr().out


def test_measure_missing_compiler(tmp_path, stub_config_file):
    config = stub_config_file("ghost", command=["no-such-compiler-cq", "{file}"])
    spec = write(tmp_path / "spec.json", json.dumps({
        "grammar_path": str(GRAMMARS / "binary.cqg"),
        "language_config_path": str(config),
        "size_range": [0, 8],
        "per_bucket_target": 2,
        "output_dir": "campaign",
    }))

    assert run(["measure", "--spec", str(spec)]) == EXIT_CONFIG


def test_usage_errors_exit_with_config_code():
    assert run(["measure"]) == EXIT_CONFIG
    assert run(["no-such-command"]) == EXIT_CONFIG
