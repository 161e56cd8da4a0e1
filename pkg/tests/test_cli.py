import csv
import io
import json
import logging
import math

import pytest

from src.cli.config import CLIConfig
from src.cli.main import EXIT_CAP_EXCEEDED, EXIT_CONFIG_ERROR, EXIT_OK, main
from src.cli.writer import ResultTable, render_csv
from src.config.defaults import TOOL_NAME, TOOL_VERSION
from src.config.schema import parse_experiment_config
from src.util.logging_setup import configure_logging

FAMILY = {
    "models": [
        {"label": "i", "interval": [1, 6], "r": 2},
        {"label": "j", "interval": [4, 9], "r": 3},
    ]
}


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def write_config(tmp_path, document, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


def read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    comments = [line for line in lines if line.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(line for line in lines if not line.startswith("#")))))
    return comments, rows


def data_lines(path):
    return [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]


# ----------------------------
# moments
# ----------------------------


async def test_moments_csv_with_provenance(tmp_path):
    document = {
        "seed": 7,
        "moments": {
            "family": FAMILY,
            "words": [["i", "i"], ["i", "j", "i", "j"]],
            "methods": ["limit", "exact-small", "dense-mc"],
            "samples": 200,
        },
    }
    out = tmp_path / "moments.csv"
    code = await main(["moments", "--config", write_config(tmp_path, document), "--out", str(out)])
    assert code == EXIT_OK
    comments, rows = read_csv(out)
    config = parse_experiment_config(document, {"out": str(out)})
    assert comments[:5] == [
        f"# tool={TOOL_NAME}",
        f"# version={TOOL_VERSION}",
        "# command=moments",
        f"# config_sha256={config.config_hash()}",
        "# seed=7",
    ]
    assert comments[5].startswith("# config=")
    assert list(rows[0]) == ["word", "method", "value", "stderr", "samples", "n"]
    assert len(rows) == 6
    by_key = {(row["word"], row["method"]): row for row in rows}
    assert float(by_key[("i i", "limit-formula")]["value"]) == pytest.approx(1.0)
    assert float(by_key[("i i", "exact-small")]["value"]) == pytest.approx(1.0)
    assert float(by_key[("i j i j", "limit-formula")]["value"]) == pytest.approx(math.exp(-1.0))
    dense = by_key[("i i", "dense-mc")]
    assert int(dense["samples"]) == 200
    assert float(dense["value"]) == pytest.approx(1.0, abs=5 * float(dense["stderr"]) + 1e-9)


async def test_reruns_are_bit_identical_across_thread_counts(tmp_path):
    document = {
        "seed": 123,
        "chunk_size": 40,
        "moments": {"family": FAMILY, "words": [["i", "j", "i", "j"]], "methods": ["dense-mc", "reduced-mc"], "samples": 150},
    }
    path = write_config(tmp_path, document)
    out, threaded = tmp_path / "a.csv", tmp_path / "b.csv"
    assert await main(["moments", "--config", path, "--out", str(out)]) == EXIT_OK
    first = out.read_text()
    assert await main(["moments", "--config", path, "--out", str(out)]) == EXIT_OK
    assert out.read_text() == first
    assert await main(["moments", "--config", path, "--out", str(threaded), "--threads", "3"]) == EXIT_OK
    assert data_lines(threaded) == data_lines(out)


async def test_seed_flag_overrides_config(tmp_path):
    document = {"moments": {"family": FAMILY, "words": [["i", "i"]], "methods": ["dense-mc"], "samples": 50}}
    path = write_config(tmp_path, document)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    await main(["moments", "--config", path, "--out", str(a), "--seed", "1"])
    await main(["moments", "--config", path, "--out", str(b), "--seed", "2"])
    assert "# seed=1" in a.read_text()
    assert data_lines(a) != data_lines(b)


async def test_json_output(tmp_path):
    document = {"format": "json", "moments": {"family": FAMILY, "words": [["j", "j"]], "methods": ["limit"]}}
    out = tmp_path / "moments.json"
    assert await main(["moments", "--config", write_config(tmp_path, document), "--out", str(out)]) == EXIT_OK
    result = json.loads(out.read_text())
    assert result["provenance"]["command"] == "moments"
    assert result["rows"][0]["word"] == ["j", "j"]
    assert result["rows"][0]["value"] == pytest.approx(1.0)


async def test_stdout_output(tmp_path, capsys):
    document = {"moments": {"family": FAMILY, "words": [["i", "i"]]}}
    assert await main(["moments", "--config", write_config(tmp_path, document)]) == EXIT_OK
    captured = capsys.readouterr()
    assert captured.out.startswith(f"# tool={TOOL_NAME}")
    assert "word,method,value" in captured.out


# ----------------------------
# error exits
# ----------------------------


async def test_interaction_length_beyond_domain_exits_with_config_error(tmp_path, capsys):
    document = {"moments": {"family": {"models": [{"label": "wide", "interval": [1, 3], "r": 5}]}, "words": [["wide", "wide"]]}}
    code = await main(["moments", "--config", write_config(tmp_path, document)])
    assert code == EXIT_CONFIG_ERROR
    assert "wide" in capsys.readouterr().err


async def test_unknown_label_in_word_exits_with_config_error(tmp_path):
    document = {"moments": {"family": FAMILY, "words": [["i", "k"]]}}
    assert await main(["moments", "--config", write_config(tmp_path, document)]) == EXIT_CONFIG_ERROR


async def test_missing_section_exits_with_config_error(tmp_path):
    document = {"moments": {"family": FAMILY, "words": [["i", "i"]]}}
    assert await main(["stats", "--config", write_config(tmp_path, document)]) == EXIT_CONFIG_ERROR
    assert await main(["stats", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG_ERROR


async def test_qubit_cap_exits_with_cap_error(tmp_path, capsys):
    family = {"models": [{"label": "big", "interval": [1, 40], "r": 1}]}
    document = {"moments": {"family": family, "words": [["big", "big"]], "methods": ["dense-mc"], "samples": 10}}
    code = await main(["moments", "--config", write_config(tmp_path, document)])
    assert code == EXIT_CAP_EXCEEDED
    assert "cap" in capsys.readouterr().err


async def test_caps_section_lowers_the_qubit_cap(tmp_path):
    document = {
        "caps": {"max_qubits": 2},
        "moments": {"family": FAMILY, "words": [["i", "j", "i", "j"]], "methods": ["dense-mc"], "samples": 10},
    }
    assert await main(["moments", "--config", write_config(tmp_path, document)]) == EXIT_CAP_EXCEEDED
    document["caps"] = {"qubits": 2}
    assert await main(["moments", "--config", write_config(tmp_path, document)]) == EXIT_CONFIG_ERROR


def test_argument_validation():
    with pytest.raises(SystemExit) as info:
        CLIConfig.parse_args(["moments", "--config", "x.json", "--seed", "-1"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        CLIConfig.parse_args(["moments", "--config", "x.json", "--threads", "0"])
    with pytest.raises(SystemExit):
        CLIConfig.parse_args(["simulate", "--config", "x.json"])
    args = CLIConfig.parse_args(["epsilon-check", "--config", "x.json", "--seed", "0x10"])
    assert args.seed == 16
    assert CLIConfig.overrides(args)["threads"] is None


# ----------------------------
# converge, epsilon-check, stats
# ----------------------------


async def test_converge_single_edge_sweep(tmp_path):
    document = {
        "converge": {
            "family": {"kind": "single_edge", "lambda_target": 1.0},
            "n_values": [1000, 10000],
            "words": [["i", "j", "i", "j"]],
        }
    }
    out = tmp_path / "converge.csv"
    assert await main(["converge", "--config", write_config(tmp_path, document), "--out", str(out)]) == EXIT_OK
    comments, rows = read_csv(out)
    assert [int(row["n"]) for row in rows] == [1000, 10000]
    assert all(float(row["limit"]) == pytest.approx(math.exp(-2.0)) for row in rows)
    gaps = [float(row["gap"]) for row in rows]
    assert gaps[0] > gaps[1]
    assert any(line.startswith("# summary=") for line in comments)


async def test_moments_of_q_matrix_template(tmp_path):
    document = {
        "moments": {
            "family": {
                "kind": "q_matrix",
                "labels": ["i", "j", "k"],
                "q": [{"pair": ["i", "j"], "value": math.exp(-1)}, {"pair": ["j", "k"], "value": -math.exp(-0.5)}],
            },
            "n": 1000,
            "words": [["i", "j", "i", "j"], ["j", "k", "j", "k"], ["i", "k", "i", "k"]],
            "asymptotic_limit": True,
        }
    }
    out = tmp_path / "q_matrix.csv"
    assert await main(["moments", "--config", write_config(tmp_path, document), "--out", str(out)]) == EXIT_OK
    _, rows = read_csv(out)
    values = [float(row["value"]) for row in rows]
    assert values == pytest.approx([math.exp(-1), -math.exp(-0.5), 0.0])
    assert {row["n"] for row in rows} == {"1000"}


async def test_epsilon_check_empty_graph(tmp_path):
    document = {"epsilon_check": {"graph": {"d": 2, "edges": []}, "max_len": 4}}
    out = tmp_path / "eps.csv"
    assert await main(["epsilon-check", "--config", write_config(tmp_path, document), "--out", str(out)]) == EXIT_OK
    comments, rows = read_csv(out)
    assert rows[0]["passed"] == "true"
    assert rows[0]["control_failed"] == "true"
    summary = json.loads(next(line for line in comments if line.startswith("# summary="))[len("# summary="):])
    assert summary == {"graphs": 1, "mutation_controls_failed": True, "passed": True}


async def test_epsilon_check_all_graphs_up_to_three(tmp_path):
    document = {"format": "json", "epsilon_check": {"all_graphs_up_to": 3, "max_len": 4}}
    out = tmp_path / "eps.json"
    assert await main(["epsilon-check", "--config", write_config(tmp_path, document), "--out", str(out)]) == EXIT_OK
    result = json.loads(out.read_text())
    assert len(result["rows"]) == 1 + 2 + 8
    assert result["summary"]["passed"] is True
    assert result["rows"][0]["control_failed"] == ""


async def test_stats_half_interaction(tmp_path):
    document = {
        "format": "json",
        "stats": {
            "geometry": "half_interaction",
            "n": 100,
            "quantities": ["sign", "exact-sign", "falling-factorial", "series"],
            "max_k": 2,
            "samples": 20000,
        },
    }
    out = tmp_path / "stats.json"
    assert await main(["stats", "--config", write_config(tmp_path, document), "--out", str(out)]) == EXIT_OK
    result = json.loads(out.read_text())
    rows = result["rows"]
    assert [row["quantity"] for row in rows] == ["sign", "exact-sign", "falling-factorial", "falling-factorial", "falling-factorial", "series"]
    sign = rows[0]
    assert abs(sign["value"] - 0.5) <= 4 * sign["stderr"]
    assert sign["reference"] == pytest.approx(math.exp(-0.5))
    assert rows[1]["value"] == pytest.approx(0.5, abs=1e-12)
    assert rows[1]["method"] == "exact-small"
    assert rows[2]["k"] == 0
    assert rows[2]["value"] == 1.0
    assert rows[2]["reference"] == 1.0
    assert rows[3]["reference"] == pytest.approx(0.25)
    assert result["summary"]["lambda_hat"] == [pytest.approx(0.25)]


def test_timing_column_only_when_requested():
    config = parse_experiment_config({"record_timing": True, "moments": {"family": FAMILY, "words": [["i", "i"]]}})
    table = ResultTable("moments", ["word", "value", "wall_time"])
    table.add(word=["i", "i"], value=1.0, wall_time=0.01)
    text = render_csv(table, config)
    assert text.splitlines()[-2] == "word,value,wall_time"
    assert text.splitlines()[-1] == "i i,1.0,0.01"


def test_json_log_format():
    configure_logging("json")
    formatter = logging.getLogger().handlers[0].formatter
    record = logging.LogRecord("qgauss", logging.INFO, __file__, 1, "hello %s", ("there",), None)
    assert json.loads(formatter.format(record))["message"] == "hello there"
    with pytest.raises(ValueError):
        configure_logging("xml")
