import json
import math

import pytest

from src.config.defaults import DEFAULT_CAPS, make_runtime_limits
from src.config.schema import (
    EpsilonSection,
    FamilyDefinition,
    load_experiment_config,
    parse_experiment_config,
)
from src.util.errors import ConfigError

MOMENTS = {
    "moments": {
        "family": {
            "models": [
                {"label": "i", "interval": [1, 6], "r": 2},
                {"label": "j", "domain": [4, 5, 6, 7, 8, 9], "r": 3},
            ]
        },
        "words": [["i", "j", "i", "j"]],
    }
}


def test_runtime_limit_overrides():
    limits = make_runtime_limits(max_qubits=10, samples=50)
    assert limits.caps.max_qubits == 10
    assert limits.sampling.samples == 50
    assert limits.caps.fock_depth == DEFAULT_CAPS.fock_depth
    with pytest.raises(ValueError):
        make_runtime_limits(max_qbits=10)
    with pytest.raises(ValueError):
        make_runtime_limits(threads=0)
    assert make_runtime_limits(seed=0).sampling.seed == 0


def test_parse_defaults_and_family():
    config = parse_experiment_config(MOMENTS)
    assert config.seed == 0
    assert config.format == "csv"
    section = config.section("moments")
    assert section.methods == ["limit"]
    family = section.family.build()
    assert family.labels == ("i", "j")
    assert family.overlap("i", "j") == 3


def test_interaction_length_beyond_domain_names_the_label():
    data = json.loads(json.dumps(MOMENTS))
    data["moments"]["family"]["models"][1]["r"] = 7
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(data)
    assert "'j'" in str(info.value)
    assert "r=7" in str(info.value)


def test_unknown_fields_are_rejected():
    with pytest.raises(ConfigError):
        parse_experiment_config({**MOMENTS, "sede": 3})
    with pytest.raises(ConfigError):
        parse_experiment_config({"seed": -1})


def test_missing_section():
    config = parse_experiment_config(MOMENTS)
    with pytest.raises(ConfigError) as info:
        config.section("epsilon-check")
    assert "epsilon_check" in str(info.value)


def test_overrides_skip_none():
    config = parse_experiment_config(MOMENTS, {"seed": 11, "threads": None, "out": None})
    assert config.seed == 11
    assert config.threads == 1


def test_config_hash_is_canonical():
    first = parse_experiment_config(MOMENTS)
    reordered = parse_experiment_config(json.loads(json.dumps(MOMENTS, sort_keys=True)))
    assert first.config_hash() == reordered.config_hash()
    assert len(first.config_hash()) == 64
    assert parse_experiment_config(MOMENTS, {"seed": 1}).config_hash() != first.config_hash()


def test_load_experiment_config(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(MOMENTS), encoding="utf-8")
    assert load_experiment_config(path).section("moments").words == [["i", "j", "i", "j"]]
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / "missing.json")
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_experiment_config(path)
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_experiment_config(path)


def test_family_templates():
    shared = FamilyDefinition(kind="shared", labels=["a", "b"], r=[2, 3]).build(10)
    assert shared.overlap("a", "b") == 10
    assert shared.declared_parities == {"a": 0, "b": 1}
    disjoint = FamilyDefinition(kind="disjoint", labels=["a", "b"], r=[2, 2]).build(10)
    assert disjoint.overlap("a", "b") == 0
    assert disjoint.spec("b").domain == tuple(range(11, 21))
    with pytest.raises(ConfigError):
        FamilyDefinition(kind="shared", r=[2, 2]).build(None)


def test_graph_template_needs_multiple_of_d_squared():
    template = FamilyDefinition(kind="graph", graph={"d": 2, "edges": [[1, 2]]})
    assert template.build(8).spec(1).n == 8
    with pytest.raises(ConfigError):
        template.build(10)


def test_single_edge_template_rejects_impossible_overlap():
    with pytest.raises(ConfigError):
        FamilyDefinition(kind="single_edge", r_exponent=0.3).build(1000)


def test_epsilon_section_needs_one_target():
    with pytest.raises(ValueError):
        EpsilonSection()
    with pytest.raises(ValueError):
        EpsilonSection(graph={"d": 2}, all_graphs_up_to=2)
    with pytest.raises(ValueError):
        EpsilonSection(all_graphs_up_to=3, q_diag=[0.0, 0.0, 0.0])
    assert EpsilonSection(graph={"d": 2}, q_diag=[0.5, -0.5]).max_len == 6


def test_q_matrix_template_realises_target_signs():
    template = FamilyDefinition(
        kind="q_matrix",
        labels=["i", "j", "k"],
        q=[{"pair": ["i", "j"], "value": math.exp(-1)}, {"pair": ["j", "k"], "value": -math.exp(-0.5)}],
    )
    family = template.build(1000)
    assert [family.spec(label).r for label in "ijk"] == [64, 63, 63]
    assert family.overlap("i", "j") == 124
    assert family.overlap("j", "k") == 63
    family.check_parities()
    assert family.q_limit("i", "j") == pytest.approx(math.exp(-1))
    assert family.q_limit("j", "k") == pytest.approx(-math.exp(-0.5))
    assert family.q_limit("i", "k") == 0.0
    assert family.q_limit("i", "i") == 0.0
    assert family.q_hat("i", "j") == pytest.approx(math.exp(-1), rel=1e-3)


def test_q_matrix_template_rejects_unrealisable_signs():
    triangle = FamilyDefinition(
        kind="q_matrix",
        labels=["a", "b", "c"],
        q=[
            {"pair": ["a", "b"], "value": -0.5},
            {"pair": ["b", "c"], "value": -0.5},
            {"pair": ["a", "c"], "value": 0.5},
        ],
    )
    with pytest.raises(ConfigError):
        triangle.build(1000)
    with pytest.raises(ValueError):
        FamilyDefinition(kind="q_matrix")
    with pytest.raises(ValueError):
        FamilyDefinition(kind="q_matrix", q=[{"pair": ["i", "i"], "value": 0.5}])


def test_caps_section_feeds_runtime_limits():
    config = parse_experiment_config({**MOMENTS, "seed": 11, "caps": {"max_qubits": 4}})
    limits = config.runtime_limits()
    assert limits.caps.max_qubits == 4
    assert limits.caps.max_exact_terms == DEFAULT_CAPS.max_exact_terms
    assert limits.sampling.seed == 11
    with pytest.raises(ConfigError, match="max_qbits"):
        parse_experiment_config({**MOMENTS, "caps": {"max_qbits": 4}})
    with pytest.raises(ConfigError):
        parse_experiment_config({**MOMENTS, "caps": {"max_qubits": 0}})
