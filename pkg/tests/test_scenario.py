import glob
import json
import os

import pytest

from fluidtcp.equilibrium import Variant
from fluidtcp.errors import ScenarioError
from fluidtcp.scenario import load_scenario, scenario_from_dict

from conftest import SCENARIOS

GOOD = sorted(
    p for p in glob.glob(os.path.join(SCENARIOS, "*.json")) if not os.path.basename(p).startswith("malformed")
)


@pytest.mark.parametrize("path", GOOD, ids=os.path.basename)
def test_shipped_scenarios_load(path):
    sc = load_scenario(path)
    assert sc.name == os.path.splitext(os.path.basename(path))[0]


def test_compound_defaults_scenario(scenario_path, droptail):
    sc = load_scenario(scenario_path("compound-defaults.json"))
    assert sc.loss == droptail
    assert sc.variant is Variant.PLAIN
    assert sc.sim.steps_per_delay == 200 and sc.sim.horizon_s is None
    assert (sc.sweep.parameter, sc.sweep.steps) == ("tau", 9)
    assert sc.chart.B == (5, 50, 10)


def test_topology_and_queue_scenarios(scenario_path):
    case2 = load_scenario(scenario_path("case2-compound.json"))
    assert case2.case == "II" and case2.eps_ratio == 0.001 and case2.loss is None
    assert case2.topology.symmetric

    queue = load_scenario(scenario_path("queue-md1b.json"))
    assert (queue.queue.model, queue.queue.rho, queue.queue.B) == ("md1b", 0.9, 15)

    hopf = load_scenario(scenario_path("hopf-normal-form.json"))
    assert hopf.model == "hopf_normal_form"
    assert (hopf.sim.horizon_s, hopf.sim.dt) == (300.0, 0.001)


def test_buffer_rule_capacity_from_link_rate(scenario_path):
    rule = load_scenario(scenario_path("buffer-rule.json")).buffer_rule
    assert rule.capacity_pps == pytest.approx(100e6 / (8 * 1500))
    assert (rule.rtt_s, rule.flows) == (0.2505, 60)


def test_malformed_buffer_names_field(scenario_path):
    with pytest.raises(ScenarioError) as err:
        load_scenario(scenario_path("malformed-buffer.json"))
    assert err.value.field == "loss.buffer_pkts"
    assert err.value.exit_code == 2


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text('{"protocol": {"kind": "compound"},', encoding="utf-8")
    with pytest.raises(ScenarioError) as err:
        load_scenario(str(bad))
    assert err.value.field == "<file>"

    with pytest.raises(ScenarioError) as err:
        load_scenario(str(tmp_path / "absent.json"))
    assert err.value.field == "<file>"


@pytest.mark.parametrize(
    "raw,field",
    [
        ([], "<root>"),
        ({"model": "queueing"}, "model"),
        ({"variant": "fancy"}, "variant"),
        ({"case": "III"}, "case"),
        ({"labeling": "sideways"}, "labeling"),
        ({"sweep": {"parameter": "C", "range": [1, 2, 3]}}, "sweep.parameter"),
        ({"sweep": {"parameter": "tau", "range": [1, 2]}}, "sweep.range"),
        ({"chart": {"alpha": [0.1, 0.2, 0]}}, "chart.alpha"),
        ({"queue": {"model": "gg1", "rho": 0.9, "B": 5}}, "queue.model"),
        ({"queue": {"model": "md1b", "rho": 0.9, "B": 5.5}}, "queue.B"),
        ({"sim": {"steps_per_delay": 0}}, "sim.steps_per_delay"),
        ({"sim": {"transient_fraction": 1.0}}, "sim.transient_fraction"),
        ({"buffer_rule": {"capacity_pps": 1000, "rtt_s": 0.1}}, "buffer_rule.flows"),
    ],
)
def test_scenario_errors_carry_field(raw, field):
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(raw)
    assert err.value.field == field


def test_loss_and_topology_are_exclusive(scenario_path):
    with open(scenario_path("case1-compound.json"), encoding="utf-8") as fh:
        raw = json.load(fh)
    raw["loss"] = {"kind": "droptail", "capacity_per_flow": 139, "buffer_pkts": 15, "rtt_s": 0.1}
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(raw)
    assert err.value.field == "topology"


def test_empty_scenario_takes_defaults():
    sc = scenario_from_dict({})
    assert sc.model == "fluid" and sc.case == "I" and sc.labeling == "expansion"
    assert sc.loss is None and sc.topology is None and sc.sweep is None
