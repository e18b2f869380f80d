# mypy: disable-error-code="no-untyped-def, no-untyped-call"
from __future__ import annotations

import pytest

from chainsem import OPTIONS
from chainsem import expr_lang as el
from chainsem.chain_state import ManagerEntry
from chainsem.codec import expr_to_json
from chainsem.contract_stubs import builtin_identity
from chainsem.examples import json_to_dict, load_example
from chainsem.scenario import (
    ContractSpec,
    NodeSpec,
    Scenario,
    ScenarioError,
    account,
    load,
    save,
)

from .builders import pay


def _auction_dict(**extra) -> dict:
    return {
        "name": "mini",
        "managers": {"owner": 10, "alice": 10},
        "contracts": {
            "auction": {"stub": "auction", "init": "(true, (@owner, @owner))", "time": 2}
        },
        "nodes": [
            {
                "accounts": ["alice"],
                "programs": [
                    {
                        "tag": "App",
                        "fn": {
                            "tag": "Lam",
                            "param": "a",
                            "param_ty": {"ty": "Addr"},
                            "body": {"tag": "UnitLit"},
                        },
                        "arg": {
                            "tag": "Cast",
                            "expr": {"tag": "PuhLit", "puh": "@auction"},
                            "from_ty": {"ty": "Puh"},
                            "to_ty": {"ty": "Addr"},
                        },
                    }
                ],
            }
        ],
        **extra,
    }


def test_account() -> None:
    assert account("bob").puk == "puk_bob"
    assert account("puk_bob") == account("bob")


def test_transfer_file() -> None:
    scenario = Scenario.from_dict(json_to_dict("transfer.json"))
    cfg, delta = scenario.to_config()
    assert delta == {}
    assert cfg.chain.managers == {"puk_alice": ManagerEntry(100), "puk_bob": ManagerEntry(50)}
    assert cfg.chain.time == 0
    assert [len(n.programs) for n in cfg.nodes] == [1, 0]
    assert scenario.max_steps == 200


def test_dict_round_trip() -> None:
    scenario = load_example("transfer")
    assert Scenario.from_dict(scenario.to_dict()) == scenario


def test_references_resolve() -> None:
    scenario = Scenario.from_dict(_auction_dict())
    puh = scenario.puh("auction")
    assert puh.startswith("puh_")
    assert scenario.contracts["auction"].init == "(true, (puk_owner, puk_owner))"
    cast = scenario.nodes[0].programs[0].arg  # type: ignore[attr-defined]
    assert cast.expr == el.PuhLit(puh)
    # one past the latest contract
    assert scenario.start_time == 3
    cfg, delta = scenario.to_config()
    assert set(delta) == {puh}
    assert cfg.chain.contractors[puh].t == 2


def test_bindings() -> None:
    scenario = Scenario.from_dict(
        _auction_dict(bindings={"target": "puk_owner"}, time=5)
    )
    assert scenario.start_time == 5
    data = _auction_dict()
    data["nodes"][0]["programs"][0]["arg"]["expr"]["puh"] = "@nobody"
    with pytest.raises(ScenarioError) as info:
        Scenario.from_dict(data)
    assert info.value.diagnostics[0]["check"] == "bindings"
    assert "@nobody" in info.value.diagnostics[0]["message"]


@pytest.mark.parametrize(
    "data",
    [
        {"name": "x", "colour": "blue"},
        {"name": "x", "nodes": [{"programs": [{"tag": "Nope"}]}]},
        {"name": "x", "contracts": {"c": {"stub": "missing", "init": "0"}}},
        {"name": "x", "managers": {"c": 1}, "contracts": {"c": {"stub": "identity", "init": "0"}}},
        {"name": "x", "managers": {"a": "lots"}},
    ],
)
def test_decode_errors(data) -> None:
    with pytest.raises(ScenarioError) as info:
        Scenario.from_dict(data)
    assert info.value.diagnostics[0]["check"] == "decode"


def test_diagnostics() -> None:
    identity = builtin_identity()
    scenario = Scenario(
        "bad",
        managers={"alice": 10},
        contracts={"a": ContractSpec(identity, "0"), "b": ContractSpec(identity, "1")},
        nodes=(
            NodeSpec(("alice", "carol"), (pay("alice", "zed", 1), el.IntLit(3))),
        ),
    )
    checks = [d["check"] for d in scenario.diagnostics()]
    assert "contracts" in checks
    assert "handles" in checks
    assert "well_formed" in checks
    typing = [d for d in scenario.diagnostics() if d["check"] == "typing"]
    assert [d["path"] for d in typing] == ["/nodes[0]/programs[1]"]
    with pytest.raises(ScenarioError, match="invalid scenario"):
        scenario.to_config()


def test_contract_spec_dict() -> None:
    spec = ContractSpec(builtin_identity(), "4", balance=3, time=1)
    assert spec.to_dict() == {"init": "4", "balance": 3, "time": 1, "stub": "identity"}
    assert ContractSpec.from_dict(spec.to_dict()) == spec


def test_node_spec_dict() -> None:
    spec = NodeSpec(("alice",), (pay("alice", "bob", 1),))
    assert spec.to_dict()["programs"] == [expr_to_json(spec.programs[0])]
    assert NodeSpec.from_dict(spec.to_dict()) == spec


def test_load_save(tmp_path) -> None:
    scenario = load_example("originate")
    path = tmp_path / "originate.json"
    save(scenario, path)
    assert load(path) == scenario


def test_option_context() -> None:
    scenario = Scenario("opts", options={"min_fee": 7})
    with scenario.option_context():
        assert OPTIONS["min_fee"] == 7
    assert OPTIONS["min_fee"] == 1
