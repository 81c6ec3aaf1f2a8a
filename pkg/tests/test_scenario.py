import pytest

from curtail.design import DesignFamily
from curtail.scenario import ScenarioError, bundled_scenarios, load_scenario, parse_scenario

GOOD = """name = "demo"

[design]
alpha = 0.05
beta = 0.2
p0 = 0.2
p1 = 0.4

[search]
families = ["nsc", "mstage"]
r_rule = "wald"

[search.n_max]
mstage = 40
"""


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert {"scenario1", "scenario2", "scenario3", "table3"} <= set(names)
    for name in names:
        sc = load_scenario(name)
        assert sc.params.p0 < sc.params.p1
        assert len(sc.digest) == 16


def test_parse_good():
    sc = parse_scenario(GOOD, "demo.toml")
    assert sc.name == "demo"
    assert sc.params.beta == 0.2
    assert sc.config.r_rule == "wald"
    assert sc.config.max_n(DesignFamily.MSTAGE) == 40
    assert sc.reference is DesignFamily.SIMON
    assert [f[0] for f in sc.families] == [DesignFamily.NSC, DesignFamily.MSTAGE]


def test_digest_tracks_content():
    a = parse_scenario(GOOD)
    b = parse_scenario(GOOD.replace("0.2\np0", "0.15\np0"))
    assert a.digest != b.digest
    assert a.digest == parse_scenario(GOOD).digest


@pytest.mark.parametrize(
    "old,new,line,fragment",
    [
        ("beta = 0.2", "beta = 1.2", 5, "'beta' must be"),
        ('r_rule = "wald"', 'r_rule = "simon"', 11, "'r_rule' must be one of"),
        ("mstage = 40", "mstage = -3", 14, "n_max.mstage"),
        ("mstage = 40", "mstage = 40\nfoo = 1", 15, "unknown key 'search.n_max.foo'"),
        ('families = ["nsc", "mstage"]', 'families = ["nsc", "bogus"]', 10, "bogus"),
        ("p1 = 0.4", "p1 = 0.1", 7, ""),
        ("alpha = 0.05", "alpha = 0.05 0.1", 4, ""),
    ],
)
def test_errors_carry_line_numbers(old, new, line, fragment):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(GOOD.replace(old, new), "x.toml")
    msg = str(exc.value)
    assert msg.startswith(f"x.toml:{line}:")
    assert fragment in msg


def test_missing_design_table():
    with pytest.raises(ScenarioError, match="missing"):
        parse_scenario('name = "x"\n')


def test_missing_file():
    with pytest.raises(ScenarioError, match="no such scenario"):
        load_scenario("definitely_not_here")
