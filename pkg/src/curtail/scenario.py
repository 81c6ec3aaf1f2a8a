"""Scenario files: TOML documents holding design parameters and search settings.

Example::

    name = "scenario1"

    [design]
    alpha = 0.05
    beta = 0.15
    p0 = 0.1
    p1 = 0.3

    [search]
    families = ["simon", "simongo", "nsc", "sc", "mstage"]
    n_min = 5

    [search.n_max]
    nsc = 80
    mstage = 80
    sc = 47

Unknown keys and invalid values are reported with their line number.
"""

import hashlib
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .design import DesignFamily, DesignParams, parse_family
from .search import SearchConfig

ALLOWED = {
    "": {"name", "description", "design", "search", "output"},
    "design": {"alpha", "beta", "p0", "p1"},
    "search": {
        "families",
        "reference",
        "n_min",
        "n_max",
        "r_rule",
        "theta_e_min",
        "grid_step",
        "dominance",
        "simon_cap",
        "simon_probe_max",
        "block_sizes",
    },
    "search.n_max": {"simon", "simongo", "nsc", "sc", "mstage", "block"},
    "output": {"dir"},
}

DEFAULT_FAMILIES = ("simon", "simongo", "nsc", "sc", "mstage")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    config: SearchConfig
    families: tuple
    reference: DesignFamily = DesignFamily.SIMON
    block_sizes: tuple = (4, 8)
    out_dir: str = "out"
    digest: str = ""
    description: str = ""

    @property
    def params(self):
        return self.config.params


_HEADER = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]\s*(#.*)?$")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")


def _key_lines(text):
    """Map ``(table, key)`` to the 1-based line where the key is set."""
    table = ""
    out = {}
    for no, line in enumerate(text.splitlines(), start=1):
        h = _HEADER.match(line)
        if h:
            table = h.group(1)
            out.setdefault((table.rsplit(".", 1)[0] if "." in table else "", table.rsplit(".", 1)[-1]), no)
            continue
        k = _KEY.match(line)
        if k:
            out.setdefault((table, k.group(1)), no)
    return out


def _walk(doc, table, lines, where):
    allowed = ALLOWED.get(table)
    for key, value in doc.items():
        path = f"{table}.{key}" if table else key
        if allowed is None or key not in allowed:
            no = lines.get((table, key), 0)
            raise ScenarioError(f"{where}:{no}: unknown key '{path}'")
        if isinstance(value, dict):
            _walk(value, path, lines, where)


def _err(where, lines, table, key, msg):
    no = lines.get((table, key), 0)
    return ScenarioError(f"{where}:{no}: {msg}")


def parse_scenario(text, where="<scenario>"):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        no = m.group(1) if m else 0
        raise ScenarioError(f"{where}:{no}: {exc}") from None
    lines = _key_lines(text)
    _walk(doc, "", lines, where)

    design = doc.get("design")
    if not isinstance(design, dict):
        raise ScenarioError(f"{where}:0: missing [design] table")
    vals = {}
    for k in ("alpha", "beta", "p0", "p1"):
        if k not in design:
            raise _err(where, lines, "", "design", f"[design] needs '{k}'")
        v = design[k]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not 0.0 < float(v) < 1.0:
            raise _err(where, lines, "design", k, f"'{k}' must be a probability strictly between 0 and 1")
        vals[k] = float(v)
    try:
        params = DesignParams(vals["alpha"], vals["beta"], vals["p0"], vals["p1"])
    except ValueError as exc:
        raise _err(where, lines, "design", "p1", str(exc)) from None

    search = doc.get("search", {})
    kw = {}
    for k in ("n_min", "simon_probe_max"):
        if k in search:
            if not isinstance(search[k], int) or search[k] < 1:
                raise _err(where, lines, "search", k, f"'{k}' must be a positive integer")
            kw[k] = search[k]
    for k in ("theta_e_min", "grid_step", "simon_cap"):
        if k in search:
            v = search[k]
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise _err(where, lines, "search", k, f"'{k}' must be a number")
            kw[k] = float(v)
    if "theta_e_min" in kw and not 0.0 <= kw["theta_e_min"] <= 1.0:
        raise _err(where, lines, "search", "theta_e_min", "'theta_e_min' must lie in [0, 1]")
    for k, choices in (("r_rule", ("ahern", "wald")), ("dominance", ("rounded", "exact"))):
        if k in search:
            if search[k] not in choices:
                raise _err(where, lines, "search", k, f"'{k}' must be one of {', '.join(choices)}")
            kw[k] = search[k]
    if "n_max" in search:
        caps = {}
        for k, v in search["n_max"].items():
            if not isinstance(v, int) or v < 1:
                raise _err(where, lines, "search.n_max", k, f"n_max.{k} must be a positive integer")
            caps[k] = v
        base = dict(SearchConfig.__dataclass_fields__["n_max"].default)
        base.update(caps)
        kw["n_max"] = tuple(sorted(base.items()))
    try:
        config = SearchConfig(params, **kw)
    except ValueError as exc:
        raise ScenarioError(f"{where}:0: {exc}") from None

    fams = search.get("families", list(DEFAULT_FAMILIES))
    if not isinstance(fams, list) or not fams:
        raise _err(where, lines, "search", "families", "'families' must be a nonempty list")
    families = []
    for f in fams:
        try:
            families.append(parse_family(str(f)))
        except ValueError as exc:
            raise _err(where, lines, "search", "families", str(exc)) from None
    try:
        reference = parse_family(search.get("reference", "simon"))[0]
    except ValueError as exc:
        raise _err(where, lines, "search", "reference", str(exc)) from None
    blocks = search.get("block_sizes", [4, 8])
    if not isinstance(blocks, list) or not all(isinstance(b, int) and b >= 1 for b in blocks):
        raise _err(where, lines, "search", "block_sizes", "'block_sizes' must be a list of positive integers")

    out = doc.get("output", {}).get("dir", "out")
    return Scenario(
        name=str(doc.get("name", Path(where).stem)),
        config=config,
        families=tuple(families),
        reference=reference,
        block_sizes=tuple(blocks),
        out_dir=str(out),
        digest=hashlib.sha256(text.encode()).hexdigest()[:16],
        description=str(doc.get("description", "")),
    )


def load_scenario(path):
    """Load a scenario from a file path or a bundled name such as ``scenario1``."""
    p = Path(path)
    if not p.exists():
        bundled = resources.files("curtail") / "scenarios" / f"{path}.toml"
        if bundled.is_file():
            return parse_scenario(bundled.read_text(), f"{path}.toml")
        raise ScenarioError(f"{path}:0: no such scenario file")
    return parse_scenario(p.read_text(), str(p))


def bundled_scenarios():
    root = resources.files("curtail") / "scenarios"
    return sorted(p.name[: -len(".toml")] for p in root.iterdir() if p.name.endswith(".toml"))
