"""
Scenario files: declarative group and splitting descriptions.

A scenario starts with the header line "splitkit-scenario 1" and continues with
sections of key = value lines. Comments start with '#'.

    [group A]            kind = free | free_abelian | trivial | free_product | direct_product | copy
                         generators = a, b        (free, free_abelian)
                         factors = X, Y           (products, earlier groups)
                         of = X / suffix = '      (copy: renamed copy of an earlier group)
    [splitting]          name, kind = amalgam | hnn, left, right, left_images, right_images,
                         stable, central = yes, double = yes, assume = one_ended
    [artificial]         d = words generating C <= D <= B, name
    [probe]              inner, radius, budget, rounds, target (group probed when there is no splitting)
"""
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from mcp.server.fastmcp.utilities.logging import get_logger

from config import get_settings
from exceptions import CapabilityError, ContainmentError, ScenarioParseError, SplittingError
from groups import DirectProduct, FreeAbelianGroup, FreeGroup, FreeProduct, MarkedGroup, TrivialGroup, renamed
from splittings import AMALGAM, HNN, SplittingSpec, artificial_split
from subgroups import make_engine

logger = get_logger(__name__)

HEADER = "splitkit-scenario"
VERSION = 1
FIXTURES_DIR = Path(__file__).parent / "fixtures"

_SECTION = re.compile(r"^\[(\w+)(?:\s+([\w']+))?\]$")
_KEY = re.compile(r"^(\w+)\s*=\s*(.*)$")

_GROUP_KEYS = {"kind", "generators", "factors", "of", "suffix"}
_SPLITTING_KEYS = {"name", "kind", "left", "right", "left_images", "right_images", "stable", "central", "double", "assume"}
_ARTIFICIAL_KEYS = {"d", "name"}
_PROBE_KEYS = {"inner", "radius", "budget", "rounds", "target"}
_SECTIONS = {"group": _GROUP_KEYS, "splitting": _SPLITTING_KEYS, "artificial": _ARTIFICIAL_KEYS, "probe": _PROBE_KEYS}
_DEFAULTS = {
    "inner": lambda s: s.inner_radius,
    "radius": lambda s: s.probe_radius,
    "budget": lambda s: s.budget,
    "rounds": lambda s: s.max_rounds,
}


@dataclass
class Section:
    kind: str
    arg: str
    line_no: int
    values: Dict[str, Tuple[str, int]] = field(default_factory=dict)

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.values[key][0] if key in self.values else default

    def line(self, key: str) -> int:
        return self.values[key][1] if key in self.values else self.line_no

    def require(self, key: str) -> str:
        if key not in self.values:
            raise ScenarioParseError(self.line_no, f"[{self.kind}] needs a {key} line")
        return self.values[key][0]


@dataclass
class Scenario:
    name: str
    version: int
    groups: Dict[str, MarkedGroup]
    splitting: Optional[SplittingSpec] = None
    declared: Optional[SplittingSpec] = None
    target: Optional[str] = None
    probe: Dict[str, int] = field(default_factory=dict)
    path: Optional[Path] = None

    def group(self) -> MarkedGroup:
        """The group a scenario is about: the split group, else the probe target."""
        if self.splitting is not None:
            return self.splitting.group
        if self.target is not None:
            return self.groups[self.target]
        if not self.groups:
            raise ValueError(f"scenario {self.name} declares no group")
        return list(self.groups.values())[-1]

    def setting(self, key: str, override: Optional[int] = None) -> int:
        """A probe parameter: the command-line value, else the [probe] section, else settings."""
        if override is not None:
            return override
        if key in self.probe:
            return self.probe[key]
        return _DEFAULTS[key](get_settings())

    def require_splitting(self):
        if self.splitting is None:
            raise ValueError(f"scenario {self.name} declares no splitting")
        return self.splitting


def _split_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _flag(section: Section, key: str) -> bool:
    value = (section.get(key) or "no").lower()
    if value not in ("yes", "no", "true", "false"):
        raise ScenarioParseError(section.line(key), f"{key} must be yes or no")
    return value in ("yes", "true")


def _read_sections(text: str) -> Tuple[int, List[Section]]:
    version = None
    sections: List[Section] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if version is None:
            parts = line.split()
            if len(parts) != 2 or parts[0] != HEADER:
                raise ScenarioParseError(line_no, f"expected header '{HEADER} {VERSION}'")
            if parts[1] != str(VERSION):
                raise ScenarioParseError(line_no, f"unsupported scenario version {parts[1]}")
            version = VERSION
            continue
        m = _SECTION.match(line)
        if m:
            kind, arg = m.group(1), m.group(2) or ""
            if kind not in _SECTIONS:
                raise ScenarioParseError(line_no, f"unknown section [{kind}]")
            if kind == "group" and not arg:
                raise ScenarioParseError(line_no, "group sections need a name, as in [group A]")
            sections.append(Section(kind, arg, line_no))
            continue
        m = _KEY.match(line)
        if not m:
            raise ScenarioParseError(line_no, f"cannot read {line!r}")
        if not sections:
            raise ScenarioParseError(line_no, "key outside of any section")
        key, value = m.group(1), m.group(2).strip()
        current = sections[-1]
        if key not in _SECTIONS[current.kind]:
            raise ScenarioParseError(line_no, f"unknown key {key!r} in [{current.kind}]")
        if key in current.values:
            raise ScenarioParseError(line_no, f"duplicate key {key!r}")
        current.values[key] = (value, line_no)
    if version is None:
        raise ScenarioParseError(1, "empty scenario")
    return version, sections


def _build_group(section: Section, groups: Dict[str, MarkedGroup]) -> MarkedGroup:
    name = section.arg
    if name in groups:
        raise ScenarioParseError(section.line_no, f"group {name} is declared twice")
    kind = section.require("kind")

    def earlier(ref: str, key: str) -> MarkedGroup:
        if ref not in groups:
            raise ScenarioParseError(section.line(key), f"group {ref} is not declared above")
        return groups[ref]

    try:
        if kind in ("free", "free_abelian"):
            gens = _split_list(section.require("generators"))
            if not gens:
                raise ScenarioParseError(section.line("generators"), "at least one generator is needed")
            return (FreeGroup if kind == "free" else FreeAbelianGroup)(gens, name)
        if kind == "trivial":
            return TrivialGroup(name)
        if kind in ("free_product", "direct_product"):
            factors = [earlier(ref, "factors") for ref in _split_list(section.require("factors"))]
            return (FreeProduct if kind == "free_product" else DirectProduct)(factors, name)
        if kind == "copy":
            source = earlier(section.require("of"), "of")
            suffix = section.get("suffix", "'")
            copy = renamed(source, lambda n: n + suffix)
            copy.name = name
            return copy
    except (ValueError, CapabilityError) as e:
        raise ScenarioParseError(section.line_no, str(e))
    raise ScenarioParseError(section.line("kind"), f"unknown group kind {kind!r}")


def _words(section: Section, key: str, group: MarkedGroup):
    try:
        return tuple(group.parse(w) for w in _split_list(section.get(key) or ""))
    except ValueError as e:
        raise ScenarioParseError(section.line(key), str(e))


def _build_splitting(section: Section, groups: Dict[str, MarkedGroup], scenario_name: str) -> SplittingSpec:
    kind = section.require("kind")
    if kind not in (AMALGAM, HNN):
        raise ScenarioParseError(section.line("kind"), f"splitting kind must be {AMALGAM} or {HNN}")
    left_name = section.require("left")
    if left_name not in groups:
        raise ScenarioParseError(section.line("left"), f"group {left_name} is not declared")
    left = groups[left_name]
    right = None
    if kind == AMALGAM:
        right_name = section.require("right")
        if right_name not in groups:
            raise ScenarioParseError(section.line("right"), f"group {right_name} is not declared")
        right = groups[right_name]
    target = right if kind == AMALGAM else left
    try:
        return SplittingSpec(
            name=section.get("name", scenario_name),
            kind=kind,
            left=left,
            right=right,
            left_images=_words(section, "left_images", left),
            right_images=_words(section, "right_images", target),
            stable_letter=section.get("stable", "t"),
            central=_flag(section, "central"),
            double=_flag(section, "double"),
            hypotheses=frozenset(_split_list(section.get("assume") or "")),
        )
    except ScenarioParseError:
        raise
    except (ValueError, SplittingError) as e:
        raise ScenarioParseError(section.line_no, str(e))


def parse_scenario(text: str, name: str = "scenario", path: Optional[Path] = None) -> Scenario:
    """
    Parse scenario text into groups, a splitting and probe parameters.

    Raises:
        ScenarioParseError: With the line of the first problem found
    """
    version, sections = _read_sections(text)
    groups: Dict[str, MarkedGroup] = {}
    declared = None
    artificial = None
    probe: Dict[str, int] = {}
    target = None
    for section in sections:
        if section.kind == "group":
            groups[section.arg] = _build_group(section, groups)
        elif section.kind == "splitting":
            if declared is not None:
                raise ScenarioParseError(section.line_no, "only one [splitting] section is allowed")
            declared = _build_splitting(section, groups, name)
        elif section.kind == "artificial":
            artificial = section
        else:
            for key, (value, line_no) in section.values.items():
                if key == "target":
                    if value not in groups:
                        raise ScenarioParseError(line_no, f"group {value} is not declared")
                    target = value
                    continue
                try:
                    probe[key] = int(value)
                except ValueError:
                    raise ScenarioParseError(line_no, f"{key} must be an integer")

    splitting = declared
    if artificial is not None:
        if declared is None or declared.kind != AMALGAM:
            raise ScenarioParseError(artificial.line_no, "[artificial] needs an amalgam [splitting] above it")
        d_gens = _words(artificial, "d", declared.right)
        try:
            splitting = artificial_split(declared, make_engine(declared.right, d_gens), artificial.get("name", ""))
        except (ContainmentError, CapabilityError, ValueError) as e:
            raise ScenarioParseError(artificial.line("d"), str(e))
    logger.info("parsed scenario %s: %d groups, splitting %s", name, len(groups),
                splitting.name if splitting is not None else "none")
    return Scenario(name, version, groups, splitting, declared, target, probe, path)


def load_scenario(path) -> Scenario:
    """Read a scenario file; a bare fixture name such as example71 is looked up in fixtures/."""
    path = Path(path)
    if not path.exists() and not path.suffix:
        path = FIXTURES_DIR / f"{path.name}.scn"
    if not path.exists():
        raise FileNotFoundError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(), name=path.stem, path=path)


def fixture_names() -> List[str]:
    return sorted(p.stem for p in FIXTURES_DIR.glob("*.scn"))
