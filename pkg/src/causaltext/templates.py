"""Template-based verbalization of relation facts, plus the inverse parser.

Templates live in tab-separated resource files so renderings are
auditable and bit-stable. A template's ``position`` says which slot is
mentioned first in its text: ``xy`` mentions slot x first, ``yx`` slot y.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources as importlib_resources
from pathlib import Path

import numpy as np

from causaltext.common import DataError, sha256_text
from causaltext.scenarios import RelationInstance, Scenario

# kinds whose templates are used as multiple-choice options; their
# patterns must end at an event slot so the final mention can be scored
EVAL_KINDS = ("causal", "not_causal", "no_relation", "unrelated")

# kinds that appear in generated scenario text
TRAINING_KINDS = (
    "temporal",
    "spatial_pos",
    "spatial_neg",
    "cf_pos",
    "cf_neg",
    "occurrence",
    "explicit_causal",
    "explicit_not_causal",
)

_SLOT_RE = re.compile(r"\{([xy])\}")
_EVENT_RE = re.compile(r"event([0-9]+)")


def event_label(v: int) -> str:
    return f"event{v}"


@dataclass(frozen=True)
class Template:
    kind: str
    id: str
    position: str  # "xy" | "yx"
    pattern: str

    def slots_in_order(self) -> list[str]:
        return _SLOT_RE.findall(self.pattern)

    def final_slot(self) -> str | None:
        """Slot the pattern ends with, or None when text follows it."""
        m = re.search(r"\{([xy])\}$", self.pattern)
        return m.group(1) if m else None

    def render(self, x: int, y: int | None = None) -> str:
        values = {"x": event_label(x)}
        if y is not None:
            values["y"] = event_label(y)
        try:
            return self.pattern.format(**values)
        except KeyError as e:
            raise ValueError(f"template {self.id} needs slot {e} but none given") from e

    def split_final_mention(self, x: int, y: int | None = None) -> tuple[str, str]:
        """(prefix, completion) where completion is the final event label."""
        slot = self.final_slot()
        if slot is None:
            raise ValueError(f"template {self.id} does not end at an event slot")
        head = self.pattern[: self.pattern.rfind("{")]
        values = {"x": event_label(x)}
        if y is not None:
            values["y"] = event_label(y)
        return head.format(**values), values[slot]


@dataclass(frozen=True)
class TemplateSet:
    """A drawable pool of templates for one relation kind.

    policy is one of ("xy",), ("yx",), ("random",), ("mixed", p); mixed
    draws the yx side with probability p, then uniformly inside the side.
    """

    kind: str
    policy: tuple
    members: tuple[Template, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError(f"empty template set for kind {self.kind!r}")

    def _side(self, position: str) -> tuple[Template, ...]:
        return tuple(t for t in self.members if t.position == position)

    def choose(self, rng: np.random.Generator) -> Template:
        if self.policy[0] == "mixed":
            p = self.policy[1]
            side = self._side("yx") if rng.random() < p else self._side("xy")
            if not side:
                side = self.members
            return side[int(rng.integers(len(side)))]
        return self.members[int(rng.integers(len(self.members)))]


def parse_policy(spec) -> tuple:
    """Accepts "xy" | "yx" | "random" | "mixed:<p>" | {"mixed": p}."""
    if isinstance(spec, tuple):
        spec = {"mixed": spec[1]} if spec[0] == "mixed" else spec[0]
    if isinstance(spec, dict):
        if set(spec) != {"mixed"}:
            raise DataError(f"bad policy {spec!r}")
        p = float(spec["mixed"])
        if not 0.0 <= p <= 1.0:
            raise DataError(f"mixed probability {p} outside [0, 1]")
        return ("mixed", p)
    if isinstance(spec, str):
        if spec in ("xy", "yx", "random"):
            return (spec,)
        if spec.startswith("mixed:"):
            return parse_policy({"mixed": spec.split(":", 1)[1]})
    raise DataError(f"bad policy {spec!r}")


def policy_to_json(policy: tuple):
    if policy[0] == "mixed":
        return {"mixed": policy[1]}
    return policy[0]


class TemplateInventory:
    """All templates from one resource file plus named subsets."""

    def __init__(self, templates: list[Template], named_sets: dict, source_hash: str, name: str):
        self.name = name
        self.source_hash = source_hash
        self.by_kind: dict[str, tuple[Template, ...]] = {}
        self.by_id: dict[str, Template] = {}
        for t in templates:
            self.by_kind.setdefault(t.kind, ())
            self.by_kind[t.kind] = self.by_kind[t.kind] + (t,)
            if t.id in self.by_id:
                raise DataError(f"duplicate template id {t.id}")
            self.by_id[t.id] = t
        self.named_sets = named_sets
        self._validate()

    def _validate(self) -> None:
        for t in self.by_id.values():
            slots = t.slots_in_order()
            if not slots:
                raise DataError(f"template {t.id} has no event slot")
            first = slots[0]
            want = "x" if t.position == "xy" else "y"
            if first != want:
                raise DataError(
                    f"template {t.id} position {t.position} but first slot is {first}"
                )
            if t.kind in EVAL_KINDS and t.final_slot() is None:
                raise DataError(f"evaluation template {t.id} must end at an event slot")

    def kinds(self) -> tuple[str, ...]:
        return tuple(self.by_kind)

    def set_for(self, kind: str, policy) -> TemplateSet:
        policy = parse_policy(policy)
        if kind not in self.by_kind:
            raise DataError(f"no templates for kind {kind!r}")
        members = self.by_kind[kind]
        mode = policy[0]
        if mode == "random":
            ids = self.named_sets.get((kind, "random"))
            if ids:
                members = tuple(self.by_id[i] for i in ids)
        elif mode in ("xy", "yx"):
            members = tuple(t for t in members if t.position == mode)
            if not members:
                raise DataError(f"kind {kind!r} has no {mode} templates")
        return TemplateSet(kind=kind, policy=policy, members=members)


def _read_rows(text: str, n_cols: int, where: str) -> list[list[str]]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != n_cols:
            raise DataError(f"{where}:{lineno}: expected {n_cols} columns, got {len(parts)}")
        rows.append(parts)
    return rows


def _resource_text(filename: str) -> str:
    ref = importlib_resources.files("causaltext") / "resources" / filename
    return ref.read_text(encoding="utf-8")


def load_inventory(name: str = "canonical", path: str | Path | None = None) -> TemplateInventory:
    """Load a template inventory: "canonical" (default) or "verbatim",
    or any external file in the same TSV format."""
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    elif name == "canonical":
        text = _resource_text("templates.tsv")
    elif name == "verbatim":
        text = _resource_text("templates_verbatim.tsv")
    else:
        raise DataError(f"unknown inventory {name!r}")
    templates = []
    for kind, tid, position, pattern in _read_rows(text, 4, f"templates[{name}]"):
        if position not in ("xy", "yx"):
            raise DataError(f"template {tid}: bad position {position!r}")
        templates.append(Template(kind=kind, id=tid, position=position, pattern=pattern))
    sets_text = _resource_text("template_sets.tsv")
    named: dict[tuple[str, str], tuple[str, ...]] = {}
    for kind, set_name, ids in _read_rows(sets_text, 3, "template_sets"):
        named[(kind, set_name)] = tuple(i.strip() for i in ids.split(","))
    return TemplateInventory(templates, named, sha256_text(text), name)


def render(rel: RelationInstance, tset: TemplateSet, rng: np.random.Generator) -> tuple[str, str]:
    """Render one relation fact; returns (statement, template id).

    Statements carry no trailing period; scenario assembly joins them.
    """
    if tset.kind != rel.kind:
        raise ValueError(f"template set for {tset.kind!r} cannot render {rel.kind!r}")
    t = tset.choose(rng)
    return t.render(rel.x, rel.y), t.id


def render_by_id(rel: RelationInstance, template_id: str, inventory: TemplateInventory) -> str:
    t = inventory.by_id[template_id]
    if t.kind != rel.kind:
        raise ValueError(f"template {template_id} is for {t.kind!r}, not {rel.kind!r}")
    return t.render(rel.x, rel.y)


def join_statements(statements: list[str]) -> str:
    if not statements:
        return ""
    return ". ".join(statements) + "."


def render_scenario(
    scenario: Scenario,
    policies: dict[str, TemplateSet],
    rng: np.random.Generator,
) -> tuple[str, list[str]]:
    """Verbalize a scenario in relation order; returns (text, template ids)."""
    statements = []
    ids = []
    for rel in scenario.relations:
        if rel.kind not in policies:
            raise ValueError(f"no template policy for relation kind {rel.kind!r}")
        s, tid = render(rel, policies[rel.kind], rng)
        statements.append(s)
        ids.append(tid)
    return join_statements(statements), ids


def text_from_template_ids(
    relations: list[RelationInstance],
    template_ids: list[str],
    inventory: TemplateInventory,
) -> str:
    """Deterministic re-rendering; the inverse of record storage."""
    return join_statements(
        [render_by_id(r, tid, inventory) for r, tid in zip(relations, template_ids)]
    )


@dataclass(frozen=True)
class ParsedStatement:
    kind: str
    template_id: str
    x: int
    y: int | None
    first: int
    second: int | None


class TemplateParser:
    """Recovers (kind, x, y, position) from rendered statements.

    Mirrored templates of symmetric kinds (spatial, no_relation,
    unrelated) are textually identical after slot filling; the xy parse
    is preferred, which keeps kind and mention order exact and swaps only
    the interchangeable slot assignment.
    """

    def __init__(self, inventory: TemplateInventory, kinds: tuple[str, ...] | None = None):
        kinds = kinds or tuple(inventory.by_kind)
        self._entries = []
        for kind in kinds:
            for t in inventory.by_kind.get(kind, ()):
                self._entries.append((t, self._compile(t)))
        # xy templates first so mirror ambiguity resolves deterministically
        self._entries.sort(key=lambda e: (e[0].position != "xy", e[0].id))

    @staticmethod
    def _compile(t: Template) -> re.Pattern:
        out = []
        last = 0
        seen: set[str] = set()
        for m in _SLOT_RE.finditer(t.pattern):
            out.append(re.escape(t.pattern[last : m.start()]))
            slot = m.group(1)
            if slot in seen:
                out.append(f"(?P={slot})")
            else:
                out.append(f"(?P<{slot}>event[0-9]+)")
                seen.add(slot)
            last = m.end()
        out.append(re.escape(t.pattern[last:]))
        return re.compile("^" + "".join(out) + "$")

    def parse(self, statement: str) -> ParsedStatement | None:
        for t, rx in self._entries:
            m = rx.match(statement)
            if not m:
                continue
            x = int(m.group("x").removeprefix("event"))
            y = None
            if "y" in m.groupdict() and m.group("y") is not None:
                y = int(m.group("y").removeprefix("event"))
            if t.position == "xy":
                first, second = x, y
            else:
                first, second = y, x
            return ParsedStatement(
                kind=t.kind, template_id=t.id, x=x, y=y, first=first, second=second
            )
        return None

    def parse_all(self, statement: str) -> list[ParsedStatement]:
        out = []
        for t, rx in self._entries:
            m = rx.match(statement)
            if m:
                x = int(m.group("x").removeprefix("event"))
                y = None
                if "y" in m.groupdict() and m.group("y") is not None:
                    y = int(m.group("y").removeprefix("event"))
                first, second = (x, y) if t.position == "xy" else (y, x)
                out.append(ParsedStatement(t.kind, t.id, x, y, first, second))
        return out

    def parse_text(self, text: str) -> list[ParsedStatement]:
        """Parse a full scenario text back into statements."""
        if not text:
            return []
        if not text.endswith("."):
            raise DataError("scenario text must end with a period")
        parsed = []
        for statement in text[:-1].split(". "):
            p = self.parse(statement)
            if p is None:
                raise DataError(f"unparseable statement: {statement!r}")
            parsed.append(p)
        return parsed
