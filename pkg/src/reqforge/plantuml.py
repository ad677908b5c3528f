"""Use-case diagram subset of PlantUML: parse, serialize, diff.

Supported grammar, line by line between @startuml/@enduml fences:

    actor "Display Name" as alias      actor Bare_Name
    usecase "Display Name" as alias    usecase Bare_Name
    :Display Name:                     (Display Name)        shorthand declarations
    X --> Y        X -- Y              association (direction irrelevant)
    X ..> Y : <<include>>              X ..> Y : <<extend>>

Edge endpoints are declared aliases/bare names or shorthand forms
(shorthand endpoints declare on first use). Comment lines start with a
single quote. Anything else is skipped with a warning so diagrams from
drifting generators still parse when their core lines are well formed.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

ASSOCIATION = "association"
INCLUDE = "include"
EXTEND = "extend"

_ACTOR_DECL = re.compile(r'^actor\s+(?:"([^"]*)"|([A-Za-z0-9_]+))(?:\s+as\s+([A-Za-z0-9_]+))?\s*$')
_USECASE_DECL = re.compile(r'^usecase\s+(?:"([^"]*)"|([A-Za-z0-9_]+))(?:\s+as\s+([A-Za-z0-9_]+))?\s*$')
_SHORT_ACTOR = re.compile(r'^:([^:]+):(?:\s+as\s+([A-Za-z0-9_]+))?\s*$')
_SHORT_USECASE = re.compile(r'^\(([^()]+)\)(?:\s+as\s+([A-Za-z0-9_]+))?\s*$')
_ENDPOINT = r'(?::[^:]+:|\([^()]+\)|"[^"]*"|[A-Za-z0-9_]+)'
_EDGE = re.compile(
    rf'^(?P<left>{_ENDPOINT})\s*(?P<op>-->|--|\.\.>)\s*(?P<right>{_ENDPOINT})'
    r'\s*(?::\s*(?P<label>.*?)\s*)?$')
_ENDPOINT_SHORT_ACTOR = re.compile(r'^:([^:]+):$')
_ENDPOINT_SHORT_USECASE = re.compile(r'^\(([^()]+)\)$')
_BARE = re.compile(r'^[A-Za-z0-9_]+$')
_STEREOTYPE = re.compile(r'^<<\s*(include|extend)\s*>>$')


class DiagramError(Exception):
    pass


class FenceMissing(DiagramError):
    """No @startuml/@enduml pair around the diagram."""


class UseCaseSyntaxError(DiagramError):
    """A malformed line inside the fences; 1-based line and column."""

    def __init__(self, line: int, column: int, expected: str):
        super().__init__(f"line {line}, column {column}: expected {expected}")
        self.line = line
        self.column = column
        self.expected = expected


@dataclass(frozen=True)
class UcActor:
    name: str
    alias: str


@dataclass(frozen=True)
class UcUseCase:
    name: str
    alias: str


@dataclass(frozen=True)
class UcRelation:
    source: str  # alias
    target: str  # alias
    kind: str  # association | include | extend


@dataclass
class UseCaseModel:
    actors: tuple[UcActor, ...] = ()
    usecases: tuple[UcUseCase, ...] = ()
    relations: tuple[UcRelation, ...] = ()
    warnings: list[str] = field(default_factory=list)
    source_span: dict[str, int] = field(default_factory=dict)

    def structure(self):
        """Order-insensitive structural identity (warnings/spans excluded)."""
        return (frozenset(self.actors), frozenset(self.usecases),
                tuple(sorted(self.relations, key=lambda r: (r.kind, r.source, r.target))))

    def alias_to_name(self) -> dict[str, str]:
        mapping = {actor.alias: actor.name for actor in self.actors}
        mapping.update({usecase.alias: usecase.name for usecase in self.usecases})
        return mapping

    def actor_aliases(self) -> set[str]:
        return {actor.alias for actor in self.actors}


def normalize_name(name: str) -> str:
    """lowercase, punctuation stripped, whitespace collapsed."""
    cleaned = re.sub(r"[^A-Za-z0-9\s]", " ", name.lower())
    return re.sub(r"\s+", " ", cleaned).strip()


class _Builder:
    def __init__(self):
        self.actors: list[UcActor] = []
        self.usecases: list[UcUseCase] = []
        self.relations: list[UcRelation] = []
        self.warnings: list[str] = []
        self.spans: dict[str, int] = {}
        self._aliases: dict[str, str] = {}  # alias -> "actor" | "usecase"
        self._by_name: dict[tuple[str, str], str] = {}  # (class, name) -> alias

    def _fresh_alias(self, name: str, prefix: str) -> str:
        base = re.sub(r"\W+", "_", name).strip("_").lower() or prefix
        alias = base
        counter = 1
        while alias in self._aliases:
            counter += 1
            alias = f"{base}_{counter}"
        return alias

    def declare(self, klass: str, name: str, alias: str | None,
                line_no: int, column: int) -> str:
        existing = self._by_name.get((klass, name))
        if alias is None:
            if existing is not None:
                return existing  # shorthand re-mention of a known entity
            alias = self._fresh_alias(name, "a" if klass == "actor" else "uc")
        if alias in self._aliases:
            if self._by_name.get((klass, name)) == alias:
                return alias  # exact re-declaration is harmless
            raise UseCaseSyntaxError(line_no, column, f"unique alias (got duplicate {alias!r})")
        self._aliases[alias] = klass
        self._by_name.setdefault((klass, name), alias)
        if klass == "actor":
            self.actors.append(UcActor(name, alias))
        else:
            self.usecases.append(UcUseCase(name, alias))
        self.spans[f"{klass}:{alias}"] = line_no
        return alias

    def resolve_endpoint(self, token: str, line_no: int, column: int) -> str:
        short_actor = _ENDPOINT_SHORT_ACTOR.match(token)
        if short_actor:
            return self.declare("actor", short_actor.group(1).strip(), None, line_no, column)
        short_usecase = _ENDPOINT_SHORT_USECASE.match(token)
        if short_usecase:
            return self.declare("usecase", short_usecase.group(1).strip(), None, line_no, column)
        if token.startswith('"') and token.endswith('"') and len(token) >= 2:
            token = token[1:-1]
        if token in self._aliases:
            return token
        for klass in ("actor", "usecase"):
            alias = self._by_name.get((klass, token))
            if alias is not None:
                return alias
        raise UseCaseSyntaxError(line_no, column,
                                 f"declared actor or use case (got {token!r})")

    def add_relation(self, source: str, target: str, kind: str, line_no: int) -> None:
        if kind in (INCLUDE, EXTEND):
            if self._aliases.get(source) != "usecase" or self._aliases.get(target) != "usecase":
                raise UseCaseSyntaxError(line_no, 1,
                                         f"use case endpoints for <<{kind}>>")
        self.relations.append(UcRelation(source, target, kind))
        self.spans[f"relation:{len(self.relations) - 1}"] = line_no

    def build(self) -> UseCaseModel:
        return UseCaseModel(
            actors=tuple(self.actors),
            usecases=tuple(self.usecases),
            relations=tuple(self.relations),
            warnings=self.warnings,
            source_span=self.spans,
        )


def parse(text: str) -> UseCaseModel:
    """Parse one fenced use-case diagram."""
    lines = text.split("\n")
    builder = _Builder()
    in_fence = False
    fence_closed = False
    for index, raw in enumerate(lines):
        line_no = index + 1
        line = raw.strip()
        if not line or line.startswith("'"):
            continue
        if not in_fence:
            if line == "@startuml":
                in_fence = True
                continue
            raise FenceMissing(f"expected @startuml before content at line {line_no}")
        if fence_closed:
            builder.warnings.append(f"line {line_no}: text after @enduml ignored")
            continue
        if line == "@enduml":
            fence_closed = True
            continue
        if line == "@startuml":
            raise UseCaseSyntaxError(line_no, 1, "@enduml before a second @startuml")
        _parse_line(builder, raw, line, line_no)
    if not in_fence:
        raise FenceMissing("no @startuml fence found")
    if not fence_closed:
        raise FenceMissing("missing @enduml fence")
    return builder.build()


def _parse_line(builder: _Builder, raw: str, line: str, line_no: int) -> None:
    column = len(raw) - len(raw.lstrip()) + 1

    if line.startswith("actor ") or line == "actor":
        match = _ACTOR_DECL.match(line)
        if not match:
            raise UseCaseSyntaxError(line_no, _quote_column(raw, column),
                                     'actor "Name" as alias')
        name = match.group(1) if match.group(1) is not None else match.group(2)
        builder.declare("actor", name, match.group(3), line_no, column)
        return
    if line.startswith("usecase ") or line == "usecase":
        match = _USECASE_DECL.match(line)
        if not match:
            raise UseCaseSyntaxError(line_no, _quote_column(raw, column),
                                     'usecase "Name" as alias')
        name = match.group(1) if match.group(1) is not None else match.group(2)
        builder.declare("usecase", name, match.group(3), line_no, column)
        return

    has_edge_op = re.search(r"(-->|\.\.>|\s--\s)", line) is not None
    if not has_edge_op:
        short_actor = _SHORT_ACTOR.match(line)
        if short_actor:
            builder.declare("actor", short_actor.group(1).strip(),
                            short_actor.group(2), line_no, column)
            return
        short_usecase = _SHORT_USECASE.match(line)
        if short_usecase:
            builder.declare("usecase", short_usecase.group(1).strip(),
                            short_usecase.group(2), line_no, column)
            return
        builder.warnings.append(f"line {line_no}: unknown directive ignored: {line.split()[0]!r}")
        return

    match = _EDGE.match(line)
    if not match:
        raise UseCaseSyntaxError(line_no, column, "edge of the form X --> Y")
    offset = len(raw) - len(raw.lstrip())
    left_token, op, right_token, label = match.group("left", "op", "right", "label")
    source = builder.resolve_endpoint(left_token, line_no, offset + match.start("left") + 1)
    target = builder.resolve_endpoint(right_token, line_no, offset + match.start("right") + 1)
    if op in ("-->", "--"):
        if label:
            builder.warnings.append(f"line {line_no}: association label {label!r} ignored")
        builder.add_relation(source, target, ASSOCIATION, line_no)
        return
    # dotted arrow: stereotype label is mandatory
    if not label:
        raise UseCaseSyntaxError(line_no, len(raw.rstrip()) + 1,
                                 "<<include>> or <<extend>> label on ..> edge")
    stereotype = _STEREOTYPE.match(label)
    if not stereotype:
        raise UseCaseSyntaxError(line_no, raw.index(label) + 1,
                                 "<<include>> or <<extend>> label on ..> edge")
    builder.add_relation(source, target, stereotype.group(1), line_no)


def _quote_column(raw: str, default: int) -> int:
    if raw.count('"') % 2 == 1:
        return raw.rindex('"') + 1
    return default


def serialize(model: UseCaseModel) -> str:
    """Canonical text: sorted declarations, then sorted relations."""
    out = ["@startuml"]
    for actor in sorted(model.actors, key=lambda a: (a.name, a.alias)):
        out.append(f'actor "{actor.name}" as {actor.alias}')
    for usecase in sorted(model.usecases, key=lambda u: (u.name, u.alias)):
        out.append(f'usecase "{usecase.name}" as {usecase.alias}')
    rendered = []
    for relation in model.relations:
        if relation.kind == ASSOCIATION:
            rendered.append(f"{relation.source} --> {relation.target}")
        else:
            rendered.append(f"{relation.source} ..> {relation.target} : <<{relation.kind}>>")
    out.extend(sorted(rendered))
    out.append("@enduml")
    return "\n".join(out) + "\n"


def extract_block(text: str) -> str | None:
    """Pull the first fenced diagram out of surrounding prose, if any."""
    match = re.search(r"@startuml.*?@enduml", text, flags=re.DOTALL)
    return match.group(0) if match else None


# -- diff ----------------------------------------------------------------

@dataclass
class ClassDiff:
    matched: list
    missing: list
    spurious: list

    @property
    def counts(self) -> tuple[int, int, int]:
        return (len(self.matched), len(self.missing), len(self.spurious))


@dataclass
class ModelDiff:
    actors: ClassDiff
    usecases: ClassDiff
    relations: ClassDiff

    def by_class(self) -> dict[str, ClassDiff]:
        return {"actors": self.actors, "usecases": self.usecases,
                "relations": self.relations}


def _name_keys(entities) -> set[str]:
    return {normalize_name(entity.name) for entity in entities}


def _relation_keys(model: UseCaseModel) -> set[tuple]:
    names = model.alias_to_name()
    keys = set()
    for relation in model.relations:
        source = normalize_name(names[relation.source])
        target = normalize_name(names[relation.target])
        if relation.kind == ASSOCIATION:
            # association direction carries no meaning
            keys.add((ASSOCIATION,) + tuple(sorted((source, target))))
        else:
            keys.add((relation.kind, source, target))
    return keys


def _class_diff(gold_keys: set, predicted_keys: set) -> ClassDiff:
    return ClassDiff(
        matched=sorted(gold_keys & predicted_keys),
        missing=sorted(gold_keys - predicted_keys),
        spurious=sorted(predicted_keys - gold_keys),
    )


def diff(gold: UseCaseModel, predicted: UseCaseModel) -> ModelDiff:
    """Match by normalized name; include/extend keep direction, associations don't."""
    return ModelDiff(
        actors=_class_diff(_name_keys(gold.actors), _name_keys(predicted.actors)),
        usecases=_class_diff(_name_keys(gold.usecases), _name_keys(predicted.usecases)),
        relations=_class_diff(_relation_keys(gold), _relation_keys(predicted)),
    )
