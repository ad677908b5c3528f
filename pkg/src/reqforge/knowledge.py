"""Tagged knowledge corpus for prompt assembly.

Items live in plain text files (one section per item, header + body) and
carry category, lifecycle-phase, and role tags. Selection is pure tag
filtering with a total, stable order — never semantic retrieval — so the
same query always renders the same prompt block.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from reqforge import specdoc

CATEGORIES = (
    "DomainKnowledge",
    "TypicalMethodology",
    "Standards",
    "ArtifactTemplate",
    "CommonStrategy",
)
CATEGORY_HEADINGS = {
    "DomainKnowledge": "Domain Knowledge",
    "TypicalMethodology": "Typical Methodology",
    "Standards": "Standards",
    "ArtifactTemplate": "Artifact Templates",
    "CommonStrategy": "Common Strategies",
}
PHASES = ("Elicitation", "Analysis", "Specification", "Validation")

_CATEGORY_ORDER = {name: position for position, name in enumerate(CATEGORIES)}


class KnowledgeError(Exception):
    pass


class DuplicateId(KnowledgeError):
    def __init__(self, item_id: str, source: str):
        super().__init__(f"duplicate knowledge item id {item_id!r} in {source}")
        self.item_id = item_id


@dataclass(frozen=True)
class KnowledgeItem:
    id: str
    category: str
    phases: frozenset[str]
    roles: frozenset[str]
    title: str
    body: str
    source: str


def _item_from_section(section: specdoc.Section) -> KnowledgeItem:
    item_id = section.require("id")
    category = section.require("category")
    if category not in CATEGORIES:
        raise specdoc.ParseError(section.source, section.line,
                                 f"unknown category {category!r}; expected one of {CATEGORIES}")
    phases = frozenset(section.split_list("phases"))
    if not phases:
        raise specdoc.ParseError(section.source, section.line,
                                 f"item {item_id!r} lists no phases")
    unknown = phases - set(PHASES)
    if unknown:
        raise specdoc.ParseError(section.source, section.line,
                                 f"unknown phases {sorted(unknown)}; expected subset of {PHASES}")
    if not section.body:
        raise specdoc.ParseError(section.source, section.line,
                                 f"item {item_id!r} has an empty body")
    return KnowledgeItem(
        id=item_id,
        category=category,
        phases=phases,
        roles=frozenset(section.split_list("roles")),
        title=section.require("title"),
        body=section.body,
        source=section.get("source", ""),
    )


class KnowledgeBase:
    """Immutable after construction; freely shareable across agents."""

    def __init__(self, items: Iterable[KnowledgeItem] = ()):
        self._items: list[KnowledgeItem] = []
        self._by_id: dict[str, KnowledgeItem] = {}
        for item in items:
            if item.id in self._by_id:
                raise DuplicateId(item.id, "<items>")
            self._by_id[item.id] = item
            self._items.append(item)

    @classmethod
    def load(cls, directory) -> "KnowledgeBase":
        base = cls()
        for path in sorted(Path(directory).glob("*.txt")):
            for section in specdoc.parse_file(path):
                item = _item_from_section(section)
                if item.id in base._by_id:
                    raise DuplicateId(item.id, str(path))
                base._by_id[item.id] = item
                base._items.append(item)
        return base

    def __len__(self) -> int:
        return len(self._items)

    def ids(self) -> list[str]:
        return sorted(self._by_id)

    def get(self, item_id: str) -> KnowledgeItem:
        return self._by_id[item_id]

    def items(self) -> list[KnowledgeItem]:
        return list(self._items)

    def select(self, phase: str, role: str, max_items: int) -> list[KnowledgeItem]:
        """Items tagged with the phase and role, in (category, id) order."""
        chosen = [item for item in self._items
                  if phase in item.phases and role in item.roles]
        chosen.sort(key=lambda item: (_CATEGORY_ORDER[item.category], item.id))
        return chosen[:max_items]

    def select_phases(self, phases: Sequence[str], role: str,
                      max_items: int) -> list[KnowledgeItem]:
        """Union of select() over several phases, deduplicated, same order."""
        seen: dict[str, KnowledgeItem] = {}
        for phase in phases:
            for item in self.select(phase, role, max_items=len(self._items) or 1):
                seen.setdefault(item.id, item)
        chosen = sorted(seen.values(),
                        key=lambda item: (_CATEGORY_ORDER[item.category], item.id))
        return chosen[:max_items]


def render(items: Sequence[KnowledgeItem]) -> str:
    """One prompt block: category headings once, then titled item bodies."""
    blocks: list[str] = []
    current_category: str | None = None
    for item in items:
        if item.category != current_category:
            blocks.append(f"## {CATEGORY_HEADINGS[item.category]}")
            current_category = item.category
        blocks.append(f"### {item.title}\n{item.body}")
    return "\n\n".join(blocks)


def default_base() -> KnowledgeBase:
    """The corpus shipped inside the package."""
    return KnowledgeBase.load(Path(__file__).parent / "resources" / "knowledge")
