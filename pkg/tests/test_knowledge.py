"""Knowledge corpus: loading, tag filtering, rendering.

FROZEN_PHASES pins the lifecycle tags of every shipped item; the corpus
and this map must only change together.
"""
import pytest

from reqforge import knowledge, specdoc
from reqforge.knowledge import DuplicateId, KnowledgeBase

FROZEN_PHASES = {
    "domain-terminology": {"Elicitation", "Analysis", "Specification", "Validation"},
    "industry-regulations": {"Elicitation", "Analysis", "Validation"},
    "safety-critical-cases": {"Elicitation", "Analysis"},
    "interviews-workshops": {"Elicitation"},
    "uml-sysml-modeling": {"Analysis"},
    "sysml-mbse-modeling": {"Analysis"},
    "bpmn-modeling": {"Analysis"},
    "behavior-driven-specification": {"Specification", "Validation"},
    "formal-specification": {"Specification", "Validation"},
    "inspection-peer-review": {"Validation"},
    "formal-validation": {"Validation"},
    "iso-29148": {"Elicitation", "Analysis"},
    "iso-24744": {"Analysis"},
    "bpmn-2-0": {"Analysis"},
    "ieee-1012": {"Validation"},
    "iso-26262": {"Validation"},
    "ieee-830-srs": {"Specification", "Validation"},
    "use-case-specification": {"Elicitation", "Analysis"},
    "reqif-specification": {"Specification", "Validation"},
    "vv-plan-outline": {"Validation"},
    "traceability-matrix": {"Validation"},
    "review-checklists": {"Validation"},
    "5w1h": {"Elicitation"},
    "moscow": {"Analysis"},
    "socratic-questioning": {"Elicitation"},
    "requirements-tradeoff": {"Specification", "Validation"},
}


@pytest.fixture(scope="module")
def base() -> KnowledgeBase:
    return knowledge.default_base()


def test_shipped_corpus_size_and_coverage(base):
    assert len(base) >= 20
    covered = set()
    for item in base.items():
        covered |= item.phases
    assert covered == set(knowledge.PHASES)


def test_shipped_corpus_phase_tags_match_frozen_map(base):
    assert base.ids() == sorted(FROZEN_PHASES)
    for item_id, phases in FROZEN_PHASES.items():
        assert set(base.get(item_id).phases) == phases, item_id


def test_every_item_has_roles_title_and_body(base):
    for item in base.items():
        assert item.roles, item.id
        assert item.title
        assert item.body


def test_elicitation_selection_for_interviewer(base):
    ids = [item.id for item in base.select("Elicitation", "interviewer", 10)]
    assert "5w1h" in ids
    assert "socratic-questioning" in ids


def test_no_validation_item_reaches_the_interviewer(base):
    assert base.select("Validation", "interviewer", 10) == []


def test_selection_truncates_to_max_items(base):
    assert len(base.select("Elicitation", "interviewer", 1)) == 1


def test_selection_order_is_category_then_id(base):
    items = base.select("Analysis", "analyst", 50)
    keys = [(knowledge.CATEGORIES.index(item.category), item.id) for item in items]
    assert keys == sorted(keys)
    categories = [item.category for item in items]
    assert categories.index("DomainKnowledge") < categories.index("TypicalMethodology")
    assert categories.index("Standards") < categories.index("CommonStrategy")


def test_selection_is_pure(base):
    first = base.select("Validation", "reviewer", 10)
    second = base.select("Validation", "reviewer", 10)
    assert first == second


def test_phase_union_deduplicates(base):
    # domain-terminology is tagged for all four phases but appears once.
    items = base.select_phases(["Analysis", "Specification"], "analyst", 50)
    ids = [item.id for item in items]
    assert ids.count("domain-terminology") == 1
    assert "ieee-830-srs" in ids
    assert "moscow" in ids


def test_empty_directory_is_a_valid_base(tmp_path):
    base = KnowledgeBase.load(tmp_path)
    assert len(base) == 0
    assert base.select("Elicitation", "interviewer", 10) == []


def test_duplicate_id_across_files_is_rejected(tmp_path):
    item = ("id: moscow\ncategory: CommonStrategy\nphases: Analysis\n"
            "roles: analyst\ntitle: MoSCoW\n\nBody text.\n")
    (tmp_path / "a.txt").write_text(item, encoding="utf-8")
    (tmp_path / "b.txt").write_text(item, encoding="utf-8")
    with pytest.raises(DuplicateId) as err:
        KnowledgeBase.load(tmp_path)
    assert err.value.item_id == "moscow"


@pytest.mark.parametrize("mutation, message_part", [
    ("category: NotACategory", "unknown category"),
    ("phases: ", "no phases"),
    ("phases: Inception", "unknown phases"),
])
def test_malformed_items_are_rejected(tmp_path, mutation, message_part):
    text = ("id: sample\ncategory: Standards\nphases: Analysis\n"
            "roles: analyst\ntitle: Sample\n\nBody.\n")
    field = mutation.split(":")[0]
    mutated = "\n".join(mutation if line.startswith(f"{field}:") else line
                        for line in text.splitlines())
    (tmp_path / "bad.txt").write_text(mutated, encoding="utf-8")
    with pytest.raises(specdoc.ParseError) as err:
        KnowledgeBase.load(tmp_path)
    assert message_part in str(err.value)


def test_empty_body_is_rejected(tmp_path):
    (tmp_path / "bad.txt").write_text(
        "id: sample\ncategory: Standards\nphases: Analysis\n"
        "roles: analyst\ntitle: Sample\n", encoding="utf-8")
    with pytest.raises(specdoc.ParseError) as err:
        KnowledgeBase.load(tmp_path)
    assert "empty body" in str(err.value)


def test_render_empty_list_is_empty():
    assert knowledge.render([]) == ""


def test_render_groups_headings_once_per_category(base):
    items = base.select("Validation", "reviewer", 50)
    text = knowledge.render(items)
    assert text.count("## Typical Methodology") == 1
    assert text.count("## Standards") == 1
    for item in items:
        assert f"### {item.title}" in text
    assert knowledge.render(items) == text
