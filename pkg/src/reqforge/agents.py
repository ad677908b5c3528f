"""The six pipeline agents: artifact formats, validators, and trackers.

Everything the concrete requirements team adds on top of the generic
kernel lives here: the text formats each action must produce (validated
and repaired via the kernel's repair loop), dialogue-session bookkeeping,
review-report parsing, the methodology registry, and loaders for the
shipped agent specs, personas, and pipeline policy.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

from reqforge import specdoc
from reqforge.gateway import Gateway
from reqforge.pool import Artifact, ArtifactKind, ArtifactPool, ArtifactState
from reqforge.runtime import (
    Agent,
    AgentError,
    AgentSpec,
    Draft,
    OutputInvalid,
    PolicyTable,
    load_agent_specs,
)

logger = logging.getLogger(__name__)

END_TOKEN = "[INTERVIEW_COMPLETE]"
MAX_QUESTIONS_PER_TURN = 2
DEFAULT_MAX_ROUNDS = 6
DEFAULT_MAX_REVIEW_CYCLES = 3

ROLE_ORDER = ("interviewer", "enduser", "deployer", "analyst", "archivist", "reviewer")

REVIEW_ATTRIBUTES = ("clarity", "feasibility", "verifiability", "traceability",
                     "consistency")
SEVERITIES = ("major", "minor")
FINDING_STATUSES = ("open", "resolved", "carried")

_RESOURCES = Path(__file__).parent / "resources"

_UR_LINE = re.compile(r"^UR-(\d{3,}):\s*\[(Must|Should|Could|Won't)\]\s*(.+?)\s*"
                      r"\(trace:\s*([^)]+)\)\s*$")
_SR_LINE = re.compile(r"^SR-(\d{3,}):\s*The system shall\s+(.+?)\s*"
                      r"\(trace:\s*([^)]+)\)\s*$")
_TURN_LINE = re.compile(r"^turn\s+(\d+)\s+\(([^)]+)\):\s*(.+)$", re.IGNORECASE)

OEL_SECTIONS = ("Hardware", "Network", "Security & Compliance", "Operations")

SRS_SECTIONS = (
    "1 Introduction",
    "1.1 Purpose",
    "1.2 Scope",
    "1.3 Definitions",
    "2 Overall Description",
    "3 Specific Requirements",
    "3.1 Functional",
    "3.2 Non-functional",
    "3.3 Environment",
    "4 Appendix",
)


class SessionError(AgentError):
    pass


# -- dialogue sessions ------------------------------------------------------------

@dataclass
class DialogueTurnEntry:
    speaker: str
    text: str


class DialogueSession:
    """Strictly alternating interviewer-led dialogue with one counterpart."""

    def __init__(self, interviewer: str, counterpart: str):
        self.participants = (interviewer, counterpart)
        self.turns: list[tuple[str, str]] = []
        self.status = "open"
        self.closing_reason: str | None = None

    @property
    def interviewer(self) -> str:
        return self.participants[0]

    @property
    def counterpart(self) -> str:
        return self.participants[1]

    @property
    def round_count(self) -> int:
        return math.ceil(len(self.turns) / 2)

    def add_turn(self, speaker: str, text: str) -> None:
        if self.status == "closed":
            raise SessionError(f"session with {self.counterpart} is closed")
        expected = self.interviewer if len(self.turns) % 2 == 0 else self.counterpart
        if speaker != expected:
            raise SessionError(f"out-of-turn speaker {speaker!r}; expected {expected!r}")
        self.turns.append((speaker, text))

    def close(self, reason: str) -> None:
        if self.status == "closed":
            return
        if reason not in ("max_rounds", "interviewer_done", "counterpart_done"):
            raise SessionError(f"unknown closing reason {reason!r}")
        self.status = "closed"
        self.closing_reason = reason

    def transcript(self) -> str:
        return "\n".join(f"{speaker}: {text}" for speaker, text in self.turns)


class SessionTracker:
    """Builds sessions from DialogueTurn artifacts as they hit the pool."""

    def __init__(self, interviewer: str = "interviewer"):
        self.interviewer = interviewer
        self.sessions: dict[str, DialogueSession] = {}

    def observe(self, artifact: Artifact) -> None:
        if artifact.kind is not ArtifactKind.DIALOGUE_TURN:
            return
        speaker = artifact.sent_from
        if speaker == self.interviewer:
            if len(artifact.send_to) != 1:
                return  # not a session turn (e.g. a broadcast note)
            counterpart = artifact.send_to[0]
            session = self.sessions.get(counterpart)
            if session is None:
                session = DialogueSession(self.interviewer, counterpart)
                self.sessions[counterpart] = session
        else:
            session = self.sessions.get(speaker)
            if session is None:
                return  # a turn outside any interview (e.g. a decision record)
            counterpart = speaker
        if END_TOKEN in artifact.content:
            session.close("interviewer_done" if speaker == self.interviewer
                          else "counterpart_done")
            return  # closing turns are published but are not interview rounds
        session.add_turn(speaker, artifact.content)

    def get(self, counterpart: str) -> DialogueSession:
        try:
            return self.sessions[counterpart]
        except KeyError:
            raise SessionError(f"no session with {counterpart!r}") from None

    def is_open(self, counterpart: str) -> bool:
        session = self.sessions.get(counterpart)
        return session is not None and session.status == "open"

    def is_closed(self, counterpart: str) -> bool:
        session = self.sessions.get(counterpart)
        return session is not None and session.status == "closed"

    def is_absent(self, counterpart: str) -> bool:
        return counterpart not in self.sessions


def dialogue_draft(agent: Agent, action: str, counterpart: str,
                   sessions: SessionTracker, max_rounds: int = DEFAULT_MAX_ROUNDS,
                   trigger: Artifact | None = None, instructions: str = "") -> Draft:
    """One interviewer dialogue step: next question(s), or a closing turn.

    The round limit is enforced here, before any model call: a session at
    the limit gets a deterministic closing turn and no completion request.
    """
    session = sessions.sessions.get(counterpart)
    if session is not None and session.status == "closed":
        raise SessionError(f"dialogue step requested on closed session "
                           f"with {counterpart!r}")
    if session is not None and session.round_count >= max_rounds:
        content = (f"{END_TOKEN} We have covered the planned interview rounds. "
                   f"Thank you for your time.")
        return Draft(kind=ArtifactKind.DIALOGUE_TURN, content=content,
                     sent_from=agent.role, action=action, attempts=0)
    rounds_used = session.round_count if session is not None else 0
    guidance = (f"Ask at most {MAX_QUESTIONS_PER_TURN} questions. "
                f"{max_rounds - rounds_used} of {max_rounds} interview rounds remain. "
                f"When nothing important is left to ask, reply with {END_TOKEN}.")
    combined = f"{instructions}\n{guidance}".strip()
    return agent.execute(action, trigger, instructions=combined,
                         validator=validate_dialogue_turn)


# -- output validators ---------------------------------------------------------------

def validate_dialogue_turn(text: str) -> str:
    """Keep at most two questions; truncate after the second question mark."""
    stripped = text.strip()
    if not stripped:
        raise OutputInvalid("the turn is empty")
    positions = [i for i, char in enumerate(stripped) if char == "?"]
    if len(positions) <= MAX_QUESTIONS_PER_TURN:
        return stripped
    cut = positions[MAX_QUESTIONS_PER_TURN - 1] + 1
    truncated = stripped[:cut].strip()
    logger.warning("dialogue turn carried %d questions; truncated to %d",
                   len(positions), MAX_QUESTIONS_PER_TURN)
    return truncated


@dataclass(frozen=True)
class URItem:
    id: str
    priority: str
    text: str
    traces: tuple[str, ...]


def parse_user_requirements(text: str) -> list[URItem]:
    items: list[URItem] = []
    seen: set[str] = set()
    for line in text.splitlines():
        line = line.strip()
        if not line.startswith("UR-"):
            continue
        match = _UR_LINE.match(line)
        if not match:
            raise OutputInvalid(
                f"item {line!r} must look like "
                f"'UR-001: [Must] <requirement> (trace: <statement ref>)' "
                f"with priority one of Must/Should/Could/Won't")
        item_id = f"UR-{match.group(1)}"
        if item_id in seen:
            raise OutputInvalid(f"duplicate requirement id {item_id}")
        seen.add(item_id)
        traces = tuple(part.strip() for part in match.group(4).split(",") if part.strip())
        if not traces:
            raise OutputInvalid(f"{item_id} has an empty trace reference")
        items.append(URItem(id=item_id, priority=match.group(2),
                            text=match.group(3), traces=traces))
    if not items:
        raise OutputInvalid("no 'UR-###:' items found")
    return items


def validate_user_requirements_list(text: str) -> str:
    parse_user_requirements(text)
    return text.strip()


@dataclass(frozen=True)
class SRItem:
    id: str
    text: str
    traces: tuple[str, ...]


def parse_system_requirements(text: str) -> list[SRItem]:
    items: list[SRItem] = []
    seen: set[str] = set()
    for line in text.splitlines():
        line = line.strip()
        if not line.startswith("SR-"):
            continue
        match = _SR_LINE.match(line)
        if not match:
            raise OutputInvalid(
                f"item {line!r} must look like "
                f"'SR-001: The system shall <behaviour> (trace: UR-001, UR-002)'")
        item_id = f"SR-{match.group(1)}"
        if item_id in seen:
            raise OutputInvalid(f"duplicate requirement id {item_id}")
        seen.add(item_id)
        traces = tuple(part.strip() for part in match.group(3).split(",") if part.strip())
        items.append(SRItem(id=item_id, text=match.group(2), traces=traces))
    if not items:
        raise OutputInvalid("no 'SR-###:' items found")
    return items


def make_system_requirements_validator(ur_text: str):
    known = {item.id for item in parse_user_requirements(ur_text)}

    def validate(text: str) -> str:
        for item in parse_system_requirements(text):
            unknown = [trace for trace in item.traces if trace not in known]
            if unknown:
                raise OutputInvalid(
                    f"{item.id} traces to unknown user requirement(s) "
                    f"{', '.join(unknown)}; known ids: {', '.join(sorted(known))}")
        return text.strip()

    return validate


def parse_operating_environment(text: str) -> dict[str, str]:
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        heading = re.match(r"^#{1,4}\s*(.+?)\s*$", line.strip())
        matched_name = None
        if heading:
            for name in OEL_SECTIONS:
                if heading.group(1).lower() == name.lower():
                    matched_name = name
                    break
        if matched_name:
            current = matched_name
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    missing = [name for name in OEL_SECTIONS if not "\n".join(
        sections.get(name, [])).strip()]
    if missing:
        raise OutputInvalid(
            f"environment list is missing populated section(s): {', '.join(missing)}; "
            f"required sections: {', '.join(OEL_SECTIONS)} as '## <name>' headings")
    return {name: "\n".join(lines).strip() for name, lines in sections.items()}


def validate_operating_environment_list(text: str) -> str:
    parse_operating_environment(text)
    return text.strip()


def make_interview_record_validator(expected_turns: int):
    if expected_turns < 1:
        raise AgentError("an interview record needs at least one recorded round")

    def validate(text: str) -> str:
        numbers = []
        for line in text.splitlines():
            match = _TURN_LINE.match(line.strip())
            if match:
                numbers.append(int(match.group(1)))
        if numbers != list(range(1, expected_turns + 1)):
            raise OutputInvalid(
                f"the record must list every dialogue turn as "
                f"'turn <n> (<speaker>): <summary>' numbered 1..{expected_turns}; "
                f"found turn numbers {numbers}")
        return text.strip()

    return validate


def make_model_validator(known_names_text: str):
    """PlantUML must parse, and every actor must be named in the inputs."""
    from reqforge import plantuml

    haystack = known_names_text.lower()

    def validate(text: str) -> str:
        source = plantuml.extract_block(text)
        if source is None:
            raise OutputInvalid("no @startuml … @enduml block found")
        try:
            model = plantuml.parse(source)
        except plantuml.DiagramError as exc:
            raise OutputInvalid(f"the diagram does not parse: {exc}") from exc
        if not model.actors or not model.usecases:
            raise OutputInvalid("the diagram needs at least one actor and one use case")
        for actor in model.actors:
            if actor.name.lower() not in haystack:
                raise OutputInvalid(
                    f"actor {actor.name!r} does not appear in the requirements "
                    f"lists; use only actors the requirements mention")
        return source.strip()

    return validate


def make_srs_validator(model_source: str):
    def validate(text: str) -> str:
        missing = []
        for section in SRS_SECTIONS:
            pattern = re.compile(r"(?mi)^#{0,4}\s*" + re.escape(section) + r"\b")
            if not pattern.search(text):
                missing.append(section)
        if missing:
            raise OutputInvalid(
                f"the document is missing required section heading(s): "
                f"{'; '.join(missing)}")
        if model_source.strip() and model_source.strip() not in text:
            raise OutputInvalid(
                "the appendix must embed the requirements model source verbatim")
        return text.strip()

    return validate


# -- review reports ---------------------------------------------------------------------

@dataclass(frozen=True)
class ReviewFinding:
    section: str
    attribute: str
    severity: str
    status: str  # open | resolved | carried
    description: str

    @property
    def resolved(self) -> bool:
        return self.status == "resolved"


@dataclass(frozen=True)
class ReviewReport:
    verdict: str  # approve | revise
    findings: tuple[ReviewFinding, ...]


def parse_review_report(text: str) -> ReviewReport:
    verdict: str | None = None
    findings: list[ReviewFinding] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("verdict:"):
            if verdict is not None:
                raise OutputInvalid("more than one 'verdict:' line")
            verdict = line.split(":", 1)[1].strip()
            if verdict not in ("approve", "revise"):
                raise OutputInvalid(f"verdict {verdict!r} must be approve or revise")
        elif line.startswith("finding:"):
            fields = [part.strip() for part in line.split(":", 1)[1].split("|")]
            if len(fields) != 5:
                raise OutputInvalid(
                    f"finding {line!r} must have five '|'-separated fields: "
                    f"section | attribute | severity | status | description")
            section, attribute, severity, status, description = fields
            if attribute not in REVIEW_ATTRIBUTES:
                raise OutputInvalid(f"attribute {attribute!r} must be one of "
                                    f"{', '.join(REVIEW_ATTRIBUTES)}")
            if severity not in SEVERITIES:
                raise OutputInvalid(f"severity {severity!r} must be major or minor")
            if status not in FINDING_STATUSES:
                raise OutputInvalid(f"status {status!r} must be one of "
                                    f"{', '.join(FINDING_STATUSES)}")
            if not section or not description:
                raise OutputInvalid("finding section and description must be non-empty")
            findings.append(ReviewFinding(section, attribute, severity, status,
                                          description))
    if verdict is None:
        raise OutputInvalid("missing 'verdict: approve|revise' line")
    unresolved = [finding for finding in findings if not finding.resolved]
    if unresolved and verdict != "revise":
        raise OutputInvalid("unresolved findings require verdict: revise")
    if not unresolved and verdict != "approve":
        raise OutputInvalid("with no unresolved findings the verdict must be approve")
    return ReviewReport(verdict=verdict, findings=tuple(findings))


def serialize_review_report(report: ReviewReport) -> str:
    lines = [f"verdict: {report.verdict}"]
    lines += [f"finding: {finding.section} | {finding.attribute} | "
              f"{finding.severity} | {finding.status} | {finding.description}"
              for finding in report.findings]
    return "\n".join(lines)


def validate_fresh_review(text: str) -> str:
    report = parse_review_report(text)
    for finding in report.findings:
        if finding.status != "open":
            raise OutputInvalid("a first evaluation lists findings with status "
                                "'open' only")
    return serialize_review_report(report)


def make_confirmation_validator(prior_finding_count: int):
    def validate(text: str) -> str:
        report = parse_review_report(text)
        if len(report.findings) != prior_finding_count:
            raise OutputInvalid(
                f"the confirmation must address all {prior_finding_count} prior "
                f"finding(s), one line each; found {len(report.findings)}")
        for finding in report.findings:
            if finding.status not in ("resolved", "carried"):
                raise OutputInvalid(
                    "each confirmed finding must be marked resolved or carried")
        return serialize_review_report(report)

    return validate


class ReviewTracker:
    """Verdict history distilled from ReviewReport artifacts."""

    def __init__(self):
        self.reports: list[ReviewReport] = []

    def observe(self, artifact: Artifact) -> None:
        if artifact.kind is ArtifactKind.REVIEW_REPORT:
            self.reports.append(parse_review_report(artifact.content))

    @property
    def latest_verdict(self) -> str | None:
        return self.reports[-1].verdict if self.reports else None

    @property
    def revise_count(self) -> int:
        return sum(1 for report in self.reports if report.verdict == "revise")

    @property
    def latest_findings(self) -> tuple[ReviewFinding, ...]:
        return self.reports[-1].findings if self.reports else ()


# -- methodology registry ------------------------------------------------------------------

#: tags with a working model builder in this version
DEFAULT_METHODOLOGIES: dict[str, str] = {
    "use_case_diagram": "actor/use-case diagram in PlantUML notation",
}

#: recognised names that have no builder yet; selecting them is not possible
KNOWN_UNBUILT_METHODOLOGIES = ("sysml_model", "bpmn_model")

_METHODOLOGY_LINE = re.compile(r"^methodology:\s*(\S+)\s*$", re.MULTILINE)


def parse_methodology_record(content: str) -> str:
    match = _METHODOLOGY_LINE.search(content)
    if not match:
        raise OutputInvalid("missing 'methodology: <tag>' line")
    return match.group(1)


def select_methodology(agent: Agent, trigger: Artifact | None,
                       registry: dict[str, str] | None = None) -> Draft:
    """Pick a modeling methodology; a single-entry registry needs no model call."""
    registry = DEFAULT_METHODOLOGIES if registry is None else registry
    if not registry:
        raise AgentError("the methodology registry is empty")
    if len(registry) == 1:
        tag = next(iter(registry))
        content = (f"methodology: {tag}\n"
                   f"rationale: only one methodology is registered "
                   f"({registry[tag]}), so it is selected without deliberation.")
        return Draft(kind=ArtifactKind.DIALOGUE_TURN, content=content,
                     sent_from=agent.role, action="select_requirement_model",
                     attempts=0)

    def validate(text: str) -> str:
        tag = parse_methodology_record(text)
        if tag not in registry:
            raise OutputInvalid(f"methodology {tag!r} is not registered; "
                                f"choose one of: {', '.join(sorted(registry))}")
        return text.strip()

    choices = "\n".join(f"- {tag}: {summary}" for tag, summary in registry.items())
    instructions = (f"Choose one modeling methodology for these requirements.\n"
                    f"Registered methodologies:\n{choices}\n"
                    f"Reply with 'methodology: <tag>' on the first line, then "
                    f"'rationale: <one sentence>'.")
    return agent.execute("select_requirement_model", trigger,
                         instructions=instructions, validator=validate)


# -- policy context ----------------------------------------------------------------------------

def _kind_and_state(argument: str):
    kind_name, _, state_name = argument.partition("@")
    try:
        kind = ArtifactKind(kind_name)
    except ValueError:
        raise AgentError(f"policy predicate names unknown artifact kind "
                         f"{kind_name!r}") from None
    if not state_name:
        return kind, None
    try:
        return kind, ArtifactState(state_name)
    except ValueError:
        raise AgentError(f"policy predicate names unknown state "
                         f"{state_name!r}") from None


class PipelineContext:
    """Policy predicates evaluated over the pool and the run trackers.

    `observe` is the single funnel the orchestrator feeds every published
    artifact through, so rebuilding a context from a persisted log is just
    re-observing the artifacts in event order.
    """

    def __init__(self, pool: ArtifactPool, sessions: SessionTracker | None = None,
                 reviews: ReviewTracker | None = None,
                 config: dict[str, str] | None = None):
        self.pool = pool
        self.sessions = sessions if sessions is not None else SessionTracker()
        self.reviews = reviews if reviews is not None else ReviewTracker()
        self.config = dict(config or {})
        self.methodology: str | None = None

    def observe(self, artifact: Artifact) -> None:
        self.sessions.observe(artifact)
        self.reviews.observe(artifact)
        if (artifact.kind is ArtifactKind.DIALOGUE_TURN
                and artifact.content.startswith("methodology:")):
            self.methodology = parse_methodology_record(artifact.content)

    def predicate(self, name: str, argument: str) -> bool:
        if name == "has":
            kind, state = _kind_and_state(argument)
            latest = self.pool.latest(kind)
            return latest is not None and (state is None or latest.state is state)
        if name == "absent":
            kind, _ = _kind_and_state(argument)
            return self.pool.latest(kind) is None
        if name == "session_open":
            return self.sessions.is_open(argument)
        if name == "session_closed":
            return self.sessions.is_closed(argument)
        if name == "session_absent":
            return self.sessions.is_absent(argument)
        if name == "review_verdict":
            return self.reviews.latest_verdict == argument
        if name == "methodology_selected":
            return self.methodology is not None
        raise AgentError(f"unknown policy predicate {name!r}")


# -- personas --------------------------------------------------------------------------------

PERSONA_LAYERS = ("scenario", "pain-points", "quality-expectations")


@dataclass(frozen=True)
class Persona:
    name: str
    role: str
    scenario: str
    pain_points: str
    quality_expectations: str

    def render(self) -> str:
        return (f"## Persona: {self.name}\n\n"
                f"### Scenario\n{self.scenario}\n\n"
                f"### Pain points\n{self.pain_points}\n\n"
                f"### Quality expectations\n{self.quality_expectations}")


def load_persona(path) -> Persona:
    sections = specdoc.parse_file(path)
    if not sections or "persona" not in sections[0].fields:
        raise specdoc.ParseError(str(path), 1, "first section must carry 'persona:'")
    head = sections[0]
    layers: dict[str, str] = {}
    for section in sections[1:]:
        layer = section.require("layer")
        if layer not in PERSONA_LAYERS:
            raise specdoc.ParseError(section.source, section.line,
                                     f"unknown persona layer {layer!r}; "
                                     f"expected one of {PERSONA_LAYERS}")
        if layer in layers:
            raise specdoc.ParseError(section.source, section.line,
                                     f"duplicate persona layer {layer!r}")
        if not section.body:
            raise specdoc.ParseError(section.source, section.line,
                                     f"persona layer {layer!r} is empty")
        layers[layer] = section.body
    missing = set(PERSONA_LAYERS) - set(layers)
    if missing:
        raise specdoc.ParseError(head.source, head.line,
                                 f"persona layers missing: {sorted(missing)}")
    return Persona(
        name=head.require("persona"),
        role=head.require("role"),
        scenario=layers["scenario"],
        pain_points=layers["pain-points"],
        quality_expectations=layers["quality-expectations"],
    )


# -- shipped resources --------------------------------------------------------------------------

def default_agent_specs() -> dict[str, AgentSpec]:
    return load_agent_specs(_RESOURCES / "agents")


def default_policy() -> PolicyTable:
    return PolicyTable.from_file(_RESOURCES / "policy" / "pipeline.txt")


def load_personas(directory) -> dict[str, Persona]:
    """All personas in a directory, keyed by role."""
    personas = {}
    for path in sorted(Path(directory).glob("*.txt")):
        persona = load_persona(path)
        personas[persona.role] = persona
    return personas


def default_personas() -> dict[str, Persona]:
    return load_personas(_RESOURCES / "personas")


def build_team(gateway: Gateway, base=None, personas: dict[str, Persona] | None = None,
               specs: dict[str, AgentSpec] | None = None,
               policy: PolicyTable | None = None) -> dict[str, Agent]:
    """All six agents wired to one gateway, policy-validated."""
    from reqforge import knowledge as knowledge_mod

    specs = specs or default_agent_specs()
    policy = policy or default_policy()
    policy.validate_actions(specs)
    base = base if base is not None else knowledge_mod.default_base()
    personas = default_personas() if personas is None else personas
    team = {}
    for role in ROLE_ORDER:
        spec = specs[role]
        persona = personas.get(role)
        team[role] = Agent(spec, policy, gateway, base=base,
                           extra_knowledge=persona.render() if persona else "")
    return team


def validator_for(action: str, pool: ArtifactPool, sessions: SessionTracker,
                  reviews: ReviewTracker):
    """The output validator an action must satisfy, given current run state."""
    if action in ("dialogue_with_enduser", "dialogue_with_deployer", "respond"):
        return validate_dialogue_turn
    if action == "write_interview_record":
        return make_interview_record_validator(len(sessions.get("enduser").turns))
    if action == "write_user_requirements_list":
        return validate_user_requirements_list
    if action == "write_operating_environment_list":
        return validate_operating_environment_list
    if action == "write_system_requirements_list":
        url = pool.latest(ArtifactKind.USER_REQUIREMENTS_LIST)
        if url is None:
            raise AgentError("system requirements need a user requirements list first")
        return make_system_requirements_validator(url.content)
    if action == "build_requirement_model":
        url = pool.latest(ArtifactKind.USER_REQUIREMENTS_LIST)
        srl = pool.latest(ArtifactKind.SYSTEM_REQUIREMENTS_LIST)
        names = "\n".join(artifact.content for artifact in (url, srl)
                          if artifact is not None)
        return make_model_validator(names)
    if action in ("write_srs", "revise_srs"):
        model = pool.latest(ArtifactKind.REQUIREMENTS_MODEL)
        return make_srs_validator(model.content if model else "")
    if action == "evaluate":
        return validate_fresh_review
    if action == "confirm_closure":
        return make_confirmation_validator(len(reviews.latest_findings))
    return lambda text: text
