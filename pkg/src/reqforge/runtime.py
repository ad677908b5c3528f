"""Generic agent kernel: profile, monitor, thinking, memory, action, knowledge.

An agent is data plus a deterministic decision table. Its spec (profile
text, monitored artifact kinds, action prompt templates) loads from a
sectioned text file, so behaviour is editable without rebuilds. The
thinking step is a first-match policy-table lookup; a rule may defer to
the language model ("consult"), and a missing row is an error, never a
silent no-op. Action outputs are validated and re-prompted a bounded
number of times before failing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from reqforge import knowledge as knowledge_mod
from reqforge import specdoc
from reqforge.gateway import CompletionRequest, Gateway
from reqforge.pool import Artifact, ArtifactEvent, ArtifactKind, ArtifactPool, ArtifactState

TEMPLATE_SLOTS = frozenset({"profile", "knowledge", "memory", "trigger_artifact", "instructions"})
DIGEST_THRESHOLD = 8000
DIGEST_MARKER = " … [truncated]"
REPAIR_ATTEMPTS = 2
MEMORY_PROMPT_LIMIT = 8

_SLOT = re.compile(r"\{([a-z_]+)\}")
_PREDICATE = re.compile(r"^([a-z_]+)\((.*)\)$")


class AgentError(Exception):
    pass


class PolicyMiss(AgentError):
    """No policy row matched a delivered event."""

    def __init__(self, agent: str, kind: ArtifactKind, state: ArtifactState):
        super().__init__(f"no policy rule for agent {agent!r} on "
                         f"{kind.value}@{state.value}")
        self.agent = agent
        self.kind = kind
        self.state = state


class MalformedOutput(AgentError):
    """Post-processing kept failing after the allowed repair reprompts."""

    def __init__(self, agent: str, action: str, attempts: int, last_error: str,
                 last_output: str = ""):
        super().__init__(f"{agent}.{action}: output still invalid after "
                         f"{attempts} attempts: {last_error}")
        self.agent = agent
        self.action = action
        self.attempts = attempts
        self.last_error = last_error
        self.last_output = last_output


class OutputInvalid(AgentError):
    """Raised by action validators; the message becomes the repair prompt."""


# -- declarative specs -------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    personality: str
    experience: str
    skill: str

    def render(self) -> str:
        return (f"Personality: {self.personality}\n\n"
                f"Experience: {self.experience}\n\n"
                f"Skill: {self.skill}")


@dataclass(frozen=True)
class ActionSpec:
    name: str
    prompt_template: str
    output_kind: ArtifactKind
    max_output_tokens: int = 4096


@dataclass(frozen=True)
class AgentSpec:
    role: str
    profile: Profile
    monitor_filter: frozenset[ArtifactKind]
    actions: dict[str, ActionSpec]
    knowledge_phases: tuple[str, ...]

    @classmethod
    def from_file(cls, path) -> "AgentSpec":
        return cls.from_sections(specdoc.parse_file(path))

    @classmethod
    def from_sections(cls, sections: Sequence[specdoc.Section]) -> "AgentSpec":
        if not sections or "agent" not in sections[0].fields:
            source = sections[0].source if sections else "<empty>"
            raise specdoc.ParseError(source, 1, "first section must carry an 'agent:' field")
        head = sections[0]
        role = head.require("agent")
        monitor = frozenset(_kind(head, name) for name in head.split_list("monitor"))
        phases = tuple(head.split_list("knowledge-phases"))
        for phase in phases:
            if phase not in knowledge_mod.PHASES:
                raise specdoc.ParseError(head.source, head.line,
                                         f"unknown lifecycle phase {phase!r}")
        parts: dict[str, str] = {}
        actions: dict[str, ActionSpec] = {}
        for section in sections[1:]:
            if "part" in section.fields:
                name = section.require("part")
                if name not in ("personality", "experience", "skill"):
                    raise specdoc.ParseError(section.source, section.line,
                                             f"unknown profile part {name!r}")
                if name in parts:
                    raise specdoc.ParseError(section.source, section.line,
                                             f"duplicate profile part {name!r}")
                parts[name] = section.body
            elif "action" in section.fields:
                action = _action_from_section(section)
                if action.name in actions:
                    raise specdoc.ParseError(section.source, section.line,
                                             f"duplicate action {action.name!r}")
                actions[action.name] = action
            else:
                raise specdoc.ParseError(section.source, section.line,
                                         "section is neither a profile part nor an action")
        missing = {"personality", "experience", "skill"} - set(parts)
        if missing:
            raise specdoc.ParseError(head.source, head.line,
                                     f"profile parts missing: {sorted(missing)}")
        return cls(role=role, profile=Profile(**parts), monitor_filter=monitor,
                   actions=actions, knowledge_phases=phases)


def _kind(section: specdoc.Section, name: str) -> ArtifactKind:
    try:
        return ArtifactKind(name)
    except ValueError:
        raise specdoc.ParseError(section.source, section.line,
                                 f"unknown artifact kind {name!r}") from None


def _state(section: specdoc.Section, name: str) -> ArtifactState:
    try:
        return ArtifactState(name)
    except ValueError:
        raise specdoc.ParseError(section.source, section.line,
                                 f"unknown artifact state {name!r}") from None


def _action_from_section(section: specdoc.Section) -> ActionSpec:
    name = section.require("action")
    if not section.body:
        raise specdoc.ParseError(section.source, section.line,
                                 f"action {name!r} has no prompt template")
    undeclared = sorted(set(_SLOT.findall(section.body)) - TEMPLATE_SLOTS)
    if undeclared:
        raise specdoc.ParseError(section.source, section.line,
                                 f"action {name!r} references undeclared slots {undeclared}; "
                                 f"allowed: {sorted(TEMPLATE_SLOTS)}")
    return ActionSpec(
        name=name,
        prompt_template=section.body,
        output_kind=_kind(section, section.require("output")),
        max_output_tokens=int(section.get("max-output-tokens", "4096")),
    )


# -- memory -------------------------------------------------------------------

@dataclass(frozen=True)
class MemoryRecord:
    artifact_id: str
    kind: ArtifactKind
    version: int
    digest: str
    stored_at: int


def make_digest(content: str) -> str:
    if len(content) <= DIGEST_THRESHOLD:
        return content
    return content[:DIGEST_THRESHOLD] + DIGEST_MARKER


# -- thinking -------------------------------------------------------------------

@dataclass(frozen=True)
class Decision:
    verdict: str  # "act" | "wait"
    action: str | None
    rationale: str

    def __post_init__(self):
        if self.verdict not in ("act", "wait"):
            raise ValueError(f"verdict {self.verdict!r} not in {{act, wait}}")
        if self.verdict == "act" and not self.action:
            raise ValueError("act decision without an action name")


class PolicyContext(Protocol):
    """What rule matching may ask of the orchestrator."""

    config: Mapping[str, str]

    def predicate(self, name: str, argument: str) -> bool: ...


@dataclass(frozen=True)
class PolicyRule:
    name: str
    agent: str
    on_kind: ArtifactKind
    state: ArtifactState | None
    sent_from: str | None                  # match the trigger's producer role
    sent_to: str | None                    # match a role in the trigger's send_to
    when: tuple[tuple[str, str], ...]      # (predicate-name, argument)
    config_if: tuple[tuple[str, str], ...]
    config_unless: tuple[tuple[str, str], ...]
    verdict: str                           # "act" | "wait" | "consult"
    action: str | None
    choices: tuple[str, ...]               # consult candidates; empty = all actions
    line: int = 0
    source: str = "<rules>"

    def matches(self, agent: str, artifact: Artifact, context: PolicyContext) -> bool:
        if self.agent != agent or self.on_kind != artifact.kind:
            return False
        if self.state is not None and self.state != artifact.state:
            return False
        if self.sent_from is not None and self.sent_from != artifact.sent_from:
            return False
        if self.sent_to is not None and self.sent_to not in artifact.send_to:
            return False
        for key, value in self.config_if:
            if str(context.config.get(key, "")) != value:
                return False
        for key, value in self.config_unless:
            if str(context.config.get(key, "")) == value:
                return False
        return all(context.predicate(name, argument) for name, argument in self.when)


def _parse_predicates(section: specdoc.Section, raw: str) -> tuple[tuple[str, str], ...]:
    out = []
    for clause in _split_clauses(raw):
        match = _PREDICATE.match(clause)
        if not match:
            raise specdoc.ParseError(section.source, section.line,
                                     f"malformed predicate {clause!r}; expected name(argument)")
        out.append((match.group(1), match.group(2).strip()))
    return tuple(out)


def _split_clauses(raw: str) -> list[str]:
    """Split on commas that sit outside parentheses."""
    clauses, depth, current = [], 0, []
    for char in raw:
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
        if char == "," and depth == 0:
            clauses.append("".join(current).strip())
            current = []
        else:
            current.append(char)
    tail = "".join(current).strip()
    if tail:
        clauses.append(tail)
    return [clause for clause in clauses if clause]


def _parse_guards(section: specdoc.Section, raw: str) -> tuple[tuple[str, str], ...]:
    out = []
    for clause in _split_clauses(raw):
        if "=" not in clause:
            raise specdoc.ParseError(section.source, section.line,
                                     f"malformed config guard {clause!r}; expected key=value")
        key, value = clause.split("=", 1)
        out.append((key.strip(), value.strip()))
    return tuple(out)


class PolicyTable:
    """Ordered decision rules; the first matching row wins."""

    def __init__(self, rules: Sequence[PolicyRule]):
        self.rules = list(rules)

    @classmethod
    def from_file(cls, path) -> "PolicyTable":
        return cls.from_sections(specdoc.parse_file(path))

    @classmethod
    def from_sections(cls, sections: Sequence[specdoc.Section]) -> "PolicyTable":
        rules = []
        for section in sections:
            if "rule" not in section.fields:
                raise specdoc.ParseError(section.source, section.line,
                                         "policy section lacks a 'rule:' name")
            do = section.require("do")
            verdict, action = do, None
            if do not in ("wait", "consult"):
                verdict, action = "act", do
            state_raw = section.get("state")
            rules.append(PolicyRule(
                name=section.require("rule"),
                agent=section.require("agent"),
                on_kind=_kind(section, section.require("on")),
                state=_state(section, state_raw) if state_raw else None,
                sent_from=section.get("from") or None,
                sent_to=section.get("to") or None,
                when=_parse_predicates(section, section.get("when", "")),
                config_if=_parse_guards(section, section.get("if", "")),
                config_unless=_parse_guards(section, section.get("unless", "")),
                verdict=verdict,
                action=action,
                choices=tuple(section.split_list("choices")),
                line=section.line,
                source=section.source,
            ))
        return cls(rules)

    def validate_actions(self, specs: Mapping[str, AgentSpec]) -> None:
        """Every acted action must exist on its agent; every agent must exist."""
        for rule in self.rules:
            spec = specs.get(rule.agent)
            if spec is None:
                raise specdoc.ParseError(rule.source, rule.line,
                                         f"rule {rule.name!r} names unknown agent {rule.agent!r}")
            named = [rule.action] if rule.verdict == "act" else list(rule.choices)
            for action in named:
                if action and action not in spec.actions:
                    raise specdoc.ParseError(
                        rule.source, rule.line,
                        f"rule {rule.name!r} names unknown action {action!r} "
                        f"of agent {rule.agent!r}")
            if rule.on_kind not in spec.monitor_filter:
                raise specdoc.ParseError(
                    rule.source, rule.line,
                    f"rule {rule.name!r} triggers on {rule.on_kind.value}, which agent "
                    f"{rule.agent!r} does not monitor")

    def first_match(self, agent: str, artifact: Artifact,
                    context: PolicyContext) -> PolicyRule | None:
        for rule in self.rules:
            if rule.matches(agent, artifact, context):
                return rule
        return None


# -- the agent -------------------------------------------------------------------

@dataclass(frozen=True)
class Draft:
    """An unpublished action result; the orchestrator turns it into an artifact."""
    kind: ArtifactKind
    content: str
    sent_from: str
    action: str
    attempts: int


class Agent:
    """Single-threaded over its own state; all sharing goes through the pool."""

    def __init__(self, spec: AgentSpec, policy: PolicyTable, gateway: Gateway,
                 base: knowledge_mod.KnowledgeBase | None = None,
                 extra_knowledge: str = "", max_knowledge_items: int = 8):
        self.spec = spec
        self.policy = policy
        self.gateway = gateway
        items = (base.select_phases(spec.knowledge_phases, spec.role, max_knowledge_items)
                 if base is not None else [])
        blocks = [text for text in (knowledge_mod.render(items), extra_knowledge) if text]
        self.knowledge_text = "\n\n".join(blocks)
        self._memory: dict[tuple[str, int], MemoryRecord] = {}
        self._stored_counter = 0

    @property
    def role(self) -> str:
        return self.spec.role

    # memory ------------------------------------------------------------

    def memory_write(self, artifact: Artifact) -> None:
        key = (artifact.id, artifact.version)
        if key in self._memory:
            return
        self._stored_counter += 1
        self._memory[key] = MemoryRecord(
            artifact_id=artifact.id,
            kind=artifact.kind,
            version=artifact.version,
            digest=make_digest(artifact.content),
            stored_at=self._stored_counter,
        )

    def memory_read(self, kinds: Iterable[ArtifactKind] | None = None,
                    limit: int | None = None) -> list[MemoryRecord]:
        wanted = set(kinds) if kinds is not None else None
        records = [record for record in self._memory.values()
                   if wanted is None or record.kind in wanted]
        records.sort(key=lambda record: record.stored_at)
        if limit is not None:
            records = records[-limit:]
        return records

    def render_memory(self, limit: int = MEMORY_PROMPT_LIMIT) -> str:
        records = self.memory_read(limit=limit)
        if not records:
            return "(no prior artifacts in memory)"
        blocks = [f"[{record.kind.value} {record.artifact_id} v{record.version}]\n"
                  f"{record.digest}" for record in records]
        return "\n\n".join(blocks)

    # thinking ------------------------------------------------------------

    def on_event(self, event: ArtifactEvent, pool: ArtifactPool,
                 context: PolicyContext) -> Decision:
        if event.kind not in self.spec.monitor_filter:
            raise AgentError(f"event kind {event.kind.value} delivered to {self.role}, "
                             f"which does not monitor it")
        # judge the version the event announced, not whatever is latest by now
        artifact = pool.history(event.artifact_id)[event.version - 1]
        self.memory_write(artifact)
        rule = self.policy.first_match(self.role, artifact, context)
        if rule is None:
            raise PolicyMiss(self.role, event.kind, artifact.state)
        if rule.verdict == "consult":
            return self._consult(rule, artifact)
        return Decision(verdict=rule.verdict, action=rule.action, rationale=rule.name)

    def _consult(self, rule: PolicyRule, trigger: Artifact) -> Decision:
        candidates = list(rule.choices) or sorted(self.spec.actions)
        prompt = (
            f"A new artifact needs your judgement.\n\n"
            f"Trigger:\n{_render_artifact(trigger)}\n\n"
            f"Your available actions: {', '.join(candidates)}.\n"
            f"Reply with exactly one line: either 'act <action-name>' or 'wait'."
        )

        def parse(text: str) -> str:
            lowered = text.lower()
            for name in candidates:
                if name.lower() in lowered:
                    return name
            if "wait" in lowered:
                return ""
            raise OutputInvalid(
                f"reply named neither 'wait' nor one of: {', '.join(candidates)}")

        chosen, _ = self._complete_with_repair("consult", prompt, parse,
                                               max_output_tokens=128)
        if chosen:
            return Decision(verdict="act", action=chosen,
                            rationale=f"{rule.name} (model-adjudicated)")
        return Decision(verdict="wait", action=None,
                        rationale=f"{rule.name} (model-adjudicated)")

    # action ------------------------------------------------------------

    def render_prompt(self, action: ActionSpec, trigger: Artifact | None,
                      instructions: str) -> str:
        slots = {
            "profile": self.spec.profile.render(),
            "knowledge": self.knowledge_text or "(no knowledge items)",
            "memory": self.render_memory(),
            "trigger_artifact": _render_artifact(trigger) if trigger else "(none)",
            "instructions": instructions or "(none)",
        }
        return _SLOT.sub(lambda match: slots[match.group(1)], action.prompt_template)

    def execute(self, action_name: str, trigger: Artifact | None = None,
                instructions: str = "",
                validator: Callable[[str], str] | None = None) -> Draft:
        try:
            action = self.spec.actions[action_name]
        except KeyError:
            raise AgentError(f"{self.role} has no action {action_name!r}") from None
        prompt = self.render_prompt(action, trigger, instructions)
        validate = validator or (lambda text: text)
        content, attempts = self._complete_with_repair(
            action_name, prompt, validate, max_output_tokens=action.max_output_tokens)
        return Draft(kind=action.output_kind, content=content,
                     sent_from=self.role, action=action_name, attempts=attempts)

    def _complete_with_repair(self, action_name: str, prompt: str,
                              validate: Callable[[str], str],
                              max_output_tokens: int) -> tuple[str, int]:
        system = f"«{action_name}» You are the {self.role} agent of a requirements team."
        messages: list[tuple[str, str]] = [("user", prompt)]
        last_error = ""
        last_output = ""
        for attempt in range(1, REPAIR_ATTEMPTS + 2):
            request = CompletionRequest(system_prompt=system, messages=tuple(messages),
                                        max_tokens=max_output_tokens)
            result = self.gateway.complete(request)
            last_output = result.text
            try:
                return validate(result.text), attempt
            except OutputInvalid as exc:
                last_error = str(exc)
                messages.append(("assistant", result.text))
                messages.append(("user",
                                 f"Your previous reply was invalid: {last_error}. "
                                 f"Reply again, following the required format exactly."))
        raise MalformedOutput(self.role, action_name, REPAIR_ATTEMPTS + 1,
                              last_error, last_output)


def _render_artifact(artifact: Artifact) -> str:
    return (f"{artifact.kind.value} {artifact.id} v{artifact.version} "
            f"({artifact.state.value}, from {artifact.sent_from})\n{artifact.content}")


def load_agent_specs(directory) -> dict[str, AgentSpec]:
    """All agent spec files in a directory, keyed by role; roles must be unique."""
    specs: dict[str, AgentSpec] = {}
    for path in sorted(Path(directory).glob("*.txt")):
        spec = AgentSpec.from_file(path)
        if spec.role in specs:
            raise specdoc.ParseError(str(path), 1, f"duplicate agent role {spec.role!r}")
        specs[spec.role] = spec
    return specs
