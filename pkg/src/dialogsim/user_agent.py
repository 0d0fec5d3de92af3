"""Agenda-based heuristic user policy.

The user walks a fixed goal, intent by intent: it reveals the current
intent's user-provided values a few acts at a time, answers system
requests/confirms/offers against the goal truth, occasionally changes its
mind about an already-revealed value, and drops intents (plus everything
depending on them) when the system reports a failure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from .acts import USER, DialogAct, slot_names_for
from .goals import ReturnRef, UserGoal, UserValue
from .schema import SchemaBundle


@dataclass
class CallResult:
    api: str
    ok: bool
    return_var: str | None = None
    recall: bool = False


@dataclass
class OfferedArg:
    arg: str
    var: str
    surface: str | None
    entity_type: str


@dataclass
class OfferView:
    api: str
    args: list[OfferedArg] = field(default_factory=list)


@dataclass
class ConfirmedArg:
    arg: str
    surface: str | None
    entity_type: str


@dataclass
class ConfirmView:
    api: str
    args: list[ConfirmedArg] = field(default_factory=list)


@dataclass
class SystemView:
    """What the user sees of the last system turn. Call results are
    bookkeeping visibility only: they advance the goal cursor and identify
    offered return values."""

    acts: list[DialogAct] = field(default_factory=list)
    calls: list[CallResult] = field(default_factory=list)
    offer: OfferView | None = None
    confirm: ConfirmView | None = None


@dataclass
class UserTurnOutput:
    acts: list[DialogAct]
    slot_values: dict[str, str]  # slot name -> surface, aligned with inform acts


@dataclass
class UserState:
    goal: UserGoal
    cursor: int = 0
    agenda: list[tuple[str, str | None]] = field(default_factory=list)
    informed: dict[tuple[int, str], str] = field(default_factory=dict)
    corrected: set = field(default_factory=set)
    alternatives: dict[tuple[int, str], str] = field(default_factory=dict)
    done: bool = False
    dead: set = field(default_factory=set)
    corrections_used: int = 0
    returns_seen: dict[int, str] = field(default_factory=dict)
    intent_informed: bool = False
    bye_sent: bool = False
    abandonments: int = 0

    def current(self):
        return self.goal.intents[self.cursor]

    def surviving_intents(self) -> list[int]:
        return [i for i in range(len(self.goal.intents)) if i not in self.dead]


def init_user(goal: UserGoal, bundle: SchemaBundle, config, rng: Random) -> UserState:
    """Seed the agenda for the first intent and pre-sample one correction
    alternative per user-provided value (when its catalog offers one)."""
    state = UserState(goal=goal)
    for i, intent in enumerate(goal.intents):
        for arg_name, binding in intent.bindings.items():
            if not isinstance(binding, UserValue):
                continue
            others = [v for v in bundle.catalog(binding.entity_type) if v != binding.surface]
            if others:
                state.alternatives[(i, arg_name)] = others[rng.randrange(len(others))]
    _seed_agenda(state, bundle)
    return state


def _seed_agenda(state: UserState, bundle: SchemaBundle) -> None:
    intent = state.current()
    api = bundle.api(intent.api)
    state.agenda = [("intent", None)]
    for spec in api.args:
        if isinstance(intent.bindings.get(spec.name), UserValue):
            state.agenda.append(("inform", spec.name))
    state.intent_informed = False


def _advance(state: UserState, bundle: SchemaBundle) -> None:
    nxt = state.cursor + 1
    while nxt < len(state.goal.intents) and nxt in state.dead:
        nxt += 1
    if nxt >= len(state.goal.intents):
        state.done = True
        state.agenda = []
    else:
        state.cursor = nxt
        _seed_agenda(state, bundle)


def abandon_intent(state: UserState, failed_index: int, bundle: SchemaBundle) -> UserState:
    """Drop the failed intent and every later intent whose ReturnRef chain
    (transitively) depends on it, then move on if anything survives."""
    removed = {failed_index}
    for j in range(failed_index + 1, len(state.goal.intents)):
        if j in state.dead:
            continue
        deps = {
            b.intent_index
            for b in state.goal.intents[j].bindings.values()
            if isinstance(b, ReturnRef)
        }
        if deps & removed:
            removed.add(j)
    state.dead |= removed
    state.abandonments += 1
    _advance(state, bundle)
    return state


def _truncated_geometric(rng: Random, p: float, maximum: int) -> int:
    k = 1
    while k < maximum and rng.random() < p:
        k += 1
    return k


def next_user_turn(
    state: UserState, view: SystemView, bundle: SchemaBundle, config, rng: Random
) -> UserTurnOutput:
    acts: list[DialogAct] = []
    values: list[str] = []  # aligned with entity-bearing inform acts

    def inform(entity_type: str, api: str, arg: str, surface: str) -> None:
        acts.append(DialogAct("inform", USER, entity=entity_type, api=api, arg=arg))
        values.append(surface)

    # 1. bookkeeping: calls advance or abandon the current intent
    for call in view.calls:
        if call.recall or state.done:
            continue
        intent = state.current()
        if call.api != intent.api:
            continue
        if call.ok:
            state.returns_seen[state.cursor] = call.return_var
            _advance(state, bundle)
        else:
            abandon_intent(state, state.cursor, bundle)

    # 2. respond to a confirmation prompt: affirm truthfully, deny + correct
    # any stale value
    if view.confirm is not None and not state.done and view.confirm.api == state.current().api:
        intent = state.current()
        acts.append(DialogAct("affirm", USER, intent=intent.api))
        for ca in view.confirm.args:
            truth = state.informed.get((state.cursor, ca.arg))
            if ca.surface is None or truth is None or ca.surface == truth:
                acts.append(
                    DialogAct("affirm", USER, entity=ca.entity_type, api=intent.api, arg=ca.arg)
                )
            else:
                acts.append(
                    DialogAct("deny", USER, entity=ca.entity_type, api=intent.api, arg=ca.arg)
                )
                inform(ca.entity_type, intent.api, ca.arg, truth)

    # 3. respond to a proactive offer: accept only the goal's next intent
    if view.offer is not None:
        accept = (
            not state.done
            and not state.intent_informed
            and view.offer.api == state.current().api
        )
        if accept:
            intent = state.current()
            acts.append(DialogAct("affirm", USER, intent=intent.api))
            state.intent_informed = True
            if ("intent", None) in state.agenda:
                state.agenda.remove(("intent", None))
            for oa in view.offer.args:
                binding = intent.bindings.get(oa.arg)
                if isinstance(binding, ReturnRef):
                    expected = state.returns_seen.get(binding.intent_index)
                    name = "affirm" if oa.var == expected else "deny"
                    acts.append(
                        DialogAct(name, USER, entity=oa.entity_type, api=intent.api, arg=oa.arg)
                    )
                elif isinstance(binding, UserValue):
                    if ("inform", oa.arg) in state.agenda:
                        state.agenda.remove(("inform", oa.arg))
                    state.informed[(state.cursor, oa.arg)] = binding.surface
                    if oa.surface == binding.surface:
                        acts.append(
                            DialogAct(
                                "affirm", USER, entity=oa.entity_type, api=intent.api, arg=oa.arg
                            )
                        )
                    else:
                        acts.append(
                            DialogAct(
                                "deny", USER, entity=oa.entity_type, api=intent.api, arg=oa.arg
                            )
                        )
                        inform(oa.entity_type, intent.api, oa.arg, binding.surface)
                else:
                    acts.append(
                        DialogAct("deny", USER, entity=oa.entity_type, api=intent.api, arg=oa.arg)
                    )
        else:
            acts.append(DialogAct("deny", USER, intent=view.offer.api))

    # 4. answer an argument request with the goal's (possibly corrected) value
    if not state.done:
        intent = state.current()
        for act in view.acts:
            if act.name != "request" or act.api != intent.api:
                continue
            binding = intent.bindings.get(act.arg)
            if not isinstance(binding, UserValue):
                continue
            surface = state.informed.get((state.cursor, act.arg), binding.surface)
            inform(act.entity, intent.api, act.arg, surface)
            state.informed[(state.cursor, act.arg)] = surface
            if ("inform", act.arg) in state.agenda:
                state.agenda.remove(("inform", act.arg))

    # 5. advance the agenda, a truncated-geometric number of acts at a time
    informed_this_turn: set = set()
    if not state.done and state.agenda:
        k = _truncated_geometric(rng, config.multi_act_p, config.max_acts_per_turn)
        emitted = 0
        while state.agenda and emitted < k:
            kind, arg = state.agenda.pop(0)
            intent = state.current()
            if kind == "intent":
                acts.append(DialogAct("inform", USER, intent=intent.api))
                state.intent_informed = True
                emitted += 1
            else:
                if (state.cursor, arg) in state.informed:
                    continue
                binding = intent.bindings[arg]
                inform(binding.entity_type, intent.api, arg, binding.surface)
                state.informed[(state.cursor, arg)] = binding.surface
                informed_this_turn.add((state.cursor, arg))
                emitted += 1

    # 6. change of mind: deny an earlier informed value, give the alternative
    if (
        not state.done
        and state.corrections_used < config.max_corrections
        and rng.random() < config.p_correct
    ):
        latest = {}
        for i in state.surviving_intents():
            latest[state.goal.intents[i].api] = i
        candidates = [
            (i, arg)
            for (i, arg) in state.informed
            if (i, arg) not in state.corrected
            and (i, arg) not in informed_this_turn
            and (i, arg) in state.alternatives
            and i not in state.dead
            and latest.get(state.goal.intents[i].api) == i
        ]
        if candidates:
            i, arg = candidates[rng.randrange(len(candidates))]
            alt = state.alternatives[(i, arg)]
            intent = state.goal.intents[i]
            entity_type = intent.bindings[arg].entity_type
            acts.append(DialogAct("deny", USER, entity=entity_type, api=intent.api, arg=arg))
            inform(entity_type, intent.api, arg, alt)
            state.informed[(i, arg)] = alt
            state.corrected.add((i, arg))
            state.corrections_used += 1

    # 7. close when the goal is exhausted
    if state.done and not state.bye_sent:
        acts.append(DialogAct("bye", USER))
        state.bye_sent = True

    value_acts = [a for a in acts if a.name == "inform" and a.entity is not None]
    slots = slot_names_for([a.entity for a in value_acts])
    return UserTurnOutput(acts=acts, slot_values=dict(zip(slots, values)))
