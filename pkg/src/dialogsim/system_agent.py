"""Heuristic system policy.

The system builds a frame per user intent, elicits missing required
arguments one at a time, fills return-valued arguments from the dialog
context, simulates API calls (sampling results instead of executing),
confirms flagged APIs before calling, re-calls after post-call corrections,
and makes proactive offers sampled from the fitted goal-transition model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from .acts import END, SYSTEM, DialogAct
from .goals import MarkovGoalModel
from .markup import VarAllocator
from .schema import ApiDef, SchemaBundle
from .user_agent import CallResult, ConfirmView, ConfirmedArg, OfferView, OfferedArg

COLLECTING = "collecting"
CALLED_OK = "called_ok"
CALLED_FAILED = "called_failed"


@dataclass
class Frame:
    api: str
    filled: dict[str, str] = field(default_factory=dict)  # arg -> var id
    surfaces: dict[str, str] = field(default_factory=dict)  # arg -> spoken surface
    status: str = COLLECTING
    return_var: str | None = None
    confirmed: bool = False
    requested: set = field(default_factory=set)
    recall_pending: bool = False


@dataclass
class ContextVar:
    entity_type: str
    surface: str | None  # None for opaque return objects
    origin: str  # "span" | "return"


@dataclass
class SystemState:
    frames: list[Frame] = field(default_factory=list)
    context: dict[str, ContextVar] = field(default_factory=dict)
    denied_offers: set = field(default_factory=set)
    pending_offer: OfferView | None = None
    awaiting_confirm: int | None = None  # frame index
    offer_model: MarkovGoalModel | None = None
    closed: bool = False


@dataclass
class SystemCall:
    api: str
    bindings: dict[str, str]  # arg -> var id
    return_var: str
    recall: bool = False


@dataclass
class SystemNlg:
    acts: list[DialogAct]
    response_name: str | None = None
    arg_values: dict[str, str] = field(default_factory=dict)
    backoff_values: list[str | None] = field(default_factory=list)


@dataclass
class SystemTurnOutput:
    calls: list[SystemCall] = field(default_factory=list)
    results: list[CallResult] = field(default_factory=list)
    nlg: list[SystemNlg] = field(default_factory=list)
    offer: OfferView | None = None
    confirm: ConfirmView | None = None
    offer_accepted: bool = False


def init_system(bundle: SchemaBundle, offer_model: MarkovGoalModel | None = None) -> SystemState:
    return SystemState(offer_model=offer_model)


def _active_frame(state: SystemState, api: str | None = None) -> Frame | None:
    for frame in reversed(state.frames):
        if frame.status == COLLECTING and (api is None or frame.api == api):
            return frame
    return None


def _frame_for_role(state: SystemState, api: str) -> Frame | None:
    collecting = _active_frame(state, api)
    if collecting is not None:
        return collecting
    for frame in reversed(state.frames):
        if frame.api == api:
            return frame
    return None


def simulate_api_call(
    frame: Frame,
    bundle: SchemaBundle,
    config,
    rng: Random,
    alloc: VarAllocator,
    state: SystemState,
) -> tuple[bool, str | None]:
    """Sample the call outcome instead of executing it. Success registers a
    fresh return var in the context: opaque for object kinds, with a
    catalog-sampled surface otherwise."""
    api = bundle.api(frame.api)
    if rng.random() < config.api_failure_rate:
        frame.status = CALLED_FAILED
        return False, None
    var = alloc.new(api.return_type)
    et = bundle.entity_type(api.return_type)
    surface = None
    if et is not None and et.speakable and et.catalog:
        surface = et.catalog[rng.randrange(len(et.catalog))]
    state.context[var] = ContextVar(api.return_type, surface, "return")
    frame.status = CALLED_OK
    frame.return_var = var
    return True, var


def propose_offer(
    state: SystemState,
    offer_model: MarkovGoalModel,
    bundle: SchemaBundle,
    rng: Random,
    last_api: str,
) -> tuple[OfferView, list[DialogAct]] | None:
    """Offer the next API drawn from the transition row of the API just
    fulfilled (END mass dropped, previously denied offers excluded), with
    args pre-filled from type-compatible context vars."""
    row = offer_model.transition.get(last_api, {})
    candidates = {
        api: p for api, p in row.items() if api != END and api not in state.denied_offers and p > 0
    }
    if not candidates:
        return None
    apis = list(candidates)
    api_name = rng.choices(apis, weights=[candidates[a] for a in apis])[0]
    api = bundle.api(api_name)
    offered: list[OfferedArg] = []
    for spec in api.args:
        var = _latest_var_of_type(state, spec.entity_type)
        if var is not None:
            cv = state.context[var]
            offered.append(OfferedArg(spec.name, var, cv.surface, spec.entity_type))
    acts = [DialogAct("offer", SYSTEM, intent=api_name)]
    for oa in offered:
        acts.append(DialogAct("offer", SYSTEM, entity=oa.entity_type, api=api_name, arg=oa.arg))
    return OfferView(api=api_name, args=offered), acts


def _latest_var_of_type(state: SystemState, entity_type: str) -> str | None:
    latest = None
    for var, cv in state.context.items():
        if cv.entity_type == entity_type:
            latest = var
    return latest


def _sample_response_args(api: ApiDef, bundle: SchemaBundle, rng: Random) -> dict[str, str]:
    resp = bundle.response(api.response_template)
    values = {}
    for spec in resp.args:
        catalog = bundle.catalog(spec.entity_type)
        values[spec.name] = catalog[rng.randrange(len(catalog))] if catalog else spec.name
    return values


def _announce(api: ApiDef, bundle: SchemaBundle, rng: Random) -> SystemNlg:
    resp = bundle.response(api.response_template)
    return SystemNlg(
        acts=list(resp.acts),
        response_name=resp.name,
        arg_values=_sample_response_args(api, bundle, rng),
    )


def _do_call(
    frame: Frame,
    bundle: SchemaBundle,
    config,
    rng: Random,
    alloc: VarAllocator,
    state: SystemState,
    out: SystemTurnOutput,
    recall: bool,
) -> None:
    ok, var = simulate_api_call(frame, bundle, config, rng, alloc, state)
    api = bundle.api(frame.api)
    if ok:
        out.calls.append(
            SystemCall(api=frame.api, bindings=dict(frame.filled), return_var=var, recall=recall)
        )
        out.results.append(CallResult(frame.api, True, var, recall))
        out.nlg.append(_announce(api, bundle, rng))
    else:
        out.results.append(CallResult(frame.api, False, None, recall))
        out.nlg.append(
            SystemNlg(
                acts=[DialogAct("failure", SYSTEM, intent=frame.api)],
                backoff_values=[None],
            )
        )


def next_system_turn(
    state: SystemState,
    user_acts: list[DialogAct],
    inform_vars: dict[int, tuple[str, str]],  # act position -> (var id, surface)
    bundle: SchemaBundle,
    config,
    rng: Random,
    alloc: VarAllocator,
) -> SystemTurnOutput:
    out = SystemTurnOutput()

    if any(a.name == "bye" for a in user_acts):
        state.closed = True
        out.nlg.append(SystemNlg(acts=[DialogAct("bye", SYSTEM)], backoff_values=[None]))
        # a trailing offer denial may ride along with the bye
        for act in user_acts:
            if act.name == "deny" and act.intent is not None and state.pending_offer is not None:
                state.denied_offers.add(act.intent)
        state.pending_offer = None
        return out

    offer = state.pending_offer
    state.pending_offer = None
    confirming = (
        state.frames[state.awaiting_confirm] if state.awaiting_confirm is not None else None
    )
    confirm_affirmed = False
    confirm_touched = False
    offer_accepted_frame: Frame | None = None

    for pos, act in enumerate(user_acts):
        if act.name == "affirm" and act.intent is not None:
            if offer is not None and act.intent == offer.api:
                frame = Frame(api=offer.api)
                state.frames.append(frame)
                offer_accepted_frame = frame
                out.offer_accepted = True
                for oa in offer.args:
                    frame.filled[oa.arg] = oa.var
                    if oa.surface is not None:
                        frame.surfaces[oa.arg] = oa.surface
            if confirming is not None and act.intent == confirming.api:
                confirm_affirmed = True
        elif act.name == "deny" and act.intent is not None:
            if offer is not None and act.intent == offer.api:
                state.denied_offers.add(act.intent)
        elif act.name == "deny" and act.entity is not None:
            if offer_accepted_frame is not None and act.api == offer_accepted_frame.api:
                offer_accepted_frame.filled.pop(act.arg, None)
                offer_accepted_frame.surfaces.pop(act.arg, None)
            else:
                frame = _frame_for_role(state, act.api) if act.api else None
                if frame is not None:
                    frame.filled.pop(act.arg, None)
                    frame.surfaces.pop(act.arg, None)
                    if frame is confirming:
                        confirm_touched = True
        elif act.name == "inform" and act.intent is not None:
            if _active_frame(state, act.intent) is None:
                state.frames.append(Frame(api=act.intent))
        elif act.name == "inform" and act.entity is not None:
            if pos not in inform_vars:
                continue
            var, surface = inform_vars[pos]
            state.context[var] = ContextVar(act.entity, surface, "span")
            if act.api is None:
                continue
            frame = _frame_for_role(state, act.api)
            if frame is None:
                frame = Frame(api=act.api)
                state.frames.append(frame)
            frame.filled[act.arg] = var
            frame.surfaces[act.arg] = surface
            if frame.status in (CALLED_OK, CALLED_FAILED):
                frame.recall_pending = True
            elif frame is confirming:
                confirm_touched = True

    # post-call corrections: re-call with the updated binding
    for frame in state.frames:
        if frame.recall_pending:
            frame.recall_pending = False
            _do_call(frame, bundle, config, rng, alloc, state, out, recall=True)

    progressed_api: str | None = None
    frame = _active_frame(state)
    if frame is not None:
        api = bundle.api(frame.api)
        if api is None:
            frame.status = CALLED_FAILED
            out.results.append(CallResult(frame.api, False, None))
            out.nlg.append(
                SystemNlg(
                    acts=[DialogAct("failure", SYSTEM, intent=frame.api)],
                    backoff_values=[None],
                )
            )
        else:
            for spec in api.args:
                if spec.name in frame.filled:
                    continue
                var = _latest_return_of_type(state, spec.entity_type)
                if var is not None:
                    frame.filled[spec.name] = var
            missing = [s for s in api.args if s.required and s.name not in frame.filled]
            if missing:
                spec = missing[0]
                frame.requested.add(spec.name)
                out.nlg.append(
                    SystemNlg(
                        acts=[
                            DialogAct(
                                "request",
                                SYSTEM,
                                entity=spec.entity_type,
                                api=api.name,
                                arg=spec.name,
                            )
                        ],
                        backoff_values=[None],
                    )
                )
            elif api.confirm_before_call and not frame.confirmed:
                if confirming is frame and confirm_affirmed and not confirm_touched:
                    frame.confirmed = True
                    state.awaiting_confirm = None
                    _do_call(frame, bundle, config, rng, alloc, state, out, recall=False)
                    if frame.status == CALLED_OK:
                        progressed_api = frame.api
                else:
                    acts = [DialogAct("confirm", SYSTEM, intent=api.name)]
                    confirmed_args = []
                    for spec in api.args:
                        if spec.name not in frame.filled:
                            continue
                        surface = frame.surfaces.get(spec.name)
                        acts.append(
                            DialogAct(
                                "confirm",
                                SYSTEM,
                                entity=spec.entity_type,
                                api=api.name,
                                arg=spec.name,
                            )
                        )
                        confirmed_args.append(ConfirmedArg(spec.name, surface, spec.entity_type))
                    out.confirm = ConfirmView(api=api.name, args=confirmed_args)
                    state.awaiting_confirm = state.frames.index(frame)
                    out.nlg.append(
                        SystemNlg(
                            acts=acts,
                            backoff_values=[None] + [a.surface for a in confirmed_args],
                        )
                    )
            else:
                _do_call(frame, bundle, config, rng, alloc, state, out, recall=False)
                if frame.status == CALLED_OK:
                    progressed_api = frame.api
    # proactive offer after a fresh successful call
    if (
        progressed_api is not None
        and state.offer_model is not None
        and rng.random() < config.p_offer
    ):
        proposal = propose_offer(state, state.offer_model, bundle, rng, progressed_api)
        if proposal is not None:
            view, acts = proposal
            state.pending_offer = view
            out.offer = view
            out.nlg.append(
                SystemNlg(
                    acts=acts,
                    backoff_values=[None] + [oa.surface for oa in view.args],
                )
            )
    return out


def _latest_return_of_type(state: SystemState, entity_type: str) -> str | None:
    latest = None
    for var, cv in state.context.items():
        if cv.origin == "return" and cv.entity_type == entity_type:
            latest = var
    return latest
