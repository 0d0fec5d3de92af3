"""User goals: extraction from seeds, validity checking, and the two
goal samplers (golden resampling and the first-order Markov chain)."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from random import Random

from .acts import END
from .markup import ApiCall, Dialog, EntitySpan, UserUtterance
from .schema import BUILTIN, Diagnostic, SchemaBundle

log = logging.getLogger(__name__)


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class UserValue:
    surface: str
    entity_type: str


@dataclass(frozen=True)
class ReturnRef:
    intent_index: int


Binding = UserValue | ReturnRef


@dataclass
class IntentInstance:
    api: str
    bindings: dict[str, Binding] = field(default_factory=dict)


@dataclass
class UserGoal:
    intents: list[IntentInstance]
    origin: str = "seed"  # "seed" | "golden" | "markov"
    source_seed: str | None = None

    def structure(self) -> tuple:
        """Binding structure with UserValue surfaces stripped; two goals with
        equal structures differ only in user-provided values."""
        out = []
        for intent in self.intents:
            shape = []
            for arg, b in intent.bindings.items():
                shape.append((arg, b.intent_index if isinstance(b, ReturnRef) else "user"))
            out.append((intent.api, tuple(shape)))
        return tuple(out)


@dataclass
class ArgStats:
    occurrences: int = 0
    bound: int = 0
    returns: int = 0
    sources: dict[str, int] = field(default_factory=dict)


@dataclass
class MarkovGoalModel:
    start: dict[str, float]
    transition: dict[str, dict[str, float]]  # row api -> {api or END: prob}
    binding_stats: dict[str, dict[str, ArgStats]]  # api -> arg -> stats

    def to_json(self) -> str:
        doc = {
            "start": self.start,
            "transition": self.transition,
            "binding_stats": {
                api: {
                    arg: {
                        "occurrences": st.occurrences,
                        "bound": st.bound,
                        "returns": st.returns,
                        "sources": st.sources,
                        "p_return": (st.returns / st.bound) if st.bound else 0.0,
                        "p_user": ((st.bound - st.returns) / st.bound) if st.bound else 0.0,
                    }
                    for arg, st in args.items()
                }
                for api, args in self.binding_stats.items()
            },
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MarkovGoalModel":
        doc = json.loads(text)
        stats = {
            api: {
                arg: ArgStats(
                    occurrences=raw["occurrences"],
                    bound=raw["bound"],
                    returns=raw["returns"],
                    sources=dict(raw["sources"]),
                )
                for arg, raw in args.items()
            }
            for api, args in doc["binding_stats"].items()
        }
        return cls(start=doc["start"], transition=doc["transition"], binding_stats=stats)


def extract_goals(seeds: list[Dialog], bundle: SchemaBundle) -> list[UserGoal]:
    """One goal per seed: its API call sequence with ReturnRef bindings
    wherever a call consumed an earlier call's return value."""
    goals = []
    for i, seed in enumerate(seeds):
        calls = [t.payload for t in seed.turns if isinstance(t.payload, ApiCall)]
        if not calls:
            log.warning("seed %d has no API calls; skipped", i)
            continue
        surfaces: dict[str, EntitySpan] = {}
        for turn in seed.turns:
            if isinstance(turn.payload, UserUtterance):
                for span in turn.payload.spans:
                    surfaces[span.var_id] = span
        return_of = {c.return_var: idx for idx, c in enumerate(calls)}
        intents = []
        for idx, call in enumerate(calls):
            api = bundle.api(call.api)
            bindings: dict[str, Binding] = {}
            for arg_name, valref in call.bindings.items():
                spec = api.arg(arg_name)
                if valref.literal is not None:
                    bindings[arg_name] = UserValue(valref.literal, spec.entity_type)
                elif valref.var in return_of and return_of[valref.var] < idx:
                    bindings[arg_name] = ReturnRef(return_of[valref.var])
                elif valref.var in surfaces:
                    span = surfaces[valref.var]
                    bindings[arg_name] = UserValue(span.surface, span.entity_type)
                else:
                    raise SamplerError(
                        f"seed {i}: cannot resolve binding {call.api}.{arg_name}=${valref.var}"
                    )
            intents.append(IntentInstance(api=call.api, bindings=bindings))
        goals.append(
            UserGoal(intents=intents, origin="seed", source_seed=seed.metadata.get("id", str(i)))
        )
    return goals


def validate_goal(goal: UserGoal, bundle: SchemaBundle) -> list[Diagnostic]:
    """Empty iff required args are bound, ReturnRefs point backward at a
    type-matching return, and cross-domain sharing uses builtin types only."""
    diags = []

    def err(loc, msg):
        diags.append(Diagnostic("error", loc, msg))

    if not goal.intents:
        err("goal", "goal has no intents")
        return diags
    for i, intent in enumerate(goal.intents):
        api = bundle.api(intent.api)
        loc = f"intent {i} ({intent.api})"
        if api is None:
            err(loc, "unknown API")
            continue
        for spec in api.args:
            if spec.required and spec.name not in intent.bindings:
                err(loc, f"required arg {spec.name!r} is not bound")
        for arg_name, binding in intent.bindings.items():
            spec = api.arg(arg_name)
            if spec is None:
                err(loc, f"no such arg {arg_name!r}")
                continue
            if isinstance(binding, ReturnRef):
                if not 0 <= binding.intent_index < i:
                    err(loc, f"arg {arg_name!r} references a non-earlier intent")
                    continue
                source = bundle.api(goal.intents[binding.intent_index].api)
                if source.return_type != spec.entity_type:
                    err(
                        loc,
                        f"arg {arg_name!r} takes {spec.entity_type} but intent "
                        f"{binding.intent_index} returns {source.return_type}",
                    )
                elif source.domain != api.domain:
                    et = bundle.entity_type(spec.entity_type)
                    if et is None or et.kind != BUILTIN:
                        err(
                            loc,
                            f"cross-domain sharing of non-builtin type "
                            f"{spec.entity_type!r} (from {source.domain} to {api.domain})",
                        )
            else:
                if binding.entity_type != spec.entity_type:
                    err(
                        loc,
                        f"arg {arg_name!r} takes {spec.entity_type}, "
                        f"got {binding.entity_type}",
                    )
    return diags


def _sample_catalog(bundle: SchemaBundle, type_name: str, rng: Random) -> str:
    catalog = bundle.catalog(type_name)
    if not catalog:
        raise SamplerError(f"entity type {type_name!r} has no catalog to sample from")
    return catalog[rng.randrange(len(catalog))]


def sample_golden(goals: list[UserGoal], bundle: SchemaBundle, rng: Random) -> UserGoal:
    """Uniform (with replacement) seed-goal structure, user values re-drawn
    from the catalogs."""
    if not goals:
        raise SamplerError("no extracted goals to sample from")
    source = goals[rng.randrange(len(goals))]
    intents = []
    for intent in source.intents:
        bindings: dict[str, Binding] = {}
        for arg_name, binding in intent.bindings.items():
            if isinstance(binding, ReturnRef):
                bindings[arg_name] = binding
            else:
                bindings[arg_name] = UserValue(
                    _sample_catalog(bundle, binding.entity_type, rng), binding.entity_type
                )
        intents.append(IntentInstance(api=intent.api, bindings=bindings))
    return UserGoal(intents=intents, origin="golden", source_seed=source.source_seed)


def fit_markov(goals: list[UserGoal]) -> MarkovGoalModel:
    """Maximum-likelihood first-order chain over intent sequences, plus
    per-(api, arg) binding counts. No smoothing: unobserved transitions
    stay at probability zero."""
    if not goals:
        raise SamplerError("cannot fit a goal model from zero goals")
    start_counts: dict[str, int] = {}
    trans_counts: dict[str, dict[str, int]] = {}
    stats: dict[str, dict[str, ArgStats]] = {}
    # args observed bound anywhere, so unbound occurrences count correctly
    for goal in goals:
        for intent in goal.intents:
            arg_stats = stats.setdefault(intent.api, {})
            for arg_name in intent.bindings:
                arg_stats.setdefault(arg_name, ArgStats())
    for goal in goals:
        seq = [intent.api for intent in goal.intents]
        if any(api == END for api in seq):
            raise SamplerError(f"API name {END!r} collides with the terminal state")
        start_counts[seq[0]] = start_counts.get(seq[0], 0) + 1
        for a, b in zip(seq, seq[1:] + [END]):
            row = trans_counts.setdefault(a, {})
            row[b] = row.get(b, 0) + 1
        for intent in goal.intents:
            for arg_name, st in stats[intent.api].items():
                st.occurrences += 1
                binding = intent.bindings.get(arg_name)
                if binding is None:
                    continue
                st.bound += 1
                if isinstance(binding, ReturnRef):
                    st.returns += 1
                    src = goal.intents[binding.intent_index].api
                    st.sources[src] = st.sources.get(src, 0) + 1
    n = len(goals)
    start = {api: c / n for api, c in start_counts.items()}
    transition = {
        api: {b: c / sum(row.values()) for b, c in row.items()}
        for api, row in trans_counts.items()
    }
    return MarkovGoalModel(start=start, transition=transition, binding_stats=stats)


def _weighted_choice(rng: Random, dist: dict[str, float]) -> str:
    items = list(dist.items())
    return rng.choices([k for k, _ in items], weights=[w for _, w in items])[0]


def sample_markov(
    model: MarkovGoalModel,
    bundle: SchemaBundle,
    rng: Random,
    max_len: int = 8,
    max_attempts: int = 100,
) -> UserGoal:
    """Walk the fitted chain until END or max_len, then draw each argument's
    binding variant from the fitted counts. A ReturnRef is only kept when a
    type-compatible earlier intent exists (most recent wins); otherwise the
    arg falls back to a catalog value, or stays unbound if optional.
    Rejection-sampled against validate_goal."""
    if max_len < 1:
        raise SamplerError("max_len must be >= 1")
    for _ in range(max_attempts):
        seq = [_weighted_choice(rng, model.start)]
        while len(seq) < max_len:
            row = model.transition.get(seq[-1])
            if not row:
                break
            step = _weighted_choice(rng, row)
            if step == END:
                break
            seq.append(step)
        intents: list[IntentInstance] = []
        ok = True
        for i, api_name in enumerate(seq):
            api = bundle.api(api_name)
            arg_stats = model.binding_stats.get(api_name, {})
            bindings: dict[str, Binding] = {}
            for spec in api.args:
                st = arg_stats.get(spec.name)
                if st is None or st.occurrences == 0:
                    bind = spec.required
                    want_return = False
                else:
                    bind = spec.required or rng.random() < st.bound / st.occurrences
                    want_return = bool(st.bound) and rng.random() < st.returns / st.bound
                if not bind:
                    continue
                binding: Binding | None = None
                if want_return:
                    compatible = [
                        j
                        for j in range(i)
                        if bundle.api(intents[j].api).return_type == spec.entity_type
                    ]
                    if compatible:
                        binding = ReturnRef(compatible[-1])
                if binding is None:
                    catalog = bundle.catalog(spec.entity_type)
                    if catalog:
                        binding = UserValue(
                            catalog[rng.randrange(len(catalog))], spec.entity_type
                        )
                    elif not spec.required:
                        continue
                    else:
                        ok = False
                        break
                bindings[spec.name] = binding
            if not ok:
                break
            intents.append(IntentInstance(api=api_name, bindings=bindings))
        if ok:
            goal = UserGoal(intents=intents, origin="markov")
            if not validate_goal(goal, bundle):
                return goal
    raise SamplerError(f"no valid goal found in {max_attempts} attempts")
