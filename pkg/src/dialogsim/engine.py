"""Interplay loop and batch generation.

run_dialog drives one user/system exchange to completion; run_batch
extracts goals and templates from the seeds once, then generates n
dialogs, each on its own deterministic random substream so batches can be
parallelized (or re-run) without changing a single byte of output.
"""
from __future__ import annotations

import copy
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from random import Random

from .acts import SYSTEM, USER, slot_names_for, turn_acts_string, value_bearing
from .goals import (
    MarkovGoalModel,
    UserGoal,
    extract_goals,
    fit_markov,
    sample_golden,
    sample_markov,
    validate_goal,
)
from .markup import (
    ApiCall,
    Dialog,
    NlgResponse,
    Turn,
    UserUtterance,
    VarAllocator,
    annotate_seed_acts,
    ref,
)
from .nlg import (
    TemplateIndex,
    build_template_index,
    realize_response,
    realize_system_backoff,
    realize_user,
)
from .schema import SchemaBundle
from .system_agent import init_system, next_system_turn
from .user_agent import SystemView, init_user, next_user_turn

SAMPLERS = ("base", "golden", "markov")


class GenerationError(RuntimeError):
    pass


@dataclass
class GenerationConfig:
    n_dialogs: int = 1
    sampler_mix: dict[str, float] = field(
        default_factory=lambda: {"base": 0.0, "golden": 0.4, "markov": 0.6}
    )
    max_turns: int = 40
    rng_seed: int = 0
    p_correct: float = 0.15
    max_corrections: int = 2
    multi_act_p: float = 0.5
    max_acts_per_turn: int = 3
    api_failure_rate: float = 0.05
    p_offer: float = 0.3
    max_len: int = 8
    max_attempts: int = 100
    workers: int = 1

    def validate(self) -> None:
        if self.n_dialogs < 1:
            raise GenerationError("n_dialogs must be >= 1")
        weights = [self.sampler_mix.get(s, 0.0) for s in SAMPLERS]
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise GenerationError("sampler mix weights must be non-negative and sum > 0")
        for key in self.sampler_mix:
            if key not in SAMPLERS:
                raise GenerationError(f"unknown sampler {key!r} in mix")

    @classmethod
    def from_dict(cls, doc: dict) -> "GenerationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise GenerationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "GenerationConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class BatchResult:
    dialogs: list[Dialog]
    stats: dict[str, int]


def derive_rng(seed: int, index: int) -> Random:
    """Independent, platform-stable substream for dialog `index`."""
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return Random(int.from_bytes(digest[:8], "big"))


def _render_policy_nlg(plan, index: TemplateIndex, rng: Random) -> str:
    """Render a policy act group: through the schema response template whose
    act signature matches exactly (args filled by entity type from the acts'
    values), falling back to canned per-act text."""
    name = index.response_by_signature.get(turn_acts_string(plan.acts))
    if name is not None:
        resp = index.responses[name]
        values = {}
        used: set[int] = set()
        for spec in resp.args:
            found = None
            for i, act in enumerate(plan.acts):
                if (
                    i not in used
                    and act.entity == spec.entity_type
                    and i < len(plan.backoff_values)
                    and plan.backoff_values[i] is not None
                ):
                    found = plan.backoff_values[i]
                    used.add(i)
                    break
            if found is None:
                break
            values[spec.name] = found
        else:
            return realize_response(resp, values, rng)
    return realize_system_backoff(plan.acts, plan.backoff_values)


def run_dialog(
    goal: UserGoal,
    bundle: SchemaBundle,
    config: GenerationConfig,
    rng: Random,
    index: TemplateIndex,
    offer_model: MarkovGoalModel | None = None,
    metadata: dict[str, str] | None = None,
) -> tuple[Dialog, dict[str, int]]:
    """Self-play one dialog for a fixed goal. Every emitted turn carries its
    acts; user entity mentions are span-annotated by construction."""
    if not goal.intents:
        raise GenerationError("cannot simulate an empty goal")
    problems = validate_goal(goal, bundle)
    if problems:
        raise GenerationError(f"invalid goal: {problems[0]}")
    alloc = VarAllocator()
    user = init_user(goal, bundle, config, rng)
    system = init_system(bundle, offer_model)
    dialog = Dialog(metadata=dict(metadata or {}))
    stats = {"corrections": 0, "abandonments": 0, "offers_made": 0, "offers_accepted": 0}
    view = SystemView()
    truncated = False
    while True:
        uout = next_user_turn(user, view, bundle, config, rng)
        if not uout.acts:
            raise GenerationError("user policy produced an empty turn")
        text, spans = realize_user(uout.acts, uout.slot_values, index, rng, alloc)
        dialog.turns.append(
            Turn(
                index=len(dialog.turns) + 1,
                side=USER,
                payload=UserUtterance(text=text, spans=spans, acts=uout.acts),
            )
        )
        stats["corrections"] = user.corrections_used
        if len(dialog.turns) >= config.max_turns:
            truncated = True
            break
        inform_vars = {}
        span_iter = iter(spans)
        for pos, act in enumerate(uout.acts):
            if act.name == "inform" and act.entity is not None:
                span = next(span_iter)
                inform_vars[pos] = (span.var_id, span.surface)
        sout = next_system_turn(system, uout.acts, inform_vars, bundle, config, rng, alloc)
        for call in sout.calls:
            dialog.turns.append(
                Turn(
                    index=len(dialog.turns) + 1,
                    side=SYSTEM,
                    payload=ApiCall(
                        api=call.api,
                        bindings={a: ref(v) for a, v in call.bindings.items()},
                        return_var=call.return_var,
                    ),
                )
            )
        for plan in sout.nlg:
            if plan.response_name is not None:
                resp = bundle.response(plan.response_name)
                text = realize_response(resp, plan.arg_values, rng)
            else:
                text = _render_policy_nlg(plan, index, rng)
            dialog.turns.append(
                Turn(
                    index=len(dialog.turns) + 1,
                    side=SYSTEM,
                    payload=NlgResponse(text=text, acts=plan.acts),
                )
            )
        if sout.offer is not None:
            stats["offers_made"] += 1
        if sout.offer_accepted:
            stats["offers_accepted"] += 1
        view = SystemView(
            acts=[a for plan in sout.nlg for a in plan.acts],
            calls=sout.results,
            offer=sout.offer,
            confirm=sout.confirm,
        )
        if len(dialog.turns) >= config.max_turns:
            truncated = len(dialog.turns) > config.max_turns or not system.closed
            break
        if system.closed:
            break
    stats["abandonments"] = user.abandonments
    if truncated:
        del dialog.turns[config.max_turns :]
        dialog.metadata["truncated"] = "true"
        stats["truncations"] = 1
    return dialog, stats


def run_base_dialog(
    seed: Dialog,
    bundle: SchemaBundle,
    index: TemplateIndex,
    rng: Random,
    metadata: dict[str, str] | None = None,
) -> Dialog:
    """Replay one seed's logical structure: same calls, same acts, with user
    values resampled from catalogs and surface templates re-drawn."""
    alloc = VarAllocator()
    var_map: dict[str, str] = {}
    out = Dialog(metadata=dict(metadata or {}))
    for turn in seed.turns:
        p = turn.payload
        if isinstance(p, UserUtterance):
            # each span var is introduced exactly once, so values need no
            # cross-turn consistency map
            spans = sorted(p.spans, key=lambda s: s.start)
            surfaces = []
            for span in spans:
                catalog = bundle.catalog(span.entity_type)
                surfaces.append(
                    catalog[rng.randrange(len(catalog))] if catalog else span.surface
                )
            value_acts = value_bearing(p.acts)
            slots = slot_names_for([a.entity for a in value_acts])
            slot_values = dict(zip(slots, surfaces))
            text, new_spans = realize_user(p.acts, slot_values, index, rng, alloc)
            for old, new in zip(spans, new_spans):
                var_map[old.var_id] = new.var_id
            payload = UserUtterance(text=text, spans=new_spans, acts=list(p.acts))
        elif isinstance(p, ApiCall):
            api = bundle.api(p.api)
            new_ret = alloc.new(api.return_type)
            bindings = {}
            for arg, valref in p.bindings.items():
                if valref.var is not None:
                    bindings[arg] = ref(var_map[valref.var])
                else:
                    bindings[arg] = valref
            var_map[p.return_var] = new_ret
            payload = ApiCall(api=p.api, bindings=bindings, return_var=new_ret)
        else:
            name = index.response_by_signature.get(turn_acts_string(p.acts)) if p.acts else None
            if name is not None:
                resp = index.responses[name]
                values = {}
                for spec in resp.args:
                    catalog = bundle.catalog(spec.entity_type)
                    values[spec.name] = (
                        catalog[rng.randrange(len(catalog))] if catalog else spec.name
                    )
                text = realize_response(resp, values, rng)
            else:
                text = p.text
            payload = NlgResponse(text=text, acts=list(p.acts))
        out.turns.append(Turn(index=len(out.turns) + 1, side=turn.side, payload=payload))
    return out


@dataclass
class BatchContext:
    bundle: SchemaBundle
    seeds: list[Dialog]
    goals: list[UserGoal]
    model: MarkovGoalModel | None
    index: TemplateIndex
    config: GenerationConfig


def prepare_batch(
    bundle: SchemaBundle,
    seeds: list[Dialog],
    config: GenerationConfig,
    model: MarkovGoalModel | None = None,
) -> BatchContext:
    config.validate()
    seeds = [annotate_seed_acts(copy.deepcopy(s), bundle) for s in seeds]
    mix = config.sampler_mix
    needs_goals = mix.get("golden", 0) > 0 or mix.get("markov", 0) > 0
    goals = extract_goals(seeds, bundle) if seeds else []
    if needs_goals and not goals:
        raise GenerationError("golden/markov sampling needs at least one seed with API calls")
    if mix.get("base", 0) > 0 and not seeds:
        raise GenerationError("base sampling needs at least one seed dialog")
    for i, goal in enumerate(goals):
        problems = validate_goal(goal, bundle)
        if problems:
            raise GenerationError(f"seed {i} yields an invalid goal: {problems[0]}")
    if model is None and goals:
        model = fit_markov(goals)
    index = build_template_index(bundle, seeds)
    return BatchContext(
        bundle=bundle, seeds=seeds, goals=goals, model=model, index=index, config=config
    )


def _pick_sampler(mix: dict[str, float], rng: Random) -> str:
    weights = [mix.get(s, 0.0) for s in SAMPLERS]
    total = sum(weights)
    r = rng.random() * total
    acc = 0.0
    for name, w in zip(SAMPLERS, weights):
        acc += w
        if r < acc:
            return name
    return SAMPLERS[-1]


def generate_one(ctx: BatchContext, i: int) -> tuple[Dialog, dict[str, int]]:
    rng = derive_rng(ctx.config.rng_seed, i)
    sampler = _pick_sampler(ctx.config.sampler_mix, rng)
    metadata = {"sampler": sampler, "dialog": str(i), "rng_seed": str(ctx.config.rng_seed)}
    if sampler == "base":
        pick = rng.randrange(len(ctx.seeds))
        seed = ctx.seeds[pick]
        metadata["source_seed"] = seed.metadata.get("id", str(pick))
        return run_base_dialog(seed, ctx.bundle, ctx.index, rng, metadata), {}
    if sampler == "golden":
        goal = sample_golden(ctx.goals, ctx.bundle, rng)
    else:
        goal = sample_markov(
            ctx.model, ctx.bundle, rng, max_len=ctx.config.max_len,
            max_attempts=ctx.config.max_attempts,
        )
    metadata["goal_len"] = str(len(goal.intents))
    if goal.source_seed is not None:
        metadata["source_seed"] = goal.source_seed
    return run_dialog(
        goal, ctx.bundle, ctx.config, rng, ctx.index, offer_model=ctx.model, metadata=metadata
    )


_WORKER_CTX: BatchContext | None = None


def _init_worker(ctx: BatchContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_generate(i: int) -> tuple[Dialog, dict[str, int]]:
    return generate_one(_WORKER_CTX, i)


def run_batch(
    bundle: SchemaBundle,
    seeds: list[Dialog],
    config: GenerationConfig,
    model: MarkovGoalModel | None = None,
) -> BatchResult:
    """Generate config.n_dialogs dialogs. Output is a pure function of
    (bundle, seeds, config): the worker count never changes the corpus."""
    ctx = prepare_batch(bundle, seeds, config, model)
    stats: dict[str, int] = {
        "corrections": 0,
        "abandonments": 0,
        "offers_made": 0,
        "offers_accepted": 0,
        "truncations": 0,
        "base": 0,
        "golden": 0,
        "markov": 0,
    }
    dialogs: list[Dialog] = []
    if config.workers > 1:
        with ProcessPoolExecutor(
            max_workers=config.workers, initializer=_init_worker, initargs=(ctx,)
        ) as pool:
            results = list(pool.map(_worker_generate, range(config.n_dialogs), chunksize=256))
    else:
        results = [generate_one(ctx, i) for i in range(config.n_dialogs)]
    for dialog, dstats in results:
        dialogs.append(dialog)
        stats[dialog.metadata["sampler"]] += 1
        for key, value in dstats.items():
            stats[key] = stats.get(key, 0) + value
    return BatchResult(dialogs=dialogs, stats=stats)
