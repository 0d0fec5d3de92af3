"""Line-oriented dialog markup: parsing, linking, and serialization.

One turn per line:

    U-<n>: <text with [surface|var] spans>            [ |acts: <act-seq>]
    S-<n>: call: <Api>(<arg>=<valref>,...) -> <var>
    S-<n>: nlg: <text>                                [ |acts: <act-seq>]

`<valref>` is `$<var>` or a double-quoted literal (literals appear only in
seed dialogs, before linking). Files hold many dialogs separated by blank
lines; `#`-prefixed `key=value` lines carry per-dialog metadata.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .acts import (
    USER,
    SYSTEM,
    DialogAct,
    parse_act_list,
    slot_names_for,
    turn_acts_string,
    value_bearing,
)
from .schema import OBJECT, SchemaBundle, var_prefix


class MarkupError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class ValueRef:
    """Either a `$var` reference or a quoted literal."""

    var: str | None = None
    literal: str | None = None

    def __str__(self) -> str:
        if self.var is not None:
            return f"${self.var}"
        return '"%s"' % self.literal


def ref(var: str) -> ValueRef:
    return ValueRef(var=var)


def lit(value: str) -> ValueRef:
    return ValueRef(literal=value)


@dataclass
class EntitySpan:
    surface: str
    var_id: str
    entity_type: str | None
    start: int
    end: int


@dataclass
class UserUtterance:
    text: str
    spans: list[EntitySpan] = field(default_factory=list)
    acts: list[DialogAct] = field(default_factory=list)


@dataclass
class ApiCall:
    api: str
    bindings: dict[str, ValueRef]
    return_var: str


@dataclass
class NlgResponse:
    text: str
    acts: list[DialogAct] = field(default_factory=list)
    # generation-time fields; the line grammar does not carry them
    template: str | None = field(default=None, compare=False)
    args: dict[str, ValueRef] = field(default_factory=dict, compare=False)


@dataclass
class Turn:
    index: int
    side: str
    payload: UserUtterance | ApiCall | NlgResponse


@dataclass
class Dialog:
    turns: list[Turn] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)


class VarAllocator:
    """Dialog-scoped `<prefix><counter>` var ids, one counter per prefix."""

    def __init__(self):
        self._counters: dict[str, int] = {}

    def new(self, type_name: str) -> str:
        prefix = var_prefix(type_name)
        n = self._counters.get(prefix, 0)
        self._counters[prefix] = n + 1
        return f"{prefix}{n}"


_TURN_RE = re.compile(r"^([US])-(\d+):\s?(.*)$")
_SPAN_RE = re.compile(r"\[([^\[\]|]+)\|([A-Za-z][A-Za-z0-9]*)\]")
_CALL_RE = re.compile(r"^call:\s*([A-Za-z][A-Za-z0-9_]*)\((.*)\)\s*->\s*([A-Za-z][A-Za-z0-9]*)$")
_VAR_REF_RE = re.compile(r"^\$([A-Za-z][A-Za-z0-9]*)$")
_META_RE = re.compile(r"^#\s*([A-Za-z_][A-Za-z0-9_.-]*)\s*=\s*(.*)$")
_PREFIX_RE = re.compile(r"^([A-Za-z][A-Za-z0-9]*?)\d+$")


def _split_acts_suffix(text: str) -> tuple[str, str | None]:
    if " |acts: " in text:
        body, suffix = text.rsplit(" |acts: ", 1)
        return body, suffix
    return text, None


def _parse_user_text(raw: str, line_no: int) -> UserUtterance:
    body, acts_suffix = _split_acts_suffix(raw)
    text_parts: list[str] = []
    spans: list[EntitySpan] = []
    pos = 0
    out_len = 0
    for m in _SPAN_RE.finditer(body):
        text_parts.append(body[pos : m.start()])
        out_len += m.start() - pos
        surface = m.group(1)
        spans.append(
            EntitySpan(
                surface=surface,
                var_id=m.group(2),
                entity_type=None,
                start=out_len,
                end=out_len + len(surface),
            )
        )
        text_parts.append(surface)
        out_len += len(surface)
        pos = m.end()
    text_parts.append(body[pos:])
    text = "".join(text_parts)
    if "[" in text or "]" in text:
        raise MarkupError(f"malformed entity span in {body!r}", line_no)
    acts = parse_act_list(acts_suffix, USER) if acts_suffix is not None else []
    return UserUtterance(text=text, spans=spans, acts=acts)


def _parse_valref(token: str, line_no: int) -> ValueRef:
    token = token.strip()
    m = _VAR_REF_RE.match(token)
    if m:
        return ref(m.group(1))
    if len(token) >= 2 and token[0] == '"' and token[-1] == '"':
        inner = token[1:-1]
        if '"' in inner:
            raise MarkupError(f"literal {token!r} contains an embedded quote", line_no)
        return lit(inner)
    raise MarkupError(f"expected $var or quoted literal, got {token!r}", line_no)


def _parse_call(raw: str, line_no: int) -> ApiCall:
    m = _CALL_RE.match(raw)
    if m is None:
        raise MarkupError(f"malformed api call {raw!r}", line_no)
    api, arg_text, return_var = m.group(1), m.group(2).strip(), m.group(3)
    bindings: dict[str, ValueRef] = {}
    if arg_text:
        for part in arg_text.split(","):
            if "=" not in part:
                raise MarkupError(f"malformed call argument {part!r}", line_no)
            name, value = part.split("=", 1)
            name = name.strip()
            if name in bindings:
                raise MarkupError(f"argument {name!r} bound twice", line_no)
            bindings[name] = _parse_valref(value, line_no)
    return ApiCall(api=api, bindings=bindings, return_var=return_var)


def _parse_dialog_lines(
    numbered: list[tuple[int, str]], bundle: SchemaBundle | None
) -> Dialog:
    metadata: dict[str, str] = {}
    turns: list[Turn] = []
    expected = 1
    for line_no, line in numbered:
        if line.startswith("#"):
            m = _META_RE.match(line)
            if m:
                metadata[m.group(1)] = m.group(2)
            continue
        m = _TURN_RE.match(line)
        if m is None:
            raise MarkupError(f"not a turn line: {line!r}", line_no)
        side = USER if m.group(1) == "U" else SYSTEM
        index = int(m.group(2))
        if index != expected:
            raise MarkupError(f"turn index {index} out of order (expected {expected})", line_no)
        expected += 1
        body = m.group(3)
        if side == USER:
            payload: UserUtterance | ApiCall | NlgResponse = _parse_user_text(body, line_no)
        elif body.startswith("call:"):
            payload = _parse_call(body, line_no)
        elif body.startswith("nlg:"):
            text, acts_suffix = _split_acts_suffix(body[len("nlg:") :].lstrip())
            acts = parse_act_list(acts_suffix, SYSTEM) if acts_suffix is not None else []
            payload = NlgResponse(text=text, acts=acts)
        else:
            raise MarkupError(f"system turn must be 'call:' or 'nlg:', got {body!r}", line_no)
        turns.append(Turn(index=index, side=side, payload=payload))
    if not turns:
        raise MarkupError("dialog has no turns")
    if turns[0].side != USER:
        raise MarkupError("first turn must be user-side", numbered[0][0])
    dialog = Dialog(turns=turns, metadata=metadata)
    if bundle is not None:
        _link(dialog, bundle, {ln: no for no, (ln, _) in enumerate(numbered)})
    return dialog


def _link(dialog: Dialog, bundle: SchemaBundle, _line_of=None) -> None:
    """Resolve var references and infer span entity types from API usage."""
    intro: dict[str, tuple[int, EntitySpan | None]] = {}
    for turn in dialog.turns:
        p = turn.payload
        if isinstance(p, UserUtterance):
            last_end = 0
            for span in sorted(p.spans, key=lambda s: s.start):
                if span.start < last_end:
                    raise MarkupError(f"overlapping spans in turn {turn.index}")
                last_end = span.end
                if p.text[span.start : span.end] != span.surface:
                    raise MarkupError(
                        f"span surface {span.surface!r} does not match utterance text "
                        f"in turn {turn.index}"
                    )
                if span.var_id in intro:
                    raise MarkupError(f"var {span.var_id!r} reintroduced in turn {turn.index}")
                if span.entity_type is None:
                    # a prefix that names an entity type is a declaration;
                    # other prefixes leave the type to be inferred from usage
                    m = _PREFIX_RE.match(span.var_id)
                    declared = bundle.entity_type_for_prefix(m.group(1)) if m else None
                    if declared is not None:
                        span.entity_type = declared.name
                intro[span.var_id] = (turn.index, span)
        elif isinstance(p, ApiCall):
            api = bundle.api(p.api)
            if api is None:
                raise MarkupError(f"unknown API {p.api!r} in turn {turn.index}")
            for arg_name, valref in p.bindings.items():
                spec = api.arg(arg_name)
                if spec is None:
                    raise MarkupError(f"API {p.api} has no argument {arg_name!r}")
                if valref.var is None:
                    continue
                if valref.var not in intro or intro[valref.var][0] >= turn.index:
                    raise MarkupError(
                        f"unresolved reference ${valref.var} in turn {turn.index}"
                    )
                _, span = intro[valref.var]
                if span is not None:
                    if span.entity_type is None:
                        span.entity_type = spec.entity_type
                    elif span.entity_type != spec.entity_type:
                        raise MarkupError(
                            f"${valref.var} is a {span.entity_type} but "
                            f"{p.api}.{arg_name} takes {spec.entity_type}"
                        )
                else:
                    ret_type = _return_type_of(dialog, bundle, valref.var)
                    if ret_type is not None and ret_type != spec.entity_type:
                        raise MarkupError(
                            f"${valref.var} is a {ret_type} but "
                            f"{p.api}.{arg_name} takes {spec.entity_type}"
                        )
            if p.return_var in intro:
                raise MarkupError(f"var {p.return_var!r} reintroduced in turn {turn.index}")
            intro[p.return_var] = (turn.index, None)
    # spans never consumed by a call: fall back to the var-prefix convention
    for turn in dialog.turns:
        p = turn.payload
        if not isinstance(p, UserUtterance):
            continue
        for span in p.spans:
            if span.entity_type is None:
                m = _PREFIX_RE.match(span.var_id)
                et = bundle.entity_type_for_prefix(m.group(1)) if m else None
                if et is None:
                    raise MarkupError(
                        f"cannot infer entity type for span var {span.var_id!r} "
                        f"in turn {turn.index}"
                    )
                span.entity_type = et.name
            et = bundle.entity_type(span.entity_type)
            if et is not None and et.kind == OBJECT:
                raise MarkupError(
                    f"object-kind type {et.name!r} cannot appear as a user value "
                    f"(turn {turn.index})"
                )


def _return_type_of(dialog: Dialog, bundle: SchemaBundle, var: str) -> str | None:
    for turn in dialog.turns:
        p = turn.payload
        if isinstance(p, ApiCall) and p.return_var == var:
            api = bundle.api(p.api)
            return api.return_type if api else None
    return None


def parse_dialog(text: str, bundle: SchemaBundle | None = None) -> Dialog:
    numbered = [
        (no, line) for no, line in enumerate(text.splitlines(), start=1) if line.strip()
    ]
    return _parse_dialog_lines(numbered, bundle)


def parse_corpus(text: str, bundle: SchemaBundle | None = None) -> list[Dialog]:
    dialogs = []
    block: list[tuple[int, str]] = []
    for no, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            block.append((no, line))
        elif block:
            dialogs.append(_parse_dialog_lines(block, bundle))
            block = []
    if block:
        dialogs.append(_parse_dialog_lines(block, bundle))
    return dialogs


def load_corpus(path, bundle: SchemaBundle | None = None) -> list[Dialog]:
    with open(path, encoding="utf-8") as f:
        return parse_corpus(f.read(), bundle)


def serialize_dialog(dialog: Dialog) -> str:
    lines = [f"# {k}={v}" for k, v in dialog.metadata.items()]
    for turn in dialog.turns:
        p = turn.payload
        if isinstance(p, UserUtterance):
            parts = []
            pos = 0
            for span in sorted(p.spans, key=lambda s: s.start):
                parts.append(p.text[pos : span.start])
                parts.append(f"[{span.surface}|{span.var_id}]")
                pos = span.end
            parts.append(p.text[pos:])
            line = f"U-{turn.index}: {''.join(parts)}"
            if p.acts:
                line += f" |acts: {turn_acts_string(p.acts)}"
        elif isinstance(p, ApiCall):
            args = ",".join(f"{name}={valref}" for name, valref in p.bindings.items())
            line = f"S-{turn.index}: call: {p.api}({args}) -> {p.return_var}"
        else:
            line = f"S-{turn.index}: nlg: {p.text}"
            if p.acts:
                line += f" |acts: {turn_acts_string(p.acts)}"
        lines.append(line)
    return "\n".join(lines)


def serialize_corpus(dialogs: list[Dialog]) -> str:
    return "\n\n".join(serialize_dialog(d) for d in dialogs) + "\n"


def delexicalize_turn(utterance: UserUtterance) -> "UtteranceTemplateDef":
    """Template for a user turn: spans become `{type}` slots (type2, type3 on
    repeats), acts become the signature. Slot order follows span order, which
    matches the order of the turn's entity-bearing inform acts."""
    from .schema import UtteranceTemplateDef

    spans = sorted(utterance.spans, key=lambda s: s.start)
    slots = slot_names_for([s.entity_type or "value" for s in spans])
    parts = []
    pos = 0
    for span, slot in zip(spans, slots):
        parts.append(utterance.text[pos : span.start])
        parts.append("{%s}" % slot)
        pos = span.end
    parts.append(utterance.text[pos:])
    return UtteranceTemplateDef(
        acts=tuple(utterance.acts), template="".join(parts), origin="auto_extracted"
    )


def annotate_seed_acts(dialog: Dialog, bundle: SchemaBundle) -> Dialog:
    """Fill in dialog acts for seed turns that carry no explicit `|acts:`.

    User turns: each API call is attributed to the latest user turn before
    it (inform(intent)); each span informs the argument that consumes it.
    A trailing span-free user turn that triggers nothing is a bye(). System
    nlg turns directly after a call get the API's response-template acts; a
    final nlg line closing the dialog gets bye().
    """
    calls: list[tuple[int, ApiCall]] = []  # (position in turns, payload)
    user_positions: list[int] = []
    for pos, turn in enumerate(dialog.turns):
        if isinstance(turn.payload, ApiCall):
            calls.append((pos, turn.payload))
        elif turn.side == USER:
            user_positions.append(pos)

    consuming: dict[str, tuple[str, str]] = {}
    trigger: dict[int, list[ApiCall]] = {}
    for pos, call in calls:
        before = [u for u in user_positions if u < pos]
        if before:
            trigger.setdefault(before[-1], []).append(call)
        for arg_name, valref in call.bindings.items():
            if valref.var is not None and valref.var not in consuming:
                consuming[valref.var] = (call.api, arg_name)

    last_user = user_positions[-1] if user_positions else -1
    for pos, turn in enumerate(dialog.turns):
        p = turn.payload
        if turn.side == USER:
            if p.acts:
                continue
            acts: list[DialogAct] = []
            for call in trigger.get(pos, []):
                acts.append(DialogAct("inform", USER, intent=call.api))
            for span in sorted(p.spans, key=lambda s: s.start):
                role = consuming.get(span.var_id)
                acts.append(
                    DialogAct(
                        "inform",
                        USER,
                        entity=span.entity_type,
                        api=role[0] if role else None,
                        arg=role[1] if role else None,
                    )
                )
            if not acts and pos == last_user:
                acts.append(DialogAct("bye", USER))
            p.acts = acts
        elif isinstance(p, NlgResponse) and not p.acts:
            prev = dialog.turns[pos - 1].payload if pos > 0 else None
            if isinstance(prev, ApiCall):
                api = bundle.api(prev.api)
                resp = bundle.response(api.response_template) if api else None
                if resp is not None:
                    p.acts = list(resp.acts)
            elif pos == len(dialog.turns) - 1:
                p.acts = [DialogAct("bye", SYSTEM)]
    return dialog
