"""Training-data emission: NER tagging, action prediction, argument filling.

Examples are derived purely from the markup, so a corpus file round-trips
into the same training data. Tokenization is whitespace splitting with
leading/trailing punctuation detached into separate tokens.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .acts import turn_acts_string
from .markup import ApiCall, Dialog, EntitySpan, NlgResponse, UserUtterance
from .nlg import TemplateIndex
from .schema import SchemaBundle

_PUNCT = set(".,!?;:\"'()[]")


@dataclass
class Token:
    text: str
    start: int
    end: int


@dataclass
class TrainingExample:
    kind: str  # "ner" | "action_prediction" | "argument_filling"
    context: list[str]
    input: list[str] | str
    labels: list[str] | str | dict[str, str]
    meta: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "context": self.context,
                "input": self.input,
                "labels": self.labels,
                **({"meta": self.meta} if self.meta else {}),
            }
        )


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        start, end = i, j
        while start < end - 1 and text[start] in _PUNCT:
            tokens.append(Token(text[start], start, start + 1))
            start += 1
        trailing: list[Token] = []
        while end - 1 > start and text[end - 1] in _PUNCT:
            trailing.append(Token(text[end - 1], end - 1, end))
            end -= 1
        tokens.append(Token(text[start:end], start, end))
        tokens.extend(reversed(trailing))
        i = j
    return tokens


def iob_tags(text: str, spans: list[EntitySpan]) -> tuple[list[str], list[str]]:
    """(tokens, tags) with B-/I-<entity type> marking span tokens."""
    tokens = tokenize(text)
    tags = ["O"] * len(tokens)
    for span in spans:
        inside = False
        for k, tok in enumerate(tokens):
            if tok.start >= span.start and tok.end <= span.end:
                tags[k] = ("I-" if inside else "B-") + (span.entity_type or "value")
                inside = True
    return [t.text for t in tokens], tags


def spans_from_tags(text: str, tokens: list[str], tags: list[str]) -> list[tuple[int, int, str]]:
    """Invert iob_tags: contiguous B/I runs back to (start, end, type)."""
    positions = tokenize(text)
    out = []
    current: tuple[int, int, str] | None = None
    for tok, tag in zip(positions, tags):
        if tag.startswith("B-"):
            if current:
                out.append(current)
            current = (tok.start, tok.end, tag[2:])
        elif tag.startswith("I-") and current is not None:
            current = (current[0], tok.end, current[2])
        else:
            if current:
                out.append(current)
            current = None
    if current:
        out.append(current)
    return out


def _turn_line(turn_payload) -> str:
    if isinstance(turn_payload, UserUtterance):
        return f"U: {turn_payload.text}"
    if isinstance(turn_payload, ApiCall):
        args = ",".join(f"{a}={v}" for a, v in turn_payload.bindings.items())
        return f"S: call: {turn_payload.api}({args}) -> {turn_payload.return_var}"
    return f"S: nlg: {turn_payload.text}"


def ner_examples(dialog: Dialog) -> list[TrainingExample]:
    out = []
    context: list[str] = []
    for turn in dialog.turns:
        p = turn.payload
        if isinstance(p, UserUtterance):
            tokens, tags = iob_tags(p.text, p.spans)
            out.append(
                TrainingExample(kind="ner", context=list(context), input=tokens, labels=tags)
            )
        context.append(_turn_line(p))
    return out


def _action_name(p, index: TemplateIndex) -> str | None:
    if isinstance(p, ApiCall):
        return p.api
    if isinstance(p, NlgResponse) and p.acts:
        return index.response_by_signature.get(turn_acts_string(p.acts))
    return None


def ap_examples(dialog: Dialog, index: TemplateIndex) -> list[TrainingExample]:
    """One example per system action that names a schema API or response
    template; backoff-rendered turns (canned offers, requests without a
    schema response) have no action vocabulary entry and are skipped."""
    out = []
    context: list[str] = []
    for turn in dialog.turns:
        p = turn.payload
        if turn.side == "system":
            name = _action_name(p, index)
            if name is not None:
                out.append(
                    TrainingExample(
                        kind="action_prediction",
                        context=list(context),
                        input=context[-1] if context else "",
                        labels=name,
                    )
                )
        context.append(_turn_line(p))
    return out


def af_examples(dialog: Dialog) -> list[TrainingExample]:
    """Argument sources for each API call: arg name -> in-context var id."""
    out = []
    context: list[str] = []
    for turn in dialog.turns:
        p = turn.payload
        if isinstance(p, ApiCall):
            labels = {
                arg: valref.var for arg, valref in p.bindings.items() if valref.var is not None
            }
            out.append(
                TrainingExample(
                    kind="argument_filling",
                    context=list(context),
                    input=p.api,
                    labels=labels,
                )
            )
        context.append(_turn_line(p))
    return out


def export_training(
    corpus: list[Dialog], bundle: SchemaBundle, index: TemplateIndex
) -> dict[str, list[TrainingExample]]:
    examples = {"ner": [], "action_prediction": [], "argument_filling": []}
    for dialog in corpus:
        examples["ner"].extend(ner_examples(dialog))
        examples["action_prediction"].extend(ap_examples(dialog, index))
        examples["argument_filling"].extend(af_examples(dialog))
    return examples
