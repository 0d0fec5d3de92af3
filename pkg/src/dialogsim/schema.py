"""Domain schema: entity types with catalogs, APIs, and NLG templates.

A schema bundle is loaded from a single JSON document (possibly spanning
several domains), validated, and then shared immutably by every other
component.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .acts import SYSTEM, USER, DialogAct, parse_act_list, turn_acts_string

CATALOG = "catalog"
OBJECT = "object"
BUILTIN = "builtin"

# Fixed registry of cross-domain entity types. Developers may extend the
# catalogs from their schema files but may not redefine the names.
BUILTIN_CATALOGS: dict[str, tuple[str, ...]] = {
    "Time": ("2 PM", "4 PM", "8 PM", "noon", "9 AM", "17:00", "6:30 PM"),
    "Date": ("today", "tomorrow", "Friday", "June 5", "next Monday"),
    "Address": ("123 Main St", "55 5th Ave", "9 Elm Road"),
}


class SchemaError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.location}: {self.message}"


@dataclass(frozen=True)
class EntityType:
    name: str
    kind: str
    catalog: tuple[str, ...] = ()

    @property
    def speakable(self) -> bool:
        return self.kind != OBJECT


@dataclass(frozen=True)
class ArgSpec:
    name: str
    entity_type: str
    required: bool = True


@dataclass(frozen=True)
class ApiDef:
    name: str
    args: tuple[ArgSpec, ...]
    return_name: str
    return_type: str
    response_template: str
    confirm_before_call: bool = False
    domain: str = ""

    def arg(self, name: str) -> ArgSpec | None:
        for a in self.args:
            if a.name == name:
                return a
        return None


@dataclass(frozen=True)
class ResponseTemplateDef:
    name: str
    args: tuple[ArgSpec, ...]
    acts: tuple[DialogAct, ...]
    templates: tuple[str, ...]
    domain: str = ""


@dataclass(frozen=True)
class UtteranceTemplateDef:
    acts: tuple[DialogAct, ...]
    template: str
    origin: str = "developer"  # "developer" | "auto_extracted"


@dataclass
class DomainSchema:
    name: str
    entity_types: list[EntityType]
    apis: list[ApiDef]
    response_templates: list[ResponseTemplateDef]
    utterance_templates: list[UtteranceTemplateDef]


@dataclass
class SchemaBundle:
    domains: list[DomainSchema]
    _types: dict[str, EntityType] = field(default_factory=dict, compare=False, repr=False)
    _apis: dict[str, ApiDef] = field(default_factory=dict, compare=False, repr=False)
    _responses: dict[str, ResponseTemplateDef] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self):
        self._reindex()

    def _reindex(self) -> None:
        self._types = {}
        self._apis = {}
        self._responses = {}
        extensions: dict[str, list[str]] = {name: [] for name in BUILTIN_CATALOGS}
        for dom in self.domains:
            for et in dom.entity_types:
                if et.kind == BUILTIN and et.name in BUILTIN_CATALOGS:
                    extensions[et.name].extend(
                        v for v in et.catalog if v not in extensions[et.name]
                    )
                else:
                    self._types.setdefault(et.name, et)
            for api in dom.apis:
                self._apis.setdefault(api.name, api)
            for resp in dom.response_templates:
                self._responses.setdefault(resp.name, resp)
        for name, base in BUILTIN_CATALOGS.items():
            extra = tuple(v for v in extensions[name] if v not in base)
            self._types[name] = EntityType(name=name, kind=BUILTIN, catalog=base + extra)

    def entity_type(self, name: str) -> EntityType | None:
        return self._types.get(name)

    def api(self, name: str) -> ApiDef | None:
        return self._apis.get(name)

    def response(self, name: str) -> ResponseTemplateDef | None:
        return self._responses.get(name)

    def apis(self) -> list[ApiDef]:
        return [api for dom in self.domains for api in dom.apis]

    def catalog(self, type_name: str) -> tuple[str, ...]:
        et = self.entity_type(type_name)
        return et.catalog if et is not None else ()

    def entity_type_for_prefix(self, prefix: str) -> EntityType | None:
        """Resolve a var-id prefix back to its entity type (see var_prefix)."""
        for et in self._types.values():
            if var_prefix(et.name) == prefix:
                return et
        return None


def var_prefix(type_name: str) -> str:
    """Var-id prefix for generated output: type name, first char lowered."""
    return type_name[0].lower() + type_name[1:]


def _parse_arg_specs(raw, loc: str, diags: list[Diagnostic]) -> tuple[ArgSpec, ...]:
    specs = []
    seen = set()
    for a in raw:
        name = a.get("name", "")
        if name in seen:
            diags.append(Diagnostic("error", loc, f"duplicate arg name {name!r}"))
        seen.add(name)
        specs.append(
            ArgSpec(name=name, entity_type=a.get("type", ""), required=bool(a.get("required", True)))
        )
    return tuple(specs)


def loads_schema(text: str) -> SchemaBundle:
    """Parse and validate a schema bundle from JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(
            [Diagnostic("error", f"line {e.lineno}, column {e.colno}", f"not valid JSON: {e.msg}")]
        ) from e
    diags: list[Diagnostic] = []
    domains = []
    for dref in doc.get("domains", []):
        dname = dref.get("name", "")
        entity_types = []
        for e in dref.get("entity_types", []):
            entity_types.append(
                EntityType(
                    name=e.get("name", ""),
                    kind=e.get("kind", CATALOG),
                    catalog=tuple(e.get("catalog", ())),
                )
            )
        apis = []
        for a in dref.get("apis", []):
            ret = a.get("return", {})
            apis.append(
                ApiDef(
                    name=a.get("name", ""),
                    args=_parse_arg_specs(a.get("args", ()), f"{dname}.{a.get('name')}", diags),
                    return_name=ret.get("name", ""),
                    return_type=ret.get("type", ""),
                    response_template=a.get("response_template", ""),
                    confirm_before_call=bool(a.get("confirm_before_call", False)),
                    domain=dname,
                )
            )
        responses = []
        for r in dref.get("response_templates", []):
            loc = f"{dname}.{r.get('name')}"
            try:
                r_acts = tuple(
                    act for s in r.get("acts", ()) for act in parse_act_list(s, SYSTEM)
                )
            except ValueError as err:
                diags.append(Diagnostic("error", loc, str(err)))
                r_acts = ()
            responses.append(
                ResponseTemplateDef(
                    name=r.get("name", ""),
                    args=_parse_arg_specs(r.get("args", ()), loc, diags),
                    acts=r_acts,
                    templates=tuple(r.get("templates", ())),
                    domain=dname,
                )
            )
        utterances = []
        for u in dref.get("utterance_templates", []):
            try:
                u_acts = tuple(
                    act for s in u.get("acts", ()) for act in parse_act_list(s, USER)
                )
            except ValueError as err:
                diags.append(Diagnostic("error", f"{dname} utterance template", str(err)))
                u_acts = ()
            utterances.append(
                UtteranceTemplateDef(acts=u_acts, template=u.get("template", ""), origin="developer")
            )
        domains.append(
            DomainSchema(
                name=dname,
                entity_types=entity_types,
                apis=apis,
                response_templates=responses,
                utterance_templates=utterances,
            )
        )
    bundle = SchemaBundle(domains=domains)
    diags.extend(validate_schema(bundle))
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise SchemaError(errors)
    return bundle


def load_schema(path) -> SchemaBundle:
    with open(path, encoding="utf-8") as f:
        return loads_schema(f.read())


def _slots_of(template: str) -> list[str]:
    slots, i = [], 0
    while True:
        start = template.find("{", i)
        if start < 0:
            return slots
        end = template.find("}", start)
        if end < 0:
            return slots
        slots.append(template[start + 1 : end])
        i = end + 1


def validate_schema(bundle: SchemaBundle) -> list[Diagnostic]:
    """Check every cross-reference and invariant; returns diagnostics only."""
    diags: list[Diagnostic] = []

    def err(loc, msg):
        diags.append(Diagnostic("error", loc, msg))

    seen_types: set[str] = set()
    seen_apis: set[str] = set()
    for dom in bundle.domains:
        for et in dom.entity_types:
            loc = f"{dom.name}.{et.name}"
            if et.kind not in (CATALOG, OBJECT, BUILTIN):
                err(loc, f"unknown entity kind {et.kind!r}")
            if et.kind == BUILTIN and et.name not in BUILTIN_CATALOGS:
                err(loc, f"{et.name!r} is not a builtin type (builtins: {sorted(BUILTIN_CATALOGS)})")
            if et.kind != BUILTIN:
                if et.name in BUILTIN_CATALOGS:
                    err(loc, f"cannot redefine builtin type {et.name!r}")
                if et.name in seen_types:
                    err(loc, f"duplicate entity type name {et.name!r}")
                seen_types.add(et.name)
            if et.kind == CATALOG and not et.catalog:
                err(loc, "catalog-kind type has an empty catalog")
            if et.kind == OBJECT and et.catalog:
                err(loc, "object-kind type must not carry a catalog")
            if len(set(et.catalog)) != len(et.catalog) or any(not v for v in et.catalog):
                err(loc, "catalog entries must be unique, non-empty strings")

        def check_args(args, loc):
            for a in args:
                if bundle.entity_type(a.entity_type) is None:
                    err(loc, f"arg {a.name!r} references undeclared entity type {a.entity_type!r}")

        for api in dom.apis:
            loc = f"{dom.name}.{api.name}"
            if api.name in seen_apis:
                err(loc, f"duplicate API name {api.name!r}")
            seen_apis.add(api.name)
            check_args(api.args, loc)
            if bundle.entity_type(api.return_type) is None:
                err(loc, f"return references undeclared entity type {api.return_type!r}")
            if bundle.response(api.response_template) is None:
                err(loc, f"response template {api.response_template!r} is not defined")

        for resp in dom.response_templates:
            loc = f"{dom.name}.{resp.name}"
            check_args(resp.args, loc)
            if not resp.templates:
                err(loc, "response template needs at least one template string")
            arg_names = {a.name for a in resp.args}
            for t in resp.templates:
                for slot in _slots_of(t):
                    if slot not in arg_names:
                        err(loc, f"template slot {{{slot}}} names no arg of this definition")

        for ut in dom.utterance_templates:
            loc = f"{dom.name} utterance {ut.template!r}"
            n_value_acts = sum(1 for a in ut.acts if a.name == "inform" and a.entity is not None)
            n_slots = len(_slots_of(ut.template))
            if n_slots != n_value_acts:
                err(loc, f"{n_slots} slots but {n_value_acts} entity-bearing acts")
    return diags


def serialize_schema(bundle: SchemaBundle) -> str:
    """Inverse of loads_schema; loads_schema(serialize_schema(b)) == b."""

    def arg_json(a: ArgSpec):
        return {"name": a.name, "type": a.entity_type, "required": a.required}

    doc = {"domains": []}
    for dom in bundle.domains:
        doc["domains"].append(
            {
                "name": dom.name,
                "entity_types": [
                    {"name": e.name, "kind": e.kind, "catalog": list(e.catalog)}
                    for e in dom.entity_types
                ],
                "apis": [
                    {
                        "name": a.name,
                        "args": [arg_json(s) for s in a.args],
                        "return": {"name": a.return_name, "type": a.return_type},
                        "response_template": a.response_template,
                        **({"confirm_before_call": True} if a.confirm_before_call else {}),
                    }
                    for a in dom.apis
                ],
                "response_templates": [
                    {
                        "name": r.name,
                        "args": [arg_json(s) for s in r.args],
                        "acts": [turn_acts_string(list(r.acts))] if r.acts else [],
                        "templates": list(r.templates),
                    }
                    for r in dom.response_templates
                ],
                "utterance_templates": [
                    {"acts": [turn_acts_string(list(u.acts))], "template": u.template}
                    for u in dom.utterance_templates
                ],
            }
        )
    return json.dumps(doc, indent=2)
