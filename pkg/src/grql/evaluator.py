"""Big-step evaluator with the (env; init store; store-before -> store-after)
judgment.

Reads (names, projections, backlinks) resolve against the store that existed
when evaluation started; writes accumulate in the current store, which is
threaded functionally left-to-right. Every sequence-producing step is only
determined up to permutation: with no seed the evaluator uses the canonical
order (concatenation order, store iteration in id-allocation order); with a
seed each such step applies a seeded pseudo-random permutation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import core
from .builtins import REGISTRY, BuiltinDomainError, BuiltinSignature
from .model import (
    BoolVal,
    ComputedValue,
    EntityId,
    Label,
    ObjVal,
    ScalarValue,
    ScalarType,
    Schema,
    ShapeEntry,
    Store,
    StoreTuple,
    StoredRef,
    StoredType,
    StoredValueSeq,
    TypeName,
    ValueSeq,
    invis,
    scalar_type_of,
    vis,
)

Environment = dict[str, ValueSeq]

FAULT_KINDS = (
    "UnboundVar", "MissingLabel", "NotARef", "BuiltinDomain", "Stuck",
    "IncomparableKeys", "MissingLinkProp",
)


class EvalFault(Exception):
    def __init__(self, kind: str, message: str):
        assert kind in FAULT_KINDS
        super().__init__(message)
        self.kind = kind
        self.message = message

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


class IdAllocator:
    """Monotone decimal-string id source, seeded past everything in a store."""

    def __init__(self, next_id: int = 1):
        self.next_id = next_id

    @classmethod
    def for_store(cls, store: Store, floor: int = 1) -> IdAllocator:
        return cls(max(store.max_numeric_id() + 1, floor))

    def allocate(self) -> EntityId:
        out = str(self.next_id)
        self.next_id += 1
        return out


@dataclass
class EvalConfig:
    permutation_seed: int | None = None
    dedup_projections: bool = False  # False reproduces the formal semantics
    id_allocator: IdAllocator = field(default_factory=IdAllocator)


@dataclass
class EvalOutcome:
    result: ValueSeq
    store_after: Store


def project(init_store: Store, label: Label, w: ComputedValue) -> ValueSeq:
    """Project a label from an object value, preferring the carried entry
    (whatever its visibility) and falling back to the initial store."""
    if not isinstance(w, ObjVal):
        raise EvalFault("NotARef", f"cannot project {label} from a scalar")
    entry = w.shape.get(label)
    if entry is not None:
        return entry.values
    tup = init_store.get(w.id)
    if tup is None or label not in tup.record:
        raise EvalFault("MissingLabel", f"no stored value for {label} on id {w.id}")
    return [_stored_to_computed(v) for v in tup.record[label]]


def _stored_to_computed(v) -> ComputedValue:
    if isinstance(v, StoredRef):
        return ObjVal(v.id, {lbl: vis(list(seq)) for lbl, seq in v.link_props.items()})
    return v


def seek(init_store: Store, type_name: TypeName, label: Label, target: EntityId) -> ValueSeq:
    """Reverse lookup: sources of the given type whose label links to the
    target id, each carrying that link's properties; one result per distinct
    (source, link-property record) pair."""
    out: ValueSeq = []
    for src_id, tup in init_store.tuples.items():
        if tup.type_name != type_name:
            continue
        seq = tup.record.get(label)
        if seq is None:
            continue
        seen: list[dict] = []
        for v in seq:
            if isinstance(v, StoredRef) and v.id == target:
                if any(v.link_props == prev for prev in seen):
                    continue
                seen.append(v.link_props)
                out.append(
                    ObjVal(src_id, {lbl: invis(list(s)) for lbl, s in v.link_props.items()})
                )
    return out


def record_extend(w: ComputedValue, shape: dict[Label, ShapeEntry]) -> ComputedValue:
    """Right-biased record extension: new entries win and come first in shape
    order; surviving old entries follow in their prior order, made invisible."""
    if not isinstance(w, ObjVal):
        raise EvalFault("NotARef", "only objects can be shaped")
    merged: dict[Label, ShapeEntry] = dict(shape)
    for lbl, entry in w.shape.items():
        if lbl not in merged:
            merged[lbl] = invis(entry.values)
    return ObjVal(w.id, merged)


def strip_for_storage(vals: ValueSeq, ty: StoredType) -> StoredValueSeq:
    """Strip computed values down to storable form: scalars pass through,
    references keep their id and exactly the declared link properties."""
    return [_strip_value(w, ty) for w in vals]


def _strip_value(w: ComputedValue, ty: StoredType):
    if isinstance(ty, ScalarType):
        if isinstance(w, ObjVal):
            raise EvalFault("Stuck", "reference where a scalar was expected")
        return w
    if not isinstance(w, ObjVal):
        raise EvalFault("Stuck", "scalar where a reference was expected")
    props: dict[Label, list[ScalarValue]] = {}
    for plbl, (_pty, pcard) in ty.link_props:
        entry = w.shape.get(plbl)
        if entry is None:
            if pcard.lo != 0:
                raise EvalFault(
                    "MissingLinkProp", f"value for id {w.id} carries no {plbl} entry"
                )
            props[plbl] = []
            continue
        seq: list[ScalarValue] = []
        for x in entry.values:
            if isinstance(x, ObjVal):
                raise EvalFault("Stuck", f"link property {plbl} holds a reference")
            seq.append(x)
        props[plbl] = seq
    return StoredRef(w.id, props)


def run_builtin(name: str, sig: BuiltinSignature | None, args: list[ValueSeq]) -> ValueSeq:
    """Interpret a built-in application whose arguments satisfy the signature's
    parameter modifiers (validated when the signature is given)."""
    spec = REGISTRY[name]
    if sig is not None:
        from .builtins import MODIFIER_CARD

        for i, (_, mod) in enumerate(sig.params):
            if not MODIFIER_CARD[mod].admits(len(args[i])):
                raise EvalFault("Stuck", f"argument {i + 1} of {name} outside its modifier")
    try:
        return spec.run(args)
    except BuiltinDomainError as exc:
        raise EvalFault("BuiltinDomain", str(exc)) from None


def order_by_keys(pairs: list[tuple[ComputedValue, ValueSeq]]) -> ValueSeq:
    """Stable sort of values by their key sequences; an empty key sorts before
    every nonempty key."""
    kinds = set()
    for _, key in pairs:
        if len(key) > 1:
            raise EvalFault("IncomparableKeys", "order key produced more than one value")
        if key:
            if isinstance(key[0], ObjVal):
                raise EvalFault("IncomparableKeys", "order keys must be scalars")
            kinds.add(scalar_type_of(key[0]))
    if len(kinds) > 1:
        raise EvalFault("IncomparableKeys", "order keys mix scalar types")
    decorated = [((0,) if not key else (1, key[0].value), i, w)
                 for i, (w, key) in enumerate(pairs)]
    decorated.sort(key=lambda item: (item[0], item[1]))
    return [w for _, _, w in decorated]


class Evaluator:
    """One evaluation session: fixed schema, config, and initial store."""

    def __init__(self, schema: Schema, config: EvalConfig, init_store: Store):
        self.schema = schema
        self.config = config
        self.init = init_store
        self.rng = (
            random.Random(config.permutation_seed)
            if config.permutation_seed is not None
            else None
        )

    def permute(self, vals: ValueSeq) -> ValueSeq:
        if self.rng is not None and len(vals) > 1:
            vals = list(vals)
            self.rng.shuffle(vals)
        return vals

    def _dedup(self, vals: ValueSeq) -> ValueSeq:
        if not self.config.dedup_projections:
            return vals
        out: ValueSeq = []
        seen_ids: set[EntityId] = set()
        for w in vals:
            if isinstance(w, ObjVal):
                if w.id in seen_ids:
                    continue
                seen_ids.add(w.id)
            out.append(w)
        return out

    def run(self, env: Environment, store: Store, e: core.Expr) -> tuple[ValueSeq, Store]:
        match e:
            case core.Var(name=n):
                if n not in env:
                    raise EvalFault("UnboundVar", f"unbound variable {n!r}")
                return env[n], store

            case core.Prim(value=v):
                return [v], store

            case core.Empty():
                return [], store

            case core.Union(left=a, right=b):
                wa, store = self.run(env, store, a)
                wb, store = self.run(env, store, b)
                return self.permute(wa + wb), store

            case core.Name(type_name=n):
                refs: ValueSeq = [
                    ObjVal(id, {})
                    for id, tup in self.init.tuples.items()
                    if tup.type_name == n
                ]
                return self.permute(refs), store

            case core.Proj(subject=subj, label=lbl):
                ws, store = self.run(env, store, subj)
                out: ValueSeq = []
                for w in ws:
                    out.extend(project(self.init, lbl, w))
                return self.permute(self._dedup(out)), store

            case core.Backlink(subject=subj, label=lbl, type_name=n):
                ws, store = self.run(env, store, subj)
                out = []
                for w in ws:
                    if not isinstance(w, ObjVal):
                        raise EvalFault("NotARef", "backlink subject must be an object")
                    out.extend(seek(self.init, n, lbl, w.id))
                return self.permute(self._dedup(out)), store

            case core.Shaping(subject=subj, binder=x, shape=shape):
                ws, store = self.run(env, store, subj)
                out = []
                for w in ws:
                    inner = {**env, x: [w]}
                    record: dict[Label, ShapeEntry] = {}
                    for lbl, expr in shape:
                        vals, store = self.run(inner, store, expr)
                        record[lbl] = vis(vals)
                    out.append(record_extend(w, record))
                return out, store

            case core.Call(fn=fn, args=args):
                arg_vals = []
                for a in args:
                    vals, store = self.run(env, store, a)
                    arg_vals.append(vals)
                spec = REGISTRY.get(fn)
                if spec is None:
                    raise EvalFault("Stuck", f"unknown builtin {fn!r}")
                result = run_builtin(fn, None, arg_vals)
                return self.permute(result), store

            case core.If(cond=c, then_branch=t, else_branch=f):
                wc, store = self.run(env, store, c)
                if len(wc) != 1 or not isinstance(wc[0], BoolVal):
                    raise EvalFault("Stuck", "condition did not produce a single boolean")
                branch = t if wc[0].value else f
                return self.run(env, store, branch)

            case core.With(bound=bd, binder=x, body=b):
                vals, store = self.run(env, store, bd)
                return self.run({**env, x: vals}, store, b)

            case core.For(source=src, binder=x, body=b):
                ws, store = self.run(env, store, src)
                out = []
                for w in ws:
                    vals, store = self.run({**env, x: [w]}, store, b)
                    out.extend(vals)
                return self.permute(out), store

            case core.OrderBy(source=src, binder=x, key=k):
                ws, store = self.run(env, store, src)
                pairs = []
                for w in ws:
                    key_vals, store = self.run({**env, x: [w]}, store, k)
                    pairs.append((w, key_vals))
                return order_by_keys(pairs), store

            case core.Insert(type_name=n, shape=shape):
                decl = self.schema.decl(n)
                if decl is None:
                    raise EvalFault("Stuck", f"unknown type {n!r}")
                computed: dict[Label, ValueSeq] = {}
                for lbl, expr in shape:
                    vals, store = self.run(env, store, expr)
                    computed[lbl] = vals
                record: dict[Label, StoredValueSeq] = {}
                for lbl, (sty, _) in decl.labels.items():
                    record[lbl] = strip_for_storage(computed[lbl], sty)
                id = self.config.id_allocator.allocate()
                assert self.init.get(id) is None and store.get(id) is None, "id not fresh"
                store = store.with_tuple(id, StoreTuple(n, True, record))
                shape_rec = {lbl: invis(computed[lbl]) for lbl in decl.labels}
                return [ObjVal(id, shape_rec)], store

            case core.Update(subject=subj, binder=x, shape=shape):
                ws, store = self.run(env, store, subj)
                if len(ws) != 1 or not isinstance(ws[0], ObjVal):
                    raise EvalFault("Stuck", "update subject did not produce a single object")
                w = ws[0]
                inner = {**env, x: [w]}
                computed = {}
                for lbl, expr in shape:
                    vals, store = self.run(inner, store, expr)
                    computed[lbl] = vals
                tup = store.get(w.id)
                if tup is None or tup.locked:
                    # absent or already edited this query: the update is a no-op
                    return [], store
                decl = self.schema.decl(tup.type_name)
                if decl is None:
                    raise EvalFault("Stuck", f"unknown type {tup.type_name!r}")
                record = dict(tup.record)
                for lbl, _ in shape:
                    sty, _card = decl.labels[lbl]
                    record[lbl] = strip_for_storage(computed[lbl], sty)
                store = store.with_tuple(w.id, StoreTuple(tup.type_name, True, record))
                return [ObjVal(w.id, {lbl: invis(computed[lbl]) for lbl, _ in shape})], store

        raise TypeError(f"unknown core node {e!r}")


def evaluate(
    schema: Schema,
    config: EvalConfig,
    env: Environment,
    init_store: Store,
    cur_store: Store,
    e: core.Expr,
) -> EvalOutcome:
    """Evaluate a core expression; raises EvalFault on the (statically
    unreachable) stuck cases and on built-in domain errors."""
    result, after = Evaluator(schema, config, init_store).run(env, cur_store, e)
    return EvalOutcome(result, after)
