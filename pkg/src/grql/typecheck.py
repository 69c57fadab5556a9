"""Type-and-cardinality synthesis for core expressions.

synth is a total, deterministic decision procedure: given a well-formed
schema, a context, and a core expression it either returns the unique
(type, cardinality) pair or raises TypeCheckError with one of the documented
codes.
"""

from __future__ import annotations

from . import core
from .builtins import MODIFIER_CARD, REGISTRY, BuiltinSignature
from .model import (
    AT_MOST_ONE,
    Cardinality,
    ComputedType,
    Label,
    LabelKind,
    MANY,
    ONE,
    ObjType,
    ScalarType,
    Schema,
    StoredRefType,
    StoredType,
    card_add,
    card_if_join,
    card_le,
    card_mul,
    scalar_type_of,
    stored_to_computed_type,
)
from .surface import Span

Context = dict[str, tuple[ComputedType, Cardinality]]

ERROR_CODES = (
    "UnboundVar", "UnknownName", "NoSuchLabel", "NotAnObject",
    "CardinalityExceeded", "NoSignature", "StoreTypeMismatch",
    "BranchTypeMismatch", "KeyNotOptionalSingle", "BadUpdateSubject",
)


class TypeCheckError(Exception):
    def __init__(self, code: str, message: str, span: Span | None = None):
        assert code in ERROR_CODES
        super().__init__(message)
        self.code = code
        self.message = message
        self.span = span

    def __str__(self) -> str:
        if self.span is not None:
            return f"{self.code} at {self.span[0]}..{self.span[1]}: {self.message}"
        return f"{self.code}: {self.message}"


def resolve_builtin(name: str, arg_types: list[ComputedType]) -> BuiltinSignature:
    """The unique signature for this name and argument type sequence."""
    spec = REGISTRY.get(name)
    if spec is None or len(arg_types) != len(spec.modifiers):
        raise TypeCheckError("NoSignature", f"no signature for {name}/{len(arg_types)}")
    sig = spec.resolve(arg_types)
    if sig is None:
        shown = ", ".join(str(t) for t in arg_types)
        raise TypeCheckError("NoSignature", f"no signature for {name}({shown})")
    return sig


def extend_type(base: ObjType, new: list[tuple[Label, tuple[ComputedType, Cardinality]]]) -> ObjType:
    """Right-biased record extension on object types: new entries win, in
    shape order; surviving old entries follow in their prior order."""
    entries: dict[Label, tuple[ComputedType, Cardinality]] = dict(new)
    for lbl, item in base.entries.items():
        if lbl not in entries:
            entries[lbl] = item
    return ObjType(base.target, entries)


def _validate_annotation(schema: Schema, ty: ComputedType, span: Span | None) -> None:
    if isinstance(ty, ObjType):
        if schema.decl(ty.target) is None:
            raise TypeCheckError("UnknownName", f"unknown type {ty.target!r} in annotation", span)
        for ety, _ in ty.entries.values():
            _validate_annotation(schema, ety, span)


def synth(schema: Schema, ctx: Context, e: core.Expr) -> tuple[ComputedType, Cardinality]:
    match e:
        case core.Var(name=n):
            if n not in ctx:
                raise TypeCheckError("UnboundVar", f"unbound variable {n!r}", e.span)
            return ctx[n]

        case core.Prim(value=v):
            return scalar_type_of(v), ONE

        case core.Empty(ty=ty, of_var=var):
            if ty is None:
                if var not in ctx:
                    raise TypeCheckError("UnboundVar", f"unbound variable {var!r}", e.span)
                return ctx[var][0], Cardinality(0, 0)
            _validate_annotation(schema, ty, e.span)
            return ty, Cardinality(0, 0)

        case core.Union(left=a, right=b):
            ta, ma = synth(schema, ctx, a)
            tb, mb = synth(schema, ctx, b)
            if ta != tb:
                raise TypeCheckError(
                    "BranchTypeMismatch", f"union operands have different types: {ta} vs {tb}", e.span
                )
            return ta, card_add(ma, mb)

        case core.Name(type_name=n):
            if schema.decl(n) is None:
                raise TypeCheckError("UnknownName", f"unknown type {n!r}", e.span)
            return ObjType(n, {}), MANY

        case core.Proj(subject=subj, label=lbl):
            tsubj, msubj = synth(schema, ctx, subj)
            if not isinstance(tsubj, ObjType):
                raise TypeCheckError("NotAnObject", f"cannot project {lbl} from {tsubj}", e.span)
            if lbl in tsubj.entries:
                ety, ecard = tsubj.entries[lbl]
                return ety, card_mul(ecard, msubj)
            decl = schema.decl(tsubj.target)
            if decl is None or lbl not in decl.labels:
                raise TypeCheckError(
                    "NoSuchLabel", f"{tsubj.target} has no label {lbl}", e.span
                )
            sty, scard = decl.labels[lbl]
            return stored_to_computed_type(sty), card_mul(scard, msubj)

        case core.Backlink(subject=subj, label=lbl, type_name=n):
            decl = schema.decl(n)
            if decl is None:
                raise TypeCheckError("UnknownName", f"unknown type {n!r}", e.span)
            if lbl not in decl.labels:
                raise TypeCheckError("NoSuchLabel", f"{n} has no link {lbl}", e.span)
            sty, _ = decl.labels[lbl]
            if not isinstance(sty, StoredRefType):
                raise TypeCheckError("NoSuchLabel", f"{n}.{lbl} is a property, not a link", e.span)
            tsubj, _ = synth(schema, ctx, subj)
            if not isinstance(tsubj, ObjType):
                raise TypeCheckError("NotAnObject", "backlink subject must be an object", e.span)
            if tsubj.target != sty.target:
                raise TypeCheckError(
                    "StoreTypeMismatch",
                    f"backlink subject is {tsubj.target}, but {n}.{lbl} targets {sty.target}",
                    e.span,
                )
            entries = {plbl: (pty, pcard) for plbl, (pty, pcard) in sty.link_props}
            return ObjType(n, entries), MANY

        case core.Shaping(subject=subj, binder=x, shape=shape):
            tsubj, msubj = synth(schema, ctx, subj)
            if not isinstance(tsubj, ObjType):
                raise TypeCheckError("NotAnObject", "only objects can be shaped", e.span)
            inner = {**ctx, x: (tsubj, ONE)}
            new_entries = []
            for lbl, expr in shape:
                ety, ecard = synth(schema, inner, expr)
                new_entries.append((lbl, (ety, ecard)))
            return extend_type(tsubj, new_entries), msubj

        case core.Call(fn=fn, args=args):
            arg_results = [synth(schema, ctx, a) for a in args]
            sig = resolve_builtin(fn, [t for t, _ in arg_results])
            for i, ((_, m), (_, mod)) in enumerate(zip(arg_results, sig.params)):
                bound = MODIFIER_CARD[mod]
                if not card_le(m, bound):
                    raise TypeCheckError(
                        "CardinalityExceeded",
                        f"argument {i + 1} of {fn} has cardinality {m}, not within {bound}",
                        e.span,
                    )
            return sig.result

        case core.If(cond=c, then_branch=t, else_branch=f):
            tc, mc = synth(schema, ctx, c)
            if tc is not ScalarType.BOOL:
                raise TypeCheckError("BranchTypeMismatch", f"condition must be bool, got {tc}", e.span)
            if mc != ONE:
                raise TypeCheckError(
                    "CardinalityExceeded", f"condition must have cardinality [1, 1], got {mc}", e.span
                )
            tt, mt = synth(schema, ctx, t)
            tf, mf = synth(schema, ctx, f)
            if tt != tf:
                raise TypeCheckError(
                    "BranchTypeMismatch", f"branches have different types: {tt} vs {tf}", e.span
                )
            return tt, card_if_join(mt, mf)

        case core.With(bound=bd, binder=x, body=b):
            tb, mb = synth(schema, ctx, bd)
            return synth(schema, {**ctx, x: (tb, mb)}, b)

        case core.For(source=src, binder=x, body=b):
            ts, ms = synth(schema, ctx, src)
            tbody, mbody = synth(schema, {**ctx, x: (ts, ONE)}, b)
            return tbody, card_mul(ms, mbody)

        case core.OrderBy(source=src, binder=x, key=k):
            ts, ms = synth(schema, ctx, src)
            tkey, mkey = synth(schema, {**ctx, x: (ts, ONE)}, k)
            if not isinstance(tkey, ScalarType) or not card_le(mkey, AT_MOST_ONE):
                raise TypeCheckError(
                    "KeyNotOptionalSingle",
                    f"order key must be an optional single scalar, got {tkey} # {mkey}",
                    e.span,
                )
            return ts, ms

        case core.Insert(type_name=n, shape=shape):
            decl = schema.decl(n)
            if decl is None:
                raise TypeCheckError("UnknownName", f"unknown type {n!r}", e.span)
            provided = {lbl for lbl, _ in shape}
            for lbl in provided:
                if lbl.kind is not LabelKind.OBJECT or lbl not in decl.labels:
                    raise TypeCheckError("NoSuchLabel", f"{n} has no label {lbl}", e.span)
            missing = [str(lbl) for lbl in decl.labels if lbl not in provided]
            if missing:
                raise TypeCheckError(
                    "StoreTypeMismatch",
                    f"insert must give every label of {n}; missing {', '.join(missing)}",
                    e.span,
                )
            by_label = dict(shape)
            entries = {}
            for lbl, (sty, scard) in decl.labels.items():
                ety = check_against_stored(schema, ctx, by_label[lbl], sty, scard)
                entries[lbl] = (ety, scard)
            return ObjType(n, entries), ONE

        case core.Update(subject=subj, binder=x, shape=shape):
            tsubj, msubj = synth(schema, ctx, subj)
            if not isinstance(tsubj, ObjType) or msubj != ONE:
                raise TypeCheckError(
                    "BadUpdateSubject",
                    f"update subject must be a single object, got {tsubj} # {msubj}",
                    e.span,
                )
            decl = schema.decl(tsubj.target)
            if decl is None:
                raise TypeCheckError("UnknownName", f"unknown type {tsubj.target!r}", e.span)
            inner = {**ctx, x: (tsubj, ONE)}
            entries = {}
            for lbl, expr in shape:
                if lbl.kind is not LabelKind.OBJECT or lbl not in decl.labels:
                    raise TypeCheckError("NoSuchLabel", f"{tsubj.target} has no label {lbl}", e.span)
                sty, scard = decl.labels[lbl]
                ety = check_against_stored(schema, inner, expr, sty, scard)
                entries[lbl] = (ety, scard)
            return ObjType(tsubj.target, entries), AT_MOST_ONE

    raise TypeError(f"unknown core node {e!r}")


def check_against_stored(
    schema: Schema,
    ctx: Context,
    e: core.Expr,
    ty: StoredType,
    m: Cardinality,
) -> ComputedType:
    """Check an expression against a stored type and mode (the insert/update
    auxiliary judgment); returns the synthesized computed type."""
    te, me = synth(schema, ctx, e)
    if not card_le(me, m):
        raise TypeCheckError(
            "CardinalityExceeded", f"expression has cardinality {me}, not within {m}", e.span
        )
    if isinstance(ty, ScalarType):
        if te is not ty:
            raise TypeCheckError("StoreTypeMismatch", f"expected {ty}, got {te}", e.span)
        return te

    if not isinstance(te, ObjType) or te.target != ty.target:
        raise TypeCheckError(
            "StoreTypeMismatch", f"expected a reference to {ty.target}, got {te}", e.span
        )
    for plbl, (pty, pcard) in ty.link_props:
        if plbl in te.entries:
            ety, ecard = te.entries[plbl]
            if ety is not pty:
                raise TypeCheckError(
                    "StoreTypeMismatch", f"link property {plbl} must be {pty}, got {ety}", e.span
                )
            if not card_le(ecard, pcard):
                raise TypeCheckError(
                    "CardinalityExceeded",
                    f"link property {plbl} has cardinality {ecard}, not within {pcard}",
                    e.span,
                )
        elif pcard.lo != 0:
            raise TypeCheckError(
                "StoreTypeMismatch",
                f"required link property {plbl} is not carried by the value", e.span,
            )
    return te
