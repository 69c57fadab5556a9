"""Built-in function registry: signatures, resolution, and interpretations.

The table is closed but extensible via register(). Signature resolution is a
function of the name and the argument types; eq and coalesce are polymorphic
with their type variable instantiated from the arguments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

from .model import (
    AT_MOST_ONE,
    BoolVal,
    Cardinality,
    ComputedType,
    INT64_MAX,
    INT64_MIN,
    IntVal,
    MANY,
    ONE,
    ObjVal,
    ScalarType,
    StrVal,
    ValueSeq,
)


class ParamModifier(enum.Enum):
    ONE = "1"
    OPT = "?"
    MANY = "*"


MODIFIER_CARD: dict[ParamModifier, Cardinality] = {
    ParamModifier.ONE: ONE,
    ParamModifier.OPT: AT_MOST_ONE,
    ParamModifier.MANY: MANY,
}


@dataclass
class BuiltinSignature:
    name: str
    params: tuple[tuple[ComputedType, ParamModifier], ...]
    result: tuple[ComputedType, Cardinality]


class BuiltinDomainError(Exception):
    """A built-in was applied outside its domain (e.g. integer overflow)."""


@dataclass
class BuiltinSpec:
    name: str
    modifiers: tuple[ParamModifier, ...]
    resolve: Callable[[list[ComputedType]], BuiltinSignature | None]
    run: Callable[[list[ValueSeq]], ValueSeq]


def _checked_int(n: int) -> IntVal:
    if not INT64_MIN <= n <= INT64_MAX:
        raise BuiltinDomainError(f"integer overflow: {n}")
    return IntVal(n)


def _value_eq(a, b) -> bool:
    # Entity identity is the only stable notion across reshaping, so
    # references compare by id; scalars compare structurally.
    if isinstance(a, ObjVal) and isinstance(b, ObjVal):
        return a.id == b.id
    if isinstance(a, ObjVal) or isinstance(b, ObjVal):
        return False
    return a == b


def _sig(name: str, params, result) -> BuiltinSignature:
    return BuiltinSignature(name, tuple(params), result)


def _resolve_count(args: list[ComputedType]) -> BuiltinSignature | None:
    return _sig("count", [(args[0], ParamModifier.MANY)], (ScalarType.INT, ONE))


def _resolve_eq(args: list[ComputedType]) -> BuiltinSignature | None:
    if args[0] != args[1]:
        return None
    return _sig("eq", [(args[0], ParamModifier.ONE), (args[1], ParamModifier.ONE)],
                (ScalarType.BOOL, ONE))


def _resolve_append(args: list[ComputedType]) -> BuiltinSignature | None:
    if args[0] is not ScalarType.STR or args[1] is not ScalarType.STR:
        return None
    return _sig("append", [(ScalarType.STR, ParamModifier.ONE)] * 2, (ScalarType.STR, ONE))


def _resolve_coalesce(args: list[ComputedType]) -> BuiltinSignature | None:
    if args[0] != args[1]:
        return None
    return _sig("coalesce", [(args[0], ParamModifier.OPT), (args[1], ParamModifier.MANY)],
                (args[0], MANY))


def _resolve_any(args: list[ComputedType]) -> BuiltinSignature | None:
    if args[0] is not ScalarType.BOOL:
        return None
    return _sig("any", [(ScalarType.BOOL, ParamModifier.MANY)], (ScalarType.BOOL, ONE))


def _resolve_int_binop(name: str, result: ScalarType):
    def resolve(args: list[ComputedType]) -> BuiltinSignature | None:
        if args[0] is not ScalarType.INT or args[1] is not ScalarType.INT:
            return None
        return _sig(name, [(ScalarType.INT, ParamModifier.ONE)] * 2, (result, ONE))
    return resolve


def _resolve_not(args: list[ComputedType]) -> BuiltinSignature | None:
    if args[0] is not ScalarType.BOOL:
        return None
    return _sig("not", [(ScalarType.BOOL, ParamModifier.ONE)], (ScalarType.BOOL, ONE))


def _run_count(args: list[ValueSeq]) -> ValueSeq:
    return [IntVal(len(args[0]))]


def _run_eq(args: list[ValueSeq]) -> ValueSeq:
    return [BoolVal(_value_eq(args[0][0], args[1][0]))]


def _run_append(args: list[ValueSeq]) -> ValueSeq:
    return [StrVal(args[0][0].value + args[1][0].value)]


def _run_coalesce(args: list[ValueSeq]) -> ValueSeq:
    return list(args[0]) if args[0] else list(args[1])


def _run_any(args: list[ValueSeq]) -> ValueSeq:
    return [BoolVal(any(w.value for w in args[0]))]


def _run_add(args: list[ValueSeq]) -> ValueSeq:
    return [_checked_int(args[0][0].value + args[1][0].value)]


def _run_lt(args: list[ValueSeq]) -> ValueSeq:
    return [BoolVal(args[0][0].value < args[1][0].value)]


def _run_not(args: list[ValueSeq]) -> ValueSeq:
    return [BoolVal(not args[0][0].value)]


REGISTRY: dict[str, BuiltinSpec] = {}


def register(spec: BuiltinSpec) -> None:
    REGISTRY[spec.name] = spec


register(BuiltinSpec("count", (ParamModifier.MANY,), _resolve_count, _run_count))
register(BuiltinSpec("eq", (ParamModifier.ONE, ParamModifier.ONE), _resolve_eq, _run_eq))
register(BuiltinSpec("append", (ParamModifier.ONE, ParamModifier.ONE), _resolve_append, _run_append))
register(BuiltinSpec("coalesce", (ParamModifier.OPT, ParamModifier.MANY), _resolve_coalesce, _run_coalesce))
register(BuiltinSpec("any", (ParamModifier.MANY,), _resolve_any, _run_any))
register(BuiltinSpec("add", (ParamModifier.ONE, ParamModifier.ONE), _resolve_int_binop("add", ScalarType.INT), _run_add))
register(BuiltinSpec("lt", (ParamModifier.ONE, ParamModifier.ONE), _resolve_int_binop("lt", ScalarType.BOOL), _run_lt))
register(BuiltinSpec("not", (ParamModifier.ONE,), _resolve_not, _run_not))
