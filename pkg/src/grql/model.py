"""Core domain model: cardinality modes, labels, values, types, schemas, stores.

Cardinality modes form a semiring over the five intervals
[0,0], [0,1], [0,inf], [1,1], [1,inf]; they bound the length of every
value sequence in the system and drive both static checking and
serialization.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

INF = float("inf")

_LOWER_BOUNDS = (0, 1)
_UPPER_BOUNDS = (0, 1, INF)


@dataclass(frozen=True)
class Cardinality:
    """Interval [lo, hi] with lo in {0,1} and hi in {0,1,inf}, lo <= hi."""

    lo: int
    hi: int | float

    def __post_init__(self) -> None:
        if self.lo not in _LOWER_BOUNDS or self.hi not in _UPPER_BOUNDS:
            raise ValueError(f"bad cardinality bounds [{self.lo},{self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo},{self.hi}]")

    def admits(self, n: int) -> bool:
        return self.lo <= n <= self.hi

    def __str__(self) -> str:
        hi = "inf" if self.hi == INF else str(int(self.hi))
        return f"[{self.lo}, {hi}]"


EMPTY = Cardinality(0, 0)
AT_MOST_ONE = Cardinality(0, 1)
MANY = Cardinality(0, INF)
ONE = Cardinality(1, 1)
AT_LEAST_ONE = Cardinality(1, INF)

ALL_CARDINALITIES = (EMPTY, AT_MOST_ONE, MANY, ONE, AT_LEAST_ONE)


def card_le(a: Cardinality, b: Cardinality) -> bool:
    """Interval containment: a <= b iff every length allowed by a is allowed by b."""
    return b.lo <= a.lo and a.hi <= b.hi


def card_add(a: Cardinality, b: Cardinality) -> Cardinality:
    """Addition: bounds add, rounding back into the legal bound sets."""
    lo = min(1, a.lo + b.lo)
    hi_sum = a.hi + b.hi
    hi = hi_sum if hi_sum <= 1 else INF
    return Cardinality(lo, hi)


def card_mul(a: Cardinality, b: Cardinality) -> Cardinality:
    """Componentwise product with 0 * inf = 0."""
    lo = a.lo * b.lo
    if a.hi == 0 or b.hi == 0:
        hi: int | float = 0
    elif a.hi == INF or b.hi == INF:
        hi = INF
    else:
        hi = a.hi * b.hi
    return Cardinality(lo, hi)


def card_if_join(a: Cardinality, b: Cardinality) -> Cardinality:
    """Interval hull, used to join the modes of conditional branches."""
    return Cardinality(min(a.lo, b.lo), max(a.hi, b.hi))


class LabelKind(enum.Enum):
    OBJECT = "object"
    LINK_PROP = "link_prop"


@dataclass(frozen=True)
class Label:
    """A record label. Link-property labels carry the '@' prefix in their name;
    object labels never do."""

    name: str
    kind: LabelKind

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("empty label name")
        if self.kind is LabelKind.LINK_PROP and not self.name.startswith("@"):
            raise ValueError(f"link property label {self.name!r} must start with '@'")
        if self.kind is LabelKind.OBJECT and self.name.startswith("@"):
            raise ValueError(f"object label {self.name!r} must not start with '@'")

    @property
    def bare(self) -> str:
        """Label name without the '@' prefix (the underlying partition key)."""
        return self.name[1:] if self.name.startswith("@") else self.name

    def __str__(self) -> str:
        return self.name


def olabel(name: str) -> Label:
    return Label(name, LabelKind.OBJECT)


def llabel(name: str) -> Label:
    if not name.startswith("@"):
        name = "@" + name
    return Label(name, LabelKind.LINK_PROP)


def label_for(name: str) -> Label:
    """Classify a surface label name by its '@' prefix."""
    return llabel(name) if name.startswith("@") else olabel(name)


# Type names and entity ids are plain strings; ids are decimal-counter strings
# allocated monotonically per store, unique across the whole store.
TypeName = str
EntityId = str


class ScalarType(enum.Enum):
    INT = "int"
    STR = "str"
    BOOL = "bool"

    def __str__(self) -> str:
        return self.value


INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class IntVal:
    value: int

    def __post_init__(self) -> None:
        if not INT64_MIN <= self.value <= INT64_MAX:
            raise ValueError(f"integer out of 64-bit range: {self.value}")


@dataclass(frozen=True)
class StrVal:
    value: str


@dataclass(frozen=True)
class BoolVal:
    value: bool


ScalarValue = IntVal | StrVal | BoolVal


def scalar_type_of(v: ScalarValue) -> ScalarType:
    match v:
        case BoolVal():
            return ScalarType.BOOL
        case IntVal():
            return ScalarType.INT
        case StrVal():
            return ScalarType.STR
    raise TypeError(f"not a scalar value: {v!r}")


# ---------------------------------------------------------------------------
# Stored types and values (data at rest)

@dataclass(frozen=True)
class StoredRefType:
    """Reference type: target object type plus declared link properties."""

    target: TypeName
    # insertion order is the canonical iteration order
    link_props: tuple[tuple[Label, tuple[ScalarType, Cardinality]], ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for lbl, _ in self.link_props:
            if lbl.kind is not LabelKind.LINK_PROP:
                raise ValueError(f"link property label expected, got {lbl}")
            if lbl in seen:
                raise ValueError(f"duplicate link property {lbl}")
            seen.add(lbl)

    def prop_map(self) -> dict[Label, tuple[ScalarType, Cardinality]]:
        return dict(self.link_props)


StoredType = ScalarType | StoredRefType


@dataclass
class StoredRef:
    """Stored reference value: an entity id plus link-property scalar sequences."""

    id: EntityId
    link_props: dict[Label, list[ScalarValue]] = field(default_factory=dict)


StoredValue = ScalarValue | StoredRef
StoredValueSeq = list[StoredValue]


# ---------------------------------------------------------------------------
# Computed types and values (query results)

@dataclass
class ObjType:
    """Computed reference type: target name plus carried entries."""

    target: TypeName
    entries: dict[Label, tuple[ComputedType, Cardinality]] = field(default_factory=dict)

    def __str__(self) -> str:
        if not self.entries:
            return f"{self.target} {{ }}"
        inner = ", ".join(
            f"{lbl}: {ty} # {m}" for lbl, (ty, m) in self.entries.items()
        )
        return f"{self.target} {{ {inner} }}"


ComputedType = ScalarType | ObjType


def format_type(ty: ComputedType) -> str:
    return str(ty)


@dataclass
class ShapeEntry:
    """One shape-record entry: a visibility mark plus a value sequence.
    Invisible entries are skipped by serialization, nothing else."""

    visible: bool
    values: ValueSeq


@dataclass
class ObjVal:
    """Computed reference value: entity id plus a shape record of carried entries."""

    id: EntityId
    shape: dict[Label, ShapeEntry] = field(default_factory=dict)


ComputedValue = ScalarValue | ObjVal
ValueSeq = list[ComputedValue]


def vis(values: ValueSeq) -> ShapeEntry:
    return ShapeEntry(True, values)


def invis(values: ValueSeq) -> ShapeEntry:
    return ShapeEntry(False, values)


def value_eq(a: ComputedValue, b: ComputedValue) -> bool:
    """Structural equality; for references, ids and shape records must agree
    entry-for-entry including visibility marks."""
    return a == b


def seq_perm_eq(a: ValueSeq, b: ValueSeq) -> bool:
    """True iff a is a permutation of b under structural value equality."""
    if len(a) != len(b):
        return False
    remaining = list(b)
    for x in a:
        for i, y in enumerate(remaining):
            if value_eq(x, y):
                del remaining[i]
                break
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# Schemas and stores

@dataclass
class ObjectTypeDecl:
    """Object type: ordered map from object labels to stored types and modes."""

    labels: dict[Label, tuple[StoredType, Cardinality]] = field(default_factory=dict)


@dataclass
class Schema:
    """Ordered map from type names to object type declarations."""

    types: dict[TypeName, ObjectTypeDecl] = field(default_factory=dict)

    def decl(self, name: TypeName) -> ObjectTypeDecl | None:
        return self.types.get(name)


@dataclass
class StoreTuple:
    type_name: TypeName
    locked: bool
    record: dict[Label, StoredValueSeq]


@dataclass
class Store:
    """The mutable world state, threaded functionally: a map from entity ids
    to tuples, iterated in id-allocation order."""

    tuples: dict[EntityId, StoreTuple] = field(default_factory=dict)

    def get(self, id: EntityId) -> StoreTuple | None:
        return self.tuples.get(id)

    def ids(self) -> list[EntityId]:
        return list(self.tuples)

    def with_tuple(self, id: EntityId, tup: StoreTuple) -> Store:
        """Functional update: a new store with `id` bound to `tup`."""
        new = dict(self.tuples)
        new[id] = tup
        return Store(new)

    def unlock_all(self) -> Store:
        """Fresh store with every edit mark reset to unlocked."""
        return Store(
            {
                i: StoreTuple(t.type_name, False, t.record)
                for i, t in self.tuples.items()
            }
        )

    def max_numeric_id(self) -> int:
        best = 0
        for i in self.tuples:
            try:
                best = max(best, int(i))
            except ValueError:
                continue
        return best


def stored_to_computed_type(ty: StoredType) -> ComputedType:
    """Lift a stored type into a computed type (link properties become
    scalar-typed entries)."""
    if isinstance(ty, StoredRefType):
        return ObjType(ty.target, {lbl: (st, m) for lbl, (st, m) in ty.link_props})
    return ty
