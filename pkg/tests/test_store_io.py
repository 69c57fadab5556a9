"""Snapshot load/save: validation, round-trips, and the shipped seed data."""

import json

import pytest

from grql.model import IntVal, StoredRef, StrVal, llabel, olabel
from grql.store_io import (
    SnapshotError,
    load_seed,
    load_snapshot,
    save_snapshot,
    seed_snapshot_text,
)

NAME, AGE, BORN = olabel("name"), olabel("age"), olabel("born")
CHAR = llabel("character")


def test_seed_snapshot_contents():
    snap = load_seed()
    assert set(snap.schema.types) == {"Person", "Movie"}
    movies = [t for t in snap.store.tuples.values() if t.type_name == "Movie"]
    people = [t for t in snap.store.tuples.values() if t.type_name == "Person"]
    assert len(movies) == 3 and len(people) == 7
    assert snap.next_id == 12
    tr = snap.store.tuples["7"]
    assert tr.record[olabel("title")] == [StrVal("Transistors")]
    assert tr.record[olabel("actors")][0] == StoredRef("2", {CHAR: [StrVal("Meg Tech")]})
    assert snap.store.tuples["11"].record[NAME] == [StrVal("Christopher Nolens")]
    assert snap.store.tuples["1"].record[AGE] == [IntVal(60)]
    # marks normalize to unlocked on load
    assert not any(t.locked for t in snap.store.tuples.values())


def test_round_trip_identity():
    snap = load_seed()
    text = save_snapshot(snap.schema_text, snap.store, snap.next_id)
    again = load_snapshot(text)
    assert again.store == snap.store
    assert again.schema == snap.schema
    assert again.next_id == snap.next_id


def test_save_is_byte_deterministic():
    snap = load_seed()
    a = save_snapshot(snap.schema_text, snap.store, snap.next_id)
    b = save_snapshot(snap.schema_text, snap.store, snap.next_id)
    assert a == b
    # and the shipped file is exactly what save produces
    assert a == seed_snapshot_text()


def test_save_after_insert_round_trips():
    from grql.desugar import desugar
    from grql.evaluator import EvalConfig, IdAllocator, evaluate
    from grql.parser import parse_query
    from grql.typecheck import synth

    snap = load_seed()
    expr = desugar(parse_query(
        'insert Person { name := "New", age := 1, born := <str>{} }'))
    synth(snap.schema, {}, expr)
    cfg = EvalConfig(id_allocator=IdAllocator(snap.next_id))
    out = evaluate(snap.schema, cfg, {}, snap.store, snap.store, expr)
    text = save_snapshot(snap.schema_text, out.store_after.unlock_all(), cfg.id_allocator.next_id)
    again = load_snapshot(text)
    assert again.store.tuples["12"].record[NAME] == [StrVal("New")]
    assert again.next_id == 13


def test_empty_store_round_trips():
    from grql.model import Store

    text = save_snapshot("type Person { required name: str; };", Store(), 1)
    snap = load_snapshot(text)
    assert snap.store.tuples == {}


def test_duplicate_id_rejected():
    doc = json.loads(seed_snapshot_text())
    doc["entities"].append(dict(doc["entities"][0]))
    with pytest.raises(SnapshotError) as err:
        load_snapshot(json.dumps(doc))
    assert any(d.code == "DuplicateId" for d in err.value.diagnostics)


def test_cardinality_violation_rejected():
    doc = json.loads(seed_snapshot_text())
    for ent in doc["entities"]:
        if ent["id"] == "7":
            ent["fields"]["directors"] = []
    with pytest.raises(SnapshotError) as err:
        load_snapshot(json.dumps(doc))
    assert any(d.code == "CardinalityViolation" for d in err.value.diagnostics)


def test_version_field_required():
    with pytest.raises(SnapshotError):
        load_snapshot("{}")
    with pytest.raises(SnapshotError):
        load_snapshot('{"v": 2, "schema": "", "entities": []}')
    with pytest.raises(SnapshotError):
        load_snapshot("not json at all")


def test_schema_errors_reported():
    bad = {"v": 1, "schema": "type T { x: Ghost; };", "entities": [], "nextId": 1}
    with pytest.raises(SnapshotError) as err:
        load_snapshot(json.dumps(bad))
    assert any(d.code == "UndefinedTypeName" for d in err.value.diagnostics)


def test_boolean_cells_not_confused_with_ints():
    doc = {
        "v": 1,
        "schema": "type T { flag: bool; n: int64; };",
        "nextId": 2,
        "entities": [
            {"id": "1", "type": "T", "fields": {"flag": [True], "n": [1]}},
        ],
    }
    snap = load_snapshot(json.dumps(doc))
    from grql.model import BoolVal

    rec = snap.store.tuples["1"].record
    assert rec[olabel("flag")] == [BoolVal(True)]
    assert rec[olabel("n")] == [IntVal(1)]
    # an int where a bool is declared is a type mismatch, not a coercion
    doc["entities"][0]["fields"]["flag"] = [1]
    with pytest.raises(SnapshotError) as err:
        load_snapshot(json.dumps(doc))
    assert any(d.code == "ValueTypeMismatch" for d in err.value.diagnostics)


def test_next_id_advances_past_numeric_ids():
    doc = json.loads(seed_snapshot_text())
    doc["nextId"] = 2  # stale counter: ids go up to 11
    snap = load_snapshot(json.dumps(doc))
    assert snap.next_id == 12


def test_repo_root_copy_matches_packaged_seed():
    from pathlib import Path

    root_copy = Path(__file__).parent.parent / "movies.grdb.json"
    assert root_copy.read_text(encoding="utf-8") == seed_snapshot_text()
