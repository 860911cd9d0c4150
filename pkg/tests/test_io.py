import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tsens.errors import DataError
from tsens.io import database_from_inline, database_to_inline, export_database, load_database, load_manifest
from tsens.relation import Database


def write(tmp_path, files: dict, relations: list) -> str:
    for name, text in files.items():
        (tmp_path / name).write_text(text, encoding="utf-8")
    (tmp_path / "m.json").write_text(json.dumps({"relations": relations}))
    return tmp_path / "m.json"


def load(tmp_path, text, cnt=None):
    entry = {"name": "R", "path": "r.csv"}
    if cnt:
        entry["cnt"] = cnt
    return load_database(load_manifest(write(tmp_path, {"r.csv": text}, [entry])))


def test_duplicates_merge(tmp_path):
    db = load(tmp_path, "A,B\na1,b1\na1,b1\n")
    assert db.decoded("R") == (("A", "B"), {("a1", "b1"): 2})


def test_count_column_sums(tmp_path):
    db = load(tmp_path, "A,__cnt\na1,2\na1,3\n")
    assert db.decoded("R") == (("A",), {("a1",): 5})


def test_custom_count_column(tmp_path):
    db = load(tmp_path, "n,A\n4,a1\n", cnt="n")
    assert db.decoded("R") == (("A",), {("a1",): 4})


def test_header_only(tmp_path):
    db = load(tmp_path, "A,B\n")
    assert len(db["R"]) == 0 and db["R"].schema == ("A", "B")


def test_shared_dictionary(tmp_path):
    path = write(
        tmp_path,
        {"r.csv": "A\nx\n", "s.csv": "B\nx\ny\n"},
        [{"name": "R", "path": "r.csv"}, {"name": "S", "path": "s.csv"}],
    )
    db = load_database(load_manifest(path))
    assert db["R"].rows.keys() <= db["S"].rows.keys()


@pytest.mark.parametrize(
    "text",
    [
        "",  # no header
        "A,,B\n",  # empty column name
        "A,A\n",  # duplicate column
        "A,__cnt\na,0\n",  # non-positive count
        "A,__cnt\na,x\n",  # non-integer count
        "A,B\na1,b1\na2\n",  # arity drift
        "__cnt\n1\n",  # no attribute columns
    ],
)
def test_bad_csv(tmp_path, text):
    with pytest.raises(DataError):
        load(tmp_path, text)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_database(load_manifest(write(tmp_path, {}, [{"name": "R", "path": "nope.csv"}])))


def test_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        load_manifest(tmp_path / "absent.json")


@pytest.mark.parametrize(
    "data",
    ["[]", '{"relations": [{"name": "R"}]}', '{"relations": [{"name":"R","path":"a"},{"name":"R","path":"b"}]}', "{"],
)
def test_bad_manifest(tmp_path, data):
    (tmp_path / "m.json").write_text(data)
    with pytest.raises(DataError):
        load_manifest(tmp_path / "m.json")


values = st.text(alphabet="ab,\"' x\n", min_size=0, max_size=4)
relations = st.lists(st.tuples(st.tuples(values, values), st.integers(1, 5)), max_size=6)


@given(relations, relations)
def test_round_trip(tmp_path_factory, r, s):
    db = Database.from_rows({"R": (("A", "B"), r), "S": (("B", "C"), s)})
    out = tmp_path_factory.mktemp("rt")
    again = load_database(load_manifest(export_database(db, out)))
    assert again == db
    assert load_database(load_manifest(export_database(again, out))) == db


def test_inline_round_trip(path4):
    db, _ = path4
    assert database_from_inline(database_to_inline(db)) == db


def test_inline_count_mismatch():
    with pytest.raises(DataError):
        database_from_inline([{"name": "R", "attributes": ["A"], "rows": [["a"]], "counts": [1, 2]}])
