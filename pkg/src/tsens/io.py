"""Loading relations from CSV files listed in a JSON manifest, and writing them back."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DataError
from .relation import Database, Relation, ValueDict, canonicalize

DEFAULT_CNT_COLUMN = "__cnt"


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: Path
    cnt: str = DEFAULT_CNT_COLUMN


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    def to_dict(self, relative_to: Path | None = None) -> dict:
        def show(p: Path) -> str:
            if relative_to is not None:
                try:
                    return str(p.relative_to(relative_to))
                except ValueError:
                    pass
            return str(p)

        return {"relations": [{"name": e.name, "path": show(e.path), "cnt": e.cnt} for e in self.entries]}


def read_text(path: str | Path, what: str = "file") -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{what} not found: {path}") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {what} {path}: {exc}") from None


def parse_manifest(data: object, base_dir: Path) -> Manifest:
    if not isinstance(data, dict) or not isinstance(data.get("relations"), list):
        raise DataError('manifest must be an object with a "relations" list')
    entries, seen = [], set()
    for i, item in enumerate(data["relations"]):
        if not isinstance(item, dict) or not isinstance(item.get("name"), str) or not isinstance(item.get("path"), str):
            raise DataError(f'manifest entry {i} needs string "name" and "path"')
        name = item["name"]
        if name in seen:
            raise DataError(f"relation {name!r} listed twice in the manifest")
        seen.add(name)
        cnt = item.get("cnt", DEFAULT_CNT_COLUMN)
        if not isinstance(cnt, str) or not cnt:
            raise DataError(f'manifest entry {name}: "cnt" must be a non-empty column name')
        path = Path(item["path"])
        entries.append(ManifestEntry(name, path if path.is_absolute() else base_dir / path, cnt))
    return Manifest(tuple(entries))


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        data = json.loads(read_text(path, "manifest"))
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {path} is not valid JSON: {exc}") from None
    return parse_manifest(data, path.parent)


def _parse_cnt(raw: str, where: str) -> int:
    try:
        cnt = int(raw.strip())
    except ValueError:
        raise DataError(f"{where}: count {raw!r} is not an integer") from None
    if cnt < 1:
        raise DataError(f"{where}: count must be positive, got {cnt}")
    return cnt


def read_csv_rows(path: Path, cnt_column: str = DEFAULT_CNT_COLUMN) -> tuple[tuple[str, ...], list]:
    """Header (without the count column) and ``(values, cnt)`` pairs."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            table = list(csv.reader(fh))
    except FileNotFoundError:
        raise DataError(f"CSV file not found: {path}") from None
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"cannot read CSV file {path}: {exc}") from None
    if not table:
        raise DataError(f"{path}: missing header row")
    header, body = table[0], table[1:]
    header = [h.strip() for h in header]
    if not header or any(not h for h in header):
        raise DataError(f"{path}: header has an empty column name")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column in header {header}")
    cnt_pos = header.index(cnt_column) if cnt_column in header else None
    attrs = tuple(h for i, h in enumerate(header) if i != cnt_pos)
    if not attrs:
        raise DataError(f"{path}: no attribute columns")
    rows = []
    for lineno, row in enumerate(body, 2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: {len(row)} fields, header has {len(header)}")
        cnt = 1 if cnt_pos is None else _parse_cnt(row[cnt_pos], f"{path}:{lineno}")
        rows.append((tuple(v for i, v in enumerate(row) if i != cnt_pos), cnt))
    return attrs, rows


def load_database(manifest: Manifest) -> Database:
    """Canonicalize every listed CSV into one database with a shared value dictionary."""
    vdict = ValueDict()
    rels = {}
    for e in manifest.entries:
        attrs, rows = read_csv_rows(e.path, e.cnt)
        rels[e.name] = canonicalize(e.name, attrs, rows, vdict)
    return Database(rels, vdict)


def database_from_inline(relations: Iterable[dict], dictionary: Iterable[str] | None = None) -> Database:
    """Database from ``{"name", "attributes", "rows", "counts"?}`` records (service payloads).

    ``dictionary`` fixes the value-id order up front; ids decide witness
    tie-breaks, so a client that loaded CSVs sends its order along.
    """
    vdict = ValueDict(dictionary or ())
    rels: dict[str, Relation] = {}
    for r in relations:
        name = r["name"]
        if name in rels:
            raise DataError(f"relation {name!r} given twice")
        counts = r.get("counts")
        rows = [tuple(str(v) for v in row) for row in r["rows"]]
        if counts is not None:
            if len(counts) != len(rows):
                raise DataError(f"{name}: {len(counts)} counts for {len(rows)} rows")
            items = [(row, _parse_cnt(str(c), name)) for row, c in zip(rows, counts)]
        else:
            items = rows
        rels[name] = canonicalize(name, r["attributes"], items, vdict)
    return Database(rels, vdict)


def database_to_inline(db: Database) -> list[dict]:
    out = []
    for name in db.relations:
        schema, rows = db.decoded(name)
        out.append(
            {
                "name": name,
                "attributes": list(schema),
                "rows": [list(v) for v in rows],
                "counts": [str(c) for c in rows.values()],
            }
        )
    return out


def export_database(db: Database, directory: str | Path, manifest_name: str = "manifest.json") -> Path:
    """Write one CSV per relation (with a count column) plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in db.relations:
        schema, rows = db.decoded(name)
        path = directory / f"{name}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([*schema, DEFAULT_CNT_COLUMN])
            for values, cnt in rows.items():
                w.writerow([*values, cnt])
        entries.append(ManifestEntry(name, path))
    target = directory / manifest_name
    target.write_text(json.dumps(Manifest(tuple(entries)).to_dict(directory), indent=2) + "\n", encoding="utf-8")
    return target
