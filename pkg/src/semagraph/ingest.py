"""CSV ingestion with a content-hash manifest for idempotent loads.

Node files: ``id,labels,<prop>...`` where labels are semicolon-separated
and one column may name blob files (relative to a blob directory); that
column becomes a BLOB-reference property. Relationship files:
``src,tgt,type,<prop>...`` where src/tgt are node-file ids.

Loading the same file twice is a no-op: the manifest remembers content
hashes and the external-id mapping, so re-runs leave the store digest
unchanged.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .database import Database
from .errors import DataError

MANIFEST_FILE = "ingest_manifest.json"


@dataclass
class IngestSpec:
    nodes: list = field(default_factory=list)
    rels: list = field(default_factory=list)
    blob_dir: Optional[str] = None
    blob_column: str = "blob_path"


@dataclass
class IngestReport:
    nodes_created: int = 0
    rels_created: int = 0
    blobs_created: int = 0
    rejected: list = field(default_factory=list)
    skipped_files: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _coerce(cell: str):
    text = cell.strip()
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


class Manifest:
    def __init__(self, db: Database):
        self._path = os.path.join(db.data_dir, MANIFEST_FILE) if db.data_dir else None
        self.hashes: set = set()
        self.id_map: dict = {}
        if self._path and os.path.exists(self._path):
            with open(self._path, encoding="utf-8") as f:
                data = json.load(f)
            self.hashes = set(data.get("hashes", []))
            self.id_map = {k: int(v) for k, v in data.get("id_map", {}).items()}

    def save(self) -> None:
        if self._path is None:
            return
        with open(self._path, "w", encoding="utf-8") as f:
            json.dump({"hashes": sorted(self.hashes), "id_map": self.id_map}, f)


def load(db: Database, spec: IngestSpec) -> IngestReport:
    report = IngestReport()
    manifest = Manifest(db)
    for path in spec.nodes:
        _load_nodes(db, path, spec, manifest, report)
    for path in spec.rels:
        _load_rels(db, path, manifest, report)
    manifest.save()
    return report


def _load_nodes(db: Database, path: str, spec: IngestSpec, manifest: Manifest, report: IngestReport) -> None:
    digest = _file_hash(path)
    if digest in manifest.hashes:
        report.skipped_files.append(path)
        return
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0].strip() != "id" or header[1].strip() != "labels":
            raise DataError(f"{path}: node CSV header must start with 'id,labels'")
        prop_names = [h.strip() for h in header[2:]]
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(header):
                report.rejected.append(f"{path}:{lineno}: expected {len(header)} columns")
                continue
            ext_id = cells[0].strip()
            if ext_id in manifest.id_map:
                report.rejected.append(f"{path}:{lineno}: duplicate id {ext_id!r}")
                continue
            labels = [l for l in cells[1].split(";") if l.strip()]
            props = {}
            bad = False
            for name, cell in zip(prop_names, cells[2:]):
                if name == spec.blob_column:
                    rel_path = cell.strip()
                    if not rel_path:
                        continue
                    blob_path = os.path.join(spec.blob_dir or ".", rel_path)
                    try:
                        with open(blob_path, "rb") as bf:
                            payload = bf.read()
                    except OSError:
                        report.rejected.append(f"{path}:{lineno}: missing blob file {rel_path!r}")
                        bad = True
                        break
                    import mimetypes

                    mime = mimetypes.guess_type(blob_path)[0] or "application/octet-stream"
                    blob_id = db.blobs.put_blob(payload, mime)
                    report.blobs_created += 1
                    from .graph import Value

                    props[name] = Value.blob_ref(blob_id)
                else:
                    value = _coerce(cell)
                    if value is not None:
                        props[name] = value
            if bad:
                continue
            nid = db.store.create_node(labels, props)
            manifest.id_map[ext_id] = nid
            report.nodes_created += 1
    manifest.hashes.add(digest)


def _load_rels(db: Database, path: str, manifest: Manifest, report: IngestReport) -> None:
    digest = _file_hash(path)
    if digest in manifest.hashes:
        report.skipped_files.append(path)
        return
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        expected = ["src", "tgt", "type"]
        if not header or [h.strip() for h in header[:3]] != expected:
            raise DataError(f"{path}: relationship CSV header must start with 'src,tgt,type'")
        prop_names = [h.strip() for h in header[3:]]
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(header):
                report.rejected.append(f"{path}:{lineno}: expected {len(header)} columns")
                continue
            src, tgt = cells[0].strip(), cells[1].strip()
            if src not in manifest.id_map or tgt not in manifest.id_map:
                report.rejected.append(f"{path}:{lineno}: unknown endpoint {src!r} or {tgt!r}")
                continue
            props = {}
            for name, cell in zip(prop_names, cells[3:]):
                value = _coerce(cell)
                if value is not None:
                    props[name] = value
            db.store.create_rel(manifest.id_map[src], manifest.id_map[tgt], cells[2].strip(), props)
            report.rels_created += 1
    manifest.hashes.add(digest)
