"""Shared fixtures: the worked example graph and stub extractors.

The example graph is the eight-node/eight-relationship fixture used all
over the suite: four Person nodes (1, 4, 6, 8), two Teams (2, 5), a Pet
(3) and an Organization (7), wired exactly per the src/tgt/type tables
the storage tests assert on.
"""

from __future__ import annotations

import pytest

from semagraph import Config, Database, Extractor, SemanticKind, SemanticValue
from semagraph.extraction import byte_vector_extractor, text_label_extractor
from semagraph.graph import Value

EXAMPLE_LABELS = {
    1: ("Person",),
    2: ("Team",),
    3: ("Pet",),
    4: ("Person",),
    5: ("Team",),
    6: ("Person",),
    7: ("Organization",),
    8: ("Person",),
}

EXAMPLE_NAMES = {
    1: "Michael Jordan",
    2: "Chicago Bulls",
    3: "Tigger",
    4: "Scott Pippen",
    5: "Gold State Warriors",
    6: "Steve Kerr",
    7: "NBA",
    8: "Dennis Rodman",
}

# (src, tgt, type) for r1..r8
EXAMPLE_RELS = [
    (1, 2, "workFor"),
    (1, 3, "hasPet"),
    (1, 4, "teamMate"),
    (4, 2, "workFor"),
    (6, 5, "coachOf"),
    (5, 7, "belongTo"),
    (2, 7, "belongTo"),
    (1, 8, "teamMate"),
]

# Photo payloads drive the stub extractors: the first byte doubles as the
# jersey number, the first four bytes as the face vector. Nodes 4 and 6
# carry nearly identical faces; node 8 is far away from both.
EXAMPLE_PHOTOS = {
    1: bytes([23, 200, 40, 10]),
    3: b"cat",
    4: bytes([33, 100, 150, 200]),
    6: bytes([33, 102, 148, 201]),
    8: bytes([250, 5, 5, 5]),
}


def jersey_number_extractor(serial: int = 1) -> Extractor:
    return Extractor(
        "jerseyNumber",
        serial,
        SemanticKind.NUMBER,
        lambda payload: SemanticValue.number(payload[0]),
    )


def register_stub_extractors(db: Database) -> None:
    db.extraction.register_extractor(byte_vector_extractor("face", serial=1, dim=4))
    db.extraction.register_extractor(text_label_extractor("animal", serial=1))
    db.extraction.register_extractor(jersey_number_extractor())


def build_example_graph(db: Database) -> Database:
    for nid in range(1, 9):
        props = {"name": EXAMPLE_NAMES[nid]}
        if nid in EXAMPLE_PHOTOS:
            blob_id = db.blobs.put_blob(EXAMPLE_PHOTOS[nid], "image/png")
            props["photo"] = Value.blob_ref(blob_id)
        created = db.store.create_node(EXAMPLE_LABELS[nid], props)
        assert created == nid
    for src, tgt, rel_type in EXAMPLE_RELS:
        db.store.create_rel(src, tgt, rel_type)
    return db


@pytest.fixture
def db():
    instance = Database(in_memory=True)
    yield instance
    instance.close()


@pytest.fixture
def example_db():
    instance = Database(in_memory=True)
    register_stub_extractors(instance)
    build_example_graph(instance)
    yield instance
    instance.close()


@pytest.fixture
def example_db_with_default_face():
    config = Config(blob_compare_sub_key="face")
    instance = Database(config, in_memory=True)
    register_stub_extractors(instance)
    build_example_graph(instance)
    yield instance
    instance.close()
