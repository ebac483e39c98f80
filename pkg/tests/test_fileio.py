"""Atomic writes, JSON helpers, digests."""
import hashlib
import json

import pytest

from factorfilter.fileio import (
    atomic_write_text,
    read_json,
    sha256_of_bytes,
    sha256_of_file,
    sha256_of_json,
    write_json,
)


def test_atomic_write_replaces_content(tmp_path):
    p = tmp_path / "out.txt"
    atomic_write_text(p, "first\n")
    atomic_write_text(p, "second\n")
    assert p.read_text() == "second\n"
    # no temp files left behind
    assert [f.name for f in tmp_path.iterdir()] == ["out.txt"]


def test_json_round_trip(tmp_path):
    p = tmp_path / "d.json"
    obj = {"b": [1, 2.5, None], "a": {"nested": "x"}}
    write_json(p, obj)
    assert read_json(p) == obj
    # keys are sorted so the bytes are canonical
    text = p.read_text()
    assert text.index('"a"') < text.index('"b"')


def test_sha256_of_bytes_matches_hashlib():
    data = b"factor codes"
    assert sha256_of_bytes(data) == hashlib.sha256(data).hexdigest()


def test_sha256_of_json_is_key_order_invariant():
    a = {"x": 1, "y": [1, 2]}
    b = {"y": [1, 2], "x": 1}
    assert sha256_of_json(a) == sha256_of_json(b)
    assert sha256_of_json(a) != sha256_of_json({"x": 2, "y": [1, 2]})


def test_sha256_of_file(tmp_path):
    p = tmp_path / "blob.bin"
    p.write_bytes(b"\x00\x01\x02" * 1000)
    assert sha256_of_file(p) == hashlib.sha256(p.read_bytes()).hexdigest()
