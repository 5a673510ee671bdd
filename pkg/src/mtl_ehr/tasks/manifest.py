"""Versioned label-space manifest.

Ingested data binds its string labels to class indices through this file,
so a model trained on synthetic data and one trained on ingested data agree
on what output unit ``k`` of each decoder means.
"""
from __future__ import annotations

import json
from importlib import resources

from ..errors import SchemaError
from ..schema import (
    ACUITY_NAMES,
    CHANNEL_NAMES,
    DISCHARGE_NAMES,
    FTS_NAMES,
    ICD_NAMES,
    SCHEMA_VERSION,
    TREATMENTS,
)

SHIPPED = "label_spaces.json"


def build_manifest():
    return {
        "version": SCHEMA_VERSION,
        "discharge_locations": list(DISCHARGE_NAMES),
        "icd_categories": list(ICD_NAMES),
        "final_acuity": list(ACUITY_NAMES),
        "channels": list(CHANNEL_NAMES),
        "treatments": list(TREATMENTS),
        "treatment_sequence_tokens": list(FTS_NAMES),
    }


def dumps(manifest):
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"


def write_manifest(path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(build_manifest()))


def load_manifest(path=None):
    if path is None:
        text = resources.files(__package__).joinpath(SHIPPED).read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    manifest = json.loads(text)
    if manifest.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"label manifest version {manifest.get('version')} != {SCHEMA_VERSION}")
    return manifest


def bind(manifest, space, label):
    """Class index of ``label`` within ``space``."""
    try:
        return manifest[space].index(label)
    except KeyError:
        raise SchemaError(f"manifest has no label space {space!r}") from None
    except ValueError:
        raise SchemaError(f"{label!r} is not a member of {space!r}") from None
