"""Canonical JSON and the short config hash embedded in every artifact."""
from __future__ import annotations

import hashlib
import json


def canonical_json(obj) -> str:
    """Sorted keys, compact separators; equal configs serialize identically."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(obj) -> str:
    """First 16 hex digits of SHA-256 over the canonical JSON."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]
