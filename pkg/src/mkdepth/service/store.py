"""In-memory store of fitted models keyed by content hash.

Identical fits hash to identical ids, so refitting the same data is a
cache hit rather than a duplicate entry.  The store lives for the
process lifetime; persistence is the client's concern (models round-trip
through JSON files).
"""

from __future__ import annotations

import hashlib
import json
import threading


def model_id_of(model_json: dict) -> str:
    canonical = json.dumps(model_json, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


class ModelStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._models: dict[str, dict] = {}

    def put(self, model_json: dict) -> str:
        mid = model_id_of(model_json)
        with self._lock:
            self._models[mid] = model_json
        return mid

    def get(self, model_id: str) -> dict | None:
        with self._lock:
            return self._models.get(model_id)

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._models)

    def delete(self, model_id: str) -> bool:
        with self._lock:
            return self._models.pop(model_id, None) is not None
