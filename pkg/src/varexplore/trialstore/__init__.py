"""Shared record of studies and trials.

``open_store`` picks a backend from a location string:

* ``":memory:"`` -> :class:`MemoryStore`
* ``"http://host:port"`` -> :class:`RemoteStore`
* anything else -> :class:`FileStore` at that path
"""
from .base import LocalStore, MemoryStore, StoreBackend, best_trials
from .filelog import FileStore
from .http import RemoteStore, StoreServer, serve
from .model import Snapshot, Study, Trial, TrialState


def open_store(location: str) -> StoreBackend:
    location = str(location)
    if location == ":memory:":
        return MemoryStore()
    if location.startswith(("http://", "https://")):
        return RemoteStore(location)
    return FileStore(location)


__all__ = [
    "FileStore", "LocalStore", "MemoryStore", "RemoteStore", "Snapshot", "StoreBackend",
    "StoreServer", "Study", "Trial", "TrialState", "best_trials", "open_store", "serve",
]
