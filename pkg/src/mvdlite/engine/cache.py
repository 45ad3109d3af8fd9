"""Thread-safe memo for evaluated chain prefixes."""
from __future__ import annotations

import threading
from concurrent.futures import Future
from typing import Callable


class PrefixCache:
    """Maps a canonical prefix key to its evaluated state.

    Concurrent requests for the same key compute it once; the others wait on
    the owner's future.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict = {}
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._data)

    def __contains__(self, key):
        return key in self._data

    def get_or_compute(self, key: str, fn: Callable):
        with self._lock:
            fut = self._data.get(key)
            owner = fut is None
            if owner:
                fut = self._data[key] = Future()
                self.misses += 1
            else:
                self.hits += 1
        if owner:
            try:
                fut.set_result(fn())
            except BaseException as exc:
                fut.set_exception(exc)
                with self._lock:
                    self._data.pop(key, None)
                raise
        return fut.result()
