import threading
from typing import Optional

from .network import PolicyParams


class ParamStore:
    """Publish-then-read handoff of policy snapshots between trainer and collectors.

    The trainer publishes an immutable `PolicyParams` after each update;
    collectors read the latest snapshot and never see a partially written one.
    """

    def __init__(self, initial: Optional[PolicyParams] = None):
        self._value = initial
        self._version = 0 if initial is None else 1
        self._lock = threading.Lock()

    def get(self) -> PolicyParams:
        with self._lock:
            if self._value is None:
                raise RuntimeError("no policy parameters published yet")
            return self._value

    def snapshot(self) -> tuple[int, PolicyParams]:
        with self._lock:
            if self._value is None:
                raise RuntimeError("no policy parameters published yet")
            return self._version, self._value

    def publish(self, params: PolicyParams) -> int:
        with self._lock:
            self._value = params
            self._version += 1
            return self._version

    def compare_and_publish(self, expected_version: int, params: PolicyParams) -> bool:
        with self._lock:
            if self._version == expected_version:
                self._value = params
                self._version += 1
                return True
            return False

    @property
    def version(self) -> int:
        with self._lock:
            return self._version
