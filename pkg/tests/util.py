"""Shared test helpers."""

import threading


class OpThread(threading.Thread):
    """Thread that captures its callable's result or exception."""

    def __init__(self, fn, *args, name=None):
        super().__init__(name=name, daemon=True)
        self._fn = fn
        self._args = args
        self.result = None
        self.error = None

    def run(self):
        try:
            self.result = self._fn(*self._args)
        except BaseException as exc:  # re-raised by join_checked
            self.error = exc

    def join_checked(self, timeout=30.0):
        self.join(timeout)
        if self.is_alive():
            raise TimeoutError(f"{self.name or self._fn} did not finish")
        if self.error is not None:
            raise self.error
        return self.result


def chain_of(bundle):
    """Bundle chain as [(ts, target key or None), ...], newest first."""
    out = []
    for entry in bundle.entries():
        target = entry.target
        out.append((entry.ts, None if target is None else target.key))
    return out


def run_all(threads):
    for t in threads:
        t.start()
    return [t.join_checked() for t in threads]
