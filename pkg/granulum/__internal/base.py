"""Base infrastructure of granulum: callback dispatch and the run metadata stack."""

import functools
import logging
from types import MappingProxyType


_default_metadata = MappingProxyType(
    {"logger": logging.getLogger("granulum"), "callbacks": []}
)


class apply_callbacks:
    """Decorator that hands the output of a method to callbacks.

    Without an explicit list, the callbacks of the innermost active
    :class:`~granulum.Metadata` block receive the output (none outside of one).
    """

    def __init__(self, callbacks=None):
        """Initialize a decorator that applies callbacks.

        Args:
            callbacks: fixed list of callbacks (the active run's callbacks if omitted)
        """
        self.callbacks = callbacks

    def __call__(self, method):
        @functools.wraps(method)
        def new_method(self2, *args, **kwargs):
            res = method(self2, *args, **kwargs)
            callbacks = self.callbacks
            if callbacks is None:
                callbacks = GranulumBase._metadata.get("callbacks", [])
            for callback in callbacks:
                callback(obj=self2, method=method.__name__, output=res)
            return res

        return new_method


class _MetadataProperty:
    """Read-only class-level view of the innermost metadata mapping."""

    def __get__(self, obj, cls=None):
        stack = GranulumBase._GranulumBase__metadata_stack
        return stack[-1] if stack else _default_metadata


class GranulumBase:
    """Base class of the granulum objects that log or report to callbacks.

    ``_metadata`` is shared by all instances and classes: it holds the logger
    and the callbacks installed by the active run.
    """

    __metadata_stack = []

    _metadata = _MetadataProperty()

    @classmethod
    def _push_metadata(cls, metadata):
        GranulumBase.__metadata_stack.append(MappingProxyType(dict(metadata)))

    @classmethod
    def _pop_metadata(cls):
        if not GranulumBase.__metadata_stack:
            raise ValueError("No metadata has been set, yet an attempt to unset it was made.")
        GranulumBase.__metadata_stack.pop()

    @property
    def logger(self) -> logging.Logger:
        return self._metadata["logger"]
