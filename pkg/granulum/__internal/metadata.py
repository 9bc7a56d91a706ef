from granulum.__internal.base import GranulumBase


class Metadata(GranulumBase):
    """Installs a logger and a list of callbacks for the duration of a ``with`` block."""

    def __init__(self, content):
        self.content = content

    def __enter__(self):
        self._push_metadata(self.content)
        for callback in self.content.get("callbacks", []):
            callback.on_launch()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        res = exc_val if exc_val is not None else None
        for callback in self.content.get("callbacks", []):
            try:
                callback.on_termination(res)
            except Exception as e:
                callback.log(
                    f"Termination procedure for {callback.__class__.__name__} failed."
                )
                callback.exception(e)
        self._pop_metadata()
