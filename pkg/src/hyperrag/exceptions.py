"""Exception hierarchy. CLI exit codes hang off the category."""


class HyperRAGError(Exception):
    exit_code = 1


class ConfigError(HyperRAGError):
    exit_code = 2


class DataError(HyperRAGError):
    """Malformed or inconsistent input records."""

    exit_code = 3


class IngestError(DataError):
    def __init__(self, message, *, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class DanglingReferenceError(IngestError):
    def __init__(self, kind, ref_id, *, owner=None, line=None, source=None):
        self.kind = kind
        self.ref_id = ref_id
        msg = f"dangling {kind} reference {ref_id!r}"
        if owner is not None:
            msg += f" in {owner!r}"
        super().__init__(msg, line=line, source=source)


class UnknownEntityError(DataError, KeyError):
    def __str__(self):
        return f"unknown entity {self.args[0]!r}"


class GroundingError(DataError):
    """No topic entity of a question could be resolved against the graph."""


class CheckpointError(DataError):
    pass


class BackendError(HyperRAGError):
    exit_code = 4


class TransportError(BackendError):
    """Retryable failure talking to a remote backend."""


class GatewayError(BackendError):
    def __init__(self, message, *, attempts=0, kind=None):
        self.attempts = attempts
        self.kind = kind
        super().__init__(f"{message} (kind={kind}, attempts={attempts})")


class UnscriptedRequestError(BackendError, KeyError):
    def __str__(self):
        return f"mock backend has no script entry for {self.args[0]!r}"
