"""Exception hierarchy. Everything raised on purpose derives from FLError."""


class FLError(Exception):
    pass


class ConfigError(FLError, ValueError):
    pass


class ParseError(FLError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class PartitionError(FLError):
    pass


class IntegrityError(FLError):
    pass


class TrainingError(FLError):
    def __init__(self, message: str, round_idx: int | None = None, client_id: int | None = None):
        self.round_idx = round_idx
        self.client_id = client_id
        ctx = []
        if round_idx is not None:
            ctx.append(f"round {round_idx}")
        if client_id is not None:
            ctx.append(f"client {client_id}")
        super().__init__(f"{message} ({', '.join(ctx)})" if ctx else message)


class AggregationError(FLError):
    pass


class SelectionError(FLError):
    def __init__(self, message: str, shortfall: int = 0):
        self.shortfall = shortfall
        super().__init__(message)
