"""Exception types raised across the toolkit."""


class WmfamError(Exception):
    """Base class for all toolkit errors."""


# probe generation
class InvalidDepth(WmfamError, ValueError):
    pass


class InvalidSurface(WmfamError, ValueError):
    pass


class InvalidEntityCount(WmfamError, ValueError):
    pass


# endpoint client
class EndpointUnreachable(WmfamError, ConnectionError):
    pass


class MalformedResponse(WmfamError, ValueError):
    pass


# scoring
class UnknownProbeRef(WmfamError, KeyError):
    pass


# statistics
class LengthMismatch(WmfamError, ValueError):
    pass


class DegenerateControl(WmfamError, ValueError):
    pass


class FormulaOutOfRange(WmfamError, ValueError):
    pass


class TooFewClusters(WmfamError, ValueError):
    pass


# analysis register
class MissingMeasure(WmfamError, KeyError):
    pass


# battery
class MalformedTask(WmfamError, ValueError):
    pass


# orchestration
class ConfigInvalid(WmfamError, ValueError):
    pass


class StageFailed(WmfamError, RuntimeError):
    def __init__(self, stage, detail):
        self.stage = stage
        self.detail = detail
        super().__init__(f"stage {stage!r} failed: {detail}")
