__all__ = ()


class InfoException(Exception):
    def __init__(self, info=None):
        self.info = info or {}
        super().__init__(self.info)


class SdpError(Exception):
    pass


class ConfigError(SdpError, ValueError):
    pass


class ParseError(InfoException, SdpError):
    pass


class ManifestError(SdpError):
    pass


class PartitionError(SdpError):
    pass


class DuplicatePlacementError(PartitionError):
    pass


class OrderingError(InfoException, SdpError):
    pass


class StalePlanError(SdpError):
    pass


class ScheduleError(SdpError):
    pass


class ReplayError(InfoException, SdpError):
    pass


class EventError(InfoException, SdpError):
    pass


class TransportError(SdpError):
    pass


class WorkerTimeout(InfoException, TransportError):
    pass


class MigrationAborted(InfoException, TransportError):
    pass
