import json
from abc import abstractmethod
from typing import Any, Dict


class ThermalTapError(Exception):
    '''Root of every error raised by thermaltap'''

    pass


class SchemaError(ThermalTapError):
    '''An object does not match its declared schema'''

    pass


class ParseError(SchemaError):
    '''A file on disk could not be parsed into its record type'''

    pass


class NonFiniteError(SchemaError, ValueError):
    '''A temperature cell holds NaN or +/-inf'''

    pass


class OrderError(ThermalTapError):
    '''Timestamps that must increase do not'''

    pass


class EmptySessionError(ThermalTapError):
    pass


class ShapeError(ThermalTapError, ValueError):
    pass


class ConfigError(ThermalTapError):
    '''Invalid or inconsistent configuration'''

    pass


class BaselineMissing(ThermalTapError):
    pass


class PreprocessError(ThermalTapError):
    pass


class GroupError(ThermalTapError, ValueError):
    pass


class SessionUnscorable(ThermalTapError):
    '''No window of a session survived extraction'''

    pass


class PlanError(ThermalTapError):
    pass


class MetricsError(ThermalTapError, ValueError):
    pass


class ModelVersionError(ThermalTapError):
    pass


class ExperimentError(ThermalTapError):
    pass


class WindowDropped(ThermalTapError):
    '''Signal: too many missing frames in an observation window.

    Batch extraction catches this and skips the window.
    '''

    pass


class Serializable:
    '''Mixin for records with a JSON representation'''

    @property
    @abstractmethod
    def json(self) -> Any:  # pragma: no cover
        pass

    def to_json(self, **dumps_kws) -> str:
        '''Generate a JSON string representation of this object

        Parameters
        ----------
        dumps_kws : dict
            Parameters to pass to ``json.dumps``.

        Returns
        -------
        str
        '''
        return json.dumps(self.json, **dumps_kws)

    @classmethod
    @abstractmethod
    def from_json(cls, obj):  # pragma: no cover
        pass


class BaseSchema(Serializable):
    _json_schema: Dict[str, Any]

    @abstractmethod
    def validate(self, obj: Any) -> Any:  # pragma: no cover
        pass
