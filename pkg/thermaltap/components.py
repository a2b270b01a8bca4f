import logging
from typing import List, Optional, Tuple

import numpy as np

from .base import BaseSchema, NonFiniteError, SchemaError
from .types import DimsT, DTypeLike, ShapeT

logger = logging.getLogger(__name__)

_ABSTRACT_DTYPES = {
    'floating': np.floating,
    'integer': np.integer,
    'bool': np.bool_,
    'number': np.number,
}


class DTypeSchema(BaseSchema):
    '''Datatype schema

    Parameters
    ----------
    dtype : DTypeLike
        Datatype definition, may be (string, np.dtype, etc.)

    Raises
    ------
    SchemaError
    '''

    _json_schema = {'type': 'string'}

    def __init__(self, dtype: DTypeLike) -> None:
        if dtype in _ABSTRACT_DTYPES.values():
            self.dtype = dtype
        else:
            self.dtype = np.dtype(dtype)

    @classmethod
    def from_json(cls, obj: str):
        return cls(_ABSTRACT_DTYPES.get(obj, obj))

    def validate(self, dtype: DTypeLike) -> None:
        if not np.issubdtype(dtype, self.dtype):
            raise SchemaError(f'dtype {dtype} != {self.dtype}')

    @property
    def json(self) -> str:
        if isinstance(self.dtype, np.dtype):
            return self.dtype.str
        for name, abstract in _ABSTRACT_DTYPES.items():
            if self.dtype is abstract:
                return name
        return str(self.dtype)  # pragma: no cover


class DimsSchema(BaseSchema):
    '''Dimensions schema

    Parameters
    ----------
    dims : iterable of str
        Dimension names, ``None`` may be used as a wildcard.
    '''

    _json_schema = {'type': 'array', 'items': {'type': ['string', 'null']}}

    def __init__(self, dims: DimsT) -> None:
        self.dims = tuple(dims)

    @classmethod
    def from_json(cls, obj: list):
        return cls(tuple(obj))

    def validate(self, dims: tuple) -> None:
        if len(self.dims) != len(dims):
            raise SchemaError(f'length of dims does not match: {len(dims)} != {len(self.dims)}')

        for i, (actual, expected) in enumerate(zip(dims, self.dims)):
            if expected is not None and actual != expected:
                raise SchemaError(f'dim mismatch in axis {i}: {actual} != {expected}')

    @property
    def json(self) -> list:
        return list(self.dims)


class ShapeSchema(BaseSchema):
    '''Shape schema

    Parameters
    ----------
    shape : iterable of ints
        Exact shape, ``None`` may be used as a wildcard.
    minimum : iterable of ints, optional
        Lower bound per axis, used in place of exact sizes when given.
    '''

    _json_schema = {
        'type': 'object',
        'properties': {
            'shape': {'type': ['array', 'null']},
            'minimum': {'type': ['array', 'null']},
        },
    }

    def __init__(self, shape: Optional[ShapeT] = None, minimum: Optional[ShapeT] = None) -> None:
        if shape is None and minimum is None:
            raise ValueError('ShapeSchema needs an exact shape or a minimum shape')
        self.shape = tuple(shape) if shape is not None else None
        self.minimum = tuple(minimum) if minimum is not None else None

    @classmethod
    def from_json(cls, obj: dict):
        return cls(shape=obj.get('shape'), minimum=obj.get('minimum'))

    def validate(self, shape: tuple) -> None:
        reference = self.shape if self.shape is not None else self.minimum
        if len(reference) != len(shape):  # type: ignore[arg-type]
            raise SchemaError(
                f'number of dimensions in shape ({len(shape)}) != {len(reference)}'  # type: ignore
            )

        if self.shape is not None:
            for i, (actual, expected) in enumerate(zip(shape, self.shape)):
                if expected is not None and actual != expected:
                    raise SchemaError(f'shape mismatch in axis {i}: {actual} != {expected}')

        if self.minimum is not None:
            for i, (actual, lower) in enumerate(zip(shape, self.minimum)):
                if lower is not None and actual < lower:
                    raise SchemaError(f'axis {i} too small: {actual} < {lower}')

    @property
    def json(self) -> dict:
        return {
            'shape': list(self.shape) if self.shape is not None else None,
            'minimum': list(self.minimum) if self.minimum is not None else None,
        }


class FiniteSchema(BaseSchema):
    '''Every value must be finite; the first offender is reported by (row, col)'''

    _json_schema = {'type': 'boolean'}

    @classmethod
    def from_json(cls, obj: bool):
        return cls()

    def validate(self, values: np.ndarray) -> None:
        bad = ~np.isfinite(values)
        if bad.any():
            position = tuple(int(i) for i in np.argwhere(bad)[0])
            raise NonFiniteError(f'non-finite value {values[position].item()} at {position}')

    @property
    def json(self) -> bool:
        return True


class RangeSchema(BaseSchema):
    '''Closed value range

    Parameters
    ----------
    lower, upper : float
        Inclusive bounds.
    strict : bool
        Raise on violation. When False the violation is logged and returned
        as a warning flag instead.
    flag : str
        Name of the warning flag returned in non-strict mode.
    '''

    _json_schema = {
        'type': 'object',
        'properties': {
            'lower': {'type': 'number'},
            'upper': {'type': 'number'},
            'strict': {'type': 'boolean'},
            'flag': {'type': 'string'},
        },
        'required': ['lower', 'upper'],
    }

    def __init__(
        self, lower: float, upper: float, strict: bool = True, flag: str = 'out_of_range'
    ) -> None:
        if lower > upper:
            raise ValueError(f'empty range [{lower}, {upper}]')
        self.lower = lower
        self.upper = upper
        self.strict = strict
        self.flag = flag

    @classmethod
    def from_json(cls, obj: dict):
        return cls(**obj)

    def validate(self, values: np.ndarray) -> List[str]:
        lo, hi = np.nanmin(values), np.nanmax(values)
        if lo >= self.lower and hi <= self.upper:
            return []
        message = f'values span [{lo}, {hi}] outside [{self.lower}, {self.upper}]'
        if self.strict:
            raise SchemaError(message)
        logger.warning(message)
        return [self.flag]

    @property
    def json(self) -> dict:
        return {'lower': self.lower, 'upper': self.upper, 'strict': self.strict, 'flag': self.flag}


class BinarySchema(BaseSchema):
    '''Values restricted to {0, 1}'''

    _json_schema = {'type': 'boolean'}

    @classmethod
    def from_json(cls, obj: bool):
        return cls()

    def validate(self, values: np.ndarray) -> None:
        if values.dtype == np.bool_:
            return
        bad = (values != 0) & (values != 1)
        if bad.any():
            position: Tuple[int, ...] = tuple(int(i) for i in np.argwhere(bad)[0])
            raise SchemaError(f'non-binary value {values[position].item()} at {position}')

    @property
    def json(self) -> bool:
        return True
