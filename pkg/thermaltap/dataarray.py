from __future__ import annotations

from typing import Any, Callable, List, Optional, Union

import numpy as np
import xarray as xr

from .base import BaseSchema
from .components import (
    BinarySchema,
    DimsSchema,
    DTypeSchema,
    FiniteSchema,
    RangeSchema,
    ShapeSchema,
)
from .types import DimsT, DTypeLike, ShapeT

MIN_FRAME_SIDE = 16
PLAUSIBLE_C = (-40.0, 150.0)


class DataArraySchema(BaseSchema):
    '''A light-weight validator for the arrays thermaltap moves around

    Parameters
    ----------
    dtype : DTypeLike or DTypeSchema, optional
        Datatype of the values.
    dims : DimsT or DimsSchema, optional
        Dimension names, ``None`` as wildcard.
    shape : ShapeT or ShapeSchema, optional
        Exact shape, ``None`` as wildcard.
    finite : bool
        Reject NaN and infinities.
    value_range : RangeSchema, optional
        Plausibility bounds; a non-strict range only produces warning flags.
    binary : bool
        Values restricted to {0, 1}.
    checks : List[Callable], optional
        Callables receiving the DataArray, run last.
    '''

    _json_schema = {'type': 'object'}
    _schema_slots = ['dtype', 'dims', 'shape', 'finite', 'value_range', 'binary']

    def __init__(
        self,
        dtype: Union[DTypeLike, DTypeSchema] = None,
        dims: Union[DimsT, DimsSchema] = None,
        shape: Union[ShapeT, ShapeSchema] = None,
        finite: Union[bool, FiniteSchema] = False,
        value_range: Optional[RangeSchema] = None,
        binary: Union[bool, BinarySchema] = False,
        checks: Optional[List[Callable]] = None,
    ) -> None:
        self.dtype = dtype if dtype is None or isinstance(dtype, DTypeSchema) else DTypeSchema(dtype)
        self.dims = dims if dims is None or isinstance(dims, DimsSchema) else DimsSchema(dims)
        self.shape = (
            shape if shape is None or isinstance(shape, ShapeSchema) else ShapeSchema(shape)
        )
        self.finite = finite if isinstance(finite, FiniteSchema) else (FiniteSchema() if finite else None)
        self.value_range = value_range
        self.binary = binary if isinstance(binary, BinarySchema) else (BinarySchema() if binary else None)
        if checks is not None and not all(callable(f) for f in checks):
            raise ValueError('All checks must be callables')
        self.checks = list(checks or [])

    def validate(self, da: xr.DataArray) -> List[str]:
        '''Check that ``da`` complies with the schema

        Parameters
        ----------
        da : xr.DataArray
            DataArray to be validated

        Returns
        -------
        list of str
            Warning flags raised by non-strict components.

        Raises
        ------
        SchemaError
        '''
        if not isinstance(da, xr.DataArray):
            raise ValueError('Input must be a xarray.DataArray')

        flags: List[str] = []
        if self.dtype is not None:
            self.dtype.validate(da.dtype)
        if self.dims is not None:
            self.dims.validate(da.dims)
        if self.shape is not None:
            self.shape.validate(da.shape)

        values = np.asarray(da.values)
        if self.finite is not None:
            self.finite.validate(values)
        if self.binary is not None:
            self.binary.validate(values)
        if self.value_range is not None and values.size:
            flags.extend(self.value_range.validate(values))

        for check in self.checks:
            check(da)
        return flags

    @property
    def json(self) -> dict:
        obj = {}
        for slot in self._schema_slots:
            component = getattr(self, slot)
            if component is not None:
                obj[slot] = component.json
        return obj

    @classmethod
    def from_json(cls, obj: dict):
        kwargs: dict[str, Any] = {}
        if 'dtype' in obj:
            kwargs['dtype'] = DTypeSchema.from_json(obj['dtype'])
        if 'dims' in obj:
            kwargs['dims'] = DimsSchema.from_json(obj['dims'])
        if 'shape' in obj:
            kwargs['shape'] = ShapeSchema.from_json(obj['shape'])
        if 'value_range' in obj:
            kwargs['value_range'] = RangeSchema.from_json(obj['value_range'])
        kwargs['finite'] = bool(obj.get('finite', False))
        kwargs['binary'] = bool(obj.get('binary', False))
        return cls(**kwargs)


def frame_schema(min_side: int = MIN_FRAME_SIDE) -> DataArraySchema:
    '''Schema for one radiometric frame: finite floating (y, x) temperatures

    Values outside the plausibility bounds only produce an ``implausible``
    flag; the frame is retained.
    '''
    return DataArraySchema(
        dtype=np.floating,
        dims=('y', 'x'),
        shape=ShapeSchema(minimum=(min_side, min_side)),
        finite=True,
        value_range=RangeSchema(*PLAUSIBLE_C, strict=False, flag='implausible'),
    )


def mask_schema(shape: Optional[ShapeT] = None) -> DataArraySchema:
    '''Schema for a binary headset mask, optionally pinned to the frame shape'''
    return DataArraySchema(dims=('y', 'x'), shape=shape, binary=True)
