from typing import Tuple, Union

from numpy.typing import DTypeLike  # noqa: F401

DimsT = Tuple[Union[str, None], ...]
ShapeT = Tuple[Union[int, None], ...]
BBoxT = Tuple[int, int, int, int]
