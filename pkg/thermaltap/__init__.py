from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version(__name__)
except PackageNotFoundError:  # pragma: no cover
    # package is not installed
    __version__ = '0+unknown'

from .base import (  # noqa: E402,F401
    BaselineMissing,
    ConfigError,
    EmptySessionError,
    ExperimentError,
    GroupError,
    MetricsError,
    ModelVersionError,
    NonFiniteError,
    OrderError,
    ParseError,
    PlanError,
    PreprocessError,
    SchemaError,
    SessionUnscorable,
    ShapeError,
    ThermalTapError,
    WindowDropped,
)
from .components import (  # noqa: E402,F401
    BinarySchema,
    DimsSchema,
    DTypeSchema,
    FiniteSchema,
    RangeSchema,
    ShapeSchema,
)
from .config import RunConfig, load_config  # noqa: E402,F401
from .dataarray import DataArraySchema, frame_schema, mask_schema  # noqa: E402,F401
from .features import GridSpec, assemble_window_features, cell_stats, spatial_gradient, temporal_delta  # noqa: E402,F401
from .frame_store import (  # noqa: E402,F401
    ObservationWindow,
    RadiometricFrame,
    SensorSample,
    SessionManifest,
    SessionRecording,
    align_session,
    load_frame,
    load_session,
    window_session,
)
from .roi import Mask, MaskQuality, mask_geometry, segment_classical, validate_mask  # noqa: E402,F401
