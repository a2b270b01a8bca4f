'''JSON documents exchanged on disk and their jsonschema definitions'''

from typing import Any, Dict

import jsonschema

from .base import SchemaError

MANIFEST_SCHEMA: Dict[str, Any] = {
    'type': 'object',
    'properties': {
        'session_id': {'type': 'string', 'minLength': 1},
        'device_model': {'type': 'string', 'minLength': 1},
        'app_label': {'type': 'string', 'minLength': 1},
        'environment': {'enum': ['indoor', 'outdoor']},
        'phase_marks': {
            'type': 'object',
            'properties': {
                phase: {'type': 'integer'} for phase in ('baseline', 'heat_up', 'steady', 'cool_down')
            },
            'required': ['baseline', 'heat_up', 'steady', 'cool_down'],
        },
        'sample_rate_hz': {'type': 'number', 'exclusiveMinimum': 0},
    },
    'required': ['session_id', 'device_model', 'app_label', 'environment', 'phase_marks'],
}

SUITE_SCHEMA: Dict[str, Any] = {
    'type': 'object',
    'properties': {
        'devices': {'type': 'array', 'items': {'type': 'string'}, 'minItems': 1},
        'apps': {'type': 'array', 'items': {'type': 'string'}, 'minItems': 1},
        'sessions_per_app': {'type': 'integer', 'minimum': 1},
        'environments': {
            'type': 'object',
            'additionalProperties': {'type': 'integer', 'minimum': 0},
        },
        'duration_s': {'type': 'integer', 'minimum': 1},
        'frame_shape': {
            'type': 'array',
            'items': {'type': 'integer', 'minimum': 16},
            'minItems': 2,
            'maxItems': 2,
        },
        'decimals': {'type': 'integer', 'minimum': 1, 'maximum': 6},
        'noise_std': {'type': 'number', 'minimum': 0},
        'write_masks': {'type': 'boolean'},
        'aliases': {'type': 'object', 'additionalProperties': {'type': 'string'}},
    },
    'required': ['devices', 'apps', 'sessions_per_app'],
}

RUN_CONFIG_SCHEMA: Dict[str, Any] = {
    'type': 'object',
    'properties': {
        'dataset': {'type': ['string', 'null']},
        'grid': {'type': 'integer', 'minimum': 2},
        'min_cell_coverage': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 1},
        'window_s': {'type': 'integer', 'minimum': 1},
        'stride_s': {'type': ['integer', 'null'], 'minimum': 1},
        'lags': {'type': 'array', 'items': {'type': 'integer', 'minimum': 1}},
        'backend': {'enum': ['forest', 'margin']},
        'normalization': {
            'type': 'object',
            'properties': {
                flag: {'type': 'boolean'}
                for flag in ('ambient', 'wind', 'delta_residual', 'headset_baseline')
            },
            'additionalProperties': False,
        },
        'protocol': {'enum': ['loso', 'lodo', 'pooled', 'transfer', 'cross_device']},
        'few_shot_count': {'type': 'integer', 'minimum': 0},
        'two_stage': {'type': 'boolean'},
        'seed': {'type': 'integer', 'minimum': 0},
        'jobs': {'type': ['integer', 'null'], 'minimum': 1},
        'out': {'type': ['string', 'null']},
        'k_features': {'type': ['integer', 'null'], 'minimum': 1},
        'n_trees': {'type': 'integer', 'minimum': 1},
        'max_depth': {'type': 'integer', 'minimum': 1},
        'min_leaf': {'type': 'integer', 'minimum': 1},
        'margin_lambda': {'type': 'number', 'exclusiveMinimum': 0},
        'margin_epochs': {'type': 'integer', 'minimum': 1},
        'tolerance_ms': {'type': 'integer', 'minimum': 0},
        'contrast_c': {'type': 'number'},
    },
    'required': ['grid', 'window_s', 'lags', 'backend', 'protocol', 'seed'],
}

MODEL_SCHEMA: Dict[str, Any] = {
    'type': 'object',
    'properties': {
        'version': {'type': 'string'},
        'preprocess': {'type': 'object'},
        'stage1': {'type': ['object', 'null']},
        'stage2': {'type': ['object', 'null']},
        'two_stage': {'type': 'boolean'},
    },
    'required': ['version', 'preprocess', 'stage1', 'stage2'],
}

REPORT_SCHEMA: Dict[str, Any] = {
    'type': 'object',
    'properties': {
        'schema_version': {'type': 'integer'},
        'toolkit_version': {'type': 'string'},
        'config': {'type': 'object'},
        'protocol': {'type': 'string'},
        'folds': {'type': 'array'},
        'window': {'type': 'object'},
        'session': {'type': 'object'},
    },
    'required': ['schema_version', 'toolkit_version', 'config', 'protocol', 'folds'],
}

DOCUMENTS = {
    'manifest': MANIFEST_SCHEMA,
    'suite': SUITE_SCHEMA,
    'run_config': RUN_CONFIG_SCHEMA,
    'model': MODEL_SCHEMA,
    'report': REPORT_SCHEMA,
}


def validate_document(obj: Any, kind: str) -> None:
    '''Validate a decoded JSON document against its registered schema

    Parameters
    ----------
    obj : any
        Decoded JSON.
    kind : str
        One of ``manifest``, ``suite``, ``run_config``, ``model``, ``report``.

    Raises
    ------
    SchemaError
    '''
    try:
        schema = DOCUMENTS[kind]
    except KeyError:
        raise ValueError(f'unknown document kind: {kind}') from None
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as err:
        path = '/'.join(str(p) for p in err.absolute_path) or '<root>'
        raise SchemaError(f'{kind} document invalid at {path}: {err.message}') from err
