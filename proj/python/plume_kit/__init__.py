"""Python access to the plume-kit core: synthetic scenes, matched filter, baseline and pipeline."""

import json

from . import _core
from ._core import ConfigError, PlumeError, baseline_detect, binary_metrics, cmf, pixel_metrics, sha256_hex

__all__ = [
    "ConfigError",
    "PlumeError",
    "baseline_detect",
    "binary_metrics",
    "cmf",
    "gen_scene",
    "pipeline_run",
    "pixel_metrics",
    "sha256_hex",
    "validate_config",
]


def validate_config(config):
    _core.validate_config(json.dumps(config))


def pipeline_run(config, workdir, seed=None):
    """Runs the staged pipeline and returns the report as a dict. Stage errors are recorded, not raised."""
    return json.loads(_core.pipeline_run(json.dumps(config), str(workdir), seed))


def gen_scene(spec=None, **overrides):
    """Generates one synthetic scene. `spec` uses the same keys as a campaign template."""
    spec = dict(spec or {}, **overrides)
    out = _core.gen_scene(json.dumps(spec))
    out["manifest"] = json.loads(out["manifest"])
    return out
