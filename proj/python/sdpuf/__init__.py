"""Separatrix-distance modelling of SRAM start-up behaviour.

Configs may be passed as dicts or JSON text; summaries come back as dicts.
"""

import json

from . import _core
from ._core import (
    SdpufError,
    bit_aliasing,
    cell_ber,
    eval_double,
    eval_single,
    fit_double,
    fit_single,
    invert_threshold,
    reliability,
    slope_at_zero,
    synthetic_sd_samples,
    synthetic_sup_samples,
    uniformity,
    uniqueness,
)

__all__ = [
    "SdpufError", "bit_aliasing", "calibrate", "cell_ber", "compute_sd", "default_config", "eval_double",
    "eval_single", "fit", "fit_double", "fit_single", "invert_threshold", "metrics", "population",
    "reliability", "sd_sweep", "simulate_sup", "slope_at_zero", "startup", "startup_test0",
    "synthetic_sd_samples", "synthetic_sup_samples", "thresholds", "uniformity", "uniqueness",
]


def _text(config):
    if config is None:
        return None
    return config if isinstance(config, str) else json.dumps(config)


def default_config():
    return json.loads(_core.default_config())


def compute_sd(offsets, config=None):
    return _core.compute_sd(list(offsets), _text(config))


def sd_sweep(n_cells, config=None):
    return _core.sd_sweep(n_cells, _text(config))


def startup_test0(offsets, config=None):
    return _core.startup_test0(list(offsets), _text(config))


def simulate_sup(offsets, n_trials, cell_id=0, config=None):
    return _core.simulate_sup(list(offsets), n_trials, cell_id, _text(config))


def population(config, out):
    return json.loads(_core.cmd_population(_text(config), str(out)))


def startup(config, out, ingest=None, reads=0):
    return json.loads(_core.cmd_startup(_text(config), str(out), None if ingest is None else str(ingest), reads))


def fit(config, sd_file, sup_file, out):
    return json.loads(_core.cmd_fit(_text(config), str(sd_file), str(sup_file), str(out)))


def thresholds(model_file, probabilities, sd_file=None, out=".", upper=1.2):
    return _core.cmd_thresholds(str(model_file), list(probabilities), None if sd_file is None else str(sd_file),
                                str(out), upper)


def metrics(files, out):
    return json.loads(_core.cmd_metrics([str(f) for f in files], str(out)))


def calibrate(config, out):
    return json.loads(_core.cmd_calibrate(_text(config), str(out)))
