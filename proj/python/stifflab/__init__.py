"""Python access to the stifflab core."""

import json as _json

from ._stifflab import (  # noqa: F401
    NumericalError,
    ValidationError,
    __version__,
    assemble_json,
    resolvent_identity_json,
    resolvent_json,
    snob_minus_fraction,
    sweep_json,
)


def assemble(scenario):
    """Assemble a scenario given as a dict (same schema as the CLI config's "scenario" table)."""
    return assemble_json(_json.dumps(scenario))


def resolvent(scenario, alpha, f="gauss"):
    return resolvent_json(_json.dumps(scenario), alpha, f)


def sweep(config):
    return sweep_json(_json.dumps(config))


def resolvent_identity(scenario, kappa, alpha, f="gauss"):
    return resolvent_identity_json(_json.dumps(scenario), kappa, alpha, f)
