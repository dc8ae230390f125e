"""Numerical tolerances shared across modules.

Defaults can be overridden from the environment (``MIXCTL_TOL_SUM``,
``MIXCTL_TOL_HERM``, ``MIXCTL_SEED``); explicit arguments always win.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace

TOL_NEG = 1e-12
TOL_SUM = 1e-10
TOL_HERM = 1e-10
TOL_PSD = 1e-10
ENV_PREFIX = "MIXCTL_"


@dataclass(frozen=True)
class Tolerances:
    tol_neg: float = TOL_NEG
    tol_sum: float = TOL_SUM
    tol_herm: float = TOL_HERM
    seed: int = 0

    @classmethod
    def from_env(cls, environ=None, **overrides) -> "Tolerances":
        environ = os.environ if environ is None else environ
        base = cls()
        fields = {}
        if f"{ENV_PREFIX}TOL_SUM" in environ:
            fields["tol_sum"] = float(environ[f"{ENV_PREFIX}TOL_SUM"])
        if f"{ENV_PREFIX}TOL_HERM" in environ:
            fields["tol_herm"] = float(environ[f"{ENV_PREFIX}TOL_HERM"])
        if f"{ENV_PREFIX}SEED" in environ:
            fields["seed"] = int(environ[f"{ENV_PREFIX}SEED"])
        fields.update({k: v for k, v in overrides.items() if v is not None})
        return replace(base, **fields)
