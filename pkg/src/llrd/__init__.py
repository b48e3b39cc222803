"""Finite-alphabet rate-distortion toolkit for the log-likelihood distortion.

Builds the distortion -log P(x|u) from a conditional channel, computes the
resulting rate-distortion function and its structural quantities (feasible
range, special operating points, log-loss bound, single-parameter dual
form, classical-distortion translations, perfect-perception scheme), and
reproduces the reference figure examples numerically via the ``llrd`` CLI.
"""

from . import ba, core, dual, loglik, lp, rdp
from .kernels import backend_name

__version__ = "0.1.0"

__all__ = ["ba", "core", "dual", "loglik", "lp", "rdp", "backend_name", "__version__"]
