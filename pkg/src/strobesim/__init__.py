"""Stroboscopic gate-sequence simulator dynamics under an oscillator bath.

Subpackages: dense operator algebra, the two built-in target models with
their exact gate schedules, bath correlation kernels, the TCL-2
trajectory integrator, closed-form error bounds with the second-order
channel-difference map, an exact joint-evolution oracle, and a
config-driven CLI.
"""

from . import bath, bounds, cli, models, operators, oracle, tcl2

__all__ = ["bath", "bounds", "cli", "models", "operators", "oracle", "tcl2"]
__version__ = "0.1.0"
