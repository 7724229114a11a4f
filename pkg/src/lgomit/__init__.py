"""Steady-state simulator for a Laguerre-Gaussian vortex optomechanical cavity
coupled to a four-wave-mixing double-Lambda atomic ensemble."""

__version__ = "0.1.0"
