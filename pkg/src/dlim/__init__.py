"""Delay-line oscillator Ising machine simulator."""

__version__ = "0.1.0"
