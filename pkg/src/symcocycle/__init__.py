"""Finite symplectic cocycles: spectra, domination, the type I-IV
classification of non-dominated segments, Hamiltonian kicks, and the
random-walk cascade that rotates an expanding direction."""

__version__ = "0.1.0"
