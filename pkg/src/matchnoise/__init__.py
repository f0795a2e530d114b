"""Noisy free-fermion dynamics of spin chains through Majorana covariances."""

__version__ = "0.1.0"
