"""Nonreciprocal photon-phonon and photon-magnon bundle emission from a spinning resonator."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("nrbundle")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"
