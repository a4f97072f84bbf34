"""Semidefinite programming: modelling layer, embedded solver and backends."""

from .model import Affine, ConicProgram, hermitian_basis, hermitian_coordinates, real_embed
from .api import Replay, SdpSolution, available_backends, register_backend, replay, solve

__all__ = [
    "Affine",
    "ConicProgram",
    "Replay",
    "SdpSolution",
    "available_backends",
    "hermitian_basis",
    "hermitian_coordinates",
    "real_embed",
    "register_backend",
    "replay",
    "solve",
]
