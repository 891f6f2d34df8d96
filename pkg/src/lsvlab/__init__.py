"""Numerics for random LSV maps: pre-image asymptotics, random towers,
quenched transfer operators, coupling times and correlation decay."""
from .lsv import FiberDensity, FiberGrid, apply, derivative, invert_left, make_grid, transfer_step
from .noise import NoisePath, ParamDistribution, constant_path, expect, signature
from .preimages import deterministic_c, preimage_sequence, x_at

__all__ = [
    "FiberDensity", "FiberGrid", "NoisePath", "ParamDistribution", "apply", "constant_path",
    "derivative", "deterministic_c", "expect", "invert_left", "make_grid", "preimage_sequence",
    "signature", "transfer_step", "x_at",
]
