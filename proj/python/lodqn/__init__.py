"""Localized orthogonal decomposition solver for quasilinear diffusion problems.

The heavy lifting lives in the compiled extension ``_lodqn``; this package
re-exports its surface.
"""

try:
    # installed package layout (wheel): lodqn/_lodqn.so
    from ._lodqn import *  # noqa: F401,F403
    from ._lodqn import __doc__ as _mod_doc  # noqa: F401
except ImportError:
    # build-tree layout: _lodqn.so on sys.path next to the package
    from _lodqn import *  # noqa: F401,F403

__all__ = [
    "Basis",
    "Coefficient",
    "CorrectorSet",
    "Mesh",
    "MeshPair",
    "Model",
    "SolveTrace",
    "Transfer",
    "assemble_correctors",
    "assemble_load",
    "build_basis",
    "build_transfer",
    "decay_profile",
    "generate_spatial_field",
    "h1_seminorm",
    "interpolate",
    "l2_norm",
    "prolong",
    "read_field",
    "relative_errors",
    "solve_lod",
    "solve_reference",
    "write_field",
]
