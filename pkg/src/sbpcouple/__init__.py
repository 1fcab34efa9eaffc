"""Energy stable coupling of SBP finite difference blocks and P1 finite
element blocks through SAT penalties and norm-compatible interpolation."""

from .analysis import assemble_global_operator, spectrum
from .fe_p1 import assemble_fe_block, generate_regular_mesh, load_mesh
from .interp import InterpolationPair, build_glue_2to1, build_matching_fd_fe, verify_pair
from .multiblock import MultiblockProblem
from .problems import AnalyticSolution, burgers_flux, linear_flux
from .sat_coupling import SatParams, sat_preset
from .sbp_fd import assemble_fd_block, build_sbp_1d
from .time_integration import TimeStepper, integrate

__version__ = "0.1.0"

__all__ = [
    "AnalyticSolution", "InterpolationPair", "MultiblockProblem", "SatParams", "TimeStepper",
    "assemble_fd_block", "assemble_fe_block", "assemble_global_operator", "build_glue_2to1",
    "build_matching_fd_fe", "build_sbp_1d", "burgers_flux", "generate_regular_mesh", "integrate",
    "linear_flux", "load_mesh", "sat_preset", "spectrum", "verify_pair",
]
