"""Option-implied Fourier-cosine (iCOS) estimation of risk-neutral densities, prices and deltas."""
from .basis import CosineBasis, Interval
from .estimator import ICOS, EstimateWithCI, IcosDesign, IcosFit
from .exceptions import (
    ChainError,
    DegreesOfFreedomError,
    ICOSError,
    OutOfBoundsError,
    QuadratureError,
    SingularDesignError,
)
from .experiments import McDesign, McReport, run_mc
from .kernel import KernelSmoother
from .market_data import OptionChain, OptionQuote, implied_vol, load_chain, spline_iv_regrid, write_chain
from .models import BsModel, LognormalMixture, SvcjModel, SvcjParams
from .order import OrderTrace, optimal_N
from .vix import VixDecomposition, dissect

__version__ = "0.1.0"

__all__ = [
    "BsModel", "ChainError", "CosineBasis", "DegreesOfFreedomError", "EstimateWithCI", "ICOS", "ICOSError",
    "IcosDesign", "IcosFit", "Interval", "KernelSmoother", "LognormalMixture", "McDesign", "McReport",
    "OptionChain", "OptionQuote", "OrderTrace", "OutOfBoundsError", "QuadratureError", "SingularDesignError",
    "SvcjModel", "SvcjParams", "VixDecomposition", "dissect", "implied_vol", "load_chain", "optimal_N",
    "run_mc", "spline_iv_regrid", "write_chain",
]
