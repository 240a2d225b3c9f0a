"""Generalized-entanglement purities, Hamming-distance correlations and spin-chain experiments."""

__version__ = "0.1.0"

from .basis_index import OccupationString, SectorBasis, enumerate_sector, hamming  # noqa: E402
from .purity_engine import ObservableSet, local_purity_mub, purity  # noqa: E402
from .states import PureState, make_rng  # noqa: E402

__all__ = [
    "OccupationString",
    "ObservableSet",
    "PureState",
    "SectorBasis",
    "enumerate_sector",
    "hamming",
    "local_purity_mub",
    "make_rng",
    "purity",
]
