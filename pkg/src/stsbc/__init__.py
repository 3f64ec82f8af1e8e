"""Link-level simulator for double-layer (3D) space-time codes in SFNs."""

from .stbc import SchemeId, code_rate, dispersion, encode
from .harness import SimConfig, BerPoint, run_ber_point, required_ebn0

__all__ = [
    "SchemeId", "code_rate", "dispersion", "encode",
    "SimConfig", "BerPoint", "run_ber_point", "required_ebn0",
]
__version__ = "0.1.0"
