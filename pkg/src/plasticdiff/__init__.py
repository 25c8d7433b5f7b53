"""Pure-point diffraction of the plastic-number inflation tiling."""

from .algebra import (
    EMB,
    BetaInt,
    Embeddings,
    WaveNumber,
    beta_mul,
    constants,
    real_embed,
    star_map,
    wave_number,
)
from .cocycle import (
    NonConvergenceError,
    PeakRecord,
    amplitudes,
    c_matrix,
    c_vector,
    c_vectors,
    cocycle_product,
    fourier_matrix,
    intensity,
    peak_list,
)
from .finite import FiniteScan, amplitude_estimate, exponential_sum, intensity_scan
from .inflation import (
    ControlPoint,
    PFData,
    densities,
    inflate,
    inflate_points,
    pf_data,
    substitute,
    word_length,
)
from .windows import (
    WindowCloud,
    estimate_volumes,
    exact_volumes,
    ft_grid,
    iterate_ifs,
    window_ft_oracle,
)

__version__ = "0.1.0"
