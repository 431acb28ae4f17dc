"""toruslab: spectral geometry of flat complex tori, where every formula
is checkable against an exact lattice spectrum.

Capabilities: exact Laplace spectra under explicit conventions, heat
traces with certified two-route summation, zeta-regularized
determinants by two independent pipelines, analytic-torsion
bookkeeping, a power-series solver for the integrability equation of
Beltrami differentials, Weil-Petersson pairings, and an audit harness
for the classical identities that tie them together.
"""

from .errors import (
    GammaPoleError,
    InvalidInputError,
    ModeOverflowError,
    NonConvergenceError,
)
from .lattice import (
    DE_RHAM,
    DOLBEAULT,
    RAW_EPSTEIN,
    ComplexTorus,
    DualMode,
    LaplaceConvention,
    SpectrumStream,
    cached_spectrum,
    convention,
    covolume,
    dual_basis,
    enumerate_modes,
    load_spectrum,
    save_spectrum,
    spectrum,
    spectrum_cache_key,
    volume,
)
from .special import EtaValue, dedekind_eta, euler_gamma, gamma, incomplete_gamma_upper
from .heat import (
    AsymptoticCoeffs,
    HeatTraceValue,
    ZetaResult,
    abks_b1,
    abks_for_torus,
    asymptotic_coeffs,
    crossover_t,
    epstein_zeta_det,
    fit_asymptotic,
    heat_trace_rows,
    theta,
)
from .hodge import (
    HodgeModel,
    HodgeSplitZeta,
    TorsionReport,
    bochner_ratio,
    degree_sum_multiplier_identity,
    koszul_split,
    torsion,
    torsion_pair_json,
)
from .deformation import (
    KuranishiSolution,
    TensorField,
    WPGram,
    bracket,
    dbar,
    dbar_star,
    derivation_trace,
    field_inner,
    field_norm,
    green,
    harmonic_part,
    laplace,
    mode_eigenvalue,
    picard_solve,
    symmetry_check,
    wedge_trace_identity,
    wp_gram,
    wp_inner,
)
from .moduli import (
    SweepConfig,
    VerifyReport,
    fd_mixed_hessian,
    logdet_of_modulus,
    modulus_map,
    verify_ak_const,
    verify_bochner,
    verify_iz,
    verify_kronecker,
    verify_psh,
    verify_var,
)

__version__ = "0.1.0"
