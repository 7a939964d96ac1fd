"""Numerical laboratory for the Majda-Biello coupled KdV system on the torus.

The package implements the spectrally truncated system

    u_t + u_xxx + P_N(v v_x) = 0
    v_t + alpha v_xxx + P_N((u v)_x) = 0,      x in [0, 2*pi),

its conserved quantities, the Gaussian / Gibbs statistical ensemble with an
L2 cutoff, the resonance structure of the two dispersion relations (exact
arithmetic for rational alpha), and Monte Carlo machinery for testing the
invariance of the Gibbs measure under the truncated flow.
"""

__version__ = "0.1.0"

from .fields import (
    FieldPair,
    SobolevParams,
    SpectralField,
    exact_convolution,
    integral_uvv,
    l2_norm_pair,
    mixed_norm,
    project,
    sobolev_norm,
    sup_weighted_norm,
)
from .dynamics import (
    ConservedSnapshot,
    IntegrationError,
    SimConfig,
    Stepper,
    conserved,
    integrate,
    rhs,
    step,
    vector_field_divergence,
)
from .diophantine import (
    DiophantineEstimate,
    QuadraticSurd,
    estimate_type_index,
    surd_continued_fraction,
)
from .resonance import (
    CouplingParam,
    NearResonantTriple,
    ResonanceRoots,
    compute_c_roots,
    compute_d_roots,
    dispersion_gap_B,
    dispersion_gap_D,
    enumerate_near_resonant,
    multiplier_scan,
    resonance_roots,
    verify_lower_bound,
)
from .measure import (
    EnsembleReport,
    GibbsSample,
    MeasureConfig,
    gibbs_log_weight,
    sample_gaussian,
    sample_gibbs_ensemble,
    tail_probability,
)
from .invariance import (
    InvarianceReport,
    TestFunctional,
    builtin_functionals,
    growth_profile,
    invariance_test,
    non_invariance_control,
    truncation_convergence,
)
