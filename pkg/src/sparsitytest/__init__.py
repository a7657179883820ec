"""Testing sparsity of a weight vector from noisy linear measurements.

Labels follow y = w.x + noise with iid coordinates x. Cumulants of y reveal
the power sums sum_i w_i^l, which in turn reveal whether w is close to
k-sparse.
"""

from .cumulant_algebra import (
    CumulantVector,
    MomentVector,
    bell_polynomial,
    cumulant_recurrence,
    cumulant_upper_bound,
    cumulants_to_moments,
    find_nonzero_cumulant,
    mgf_root_search,
    moments_to_cumulants,
)
from .distributions import (
    Distribution,
    MarginalModel,
    NoiseModel,
    SampleBatch,
    WeightVector,
    exact_moments,
    sample_dataset,
    sample_labels,
    sample_marginal,
    symmetrize_batch,
)
from .estimation import (
    PowerSumEstimate,
    PowerSumEstimator,
    empirical_cumulant,
    empirical_moment,
    estimate_norm2,
    estimate_power_sum,
    linf_extract,
    sample_size_power_sum,
)
from .lowerbounds import (
    distinguisher_advantage,
    expect1_closed_form,
    gaussian_log_pdfs,
    gen_gaussian_hidden,
    gen_poisson_noniid,
    gen_poisson_unknown_noise,
    r_moment_closed_form,
)
from .testers import (
    Decision,
    GeneralSparsityTester,
    Schedule,
    SymPolySparsityTester,
    TestVerdict,
    build_schedule,
    dist_to_k_sparse,
    general_tester,
    newton_sym_from_power_sums,
    noiseless_recover,
    sym_poly_tester,
)

__version__ = "0.1.0"
