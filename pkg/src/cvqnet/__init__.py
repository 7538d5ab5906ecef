"""Finite-size security analysis for one-to-many CV-QKD broadcast networks."""

from .config import RunConfig, default_config, format_config, load_config, parse_config
from .decomposition import (
    DecompositionRow,
    DecompositionTable,
    JointKeyRate,
    all_orderings,
    chain_mutual_information_term,
    decompose,
    joint_key_rate,
    joint_mutual_information,
    sample_orderings,
    telescopic_holevo_term,
)
from .gaussian import (
    CovarianceMatrix,
    PhysicalityReport,
    SymplecticSpectrum,
    check_physicality,
    condition_on_heterodyne,
    g_function,
    symplectic_eigenvalues,
    symplectic_form,
    von_neumann_entropy,
)
from .keyrates import (
    KeyRateReport,
    TrustModel,
    delta_fs,
    derive_worst_case,
    holevo_collaborative,
    holevo_trusted,
    holevo_untrusted,
    key_rate,
    mutual_information,
    rate_table,
)
from .network import (
    ModeMap,
    NetworkParams,
    OutcomeModel,
    UserLink,
    attach_trusted_detector,
    build_channel_output_cm,
    classical_outcome_cov,
    measured_outcome_model,
    outcome_variance,
    user_label,
)
from .simulate import (
    ConfidenceRegion,
    EstimateReport,
    SymbolBlock,
    confidence_region,
    estimate,
    estimate_report,
    one_sided_quantile,
    read_block,
    simulate,
    worst_case_params,
    write_block,
    write_block_csv,
)

__version__ = "0.1.0"
