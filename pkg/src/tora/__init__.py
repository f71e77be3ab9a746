"""Token spacing and residual alignment for embedding matrices, geometry
diagnostics, and a toy joint-attention simulator."""

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    FormatError,
    NumericalFailureError,
    ToraError,
    TruncationError,
    UnsupportedLayoutError,
    ValidationError,
)
from .gmm import ClusterAssignment, GmmModel, assign, fit_gmm
from .linalg import (
    PlaneRotation,
    PrincipalSplit,
    SvdFactors,
    apply_rotation,
    build_plane_rotation,
    cosine,
    mdc_elbow,
    principal_split,
    project_onto_complement,
    svd,
)
from .metrics import (
    DeltaGammaRecord,
    IsotropyScores,
    all_but_the_top,
    default_removed_components,
    delta_gamma,
    eigen_sum,
    global_anisotropy,
    iso_component_count,
    iso_score,
    isotropy_scores,
    local_isotropy,
    sign_rule_check,
)
from .npyio import ArrayFile, read_array, write_array
from .report import MetricEntry, MetricReport, render_json, write_report, write_sweep_csv
from .simulator import (
    AttentionMap,
    BlockWeights,
    Intervention,
    ModalityWeights,
    ToyBlockState,
    ToyModelWeights,
    init_weights,
    joint_attention_block,
    run_pipeline,
)
from .synthetic import synthetic_inputs, synthetic_latents, synthetic_text_embeddings
from .transform import (
    AlignmentResult,
    SemanticVector,
    ToraConfig,
    TransformResult,
    apply_tora,
    pool_semantic_vector,
    residual_alignment,
    token_spacing,
    total_variance,
    variance_scale_up,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
