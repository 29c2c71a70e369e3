"""Order-p tensor algebra over per-mode invertible transforms.

Provides dense tensor primitives (mode folding/products, slicing, norms),
transform sets (DFT, DCT, Haar, banded, random/data/ROI-dependent), the
star-M tensor-tensor product family, the t-SVDM decomposition with optimal
truncation, and a projection-based classifier with its vectorized matrix
baseline. The `starm` CLI drives reproducible experiment sweeps.
"""

from .core import (
    frobenius_norm,
    frontal_slice,
    is_f_diagonal,
    lateral_slice,
    mode_k_fold,
    mode_k_product,
    mode_k_unfold,
    tube,
    vectorize,
)
from .transforms import (
    ModeTransform,
    TransformSet,
    build_banded,
    build_data_dependent,
    build_dct,
    build_dft,
    build_haar,
    build_random_orthogonal,
    build_roi_dependent,
    build_roi_selection,
    explicit_transform,
    identity_transform,
)
from .products import (
    facewise_product,
    identity_tube,
    is_starm_orthogonal,
    starm_identity,
    starm_product,
    starm_transpose,
    t_linear_combination,
)
from .decomposition import (
    TSVDMFactors,
    load_factors,
    reconstruct,
    save_factors,
    singular_tube_norms,
    t_rank,
    truncate,
    truncation_error,
    tsvdm,
)
from .classification import (
    ClassBasis,
    ClassificationResult,
    DatasetSplit,
    EvalResult,
    build_local_bases,
    classify,
    evaluate,
    matrix_baseline,
    matrix_baseline_sweep,
    project,
    tensor_sweep,
)
from .data import (
    LabeledDataset,
    assemble_class_tensors,
    read_idx,
    read_labels_csv,
    read_tnsr,
    split,
    synth_digits,
    synth_planted,
    synth_roi_planted,
    write_labels_csv,
    write_tnsr,
)

__version__ = "0.1.0"
