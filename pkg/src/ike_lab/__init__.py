"""Desk-scale laboratory for camera-incremental re-identification.

A small encoder is trained camera by camera; an evolving identity memory
associates identities across cameras (mutual-argmax matching), distills
knowledge from the frozen previous model, and merges or expands at every
camera boundary. Retrieval quality is tracked as cross-camera mAP.
"""

from .association import (
    AssociationMap,
    AssociationPrecision,
    AugmentedSample,
    all_unmatched,
    association_precision,
    augment_dataset,
    cycle_match,
    one_way_match,
)
from .datasets import (
    CameraDataset,
    DatasetBundle,
    SyntheticSpec,
    TestSplit,
    generate,
    load_dataset,
    save_dataset,
)
from .encoder import (
    Adam,
    EncoderParams,
    FeaturePack,
    ParamGrads,
    backward,
    forward,
    forward_batch,
    grad_check,
    init_encoder,
    load_encoder,
    save_encoder,
)
from .errors import (
    ConfigError,
    DegenerateEmbedding,
    DegenerateMean,
    DimensionMismatch,
    EmptyBatch,
    EmptyGallery,
    EmptyMemory,
    IndexOutOfRange,
    LabelOutOfRange,
    LabError,
    MissingLabel,
    MissingProvenance,
    NoRelevant,
    ParseError,
    ShapeMismatch,
    StaleCache,
)
from .evaluation import (
    MetricsReport,
    average_precision,
    evaluate_map,
    forgetting_curve,
    precision_matrix,
)
from .harness import (
    ORDER_PRESETS,
    ExperimentConfig,
    RunSpec,
    SelftestReport,
    run,
    selftest,
)
from .losses import LossBreakdown, loss_id, loss_id_hist, loss_kd, loss_mkd, loss_total
from .memory import (
    NO_MATCH,
    IdentityMemory,
    cosine_scores,
    empty_memory,
    init_memory,
    iku_merge,
    load_memory,
    momentum_update,
    save_memory,
)
from .trainer import (
    Hyperparams,
    RunRecorder,
    TrainState,
    Variant,
    init_state,
    run_sequence,
    train_camera,
    train_joint_upperbound,
)

__version__ = "0.1.0"
