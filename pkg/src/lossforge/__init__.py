"""Learned loss spaces for video restoration.

A loss network (feature extractor + 3-frame sequence classifier) is trained
to tell real clips from clips whose center frame was generated; the
restoration network is then trained purely by supervised feature, relation
and pixel matching inside that learned space, with no adversarial term.
"""

from .data import (
    DegradationSpec,
    FrameSequence,
    VideoTriplet,
    degrade,
    load_sequence,
    make_synthetic_corpus,
    sample_triplets,
    save_sequence,
)
from .generator import ReferenceGenerator, generate, reference_generator
from .lossnet import (
    FeatureExtractor,
    FeaturePyramid,
    LossNetwork,
    SequenceClassifier,
    classify_sequence,
    extract_features,
    make_fake_input,
    make_loss_network,
    t_objective,
)
from .metrics import (
    EvalProtocol,
    FlowField,
    FlowParams,
    MetricReport,
    evaluate,
    evaluate_sequences,
    farneback_flow,
    psnr,
    ssim,
    temporal_profile,
    tof,
)
from .objectives import (
    LossBreakdown,
    LossConfig,
    adversarial_g_loss,
    content_loss,
    huber,
    pixel_loss,
    relation_loss,
    total_loss,
)
from .trainer import (
    TrainSchedule,
    TrainState,
    TripletStream,
    alternate,
    init_t,
    load_checkpoint,
    new_train_state,
    pretrain_g,
    save_checkpoint,
    skip_phase,
)

__version__ = "0.1.0"
