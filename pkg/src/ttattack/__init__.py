"""Gradient-free black-box adversarial attacks driven by tensor-train sampling.

The pieces compose bottom-up: `tt` holds the tensor-train machinery
(evaluation, sampling, likelihood gradients), `protes` the probabilistic
discrete minimizer built on it, `model` a small differentiable classifier
plus black-box endpoints, `attribution` the pixel-significance maps,
`attack` the amplitude-halving attack loop, and `harness` the campaign
runner with metrics and reports.
"""

from .attack import (
    AttackConfig,
    AttackRefused,
    AttackResult,
    compute_norms,
    encode_grid,
    perturb,
    tetradat,
)
from .attribution import (
    AttributionMap,
    integrated_gradient_channels,
    integrated_gradients,
    saliency,
    save_attribution,
    select_top_pixels,
)
from .color import hsv_to_rgb, rgb_to_hsv
from .dataset import make_desk_dataset, load_labeled_folder
from .harness import (
    CampaignSpec,
    CampaignSummary,
    ConfigError,
    emit_report,
    parse_campaign_config,
    run_campaign,
)
from .images import load_image, save_grayscale, save_image, validate_image
from .model import (
    BridgeClassifier,
    BridgeEndpoint,
    BuiltinClassifier,
    InProcessEndpoint,
    Prediction,
    RemoteModelError,
    TransportError,
    initialize_classifier,
    input_gradient,
    load_desk_classifier,
    predict,
    query_blackbox,
    train_desk_classifier,
)
from .protes import ProtesConfig, ProtesState, protes_init, protes_iterate, protes_minimize
from .tt import (
    LIKELIHOOD_FLOOR,
    TTTensor,
    tt_ascent_step,
    tt_get,
    tt_log_likelihood_grad,
    tt_random_nonneg,
    tt_sample,
)

__version__ = "0.1.0"
