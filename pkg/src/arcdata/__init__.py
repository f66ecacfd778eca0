"""arcdata: robot episodes in, tokenized action reasoning data out.

The pipeline turns demonstration episodes (images, relative depth grids,
per-frame gripper points, continuous actions) into serialized training
samples: a depth token string, a short visual trace of the end-effector, and
discretized action tokens, in that order, plus the auxiliary and
trajectory-conditioned variants, overlay rendering, and the weighted mixture
sampler used to assemble corpora.
"""

from .actions import (
    ActionQuantileStats,
    ActionQuantizer,
    ActionVocabulary,
    bins_to_tokens,
    chunk_actions,
    decode_action,
    encode_action,
    fit_quantiles,
    tokens_to_bins,
)
from .chains import (
    ChainParseError,
    ReasoningChain,
    ReasoningSample,
    SAMPLE_KINDS,
    make_sample,
    make_steering_request,
    parse_chain,
    parse_target,
    render_chain,
)
from .depth import (
    DepthCodebook,
    DepthStringError,
    DepthTokenizer,
    DepthVocabulary,
    decode_depth,
    encode_depth,
    parse_depth_string,
    render_depth_string,
    train_codebook,
)
from .episodes import (
    BIMANUAL,
    SINGLE_ARM,
    DepthGrid,
    Episode,
    EpisodeError,
    Frame,
    find_episode_dirs,
    load_depth_grid,
    load_episode,
    save_depth_grid,
    write_manifest,
)
from .mixture import MixtureConfig, MixtureConfigError, MixtureSampler, pretrain_config, sample_stream, validate_config
from .overlay import CYAN, RgbImage, YELLOW, line_pixels, overlay_bimanual, overlay_trace
from .traces import (
    GripperTrack,
    VisualTrace,
    build_bimanual_traces,
    build_trace,
    episode_traces,
    episode_tracks,
    rescale_point,
    subsample_indices,
)

__version__ = "0.1.0"
