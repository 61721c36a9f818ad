"""Deep portfolio construction: auto-encode, calibrate, validate, verify."""

from .baselines import (
    FactorModel,
    MomentEstimates,
    ViewSpec,
    black_litterman_mean,
    factor_model_fit,
    lasso,
    markowitz_moments,
)
from .data import (
    ReturnsMatrix,
    SplitSpec,
    depth_example,
    load_returns_csv,
    prices_to_returns,
    split,
    split_by_fraction,
    synth_market,
    write_returns_csv,
)
from .errors import DeepPortError
from .frontier import (
    Frontier,
    FrontierPoint,
    PipelineSettings,
    build_frontier,
    build_lambda_frontier,
    compare_frontiers,
    validation_errors,
)
from .market_map import (
    CommunalRanking,
    rank_communal,
    reconstruction_errors,
    select_universe,
    train_autoencoder,
    train_autoencoder_alternating,
)
from .nn import (
    Network,
    TrainConfig,
    forward,
    gradient,
    init_network,
    loss,
    nested_relu_chain,
    offset_relu,
    train_sgd,
)
from .portfolio_map import TargetSeries, amend_target, calibrate, index_target, kfold_split, track

__all__ = [
    "CommunalRanking",
    "DeepPortError",
    "FactorModel",
    "Frontier",
    "FrontierPoint",
    "MomentEstimates",
    "Network",
    "PipelineSettings",
    "ReturnsMatrix",
    "SplitSpec",
    "TargetSeries",
    "TrainConfig",
    "ViewSpec",
    "amend_target",
    "black_litterman_mean",
    "build_frontier",
    "build_lambda_frontier",
    "calibrate",
    "compare_frontiers",
    "depth_example",
    "factor_model_fit",
    "forward",
    "gradient",
    "index_target",
    "init_network",
    "kfold_split",
    "lasso",
    "load_returns_csv",
    "loss",
    "markowitz_moments",
    "nested_relu_chain",
    "offset_relu",
    "prices_to_returns",
    "rank_communal",
    "reconstruction_errors",
    "select_universe",
    "split",
    "split_by_fraction",
    "synth_market",
    "track",
    "train_autoencoder",
    "train_autoencoder_alternating",
    "train_sgd",
    "validation_errors",
    "write_returns_csv",
]

__version__ = "0.1.0"
