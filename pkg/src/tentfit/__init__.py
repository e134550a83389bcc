"""Log-concave maximum likelihood via tent functions and level-set sampling."""

__version__ = "0.1.0"

from .body import ConvexBodyOracle, VolumeEstimate, WalkConfig, estimate_volume, hit_and_run_sample  # noqa: E402
from .errors import TentfitError  # noqa: E402
from .geometry import INSIDE, OUTSIDE_HULL, Dataset, eval_tent, membership_hull, separate_superlevel  # noqa: E402
from .model import NEGATIVE_INFINITY, FittedModel, eval_density, load_model, log_likelihood, sample_model, save_model  # noqa: E402
from .optimizer import FitConfig, fit, objective_estimate  # noqa: E402
from .sampler import build_sampler, estimate_normalizer, sample_density  # noqa: E402
from .tent import TentFunction, build_ladder, superlevel_oracle, tent_subgradient, tent_value  # noqa: E402

__all__ = [
    "__version__",
    "ConvexBodyOracle",
    "VolumeEstimate",
    "WalkConfig",
    "estimate_volume",
    "hit_and_run_sample",
    "TentfitError",
    "INSIDE",
    "OUTSIDE_HULL",
    "Dataset",
    "eval_tent",
    "membership_hull",
    "separate_superlevel",
    "NEGATIVE_INFINITY",
    "FittedModel",
    "eval_density",
    "load_model",
    "log_likelihood",
    "sample_model",
    "save_model",
    "FitConfig",
    "fit",
    "objective_estimate",
    "build_sampler",
    "estimate_normalizer",
    "sample_density",
    "TentFunction",
    "build_ladder",
    "superlevel_oracle",
    "tent_subgradient",
    "tent_value",
]
