"""Meta-transfer learning of causal structure from adaptation speed."""

from metacausal._core import (
    ConfigError,
    NumericalError,
    __version__,
    edge_cross_entropy,
    exact_edge_gradient,
    experiment_names,
    gamma_gradient,
    mixture_regret,
    read_manifest,
    regret_mixture,
    regret_mixture_gradient,
)
from metacausal._core import run_experiment as _run_experiment


def run_experiment(experiment, seed, out_dir, profile="desk", config=None, workers=1):
    """Run one experiment; config values may be numbers, bools, strings or int lists."""
    def text(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (list, tuple)):
            return ",".join(str(x) for x in v)
        return str(v)

    cfg = {str(k): text(v) for k, v in (config or {}).items()}
    return _run_experiment(experiment, seed, str(out_dir), profile, cfg, workers)


__all__ = [
    "ConfigError",
    "NumericalError",
    "__version__",
    "edge_cross_entropy",
    "exact_edge_gradient",
    "experiment_names",
    "gamma_gradient",
    "mixture_regret",
    "read_manifest",
    "regret_mixture",
    "regret_mixture_gradient",
    "run_experiment",
]
