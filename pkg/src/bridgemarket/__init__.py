"""Sequential-auction markets driven by Brownian bridge information signals."""

from .bridge import (
    BridgePair,
    SignalParams,
    SignalPath,
    TimeGrid,
    kappa,
    make_grid,
    sample_bridge_pair,
    signal_path,
    simulate_sde_bridge,
)
from .pricing import (
    CounterpartInfo,
    EffectiveInfo,
    Numeraire,
    PayoffModel,
    cara_clearing_price,
    cara_quotes,
    conditional_corr,
    innovation_increments,
    log_likelihood_exponent,
    posterior,
    price,
)
from .experiments import ExperimentConfig, load_config, run_experiment

__version__ = "0.1.0"
