"""Peak-AoI and tail-latency aware uplink power control with federated GPD learning."""
from .aoi import AoiCostConfig, SensorState, advance_queue, advance_virtual_queue, aoi_trajectory, peak_aoi
from .channel import ChannelModel, ChannelSampler, LinkBudget, draw_gain, path_loss_db, transmission_time
from .evt import (
    ExceedanceSet,
    GpdParams,
    extract_exceedances,
    fit_local,
    gpd_ccdf,
    loglik_gradient,
)
from .federated import (
    LocalModelReport,
    fed_average,
    hurst_estimate,
    select_models,
    selection_cost,
)
from .harness import SimConfig, run_online_phase, run_training_phase, sweep_v
from .power import TradeoffConfig, UrllcConstraint, min_power, solve_per_slot
from .traffic import TrafficGenerator, TrafficModel, generate_interarrivals

__version__ = "0.1.0"
