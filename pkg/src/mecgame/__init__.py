"""Multi-user mobile edge computing offloading as an exact potential game.

Each user picks an offloaded fraction, a transmit power and a local CPU
frequency to minimise an altruistic utility: its own overhead plus the
overheads of the co-channel users it interferes with.  Best-response
dynamics reach a Nash equilibrium whose quality is measured against a
centralised optimum on small instances.
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DomainError,
    InfeasibleStrategyError,
    NetworkParams,
    Scenario,
    Strategy,
    StrategyProfile,
    Task,
    UndefinedRateError,
    UserParams,
    total_overhead,
    transmission_rate,
)
from .game import altruistic_utility, is_nash, potential  # noqa: E402
from .best_response import SolverConfig  # noqa: E402
from .dynamics import UpdateSchedule, run  # noqa: E402
from .analysis import (  # noqa: E402
    Discretization,
    EnumerationGuardError,
    centralized_optimum,
    ne_oracle,
    pareto_check,
    poa_upper_bound,
    price_of_anarchy,
)

__all__ = [
    "__version__",
    "DomainError",
    "InfeasibleStrategyError",
    "NetworkParams",
    "Scenario",
    "Strategy",
    "StrategyProfile",
    "Task",
    "UndefinedRateError",
    "UserParams",
    "total_overhead",
    "transmission_rate",
    "altruistic_utility",
    "is_nash",
    "potential",
    "SolverConfig",
    "UpdateSchedule",
    "run",
    "Discretization",
    "EnumerationGuardError",
    "centralized_optimum",
    "ne_oracle",
    "pareto_check",
    "poa_upper_bound",
    "price_of_anarchy",
]
