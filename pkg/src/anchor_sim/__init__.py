"""Alternating radar/communications resource allocation and Bayesian tracking."""

from .anchor import (AllocationSolution, AnchorParams, anchor_solve,
                     random_allocation, uniform_allocation)
from .errors import (AnchorSimError, ConvergenceError, GeometryError, InfeasibleError,
                     InstanceTooLarge, ScenarioError, SingularMatrixError,
                     TransitionFailure)
from .fim import (AllocationVector, FrequencyAllocation, FusionPrior, IntervalModel,
                  initial_prior)
from .freq_alloc import AnnealParams
from .power_time import AscentParams
from .scenario import (Scenario, desk_scenario, generate_random_scenario,
                       interval_schedule, load_scenario, paper_scenario,
                       save_scenario)

__version__ = "0.1.0"
