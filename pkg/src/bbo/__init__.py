"""bbo: a black-box optimization toolkit.

Suggests configurations for expensive objectives with mixed parameter types,
multiple objectives, and black-box constraints. Core entry points:

- :class:`bbo.space.SearchSpace` / :class:`bbo.space.ParameterSpec`
- :class:`bbo.advisor.Advisor` (ask-and-tell) and :class:`bbo.advisor.TaskSpec`
- :func:`bbo.optimizer.run` (closed loop)
- :mod:`bbo.bench` (built-in problems and the rank-table runner)
- :mod:`bbo.report` (history JSON and static HTML reports)
"""

from .advisor import Advisor, AlgorithmPlan, TaskSpec, auto_select
from .history import History, Observation, TrialState
from .optimizer import OptResult, evaluate_safe, run
from .space import Configuration, ParameterSpec, SearchSpace

__all__ = [
    "Advisor",
    "AlgorithmPlan",
    "Configuration",
    "History",
    "Observation",
    "OptResult",
    "ParameterSpec",
    "SearchSpace",
    "TaskSpec",
    "TrialState",
    "auto_select",
    "evaluate_safe",
    "run",
    "__version__",
]

__version__ = "0.1.0"
