"""driftlab: concept-drift detection under spurious correlations.

Stream generators with confound injection, online learners, Shapley-value
explanations, baseline change detectors, explanation-monitoring drift
detection, and entropy-gated human-in-the-loop deconfounding, plus an
experiment harness, CLI, and live-annotation session API.
"""

from driftlab._core import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
