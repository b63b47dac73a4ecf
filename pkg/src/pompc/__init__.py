"""KL-regularized model-based RL with MPPI planning and adaptive priors.

A latent world model (SimNorm encoder, dynamics, two-hot reward head)
supports an MPPI planner guided by a learned sampling policy and a
bootstrap value ensemble. The planner's Gaussians are distilled into an
adaptive prior that regularizes the policy update; the strength dial
spans pure value maximization (lambda = 0) through pure planner cloning
(lambda = inf).

Library entry points live in the submodules; ``pompc.trainer.run_training``
and the ``pompc`` CLI drive end-to-end runs on the built-in analytic
environments.
"""

from . import (agent, config, dists, envs, nnet, planner, policy, prior,
               replay, trainer, value, worldmodel)
from ._core import BACKEND

__version__ = "0.1.0"

__all__ = [
    "agent", "config", "dists", "envs", "nnet", "planner", "policy",
    "prior", "replay", "trainer", "value", "worldmodel", "BACKEND",
    "__version__",
]
