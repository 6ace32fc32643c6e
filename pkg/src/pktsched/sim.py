"""Single-run entry point tying policies to the engine."""
from __future__ import annotations

from .model import Instance, RunResult, simulate
from .policies import PolicySpec, make_policy


def run(policy: PolicySpec, instance: Instance, t_end: int, window: tuple[int, int],
        seed: int = 0) -> RunResult:
    """Run one policy over one instance.

    ``seed`` is reserved for randomized policies; every current policy is
    deterministic and ignores it.
    """
    return simulate(make_policy(policy, instance), instance, t_end, window)
