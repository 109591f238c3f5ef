"""gridcl: a harness for reproducible continual-RL experiments on gridworlds."""

from __future__ import annotations

__version__ = "0.1.0"

from . import tasks as _tasks  # noqa: F401  (registers the built-in task families)
