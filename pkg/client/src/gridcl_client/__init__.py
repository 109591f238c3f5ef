"""gridcl-client: agent-side SDK for the gridcl wire protocol."""

from __future__ import annotations

__version__ = "0.1.0"

from .agent import Agent, PolicyAdapter, RandomAgent
from .loop import MessageError, StdioTransport, TcpListenTransport, run_agent_loop

__all__ = [
    "Agent",
    "PolicyAdapter",
    "RandomAgent",
    "MessageError",
    "StdioTransport",
    "TcpListenTransport",
    "run_agent_loop",
]
