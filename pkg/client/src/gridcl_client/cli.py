"""Client entry point.

Launched by the harness (`--agent exec:"gridcl-client --agent random"`) it
speaks the protocol on stdio; given --tcp HOST:PORT it listens there and
serves one connection (the harness connects with `tcp:HOST:PORT`).
"""

from __future__ import annotations

import argparse
import sys

from .agent import BUILTIN_AGENTS
from .loop import StdioTransport, TcpListenTransport, run_agent_loop


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gridcl-client")
    parser.add_argument("--agent", default="random", choices=sorted(BUILTIN_AGENTS))
    parser.add_argument("--tcp", default=None, metavar="HOST:PORT", help="listen here instead of using stdio")
    args = parser.parse_args(argv)

    agent = BUILTIN_AGENTS[args.agent]()
    if args.tcp is None:
        return run_agent_loop(agent, StdioTransport())
    host, sep, port = args.tcp.rpartition(":")
    if not sep or not port.isdigit():
        print(f"gridcl-client: bad --tcp address {args.tcp!r}, expected HOST:PORT", file=sys.stderr)
        return 2
    transport = TcpListenTransport(host or "127.0.0.1", int(port))
    try:
        return run_agent_loop(agent, transport)
    finally:
        transport.close()


if __name__ == "__main__":
    sys.exit(main())
