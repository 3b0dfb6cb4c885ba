"""Command-line entry point mirroring the server configuration."""

from __future__ import annotations

import argparse
import sys

from .server import ServerConfig, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mlm-server",
        description="Serve masked-position logits over protocol v1.")
    backend = parser.add_mutually_exclusive_group(required=True)
    backend.add_argument("--tabular", metavar="PATH",
                         help="serve a tabular model file")
    backend.add_argument("--pretrained", metavar="NAME",
                         help="serve a pretrained masked language model")
    transport = parser.add_mutually_exclusive_group()
    transport.add_argument("--stdio", action="store_true", default=True,
                           help="serve on stdin/stdout (default)")
    transport.add_argument("--tcp", type=int, metavar="PORT",
                           help="serve on a local TCP port (0 for ephemeral)")
    parser.add_argument("--device", default="cpu",
                        help="device hint for pretrained backends")
    args = parser.parse_args(argv)

    if args.tabular:
        config = ServerConfig("tabular", args.tabular, device=args.device)
    else:
        config = ServerConfig("pretrained", args.pretrained, device=args.device)
    if args.tcp is not None:
        config = ServerConfig(config.backend, config.source, "tcp", args.tcp,
                              args.device)
    try:
        serve(config)
    except KeyboardInterrupt:
        return 0
    except Exception as exc:  # backend load or transport setup failure
        print(f"mlm-server: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
