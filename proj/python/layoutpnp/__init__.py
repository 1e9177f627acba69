"""Multi-object pose recovery with shared-floor and anti-collision refinement."""

from ._core import *  # noqa: F401,F403
from ._core import Error, run_cli

__all__ = [name for name in dir() if not name.startswith("_")]


def main(argv=None):
    """Console entry point mirroring the standalone binary."""
    import sys

    code, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
