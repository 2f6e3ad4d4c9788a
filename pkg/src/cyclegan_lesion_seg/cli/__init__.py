"""Command-line interface."""

# ``main`` is deliberately not re-exported here: binding the function as a
# package attribute would shadow the ``cli.main`` submodule (entry point
# ``cyclegan_lesion_seg.cli.main:main`` and patch targets resolve through it).
from .main import COMMANDS, build_parser

__all__ = ["COMMANDS", "build_parser"]
