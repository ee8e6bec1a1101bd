"""cheapet package.

Cost-aware prediction routing: answer trusted inputs with a small local
model, forward the rest to an expensive remote model, and measure the
resulting cost/accuracy trade-off.
"""

__version__ = "0.3.0"

# main is NOT imported here so that core/ can be used as a library without
# pulling in the HTTP stack.
# Use `python -m cheapet` or the `cheapet` entry point for the CLI.

__all__ = ["__version__"]
