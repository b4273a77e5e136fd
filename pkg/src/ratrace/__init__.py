"""Stateless exploration of release-acquire weak traces.

The package is organized around one module per concern: event and trace
structure (model), consistency checking and saturation (rachecker), the
per-step operational rules (semantics), the input language (program), the
optimal exploration algorithm (dpor), a brute-force reference enumerator
(oracle), and the command line front end (cli).
"""

__version__ = "0.1.0"
