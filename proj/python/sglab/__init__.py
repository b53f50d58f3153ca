"""Attention diffusion on graphs as Markov semigroups.

Thin Python layer over the C++ core. Arrays are NumPy float64; matrices are
n x n attention (row-stochastic) unless stated otherwise.
"""

import json as _json

from ._sglab import (
    Graph,
    NumericalError,
    ParseError,
    attention_matrix,
    breaking_term,
    dirichlet_energy,
    expm,
    feynman_kac,
    generate_homophily_graph,
    homophily_ratio,
    invariant_measure,
    load_graph,
    nonlinear_rollout,
    propagator,
    solve,
    transition_function,
)
from ._sglab import _run_json, _spectral_report_json

__all__ = [
    "Graph",
    "NumericalError",
    "ParseError",
    "attention_matrix",
    "breaking_term",
    "dirichlet_energy",
    "expm",
    "feynman_kac",
    "generate_homophily_graph",
    "homophily_ratio",
    "invariant_measure",
    "load_graph",
    "nonlinear_rollout",
    "propagator",
    "run",
    "solve",
    "spectral_report",
    "transition_function",
]


def spectral_report(attention, breaking=None, killing=None):
    """Spectrum, kernel dimension and ergodicity of A - I (+ C, + diag(c)) as a dict."""
    report = _json.loads(_spectral_report_json(attention, breaking, killing))
    report["eigenvalues"] = [complex(re, im) for re, im in report["eigenvalues"]]
    report["lambda0"] = complex(*report["lambda0"])
    return report


def run(command, config, out_dir):
    """Run a CLI command (diffuse, spectrum, ctmc, sweep, gen-graph) in-process; returns its summary."""
    return _json.loads(_run_json(command, _json.dumps(config), str(out_dir)))
