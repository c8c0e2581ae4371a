"""Szego-type trace asymptotics for one-dimensional periodic Schrodinger operators.

The package builds the Floquet-Bloch band structure of ``H = -d^2/dx^2 + V``
for a trigonometric-polynomial potential, evaluates the kernel of the Fermi
projection ``P_mu``, truncates it to ``(-alpha, alpha)`` and studies
``tr h(B_{alpha, mu})`` as ``alpha`` grows.
"""
from .bands import (
    Band,
    BandStructure,
    GaugeError,
    GenuineBand,
    MuClass,
    band_structure,
    build_lambda_phi,
    classify_mu,
    compute_bands,
    group_genuine,
    integrated_density_of_states,
    solve_delta,
)
from .experiments import (
    ExperimentConfig,
    FitReport,
    GapReport,
    SweepResult,
    SweepRow,
    config_from_dict,
    fit_asymptotics,
    gap_boundedness_check,
    load_config,
    read_sweep,
    render_report,
    resolve_mu,
    run_sweep,
)
from .fibre import (
    EigensolverError,
    FibreEigenSystem,
    PeriodicPotential,
    assemble_fibre_matrix,
    fibre_system,
    potential_from_spec,
    solve_fibre,
)
from .finsec import (
    FiniteSection,
    SectionSpectrum,
    SpectrumError,
    TestFunction,
    assemble_section,
    lw_spectrum,
    lw_trace,
    parse_function,
    schatten_q,
    section_spectrum,
    trace_h,
    widom_coefficient,
    widom_halving_check,
)
from .kernel import (
    DecayReport,
    EdgeError,
    KernelEvaluator,
    ap_mean,
    decay_probe,
    kernel_P,
    kernel_Pi,
    kernel_R,
    lw_kernel,
    make_edge_evaluator,
    make_evaluator,
)

__version__ = "0.1.0"
