"""Simulation and estimation for strain-tuned quadrupolar donor spins.

Thin python layer over the compiled core: spin Hamiltonians and transition
frequencies, the strain -> EFG -> f_Q chain, ENDOR spectrum synthesis, CPMG
coherence decay, least-squares parameter estimation, and the experiment
config language.
"""

from ._core import (  # noqa: F401
    AngularShift,
    BroadeningModel,
    DecayCurve,
    EndorConfig,
    ExperimentConfig,
    ExtractedS,
    FieldConfig,
    FitResult,
    GradientElasticTensor,
    NoiseModel,
    NuclearHamiltonian,
    ParseDiagnostic,
    ParseResult,
    Peak,
    PhysicalConstants,
    QuadrupoleCoupling,
    ShearConvention,
    Spectrum,
    SpinSystem,
    StackOrientation,
    StiffnessConstants,
    StretchedExpFit,
    Transition,
    TransitionTable,
    __version__,
    angular_sweep,
    biaxial_perp_ratio,
    biaxial_thermal_strain,
    build_axial_hamiltonian,
    build_hamiltonian,
    calibrate_noise,
    chemical_shift,
    coherence_decay,
    coherence_time,
    coupling_fq,
    cpmg_filter_function,
    decoherence_integral,
    efg_from_strain,
    extract_s,
    first_order_shift,
    fit_fq_angular,
    fit_gn,
    fit_power_law,
    fit_scaling,
    larmor_frequency,
    magic_angle_rad,
    make_field,
    parse_config,
    peak_positions,
    piezo_shift_forecast,
    second_order_shift,
    synthesize_four_spectra,
    synthesize_spectrum,
    t2_extract,
    transition_frequencies,
    uniaxial_strain,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
