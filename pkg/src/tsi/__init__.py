"""Recovering magnetic fields and potentials on a flat torus from wave-trace invariants."""

from .errors import (
    ClampViolation,
    ConvergenceFailure,
    FluxNotQuantized,
    GenericityFailure,
    HypothesisViolation,
    IllConditioned,
    IncompleteCoverage,
    NonMonotone,
    NonPositive,
    NonPositiveDeterminant,
    NonzeroMeanPotential,
    NumericalFailure,
    SpecParseError,
    SymmetryViolation,
    TSIError,
    ValidationFailure,
    ZeroMeanField,
    ZeroVector,
)
from .fields import (
    DirectionalData,
    MagneticPotential,
    ScalarField,
    check_cosine_condition,
    check_field_condition,
    constant_field,
    directional,
    make_field,
    make_potential,
)
from .invariants import (
    ChangeOfVariables,
    InvariantTable,
    I_invariant_directional,
    I_invariant_raw,
    J_invariant_raw,
    b_term,
    build_change_of_variables,
    build_invariant_table,
    m0_phase,
)
from .lattice import (
    Lattice,
    PrimitiveDirection,
    dual_pair,
    lattice_points,
    make_direction,
    make_lattice,
    primitive_decompose,
    validate_length_condition,
)
from .reconstruct import (
    CosineData,
    GaugeClass,
    RoundtripConfig,
    recover_B,
    recover_gauge_class,
    recover_V,
    roundtrip,
)
from .spectral_oracle import (
    DiscretizedHamiltonian,
    assemble,
    eigenvalues,
    isospectrality_check,
    smoothed_wave_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ChangeOfVariables",
    "ClampViolation",
    "ConvergenceFailure",
    "CosineData",
    "DirectionalData",
    "DiscretizedHamiltonian",
    "FluxNotQuantized",
    "GaugeClass",
    "GenericityFailure",
    "HypothesisViolation",
    "I_invariant_directional",
    "I_invariant_raw",
    "IllConditioned",
    "IncompleteCoverage",
    "InvariantTable",
    "J_invariant_raw",
    "Lattice",
    "MagneticPotential",
    "NonMonotone",
    "NonPositive",
    "NonPositiveDeterminant",
    "NonzeroMeanPotential",
    "NumericalFailure",
    "PrimitiveDirection",
    "RoundtripConfig",
    "ScalarField",
    "SpecParseError",
    "SymmetryViolation",
    "TSIError",
    "ValidationFailure",
    "ZeroMeanField",
    "ZeroVector",
    "assemble",
    "b_term",
    "build_change_of_variables",
    "build_invariant_table",
    "check_cosine_condition",
    "check_field_condition",
    "constant_field",
    "directional",
    "dual_pair",
    "eigenvalues",
    "isospectrality_check",
    "lattice_points",
    "m0_phase",
    "make_direction",
    "make_field",
    "make_lattice",
    "make_potential",
    "primitive_decompose",
    "recover_B",
    "recover_V",
    "recover_gauge_class",
    "roundtrip",
    "smoothed_wave_trace",
    "validate_length_condition",
]
