//! Periodic finite-difference discretisation: grids, the operators `A(t)`
//! and `M_k(t)`, the θ-scheme time stepper realising the solution operator
//! of `du/dt = A u + f`, and the parabolicity checks.

mod grid;
mod operator;
mod parabolicity;
mod spec;
mod stepper;

pub use grid::{FieldVector, SpatialGrid, DEFAULT_POINT_CAP};
pub use operator::{assemble_a, assemble_m, sample_checked, DiscreteOperator};
pub use parabolicity::{
    energy_constant, parabolicity_classify, suggest_weights, symbol_matrix, time_samples, Parabolicity,
    WeightSuggestion, DEFAULT_SYMBOL_TOLERANCE, DEFAULT_TIME_SAMPLES,
};
pub use spec::{Form, NoiseChannel, OperatorSpec};
pub use stepper::{march, step, OperatorFamily, PreparedStep, SpecOperator, ThetaStepper, DEFAULT_THETA};
