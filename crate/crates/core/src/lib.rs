//! Entanglement inflation with rank-tuned unsharp Bell measurements.
//!
//! The crate is generic over the scalar type (`f32` or `f64`); the aliases at
//! the root fix it to double precision.

// `!(x > 0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod inflation;
pub mod linalg;
pub mod measures;
pub mod optimize;
pub mod persistency;
pub mod povm;
pub mod scalar;
pub mod statekit;

pub use error::{Error, Result};
pub use inflation::{
    biased_objective, inflate_all, inflate_chain, inflate_step, optimize_biased, optimize_unbiased,
    protocol_box, unbiased_objective, AuxParams, ChainRecord, ChainStep, ProtocolOptimum, ProtocolParams, Strategy,
};
pub use linalg::{CMatrix, Eigh};
pub use measures::{
    bipartitions, concurrence, fidelity, ggm, ggm_value, local_unitary, tangle, MeasureKind, MeasureValue,
};
pub use optimize::{
    cluster_fidelity_max, cluster_fidelity_sweep, grid_refine_maximize, polish_maximize, tangle_extrema, Dim, OptConfig,
    OptResult, TangleExtrema,
};
pub use persistency::{
    is_fully_product, persistency_estimate, proposition2_plan, strategy_residual, BlochBasis, MeasurementPlan,
    PersistencyCertificate, PersistencyConfig, PlanSearch,
};
pub use povm::{
    apply_povm_element, bell_projectors, generalized_rank2_family, generalized_sqrt_coefficients, op_sqrt,
    outcome_probabilities, unsharp_family, FamilyLabel, InflationOutcome, MeasurementFamily,
};
pub use scalar::{Real, C};
pub use statekit::{
    haar_random_pure, haar_random_pure_from, named_state, reduced_density, schmidt_spectrum, tensor_product, w_class_random,
    DensityMatrix, NamedState, PureState, RngSpec,
};

pub type PureStateF64 = PureState<f64>;
pub type PureStateF32 = PureState<f32>;
pub type DensityMatrixF64 = DensityMatrix<f64>;
pub type DensityMatrixF32 = DensityMatrix<f32>;
pub type MeasurementFamilyF64 = MeasurementFamily<f64>;
pub type ProtocolParamsF64 = ProtocolParams<f64>;
pub type OptResultF64 = OptResult<f64>;
pub type CMatrixF64 = CMatrix<f64>;
