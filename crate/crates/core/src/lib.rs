//! Saturation control of a dissipative spin-1/2.
//!
//! The controlled system is the Bloch vector of a spin-1/2 reduced to the
//! `(y, z)` plane, in scaled units where the control bound is `2π`:
//!
//! ```text
//! ẏ = −Γ y − u z
//! ż =  γ (1 − z) + u y
//! ```
//!
//! The goal is to drive the state to the origin (zero magnetization). Two
//! synthesis strategies are provided:
//!
//! * [`local_control`]: a generalized local control law that maximizes the
//!   second time derivative of the linear entropy, with an exact singular
//!   feedback along the horizontal line `z = z₀`.
//! * [`pmp`]: the time-optimal bang/singular/bang/singular extremal from the
//!   Pontryagin Maximum Principle, with a shooting method for the second
//!   switching point.
//!
//! [`scenario`] wraps both behind named presets, reports and file export.

pub mod error;
pub mod local_control;
pub mod model;
pub mod pmp;
pub mod scenario;

pub use error::{Error, Result};
pub use local_control::{
    chattering_demo, local_policy, singular_arc_duration, singular_arc_position, singular_data,
    singular_feedback, synthesize_local, ControlSegment, LocalOptions, LocalSynthesis,
    SingularData, Tolerances,
};
pub use model::{
    control_coefficient, entropy_rate, free_curvature, integrate, linear_entropy, rhs,
    scale_parameters, BlochState, ControlBound, IntegrationOptions, PhysicalParams, Sample,
    ScaledParams, Scaling, SegmentKind, SwitchPoint, Trajectory,
};
pub use pmp::{
    adjoint_rhs, find_yc, pseudo_hamiltonian, singular_set_residual, switching_function,
    synthesize_optimal, synthesize_unbounded, AdjointState, ExtremalArc, OptimalOptions,
    OptimalSynthesis, YcSolution,
};
pub use scenario::{
    compare, preset, run, Comparison, InitialState, Preset, ScenarioConfig, ScenarioReport,
    Strategy,
};
