//! Pontryagin Maximum Principle for the time-minimal saturation problem.
//!
//! With `H = P·(F₀ + u F₁)`, `F₀ = (−Γy, γ(1−z))`, `F₁ = (−z, y)`, regular
//! extremals use `u = Ω·sign Φ` where `Φ = P·F₁`. Along any extremal
//! `Φ̇ = P·V` with `V = (−γ + γz − Γz, (γ − Γ)y)`, so singular arcs live on
//! `det(F₁, V) = 0`: the vertical axis and the line `z = z₀`.

mod shooting;
mod synthesis;

use serde::{Deserialize, Serialize};

use crate::model::{BlochState, ScaledParams};

pub use shooting::{find_yc, find_yc_with, shooting_residual, ShootingOptions, YcSolution};
pub use synthesis::{
    synthesize_optimal, synthesize_unbounded, ArcKind, ExtremalArc, ExtremalSample, JunctionCheck,
    OptimalOptions, OptimalReport, OptimalSynthesis, PmpDiagnostics, UnboundedSynthesis,
};

/// Costate `(p_y, p_z)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdjointState {
    pub py: f64,
    pub pz: f64,
}

impl AdjointState {
    pub const fn new(py: f64, pz: f64) -> Self {
        Self { py, pz }
    }

    pub fn norm(&self) -> f64 {
        self.py.hypot(self.pz)
    }

    fn dot(&self, v: [f64; 2]) -> f64 {
        self.py * v[0] + self.pz * v[1]
    }
}

pub fn drift_field(x: BlochState, p: &ScaledParams) -> [f64; 2] {
    [-p.big_gamma * x.y, p.small_gamma * (1.0 - x.z)]
}

pub fn control_field(x: BlochState) -> [f64; 2] {
    [-x.z, x.y]
}

/// `V` such that `Φ̇ = P·V` along the coupled flow, for any control.
pub fn bracket_field(x: BlochState, p: &ScaledParams) -> [f64; 2] {
    let (big, small) = (p.big_gamma, p.small_gamma);
    [-small + small * x.z - big * x.z, (small - big) * x.y]
}

pub fn pseudo_hamiltonian(x: BlochState, adj: AdjointState, u: f64, p: &ScaledParams) -> f64 {
    let f0 = drift_field(x, p);
    let f1 = control_field(x);
    adj.dot([f0[0] + u * f1[0], f0[1] + u * f1[1]])
}

/// `Ṗ = −∂H/∂X`.
pub fn adjoint_rhs(_x: BlochState, adj: AdjointState, u: f64, p: &ScaledParams) -> [f64; 2] {
    [
        p.big_gamma * adj.py - u * adj.pz,
        u * adj.py + p.small_gamma * adj.pz,
    ]
}

/// `Φ = P·F₁ = −p_y z + p_z y`.
pub fn switching_function(x: BlochState, adj: AdjointState) -> f64 {
    adj.dot(control_field(x))
}

/// `Φ̇ = P·V`.
pub fn switching_rate(x: BlochState, adj: AdjointState, p: &ScaledParams) -> f64 {
    adj.dot(bracket_field(x, p))
}

/// `det(F₁, V) = y (γ − 2(γ − Γ) z)`, zero exactly on the singular set.
pub fn singular_set_residual(x: BlochState, p: &ScaledParams) -> f64 {
    let f1 = control_field(x);
    let v = bracket_field(x, p);
    f1[0] * v[1] - f1[1] * v[0]
}

/// State and costate dynamics as one 4-vector `[y, z, p_y, p_z]`.
pub(crate) fn coupled_rhs(x: &[f64; 4], u: f64, p: &ScaledParams) -> [f64; 4] {
    let s = BlochState::new(x[0], x[1]);
    let adj = AdjointState::new(x[2], x[3]);
    let ds = crate::model::rhs(s, u, p);
    let da = adjoint_rhs(s, adj, u, p);
    [ds[0], ds[1], da[0], da[1]]
}

pub(crate) fn split(x: &[f64; 4]) -> (BlochState, AdjointState) {
    (BlochState::new(x[0], x[1]), AdjointState::new(x[2], x[3]))
}
