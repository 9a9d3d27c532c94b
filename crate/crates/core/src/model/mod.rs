//! Scaled Bloch dynamics in the `(y, z)` plane, linear entropy and its time
//! derivatives, and a deterministic fixed-step integrator.

mod integrator;
mod trajectory;

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use integrator::{
    integrate, integrate_until, propagate, rk4_step, Crossing, EventSpec, Integrated,
    IntegrationOptions, Propagation, StateEvent, StepOptions, StopReason, DEFAULT_DT,
    DEFAULT_EVENT_TOL, DEFAULT_T_MAX,
};
pub use trajectory::{Sample, SegmentKind, SwitchPoint, Trajectory};

/// Tolerance used by invariant checks on the unit ball.
pub const EPS_NUM: f64 = 1e-9;

/// Relaxation times and control amplitude in laboratory units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Longitudinal relaxation time, seconds.
    pub t1: f64,
    /// Transverse relaxation time, seconds.
    pub t2: f64,
    /// Maximum control angular frequency, rad/s.
    pub omega_max: f64,
    /// Equilibrium magnetization.
    pub m0: f64,
}

impl PhysicalParams {
    pub fn new(t1: f64, t2: f64, omega_max: f64) -> Result<Self> {
        let p = Self {
            t1,
            t2,
            omega_max,
            m0: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t1", self.t1),
            ("t2", self.t2),
            ("omega_max", self.omega_max),
            ("m0", self.m0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Bound on the modulus of the scaled control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlBound {
    Finite(f64),
    Unbounded,
}

impl ControlBound {
    pub fn finite(self) -> Option<f64> {
        match self {
            ControlBound::Finite(b) => Some(b),
            ControlBound::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, ControlBound::Unbounded)
    }
}

impl Default for ControlBound {
    fn default() -> Self {
        ControlBound::Finite(TAU)
    }
}

impl fmt::Display for ControlBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlBound::Finite(b) => write!(f, "{b}"),
            ControlBound::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Dimensionless rates Γ (transverse), γ (longitudinal) and control bound Ω.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub big_gamma: f64,
    pub small_gamma: f64,
    pub bound: ControlBound,
}

impl ScaledParams {
    /// Rates with the default bound `Ω = 2π`.
    pub fn new(big_gamma: f64, small_gamma: f64) -> Result<Self> {
        Self::with_bound(big_gamma, small_gamma, ControlBound::default())
    }

    pub fn with_bound(big_gamma: f64, small_gamma: f64, bound: ControlBound) -> Result<Self> {
        let p = Self {
            big_gamma,
            small_gamma,
            bound,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.big_gamma.is_finite() && self.big_gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Γ must be positive, got {}",
                self.big_gamma
            )));
        }
        if !(self.small_gamma.is_finite() && self.small_gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "γ must be positive, got {}",
                self.small_gamma
            )));
        }
        if let ControlBound::Finite(b) = self.bound {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "control bound must be positive, got {b}"
                )));
            }
        }
        Ok(())
    }

    /// Rejects parameter sets outside the saturation regime `Γ > γ`, where
    /// the singular line sits in `z₀ ∈ (−½, 0)`.
    pub fn require_saturation_regime(&self) -> Result<()> {
        if self.big_gamma == self.small_gamma {
            return Err(Error::EqualRates(self.big_gamma));
        }
        if self.big_gamma < self.small_gamma {
            return Err(Error::InvalidParameter(format!(
                "saturation synthesis needs Γ > γ, got Γ = {}, γ = {}",
                self.big_gamma, self.small_gamma
            )));
        }
        Ok(())
    }
}

/// Scaled parameters together with the time scale `ω_max / 2π`
/// (scaled time = `time_scale` × seconds).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub params: ScaledParams,
    pub time_scale: f64,
}

impl Scaling {
    pub fn to_seconds(&self, scaled: f64) -> f64 {
        scaled / self.time_scale
    }
}

pub fn scale_parameters(p: &PhysicalParams) -> Result<Scaling> {
    p.validate()?;
    if p.t2 > 2.0 * p.t1 {
        log::warn!(
            "T2 = {} s exceeds 2·T1 = {} s; relaxation parameters are not physical",
            p.t2,
            2.0 * p.t1
        );
    }
    let params = ScaledParams::new(TAU / (p.omega_max * p.t2), TAU / (p.omega_max * p.t1))?;
    Ok(Scaling {
        params,
        time_scale: p.omega_max / TAU,
    })
}

/// Reduced Bloch vector. The `x` component is identically zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    pub const NORTH_POLE: BlochState = BlochState { y: 0.0, z: 1.0 };
    pub const SOUTH_POLE: BlochState = BlochState { y: 0.0, z: -1.0 };
    pub const ORIGIN: BlochState = BlochState { y: 0.0, z: 0.0 };

    pub const fn new(y: f64, z: f64) -> Self {
        Self { y, z }
    }

    pub fn norm(&self) -> f64 {
        self.y.hypot(self.z)
    }

    pub fn norm_sq(&self) -> f64 {
        self.y * self.y + self.z * self.z
    }

    /// Reflection `y → −y`, which maps solutions under `u` to solutions under `−u`.
    pub fn mirrored(&self) -> Self {
        Self::new(-self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.y, self.z]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

/// Right-hand side `(ẏ, ż)` of the scaled controlled dynamics.
pub fn rhs(s: BlochState, u: f64, p: &ScaledParams) -> [f64; 2] {
    [
        -p.big_gamma * s.y - u * s.z,
        p.small_gamma * (1.0 - s.z) + u * s.y,
    ]
}

/// `S_l = ½(1 − y² − z²)`.
pub fn linear_entropy(s: BlochState) -> f64 {
    0.5 * (1.0 - s.y * s.y - s.z * s.z)
}

/// `dS_l/dt` along [`rhs`]; the control drops out.
pub fn entropy_rate(s: BlochState, p: &ScaledParams) -> f64 {
    p.big_gamma * s.y * s.y - p.small_gamma * s.z * (1.0 - s.z)
}

/// Coefficient of `u` in `d²S_l/dt²`: `y (2(γ − Γ) z − γ)`.
///
/// Vanishes on the vertical axis `y = 0` and on the horizontal line
/// `z = z₀ = γ / (2(γ − Γ))`.
pub fn control_coefficient(s: BlochState, p: &ScaledParams) -> f64 {
    s.y * (2.0 * (p.small_gamma - p.big_gamma) * s.z - p.small_gamma)
}

/// Control-free part of `d²S_l/dt²`: `−2Γ²y² + γ²(2z − 1)(1 − z)`.
pub fn free_curvature(s: BlochState, p: &ScaledParams) -> f64 {
    let g2 = p.small_gamma * p.small_gamma;
    -2.0 * p.big_gamma * p.big_gamma * s.y * s.y + g2 * (2.0 * s.z - 1.0) * (1.0 - s.z)
}

/// Full curvature `d²S_l/dt²` under control `u`.
pub fn entropy_curvature(s: BlochState, u: f64, p: &ScaledParams) -> f64 {
    u * control_coefficient(s, p) + free_curvature(s, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn case1() -> ScaledParams {
        ScaledParams::new(3.5, 0.5).unwrap()
    }

    #[test]
    fn scaling_reproduces_reported_rates() {
        let omega = 2.0 * PI * 32.3;
        let s = scale_parameters(&PhysicalParams::new(61.9e-3, 8.8e-3, omega).unwrap()).unwrap();
        assert!((s.params.big_gamma - 3.518).abs() < 5e-3, "{:?}", s);
        assert!((s.params.small_gamma - 0.5).abs() < 5e-3);
        assert!((s.time_scale - 32.3).abs() < 1e-12);

        let s = scale_parameters(&PhysicalParams::new(61.9e-3, 6.2e-3, omega).unwrap()).unwrap();
        assert!((s.params.big_gamma - 4.99).abs() < 1e-2);

        let s = scale_parameters(&PhysicalParams::new(1.0, 1.0, TAU).unwrap()).unwrap();
        assert_eq!(s.params.big_gamma, 1.0);
        assert_eq!(s.params.small_gamma, 1.0);
        assert_eq!(s.params.bound, ControlBound::Finite(TAU));
    }

    #[test]
    fn non_positive_inputs_rejected() {
        assert!(PhysicalParams::new(0.0, 1.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, -1.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, f64::NAN).is_err());
        assert!(ScaledParams::new(0.0, 0.5).is_err());
        assert!(ScaledParams::with_bound(3.5, 0.5, ControlBound::Finite(0.0)).is_err());
        // advisory only
        assert!(scale_parameters(&PhysicalParams::new(1.0, 3.0, 1.0).unwrap()).is_ok());
    }

    #[test]
    fn rhs_examples() {
        let p = case1();
        assert_eq!(rhs(BlochState::new(0.0, 1.0), 1.7, &p), [-1.7, 0.0]);
        assert_eq!(rhs(BlochState::new(0.0, 0.0), 0.0, &p), [0.0, 0.5]);
        assert_eq!(rhs(BlochState::new(1.0, 0.0), 0.0, &p), [-3.5, 0.5]);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(linear_entropy(BlochState::new(0.0, 1.0)), 0.0);
        assert_eq!(linear_entropy(BlochState::new(0.0, 0.0)), 0.5);
        assert!(linear_entropy(BlochState::new(0.6, 0.8)).abs() < 1e-15);

        let p = case1();
        assert_eq!(entropy_rate(BlochState::new(0.0, 1.0), &p), 0.0);
        assert_eq!(entropy_rate(BlochState::new(1.0, 0.0), &p), 3.5);
        assert_eq!(entropy_rate(BlochState::new(0.0, 0.5), &p), -0.125);
    }

    #[test]
    fn control_coefficient_examples() {
        let p = case1();
        let z0 = 0.5 / (2.0 * (0.5 - 3.5));
        assert_eq!(control_coefficient(BlochState::new(0.0, 0.3), &p), 0.0);
        assert!(control_coefficient(BlochState::new(0.42, z0), &p).abs() < 1e-15);
        assert!((control_coefficient(BlochState::new(-0.01, 1.0), &p) - 0.065).abs() < 1e-15);
    }

    #[test]
    fn free_curvature_examples() {
        let p = case1();
        assert_eq!(free_curvature(BlochState::new(0.0, 1.0), &p), 0.0);
        assert_eq!(free_curvature(BlochState::new(0.0, 0.0), &p), -0.25);
    }

    #[test]
    fn saturation_regime() {
        assert!(case1().require_saturation_regime().is_ok());
        assert!(matches!(
            ScaledParams::new(1.0, 1.0)
                .unwrap()
                .require_saturation_regime(),
            Err(Error::EqualRates(_))
        ));
        assert!(ScaledParams::new(0.2, 0.5)
            .unwrap()
            .require_saturation_regime()
            .is_err());
    }
}
