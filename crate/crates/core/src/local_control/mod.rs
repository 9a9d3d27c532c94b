//! Generalized local control: pick `u` to maximize the curvature of the
//! linear entropy.
//!
//! Away from the zero set of the control coefficient the law is bang
//! (`u = Ω·sign μ`). On the horizontal line `z = z₀` the sign law chatters;
//! its average is the singular feedback `ū = −(γ/y)(1 − z₀)`, which keeps
//! `ż = 0` as long as `|ū| ≤ Ω`, i.e. `|y| ≥ y_lim`. On the vertical axis the
//! control is switched off and the spin relaxes freely.

mod chatter;
mod synthesis;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{control_coefficient, BlochState, ControlBound, ScaledParams, SegmentKind};

pub use chatter::{chattering_demo, ChatterRun};
pub(crate) use synthesis::{free_vertical_duration, sample_free_vertical, sample_singular_arc};
pub use synthesis::{
    seed_start, synthesize_local, LocalOptions, LocalReport, LocalStop, LocalSynthesis,
};

/// Geometry of the horizontal singular line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularData {
    /// Height of the line, `γ / (2(γ − Γ))`.
    pub z0: f64,
    /// Smallest `|y|` at which `|ū| ≤ Ω`; zero for unbounded control.
    pub y_lim: f64,
    /// `γ²(γ − 2Γ) / (4(γ − Γ)²)`, the constant in `y ẏ = −Γ y² + g` on the line.
    pub g: f64,
}

pub fn singular_data(p: &ScaledParams) -> Result<SingularData> {
    let (big, small) = (p.big_gamma, p.small_gamma);
    if big == small {
        return Err(Error::EqualRates(big));
    }
    let diff = small - big;
    let y_lim = match p.bound {
        ControlBound::Finite(omega) => small * (2.0 * big - small) / (2.0 * omega * (big - small)),
        ControlBound::Unbounded => 0.0,
    };
    Ok(SingularData {
        z0: small / (2.0 * diff),
        y_lim,
        g: small * small * (small - 2.0 * big) / (4.0 * diff * diff),
    })
}

/// `ū = −(γ / y)(1 − z₀)`.
pub fn singular_feedback(s: BlochState, p: &ScaledParams) -> Result<f64> {
    let sd = singular_data(p)?;
    if s.y == 0.0 {
        return Err(Error::FeedbackAtAxis);
    }
    Ok(-(p.small_gamma / s.y) * (1.0 - sd.z0))
}

/// Position on the singular line after time `t`, starting from `y0`.
///
/// On the line `d(y²)/dt = −2Γ y² + 2g`, so
/// `y² = e^{−2Γt}(y0² − g/Γ) + g/Γ`.
pub fn singular_arc_position(t: f64, y0: f64, p: &ScaledParams) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidOption(format!("negative arc time {t}")));
    }
    let c = singular_data(p)?.g / p.big_gamma;
    let radicand = (-2.0 * p.big_gamma * t).exp() * (y0 * y0 - c) + c;
    if radicand < 0.0 {
        return Err(Error::PastAxis { radicand });
    }
    Ok(radicand.sqrt().copysign(y0))
}

/// Time to move along the singular line from `y0` to `y1`.
pub fn singular_arc_duration(y0: f64, y1: f64, p: &ScaledParams) -> Result<f64> {
    let same_side = y1 == 0.0 || (y0 < 0.0) == (y1 < 0.0);
    if y1.abs() > y0.abs() || !same_side {
        return Err(Error::InvalidOrder { y0, y1 });
    }
    let c = singular_data(p)?.g / p.big_gamma;
    Ok(((y0 * y0 - c) / (y1 * y1 - c)).ln() / (2.0 * p.big_gamma))
}

/// Time for the singular arc from `y0` to reach the axis.
pub fn singular_arc_reach_time(y0: f64, p: &ScaledParams) -> Result<f64> {
    singular_arc_duration(y0, 0.0, p)
}

/// Tolerance bands of the local law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Band around `z₀` treated as "on the singular line".
    pub tol_z: f64,
    /// Band around `y = 0` treated as "on the vertical axis".
    pub tol_y: f64,
    /// Distance to the origin counted as reaching the target.
    pub target: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_z: 1e-7,
            tol_y: 1e-9,
            target: 1e-6,
        }
    }
}

/// Feedback form of the local law. For unbounded control the bang branch
/// returns `±∞`.
pub fn local_policy(s: BlochState, p: &ScaledParams, tol: &Tolerances) -> f64 {
    if s.y.abs() <= tol.tol_y {
        return 0.0;
    }
    if let Ok(sd) = singular_data(p) {
        if (s.z - sd.z0).abs() <= tol.tol_z && s.y.abs() >= sd.y_lim {
            if let Ok(u) = singular_feedback(s, p) {
                return u;
            }
        }
    }
    let mu = control_coefficient(s, p);
    if mu == 0.0 {
        return 0.0;
    }
    match p.bound {
        ControlBound::Finite(omega) => omega.copysign(mu),
        ControlBound::Unbounded => f64::INFINITY.copysign(mu),
    }
}

/// One phase of a synthesized control sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    pub kind: SegmentKind,
    pub t_start: f64,
    pub t_end: f64,
    pub entry: BlochState,
    pub exit: BlochState,
}

impl ControlSegment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}
