//! Phased realization of the local law: bang arcs are integrated with
//! events, the singular line uses the closed-form arc, and the final leg
//! down the vertical axis uses the closed-form relaxation.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    control_coefficient, integrate_until, rhs, BlochState, ControlBound, Crossing,
    IntegrationOptions, Sample, ScaledParams, SegmentKind, StateEvent, StopReason, SwitchPoint,
    Trajectory, DEFAULT_DT, DEFAULT_T_MAX,
};

use super::{
    singular_arc_duration, singular_arc_position, singular_arc_reach_time, singular_data,
    singular_feedback, ControlSegment, SingularData, Tolerances,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalOptions {
    pub dt: f64,
    /// Displacement `y(0) = −ε` applied to starts exactly on the unstable
    /// part of the vertical axis (`z > 0` or `z = −1`).
    pub seed_eps: Option<f64>,
    pub tol: Tolerances,
    pub t_max: f64,
    /// Give up once the distance to the origin stays above
    /// `failure_factor × running minimum` for `failure_window` time units.
    pub failure_window: f64,
    pub failure_factor: f64,
    pub max_segments: usize,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            seed_eps: Some(1e-6),
            tol: Tolerances::default(),
            t_max: DEFAULT_T_MAX,
            failure_window: 0.05,
            failure_factor: 2.0,
            max_segments: 64,
        }
    }
}

impl LocalOptions {
    fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidOption(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidOption(format!(
                "horizon must be positive, got {}",
                self.t_max
            )));
        }
        if let Some(eps) = self.seed_eps {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::InvalidOption(format!(
                    "seed must be >= 0, got {eps}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalStop {
    Reached,
    /// Distance to the origin kept growing after its minimum.
    Diverging,
    Horizon,
    /// Resting on the axis above the origin, where the law applies no control.
    Stationary,
    SegmentLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalReport {
    pub reached: bool,
    pub duration: Option<f64>,
    pub min_distance: f64,
    pub stop: LocalStop,
    pub switch_points: Vec<SwitchPoint>,
    /// Distance of event states from their manifold before snapping.
    pub event_residuals: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LocalSynthesis {
    pub trajectory: Trajectory,
    pub segments: Vec<ControlSegment>,
    pub report: LocalReport,
}

/// Applies the seed displacement to starts on the unstable vertical axis.
pub fn seed_start(s0: BlochState, seed_eps: Option<f64>) -> BlochState {
    match seed_eps {
        Some(eps) if eps > 0.0 && s0.y == 0.0 && (s0.z > 0.0 || s0.z == -1.0) => {
            BlochState::new(-eps, s0.z)
        }
        _ => s0,
    }
}

#[derive(Clone, Copy, Debug)]
enum Next {
    Decide,
    Bang(f64),
    Singular,
    Free,
    Idle,
}

struct Builder {
    trajectory: Trajectory,
    segments: Vec<ControlSegment>,
    switch_points: Vec<SwitchPoint>,
    event_residuals: Vec<f64>,
}

impl Builder {
    fn new(s: BlochState) -> Self {
        let mut trajectory = Trajectory::new();
        trajectory.push(Sample {
            t: 0.0,
            state: s,
            u: 0.0,
            phase: SegmentKind::Idle,
        });
        Self {
            trajectory,
            segments: Vec::new(),
            switch_points: Vec::new(),
            event_residuals: Vec::new(),
        }
    }

    fn segment(
        &mut self,
        kind: SegmentKind,
        t0: f64,
        t1: f64,
        entry: BlochState,
        exit: BlochState,
    ) {
        self.segments.push(ControlSegment {
            kind,
            t_start: t0,
            t_end: t1,
            entry,
            exit,
        });
    }

    fn finish(mut self, stop: LocalStop, t: f64) -> LocalSynthesis {
        // the first sample carries the control of the first phase
        if let (Some(first), Some(seg)) =
            (self.trajectory.samples.first_mut(), self.segments.first())
        {
            first.phase = seg.kind;
        }
        if let Some(second) = self.trajectory.samples.get(1).copied() {
            if second.phase.is_bang() {
                self.trajectory.samples[0].u = second.u;
            }
        }
        let reached = stop == LocalStop::Reached;
        let min_distance = self.trajectory.min_distance();
        LocalSynthesis {
            trajectory: self.trajectory,
            segments: self.segments,
            report: LocalReport {
                reached,
                duration: reached.then_some(t),
                min_distance,
                stop,
                switch_points: self.switch_points,
                event_residuals: self.event_residuals,
            },
        }
    }
}

/// Sign of `μ` just after leaving `s` under control `u`.
fn sign_after(s: BlochState, u: f64, p: &ScaledParams) -> f64 {
    let d = rhs(s, u, p);
    let h = 1e-7;
    let ahead = BlochState::new(s.y + h * d[0], s.z + h * d[1]);
    let mu = control_coefficient(ahead, p);
    if mu != 0.0 {
        mu.signum()
    } else {
        -s.y.signum()
    }
}

/// Samples of the closed-form singular arc from `y_in` over `duration`.
pub(crate) fn sample_singular_arc(
    t0: f64,
    y_in: f64,
    duration: f64,
    dt: f64,
    p: &ScaledParams,
    sd: &SingularData,
    y_out: f64,
) -> Result<Trajectory> {
    let mut traj = Trajectory::new();
    let feedback = |y: f64| -> Result<f64> {
        if y == 0.0 {
            Ok(0.0)
        } else {
            singular_feedback(BlochState::new(y, sd.z0), p)
        }
    };
    let mut k = 0u64;
    loop {
        let tau = k as f64 * dt;
        if tau >= duration {
            break;
        }
        let y = singular_arc_position(tau, y_in, p)?;
        traj.push(Sample {
            t: t0 + tau,
            state: BlochState::new(y, sd.z0),
            u: feedback(y)?,
            phase: SegmentKind::SingularHorizontal,
        });
        k += 1;
    }
    traj.push(Sample {
        t: t0 + duration,
        state: BlochState::new(y_out, sd.z0),
        u: feedback(y_out)?,
        phase: SegmentKind::SingularHorizontal,
    });
    Ok(traj)
}

/// Samples of free relaxation along the axis, `z(τ) = 1 − (1 − z_j)e^{−γτ}`.
pub(crate) fn sample_free_vertical(
    t0: f64,
    z_j: f64,
    duration: f64,
    dt: f64,
    p: &ScaledParams,
    phase: SegmentKind,
) -> Trajectory {
    let mut traj = Trajectory::new();
    let z_at = |tau: f64| 1.0 - (1.0 - z_j) * (-p.small_gamma * tau).exp();
    let mut k = 0u64;
    loop {
        let tau = k as f64 * dt;
        if tau >= duration {
            break;
        }
        traj.push(Sample {
            t: t0 + tau,
            state: BlochState::new(0.0, z_at(tau)),
            u: 0.0,
            phase,
        });
        k += 1;
    }
    traj
}

/// Time for free relaxation on the axis to bring `z_j ≤ 0` up to the origin.
pub(crate) fn free_vertical_duration(z_j: f64, p: &ScaledParams) -> f64 {
    (1.0 - z_j).ln() / p.small_gamma
}

/// Runs the local control law from `s0`.
pub fn synthesize_local(
    s0: BlochState,
    p: &ScaledParams,
    opts: &LocalOptions,
) -> Result<LocalSynthesis> {
    opts.validate()?;
    p.require_saturation_regime()?;
    if s0.norm() > 1.0 + crate::model::EPS_NUM {
        return Err(Error::InvalidParameter(format!(
            "initial state {s0:?} lies outside the unit ball"
        )));
    }
    match p.bound {
        ControlBound::Finite(omega) => bounded(s0, p, omega, opts),
        ControlBound::Unbounded => unbounded(s0, p, opts),
    }
}

fn bounded(
    s0: BlochState,
    p: &ScaledParams,
    omega: f64,
    opts: &LocalOptions,
) -> Result<LocalSynthesis> {
    let sd = singular_data(p)?;
    let tol = &opts.tol;
    let mut s = seed_start(s0, opts.seed_eps);
    let mut t = 0.0;
    let mut out = Builder::new(s);
    let mut running_min = s.norm();
    let mut next = Next::Decide;

    loop {
        if out.segments.len() >= opts.max_segments {
            return Ok(out.finish(LocalStop::SegmentLimit, t));
        }
        if t >= opts.t_max {
            return Ok(out.finish(LocalStop::Horizon, t));
        }
        match next {
            Next::Decide => {
                if s.norm() <= tol.target {
                    return Ok(out.finish(LocalStop::Reached, t));
                }
                next = if s.y.abs() <= tol.tol_y {
                    s.y = 0.0;
                    if s.z <= 0.0 {
                        Next::Free
                    } else {
                        Next::Idle
                    }
                } else if (s.z - sd.z0).abs() <= tol.tol_z && s.y.abs() >= sd.y_lim {
                    s.z = sd.z0;
                    Next::Singular
                } else {
                    let mu = control_coefficient(s, p);
                    Next::Bang(if mu != 0.0 {
                        mu.signum()
                    } else {
                        sign_after(s, 0.0, p)
                    })
                };
            }
            Next::Bang(sign) => {
                let u = omega * sign;
                let kind = SegmentKind::bang(sign);
                let opts2 = IntegrationOptions::new(opts.dt, opts.t_max)
                    .starting_at(t)
                    .with_phase(kind)
                    .with_event(StateEvent::terminal(Crossing::Either, |_, s| s.y))
                    .with_event(StateEvent::terminal(Crossing::Either, |_, s| s.z - sd.z0));
                let mut rm = running_min;
                let mut above_since: Option<f64> = None;
                let halt = |t: f64, s: BlochState| {
                    let d = s.norm();
                    rm = rm.min(d);
                    if d > opts.failure_factor * rm {
                        let since = *above_since.get_or_insert(t);
                        t - since >= opts.failure_window
                    } else {
                        above_since = None;
                        false
                    }
                };
                let res = integrate_until(s, |_, _| u, p, &opts2, halt)?;
                running_min = running_min.min(res.trajectory.min_distance());
                let entry = s;
                let t_entry = t;
                s = res.final_state();
                t = res.final_time();
                match res.stop {
                    StopReason::Event(0) => {
                        out.event_residuals.push(s.y.abs());
                        if s.z <= 0.0 {
                            s.y = 0.0;
                            out.switch_points.push(SwitchPoint::new(t, s, "axis"));
                            next = Next::Free;
                        } else {
                            out.switch_points
                                .push(SwitchPoint::new(t, s, "axis_crossing"));
                            next = Next::Bang(sign_after(s, u, p));
                        }
                    }
                    StopReason::Event(_) => {
                        out.event_residuals.push((s.z - sd.z0).abs());
                        s.z = sd.z0;
                        if s.y.abs() >= sd.y_lim {
                            out.switch_points
                                .push(SwitchPoint::new(t, s, "singular_entry"));
                            next = Next::Singular;
                        } else {
                            out.switch_points
                                .push(SwitchPoint::new(t, s, "line_crossing"));
                            next = Next::Bang(sign_after(s, u, p));
                        }
                    }
                    StopReason::Halted | StopReason::Horizon => {
                        out.trajectory.extend(res.trajectory);
                        out.segment(kind, t_entry, t, entry, s);
                        let stop = if res.stop == StopReason::Halted {
                            LocalStop::Diverging
                        } else {
                            LocalStop::Horizon
                        };
                        return Ok(out.finish(stop, t));
                    }
                }
                let mut traj = res.trajectory;
                if let Some(last) = traj.samples.last_mut() {
                    last.state = s;
                }
                out.trajectory.extend(traj);
                out.segment(kind, t_entry, t, entry, s);
            }
            Next::Singular => {
                let y_out = sd.y_lim.copysign(s.y);
                let entry = s;
                let mut d = singular_arc_duration(s.y, y_out, p)?;
                let truncated = t + d > opts.t_max;
                if truncated {
                    d = opts.t_max - t;
                }
                let y_end = singular_arc_position(d, s.y, p)?;
                let y_end = if truncated { y_end } else { y_out };
                out.trajectory
                    .extend(sample_singular_arc(t, s.y, d, opts.dt, p, &sd, y_end)?);
                s = BlochState::new(y_end, sd.z0);
                out.segment(SegmentKind::SingularHorizontal, t, t + d, entry, s);
                t += d;
                if truncated {
                    return Ok(out.finish(LocalStop::Horizon, t));
                }
                out.switch_points
                    .push(SwitchPoint::new(t, s, "admissibility_limit"));
                next = Next::Bang(-s.y.signum());
            }
            Next::Free => {
                let entry = s;
                let full = free_vertical_duration(s.z, p);
                let d = full.min(opts.t_max - t);
                let mut traj =
                    sample_free_vertical(t, s.z, d, opts.dt, p, SegmentKind::FreeVertical);
                let reached = d == full;
                let exit = if reached {
                    BlochState::ORIGIN
                } else {
                    BlochState::new(0.0, 1.0 - (1.0 - s.z) * (-p.small_gamma * d).exp())
                };
                traj.push(Sample {
                    t: t + d,
                    state: exit,
                    u: 0.0,
                    phase: SegmentKind::FreeVertical,
                });
                out.trajectory.extend(traj);
                out.segment(SegmentKind::FreeVertical, t, t + d, entry, exit);
                t += d;
                s = exit;
                let stop = if reached {
                    out.switch_points.push(SwitchPoint::new(t, s, "target"));
                    LocalStop::Reached
                } else {
                    LocalStop::Horizon
                };
                return Ok(out.finish(stop, t));
            }
            Next::Idle => {
                let entry = s;
                let d = opts.t_max - t;
                let mut traj = sample_free_vertical(t, s.z, d, opts.dt, p, SegmentKind::Idle);
                let exit = BlochState::new(0.0, 1.0 - (1.0 - s.z) * (-p.small_gamma * d).exp());
                traj.push(Sample {
                    t: opts.t_max,
                    state: exit,
                    u: 0.0,
                    phase: SegmentKind::Idle,
                });
                out.trajectory.extend(traj);
                out.segment(SegmentKind::Idle, t, opts.t_max, entry, exit);
                return Ok(out.finish(LocalStop::Stationary, opts.t_max));
            }
        }
    }
}

/// With unbounded control a bang arc is an instantaneous rotation, and the
/// singular line can be followed all the way to the axis.
fn unbounded(s0: BlochState, p: &ScaledParams, opts: &LocalOptions) -> Result<LocalSynthesis> {
    let sd = singular_data(p)?;
    let tol = &opts.tol;
    let mut s = seed_start(s0, opts.seed_eps);
    let mut out = Builder::new(s);
    let mut t = 0.0;
    if s.norm() <= tol.target {
        return Ok(out.finish(LocalStop::Reached, 0.0));
    }

    if s.y.abs() > tol.tol_y {
        if (s.z - sd.z0).abs() > tol.tol_z {
            let mu = control_coefficient(s, p);
            let sign = if mu != 0.0 {
                mu.signum()
            } else {
                sign_after(s, 0.0, p)
            };
            let r = s.norm();
            if r < sd.z0.abs() {
                return Err(Error::DegenerateStart(format!(
                    "radius {r} cannot reach the singular line z = {}",
                    sd.z0
                )));
            }
            let w = (r * r - sd.z0 * sd.z0).sqrt();
            let phi0 = s.z.atan2(s.y);
            // u > 0 turns (y, z) counter-clockwise
            let angle_to = |y: f64| {
                let phi = sd.z0.atan2(y);
                if sign > 0.0 {
                    (phi - phi0).rem_euclid(TAU)
                } else {
                    (phi0 - phi).rem_euclid(TAU)
                }
            };
            let y_hit = if angle_to(-w) <= angle_to(w) { -w } else { w };
            let hit = BlochState::new(y_hit, sd.z0);
            out.segment(SegmentKind::bang(sign), 0.0, 0.0, s, hit);
            out.switch_points
                .push(SwitchPoint::new(0.0, hit, "singular_entry"));
            s = hit;
        } else {
            s.z = sd.z0;
        }
        let d = singular_arc_reach_time(s.y, p)?;
        let d_run = d.min(opts.t_max);
        let y_end = if d_run < d {
            singular_arc_position(d_run, s.y, p)?
        } else {
            0.0
        };
        let entry = s;
        out.trajectory
            .extend(sample_singular_arc(t, s.y, d_run, opts.dt, p, &sd, y_end)?);
        s = BlochState::new(y_end, sd.z0);
        out.segment(SegmentKind::SingularHorizontal, t, t + d_run, entry, s);
        t += d_run;
        if d_run < d {
            return Ok(out.finish(LocalStop::Horizon, t));
        }
        out.switch_points.push(SwitchPoint::new(t, s, "axis"));
    } else {
        s.y = 0.0;
    }

    if s.z > 0.0 {
        return Err(Error::DegenerateStart(format!(
            "state {s:?} rests on the axis above the origin"
        )));
    }
    let entry = s;
    let full = free_vertical_duration(s.z, p);
    let d = full.min(opts.t_max - t);
    let mut traj = sample_free_vertical(t, s.z, d, opts.dt, p, SegmentKind::FreeVertical);
    let reached = d == full;
    let exit = if reached {
        BlochState::ORIGIN
    } else {
        BlochState::new(0.0, 1.0 - (1.0 - s.z) * (-p.small_gamma * d).exp())
    };
    traj.push(Sample {
        t: t + d,
        state: exit,
        u: 0.0,
        phase: SegmentKind::FreeVertical,
    });
    out.trajectory.extend(traj);
    out.segment(SegmentKind::FreeVertical, t, t + d, entry, exit);
    t += d;
    if reached {
        out.switch_points.push(SwitchPoint::new(t, exit, "target"));
        Ok(out.finish(LocalStop::Reached, t))
    } else {
        Ok(out.finish(LocalStop::Horizon, t))
    }
}
