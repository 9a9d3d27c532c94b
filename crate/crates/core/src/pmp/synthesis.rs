use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::shooting::{departure_adjoint, final_bang, find_yc_with, ShootingOptions, YcSolution};
use super::{
    coupled_rhs, pseudo_hamiltonian, split, switching_function, switching_rate, AdjointState,
};
use crate::error::{Error, Result};
use crate::local_control::{
    sample_free_vertical, sample_singular_arc, seed_start, singular_arc_duration,
    singular_arc_reach_time, singular_data, singular_feedback, ControlSegment,
};
use crate::model::{
    control_coefficient, integrate, propagate, BlochState, ControlBound, Crossing,
    IntegrationOptions, Sample, ScaledParams, SegmentKind, StateEvent, StepOptions, StopReason,
    SwitchPoint, Trajectory, DEFAULT_DT, DEFAULT_T_MAX,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalOptions {
    pub dt: f64,
    pub seed_eps: Option<f64>,
    pub t_max: f64,
    pub shooting: ShootingOptions,
}

impl Default for OptimalOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            seed_eps: Some(1e-6),
            t_max: DEFAULT_T_MAX,
            shooting: ShootingOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    Regular,
    Singular,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalSample {
    pub t: f64,
    pub state: BlochState,
    pub adjoint: AdjointState,
    pub u: f64,
    pub phi: f64,
    pub hamiltonian: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalArc {
    pub kind: ArcKind,
    pub segment: ControlSegment,
    pub samples: Vec<ExtremalSample>,
}

/// `Φ` and `Φ̇` at a junction between arcs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JunctionCheck {
    pub label: String,
    pub t: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmpDiagnostics {
    pub h_min: f64,
    pub h_max: f64,
    /// `(h_max − h_min) / |mean H|`.
    pub h_rel_spread: f64,
    /// Regular-arc samples with `|Φ| > 1e−9` whose sign differs from `u`.
    pub sign_violations: usize,
    pub junctions: Vec<JunctionCheck>,
    /// Mismatch between the costate carried along the singular arc and the
    /// departure costate used by the shooting.
    pub adjoint_continuity: f64,
    /// Smallest `|P|` over the arc boundaries.
    pub min_adjoint_norm: f64,
    /// Largest `|Δy|` between the integrated and the closed-form singular arc.
    pub singular_arc_mismatch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalReport {
    pub reached: bool,
    pub duration: f64,
    pub min_distance: f64,
    pub y_c: YcSolution,
    pub switch_points: Vec<SwitchPoint>,
    pub diagnostics: PmpDiagnostics,
}

#[derive(Clone, Debug)]
pub struct OptimalSynthesis {
    pub trajectory: Trajectory,
    pub arcs: Vec<ExtremalArc>,
    pub segments: Vec<ControlSegment>,
    pub report: OptimalReport,
}

fn extremal_sample(t: f64, x: &[f64; 4], u: f64, p: &ScaledParams) -> ExtremalSample {
    let (state, adjoint) = split(x);
    ExtremalSample {
        t,
        state,
        adjoint,
        u,
        phi: switching_function(state, adjoint),
        hamiltonian: pseudo_hamiltonian(state, adjoint, u, p),
    }
}

fn junction(
    label: &str,
    t: f64,
    x: BlochState,
    adj: AdjointState,
    p: &ScaledParams,
) -> JunctionCheck {
    JunctionCheck {
        label: label.into(),
        t,
        phi: switching_function(x, adj),
        phi_dot: switching_rate(x, adj, p),
    }
}

/// Bang → horizontal singular → bang departing at `y_c` → free relaxation
/// along the vertical singular axis.
pub fn synthesize_optimal(
    s0: BlochState,
    p: &ScaledParams,
    opts: &OptimalOptions,
) -> Result<OptimalSynthesis> {
    p.require_saturation_regime()?;
    let omega = p.bound.finite().ok_or_else(|| {
        Error::NoBoundedSolution("unbounded control: use synthesize_unbounded".into())
    })?;
    if !(opts.dt > 0.0 && opts.t_max > 0.0) {
        return Err(Error::InvalidOption(format!(
            "need dt > 0 and t_max > 0, got {} and {}",
            opts.dt, opts.t_max
        )));
    }
    let sd = singular_data(p)?;
    let start = seed_start(s0, opts.seed_eps);
    if start.y == 0.0 {
        return Err(Error::DegenerateStart(format!(
            "{start:?} lies on the vertical axis; supply a seed displacement"
        )));
    }

    // First bang, same sign as the local law.
    let mu = control_coefficient(start, p);
    let sign1 = if mu != 0.0 {
        mu.signum()
    } else {
        -start.y.signum()
    };
    let u1 = sign1 * omega;
    let (first, t1, y_a) = if start.z == sd.z0 {
        (Trajectory::new(), 0.0, start.y)
    } else {
        let iopts = IntegrationOptions::new(opts.dt, opts.t_max)
            .with_phase(SegmentKind::bang(sign1))
            .with_event(StateEvent::terminal(Crossing::Either, |_, s| s.z - sd.z0))
            .with_event(StateEvent::terminal(Crossing::Either, |_, s| s.y));
        let res = integrate(start, |_, _| u1, p, &iopts)?;
        if res.stop != StopReason::Event(0) {
            return Err(Error::NoBoundedSolution(format!(
                "first bang from {start:?} does not reach the singular line"
            )));
        }
        let t1 = res.final_time();
        let y_a = res.final_state().y;
        let mut traj = res.trajectory;
        if let Some(last) = traj.samples.last_mut() {
            last.state.z = sd.z0;
        }
        (traj, t1, y_a)
    };

    let side = y_a.signum();
    let yc = find_yc_with(p, side, &opts.shooting)?;
    if y_a.abs() < yc.y_c.abs() {
        return Err(Error::NoBoundedSolution(format!(
            "singular line reached at y = {y_a}, inside the switching point {}",
            yc.y_c
        )));
    }

    // Costate scale fixed by H at the departure point.
    let p_c = departure_adjoint(yc.y_c, &sd);
    let x_c = BlochState::new(yc.y_c, sd.z0);
    let h0 = pseudo_hamiltonian(x_c, p_c, 0.0, p);
    let k_a = -h0 / (p.big_gamma * y_a * y_a - sd.g);
    let p_a = AdjointState::new(k_a * y_a, k_a * sd.z0);
    let x_a = BlochState::new(y_a, sd.z0);

    let mut arcs = Vec::new();
    let mut segments = Vec::new();
    let mut junctions = vec![junction("singular_entry", t1, x_a, p_a, p)];

    // First bang costate, integrated backward from the entry point.
    if t1 > 0.0 {
        let rev = |_: f64, x: &[f64; 4]| {
            let d = coupled_rhs(x, u1, p);
            [-d[0], -d[1], -d[2], -d[3]]
        };
        let back = propagate(
            rev,
            0.0,
            [y_a, sd.z0, p_a.py, p_a.pz],
            &StepOptions::new(opts.dt, t1),
            &[],
            |_, _| false,
        )?;
        let samples = back
            .times
            .iter()
            .zip(&back.states)
            .rev()
            .map(|(&tau, x)| extremal_sample(t1 - tau, x, u1, p))
            .collect();
        let seg = ControlSegment {
            kind: SegmentKind::bang(sign1),
            t_start: 0.0,
            t_end: t1,
            entry: start,
            exit: x_a,
        };
        segments.push(seg);
        arcs.push(ExtremalArc {
            kind: ArcKind::Regular,
            segment: seg,
            samples,
        });
    }

    // Horizontal singular arc, costate integrated forward under the feedback.
    let d_s = singular_arc_duration(y_a, yc.y_c, p)?;
    let t2 = t1 + d_s;
    let mut adjoint_continuity = 0.0;
    let mut singular_arc_mismatch: f64 = 0.0;
    if d_s > 0.0 {
        let fb = |x: &[f64; 4]| singular_feedback(BlochState::new(x[0], sd.z0), p).unwrap_or(0.0);
        let fwd = propagate(
            |_, x: &[f64; 4]| coupled_rhs(x, fb(x), p),
            t1,
            [y_a, sd.z0, p_a.py, p_a.pz],
            &StepOptions::new(opts.dt, t2),
            &[],
            |_, _| false,
        )?;
        let mut samples = Vec::with_capacity(fwd.times.len());
        for (&t, x) in fwd.times.iter().zip(&fwd.states) {
            let y_exact = crate::local_control::singular_arc_position(t - t1, y_a, p)?;
            singular_arc_mismatch = singular_arc_mismatch.max((x[0] - y_exact).abs());
            samples.push(extremal_sample(t, x, fb(x), p));
        }
        let (_, end) = fwd.last();
        adjoint_continuity = (end[2] - p_c.py).hypot(end[3] - p_c.pz);
        let seg = ControlSegment {
            kind: SegmentKind::SingularHorizontal,
            t_start: t1,
            t_end: t2,
            entry: x_a,
            exit: x_c,
        };
        segments.push(seg);
        arcs.push(ExtremalArc {
            kind: ArcKind::Singular,
            segment: seg,
            samples,
        });
    }
    junctions.push(junction("switching_point", t2, x_c, p_c, p));

    // Second bang to the axis.
    let sign2 = yc.bang_sign;
    let u2 = sign2 * omega;
    let bang = final_bang(
        yc.y_c,
        sign2,
        p,
        &ShootingOptions {
            dt: opts.dt,
            ..opts.shooting
        },
    )?;
    if bang.stop != StopReason::Event(0) {
        return Err(Error::NoBoundedSolution(format!(
            "final bang from y_c = {} misses the axis",
            yc.y_c
        )));
    }
    let (tb, x_end) = bang.last();
    let t3 = t2 + tb;
    let (s_axis, p_axis) = split(&x_end);
    let s_axis = BlochState::new(0.0, s_axis.z);
    if s_axis.z > 0.0 {
        return Err(Error::NoBoundedSolution(format!(
            "final bang meets the axis above the origin at z = {}",
            s_axis.z
        )));
    }
    junctions.push(junction("axis", t3, s_axis, p_axis, p));
    let bang_samples: Vec<ExtremalSample> = bang
        .times
        .iter()
        .zip(&bang.states)
        .map(|(&t, x)| extremal_sample(t2 + t, x, u2, p))
        .collect();
    let seg = ControlSegment {
        kind: SegmentKind::bang(sign2),
        t_start: t2,
        t_end: t3,
        entry: x_c,
        exit: s_axis,
    };
    segments.push(seg);
    arcs.push(ExtremalArc {
        kind: ArcKind::Regular,
        segment: seg,
        samples: bang_samples.clone(),
    });

    // Vertical singular arc with u = 0.
    let d_v = crate::local_control::free_vertical_duration(s_axis.z, p);
    let t4 = t3 + d_v;
    if d_v > 0.0 {
        let vert = propagate(
            |_, x: &[f64; 4]| coupled_rhs(x, 0.0, p),
            t3,
            [0.0, s_axis.z, p_axis.py, p_axis.pz],
            &StepOptions::new(opts.dt, t4),
            &[],
            |_, _| false,
        )?;
        let samples = vert
            .times
            .iter()
            .zip(&vert.states)
            .map(|(&t, x)| extremal_sample(t, x, 0.0, p))
            .collect();
        let seg = ControlSegment {
            kind: SegmentKind::FreeVertical,
            t_start: t3,
            t_end: t4,
            entry: s_axis,
            exit: BlochState::ORIGIN,
        };
        segments.push(seg);
        arcs.push(ExtremalArc {
            kind: ArcKind::Singular,
            segment: seg,
            samples,
        });
    }

    // State trajectory.
    let mut trajectory = Trajectory::new();
    trajectory.extend(first);
    if d_s > 0.0 {
        trajectory.extend(sample_singular_arc(t1, y_a, d_s, opts.dt, p, &sd, yc.y_c)?);
    }
    let n_bang = bang_samples.len();
    for (i, e) in bang_samples.iter().enumerate() {
        let state = if i + 1 == n_bang { s_axis } else { e.state };
        trajectory.push(Sample {
            t: e.t,
            state,
            u: u2,
            phase: SegmentKind::bang(sign2),
        });
    }
    trajectory.extend(sample_free_vertical(
        t3,
        s_axis.z,
        d_v,
        opts.dt,
        p,
        SegmentKind::FreeVertical,
    ));
    trajectory.push(Sample {
        t: t4,
        state: BlochState::ORIGIN,
        u: 0.0,
        phase: SegmentKind::FreeVertical,
    });

    // Diagnostics.
    let all = arcs.iter().flat_map(|a| a.samples.iter());
    let (h_min, h_max, h_sum, h_n) = all.fold(
        (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize),
        |(lo, hi, sum, n), s| {
            (
                lo.min(s.hamiltonian),
                hi.max(s.hamiltonian),
                sum + s.hamiltonian,
                n + 1,
            )
        },
    );
    let h_mean = h_sum / h_n.max(1) as f64;
    let sign_violations = arcs
        .iter()
        .filter(|a| a.kind == ArcKind::Regular)
        .flat_map(|a| a.samples.iter())
        .filter(|s| s.phi.abs() > 1e-9 && s.phi.signum() != s.u.signum())
        .count();
    let min_adjoint_norm = arcs
        .iter()
        .flat_map(|a| [a.samples.first(), a.samples.last()])
        .flatten()
        .map(|s| s.adjoint.norm())
        .fold(f64::INFINITY, f64::min);

    let switch_points = vec![
        SwitchPoint::new(t1, x_a, "singular_entry"),
        SwitchPoint::new(t2, x_c, "switching_point"),
        SwitchPoint::new(t3, s_axis, "axis"),
        SwitchPoint::new(t4, BlochState::ORIGIN, "target"),
    ];
    let min_distance = trajectory.min_distance();
    Ok(OptimalSynthesis {
        trajectory,
        arcs,
        segments,
        report: OptimalReport {
            reached: true,
            duration: t4,
            min_distance,
            y_c: yc,
            switch_points,
            diagnostics: PmpDiagnostics {
                h_min,
                h_max,
                h_rel_spread: (h_max - h_min) / h_mean.abs(),
                sign_violations,
                junctions,
                adjoint_continuity,
                min_adjoint_norm,
                singular_arc_mismatch,
            },
        },
    })
}

/// Closed-form synthesis without a control bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnboundedSynthesis {
    pub segments: Vec<ControlSegment>,
    pub duration: f64,
    pub switch_points: Vec<SwitchPoint>,
}

impl UnboundedSynthesis {
    pub fn trajectory(&self, p: &ScaledParams, dt: f64) -> Result<Trajectory> {
        let sd = singular_data(p)?;
        let mut traj = Trajectory::new();
        for seg in &self.segments {
            match seg.kind {
                SegmentKind::SingularHorizontal => traj.extend(sample_singular_arc(
                    seg.t_start,
                    seg.entry.y,
                    seg.duration(),
                    dt,
                    p,
                    &sd,
                    seg.exit.y,
                )?),
                SegmentKind::FreeVertical => {
                    traj.extend(sample_free_vertical(
                        seg.t_start,
                        seg.entry.z,
                        seg.duration(),
                        dt,
                        p,
                        SegmentKind::FreeVertical,
                    ));
                    traj.push(Sample {
                        t: seg.t_end,
                        state: seg.exit,
                        u: 0.0,
                        phase: SegmentKind::FreeVertical,
                    });
                }
                kind => traj.push(Sample {
                    t: seg.t_start,
                    state: seg.entry,
                    u: 0.0,
                    phase: kind,
                }),
            }
        }
        Ok(traj)
    }
}

/// Instant rotation onto `(−√(r² − z₀²), z₀)`, singular arc to the axis,
/// free relaxation to the origin.
pub fn synthesize_unbounded(s0: BlochState, p: &ScaledParams) -> Result<UnboundedSynthesis> {
    p.require_saturation_regime()?;
    if p.bound != ControlBound::Unbounded {
        return Err(Error::InvalidParameter(
            "unbounded synthesis needs an unbounded control".into(),
        ));
    }
    let sd = singular_data(p)?;
    let r = s0.norm();
    if r < sd.z0.abs() {
        return Err(Error::DegenerateStart(format!(
            "radius {r} is smaller than |z₀| = {}",
            sd.z0.abs()
        )));
    }
    let hit = BlochState::new(-(r * r - sd.z0 * sd.z0).sqrt(), sd.z0);
    let ccw = (sd.z0.atan2(hit.y) - s0.z.atan2(s0.y)).rem_euclid(TAU);
    let kind = if ccw <= TAU - ccw {
        SegmentKind::BangPositive
    } else {
        SegmentKind::BangNegative
    };
    let d_s = singular_arc_reach_time(hit.y, p)?;
    let on_axis = BlochState::new(0.0, sd.z0);
    let d_v = (1.0 - sd.z0).ln() / p.small_gamma;
    let segments = vec![
        ControlSegment {
            kind,
            t_start: 0.0,
            t_end: 0.0,
            entry: s0,
            exit: hit,
        },
        ControlSegment {
            kind: SegmentKind::SingularHorizontal,
            t_start: 0.0,
            t_end: d_s,
            entry: hit,
            exit: on_axis,
        },
        ControlSegment {
            kind: SegmentKind::FreeVertical,
            t_start: d_s,
            t_end: d_s + d_v,
            entry: on_axis,
            exit: BlochState::ORIGIN,
        },
    ];
    Ok(UnboundedSynthesis {
        segments,
        duration: d_s + d_v,
        switch_points: vec![
            SwitchPoint::new(0.0, hit, "singular_entry"),
            SwitchPoint::new(d_s, on_axis, "axis"),
            SwitchPoint::new(d_s + d_v, BlochState::ORIGIN, "target"),
        ],
    })
}
