//! Named presets, a strategy runner, report comparison and file export.

mod export;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_control::{
    free_vertical_duration, sample_free_vertical, synthesize_local, ControlSegment, LocalOptions,
    Tolerances,
};
use crate::model::{
    integrate, scale_parameters, BlochState, ControlBound, Crossing, IntegrationOptions,
    PhysicalParams, Sample, ScaledParams, SegmentKind, StateEvent, StopReason, SwitchPoint,
    Trajectory, DEFAULT_DT, DEFAULT_T_MAX,
};
use crate::pmp::{synthesize_optimal, synthesize_unbounded, OptimalOptions, PmpDiagnostics};

pub use export::{
    export, parse_trajectory_csv, read_trajectory_csv, render_trajectory_csv,
    render_trajectory_json, report_path, write_report_json, write_trajectory, CsvRow, Format,
    CSV_HEADER,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSpec {
    Scaled(ScaledParams),
    /// Converted through [`scale_parameters`].
    Physical(PhysicalParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    NorthPole,
    SouthPole,
    Point(BlochState),
}

impl InitialState {
    pub fn state(self) -> BlochState {
        match self {
            InitialState::NorthPole => BlochState::NORTH_POLE,
            InitialState::SouthPole => BlochState::SOUTH_POLE,
            InitialState::Point(s) => s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Local,
    Optimal,
    /// `u ≡ 0`.
    Free,
    /// Optimal synthesis with no bound on the control.
    Unbounded,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Local => "local",
            Strategy::Optimal => "optimal",
            Strategy::Free => "free",
            Strategy::Unbounded => "unbounded",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "local" => Strategy::Local,
            "optimal" => Strategy::Optimal,
            "free" => Strategy::Free,
            "unbounded" => Strategy::Unbounded,
            other => {
                return Err(Error::Parse(format!(
                    "unknown strategy `{other}` (expected local, optimal, free or unbounded)"
                )))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub dt: f64,
    pub seed_eps: Option<f64>,
    /// Distance to the origin counted as reached.
    pub target_tol: f64,
    pub t_max: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            seed_eps: Some(1e-6),
            target_tol: Tolerances::default().target,
            t_max: DEFAULT_T_MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: PathBuf,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub params: ParamSpec,
    pub initial: InitialState,
    pub strategy: Strategy,
    pub numerics: Numerics,
    pub output: Option<OutputSpec>,
}

impl ScenarioConfig {
    pub fn new(params: ScaledParams, initial: InitialState, strategy: Strategy) -> Self {
        Self {
            params: ParamSpec::Scaled(params),
            initial,
            strategy,
            numerics: Numerics::default(),
            output: None,
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// Scaled parameters and, for physical input, the time scale.
    pub fn scaled(&self) -> Result<(ScaledParams, Option<f64>)> {
        match self.params {
            ParamSpec::Scaled(p) => {
                p.validate()?;
                Ok((p, None))
            }
            ParamSpec::Physical(p) => {
                let s = scale_parameters(&p)?;
                Ok((s.params, Some(s.time_scale)))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Case1,
    Case2,
    SouthPole,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Case1 => "case1",
            Preset::Case2 => "case2",
            Preset::SouthPole => "south-pole",
        }
    }

    pub fn config(self) -> ScenarioConfig {
        let (big, initial) = match self {
            Preset::Case1 => (3.5, InitialState::NorthPole),
            Preset::Case2 => (5.0, InitialState::NorthPole),
            Preset::SouthPole => (3.5, InitialState::SouthPole),
        };
        let p = ScaledParams::new(big, 0.5).expect("preset rates are valid");
        ScenarioConfig::new(p, initial, Strategy::Local)
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "case1" => Ok(Preset::Case1),
            "case2" => Ok(Preset::Case2),
            "south_pole" | "south-pole" => Ok(Preset::SouthPole),
            other => Err(Error::UnknownPreset(other.into())),
        }
    }
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    Ok(name.parse::<Preset>()?.config())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    pub params: ScaledParams,
    /// Requested start, before any seed displacement.
    pub initial: BlochState,
    pub time_scale: Option<f64>,
    pub duration_seconds: Option<f64>,
    /// Why a local run stopped.
    pub stop: Option<String>,
    pub y_c: Option<f64>,
    pub y_c_residual: Option<f64>,
    pub pmp: Option<PmpDiagnostics>,
    pub event_residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub strategy: Strategy,
    pub reached: bool,
    /// Present iff `reached`.
    pub duration: Option<f64>,
    pub min_distance: f64,
    pub segments: Vec<ControlSegment>,
    pub switch_points: Vec<SwitchPoint>,
    pub diagnostics: ReportDiagnostics,
}

impl ScenarioReport {
    pub fn summary(&self) -> String {
        let duration = self
            .duration
            .map_or_else(|| "none".to_string(), |d| format!("{d:.6}"));
        format!(
            "strategy={} reached={} duration={} min_dist={:.3e}",
            self.strategy, self.reached, duration, self.min_distance
        )
    }
}

pub fn run(config: &ScenarioConfig) -> Result<(Trajectory, ScenarioReport)> {
    let (p, time_scale) = config.scaled()?;
    let n = &config.numerics;
    let s0 = config.initial.state();
    let mut diagnostics = ReportDiagnostics {
        params: p,
        initial: s0,
        time_scale,
        duration_seconds: None,
        stop: None,
        y_c: None,
        y_c_residual: None,
        pmp: None,
        event_residuals: Vec::new(),
    };

    let (trajectory, reached, duration, segments, switch_points) = match config.strategy {
        Strategy::Local => {
            let opts = LocalOptions {
                dt: n.dt,
                seed_eps: n.seed_eps,
                tol: Tolerances {
                    target: n.target_tol,
                    ..Tolerances::default()
                },
                t_max: n.t_max,
                ..LocalOptions::default()
            };
            let out = synthesize_local(s0, &p, &opts)?;
            let r = out.report;
            diagnostics.stop = Some(format!("{:?}", r.stop).to_lowercase());
            diagnostics.event_residuals = r.event_residuals;
            (
                out.trajectory,
                r.reached,
                r.duration,
                out.segments,
                r.switch_points,
            )
        }
        Strategy::Optimal => {
            let opts = OptimalOptions {
                dt: n.dt,
                seed_eps: n.seed_eps,
                t_max: n.t_max,
                ..OptimalOptions::default()
            };
            let out = synthesize_optimal(s0, &p, &opts)?;
            let r = out.report;
            diagnostics.y_c = Some(r.y_c.y_c);
            diagnostics.y_c_residual = Some(r.y_c.residual);
            diagnostics.pmp = Some(r.diagnostics);
            (
                out.trajectory,
                r.reached,
                Some(r.duration),
                out.segments,
                r.switch_points,
            )
        }
        Strategy::Unbounded => {
            let q = ScaledParams {
                bound: ControlBound::Unbounded,
                ..p
            };
            let out = synthesize_unbounded(s0, &q)?;
            let traj = out.trajectory(&q, n.dt)?;
            (
                traj,
                true,
                Some(out.duration),
                out.segments,
                out.switch_points,
            )
        }
        Strategy::Free => free_run(s0, &p, n)?,
    };

    let min_distance = trajectory.min_distance();
    let duration = duration.filter(|_| reached);
    diagnostics.duration_seconds = match (duration, time_scale) {
        (Some(d), Some(k)) => Some(d / k),
        _ => None,
    };
    Ok((
        trajectory,
        ScenarioReport {
            strategy: config.strategy,
            reached,
            duration,
            min_distance,
            segments,
            switch_points,
            diagnostics,
        },
    ))
}

type RunParts = (
    Trajectory,
    bool,
    Option<f64>,
    Vec<ControlSegment>,
    Vec<SwitchPoint>,
);

fn free_run(s0: BlochState, p: &ScaledParams, n: &Numerics) -> Result<RunParts> {
    if s0.y == 0.0 && s0.z < 0.0 {
        let d = free_vertical_duration(s0.z, p);
        let mut traj = sample_free_vertical(0.0, s0.z, d, n.dt, p, SegmentKind::FreeVertical);
        traj.push(Sample {
            t: d,
            state: BlochState::ORIGIN,
            u: 0.0,
            phase: SegmentKind::FreeVertical,
        });
        let seg = ControlSegment {
            kind: SegmentKind::FreeVertical,
            t_start: 0.0,
            t_end: d,
            entry: s0,
            exit: BlochState::ORIGIN,
        };
        let sp = vec![SwitchPoint::new(d, BlochState::ORIGIN, "target")];
        return Ok((traj, true, Some(d), vec![seg], sp));
    }
    let target = n.target_tol;
    let opts = IntegrationOptions::new(n.dt, n.t_max)
        .with_phase(SegmentKind::Idle)
        .with_event(StateEvent::terminal(Crossing::Falling, move |_, s| {
            s.norm() - target
        }));
    let res = integrate(s0, |_, _| 0.0, p, &opts)?;
    let reached = res.stop == StopReason::Event(0) || s0.norm() <= target;
    let end = res.final_state();
    let t_end = res.final_time();
    let seg = ControlSegment {
        kind: SegmentKind::Idle,
        t_start: 0.0,
        t_end,
        entry: s0,
        exit: end,
    };
    let sp = if reached {
        vec![SwitchPoint::new(t_end, end, "target")]
    } else {
        Vec::new()
    };
    Ok((
        res.trajectory,
        reached,
        reached.then_some(t_end),
        vec![seg],
        sp,
    ))
}

/// Runs every config, possibly concurrently; results keep the input order.
pub fn run_batch(configs: &[ScenarioConfig]) -> Vec<Result<(Trajectory, ScenarioReport)>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| scope.spawn(move || run(c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario worker panicked"))
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchDelta {
    pub label: String,
    pub dt: f64,
    pub dy: f64,
    pub dz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Strategy,
    pub b: Strategy,
    pub duration_a: Option<f64>,
    pub duration_b: Option<f64>,
    /// `duration_a − duration_b`, when both reached.
    pub duration_delta: Option<f64>,
    /// Differences between switch points sharing a label, matched in order.
    pub switch_deltas: Vec<SwitchDelta>,
    pub verdict: String,
}

pub fn compare(a: &ScenarioReport, b: &ScenarioReport) -> Result<Comparison> {
    let (da, db) = (&a.diagnostics, &b.diagnostics);
    let rates = |p: &ScaledParams| (p.big_gamma, p.small_gamma);
    if rates(&da.params) != rates(&db.params) || da.initial != db.initial {
        return Err(Error::Incomparable(format!(
            "({}, {}) from {:?} vs ({}, {}) from {:?}",
            da.params.big_gamma,
            da.params.small_gamma,
            da.initial,
            db.params.big_gamma,
            db.params.small_gamma,
            db.initial
        )));
    }

    let mut used = vec![false; b.switch_points.len()];
    let mut switch_deltas = Vec::new();
    for sa in &a.switch_points {
        let hit = b
            .switch_points
            .iter()
            .enumerate()
            .find(|(i, sb)| !used[*i] && sb.label == sa.label);
        if let Some((i, sb)) = hit {
            used[i] = true;
            switch_deltas.push(SwitchDelta {
                label: sa.label.clone(),
                dt: sa.t - sb.t,
                dy: sa.y - sb.y,
                dz: sa.z - sb.z,
            });
        }
    }

    let duration_delta = a.duration.zip(b.duration).map(|(x, y)| x - y);
    let verdict = match duration_delta {
        Some(0.0) => "equal durations".to_string(),
        Some(d) if d > 0.0 => format!("{} faster by {d:.6e}", b.strategy),
        Some(d) => format!("{} faster by {:.6e}", a.strategy, -d),
        None => match (a.reached, b.reached) {
            (false, false) => "neither reached the target".to_string(),
            (false, _) => format!("{} did not reach the target", a.strategy),
            _ => format!("{} did not reach the target", b.strategy),
        },
    };
    Ok(Comparison {
        a: a.strategy,
        b: b.strategy,
        duration_a: a.duration,
        duration_b: b.duration,
        duration_delta,
        switch_deltas,
        verdict,
    })
}
