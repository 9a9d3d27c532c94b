use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BlochState;
use crate::error::{Error, Result};

/// Phase label carried by every trajectory sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    BangPositive,
    BangNegative,
    SingularHorizontal,
    FreeVertical,
    Idle,
    /// Generic closed-loop integration outside a synthesized phase.
    Feedback,
}

impl SegmentKind {
    pub fn bang(sign: f64) -> Self {
        if sign >= 0.0 {
            SegmentKind::BangPositive
        } else {
            SegmentKind::BangNegative
        }
    }

    pub fn is_bang(self) -> bool {
        matches!(self, SegmentKind::BangPositive | SegmentKind::BangNegative)
    }

    pub fn token(self) -> &'static str {
        match self {
            SegmentKind::BangPositive => "bang_pos",
            SegmentKind::BangNegative => "bang_neg",
            SegmentKind::SingularHorizontal => "singular_h",
            SegmentKind::FreeVertical => "free_v",
            SegmentKind::Idle => "idle",
            SegmentKind::Feedback => "feedback",
        }
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.token())
    }
}

impl FromStr for SegmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bang_pos" => SegmentKind::BangPositive,
            "bang_neg" => SegmentKind::BangNegative,
            "singular_h" => SegmentKind::SingularHorizontal,
            "free_v" => SegmentKind::FreeVertical,
            "idle" => SegmentKind::Idle,
            "feedback" => SegmentKind::Feedback,
            other => return Err(Error::Parse(format!("unknown phase token `{other}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: BlochState,
    pub u: f64,
    pub phase: SegmentKind,
}

/// A labelled point where the control law changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchPoint {
    pub t: f64,
    pub y: f64,
    pub z: f64,
    pub label: String,
}

impl SwitchPoint {
    pub fn new(t: f64, s: BlochState, label: impl Into<String>) -> Self {
        Self {
            t,
            y: s.y,
            z: s.z,
            label: label.into(),
        }
    }
}

/// Time-ordered samples of a controlled evolution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Appends a sample, silently dropping it if its time does not advance.
    pub fn push(&mut self, sample: Sample) {
        match self.samples.last() {
            Some(last) if sample.t <= last.t => {}
            _ => self.samples.push(sample),
        }
    }

    /// Concatenates `other`; samples not later than our last one are skipped
    /// so that junction points are stored once.
    pub fn extend(&mut self, other: Trajectory) {
        for s in other.samples {
            self.push(s);
        }
    }

    pub fn min_distance(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.state.norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn mirrored(&self) -> Trajectory {
        Trajectory {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    t: s.t,
                    state: s.state.mirrored(),
                    u: -s.u,
                    phase: match s.phase {
                        SegmentKind::BangPositive => SegmentKind::BangNegative,
                        SegmentKind::BangNegative => SegmentKind::BangPositive,
                        k => k,
                    },
                })
                .collect(),
        }
    }

    /// Checks strictly increasing time and the control bound.
    pub fn check(&self, bound: Option<f64>) -> Result<()> {
        for w in self.samples.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::Numerical(format!(
                    "non-increasing time {} -> {}",
                    w[0].t, w[1].t
                )));
            }
        }
        if let Some(b) = bound {
            if let Some(s) = self.samples.iter().find(|s| s.u.abs() > b * (1.0 + 1e-12)) {
                return Err(Error::Numerical(format!(
                    "control {} exceeds bound {b} at t = {}",
                    s.u, s.t
                )));
            }
        }
        Ok(())
    }
}
