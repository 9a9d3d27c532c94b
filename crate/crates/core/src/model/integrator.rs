//! Classical fourth-order Runge–Kutta on a fixed grid, with sign-change
//! events located by bisection on the sub-step length.

use super::{rhs, BlochState, Sample, ScaledParams, SegmentKind, Trajectory};
use crate::error::{Error, Result};

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_T_MAX: f64 = 5.0;
pub const DEFAULT_EVENT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Crossing {
    /// Negative to non-negative.
    Rising,
    /// Positive to non-positive.
    Falling,
    Either,
}

impl Crossing {
    fn crossed(self, g0: f64, g1: f64) -> bool {
        if g0 == 0.0 || !(g1 == 0.0 || (g0 < 0.0) != (g1 < 0.0)) {
            return false;
        }
        match self {
            Crossing::Rising => g0 < 0.0,
            Crossing::Falling => g0 > 0.0,
            Crossing::Either => true,
        }
    }
}

/// Scalar event function `g(t, x)`; an event fires where `g` changes sign.
pub type EventFn<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>;

pub struct EventSpec<'a, const N: usize> {
    pub func: EventFn<'a, N>,
    pub direction: Crossing,
    pub terminal: bool,
}

impl<'a, const N: usize> EventSpec<'a, N> {
    pub fn terminal(direction: Crossing, func: impl Fn(f64, &[f64; N]) -> f64 + 'a) -> Self {
        Self {
            func: Box::new(func),
            direction,
            terminal: true,
        }
    }

    pub fn marker(direction: Crossing, func: impl Fn(f64, &[f64; N]) -> f64 + 'a) -> Self {
        Self {
            func: Box::new(func),
            direction,
            terminal: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub dt: f64,
    /// Absolute end time.
    pub t_end: f64,
    pub event_tol: f64,
    pub max_bisections: usize,
}

impl StepOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            event_tol: DEFAULT_EVENT_TOL,
            max_bisections: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Horizon,
    /// Index into the event list of the terminal event that fired.
    Event(usize),
    Halted,
}

#[derive(Clone, Debug)]
pub struct Propagation<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub stop: StopReason,
}

impl<const N: usize> Propagation<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        let i = self.times.len() - 1;
        (self.times[i], self.states[i])
    }
}

pub fn rk4_step<const N: usize, F>(f: &F, t: f64, x: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let axpy = |a: &[f64; N], k: &[f64; N], c: f64| -> [f64; N] {
        let mut out = *a;
        for i in 0..N {
            out[i] += c * k[i];
        }
        out
    };
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &axpy(x, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &axpy(x, &k2, 0.5 * h));
    let k4 = f(t + h, &axpy(x, &k3, h));
    let mut out = *x;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates `ẋ = f(t, x)` from `t0` to `opts.t_end`.
///
/// Grid points are `t0 + k·dt`; the final step is shortened to land on
/// `t_end`. When an event changes sign inside a step, the step length at
/// which it fires is bisected down to `event_tol` and a sample is placed
/// there. `halt` is consulted after each regular step.
pub fn propagate<const N: usize, F, H>(
    f: F,
    t0: f64,
    x0: [f64; N],
    opts: &StepOptions,
    events: &[EventSpec<'_, N>],
    mut halt: H,
) -> Result<Propagation<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    H: FnMut(f64, &[f64; N]) -> bool,
{
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::InvalidOption(format!(
            "step size must be positive, got {}",
            opts.dt
        )));
    }
    if !(opts.t_end.is_finite() && opts.t_end > t0) {
        return Err(Error::InvalidOption(format!(
            "horizon must extend past the start time {t0}, got {}",
            opts.t_end
        )));
    }

    let mut times = vec![t0];
    let mut states = vec![x0];
    let mut t = t0;
    let mut x = x0;
    let mut g_old: Vec<f64> = events.iter().map(|e| (e.func)(t, &x)).collect();
    let mut k: u64 = 0;
    // Relative slack below which a remaining sliver is merged into the last step.
    let sliver = opts.dt * 1e-9;

    loop {
        if opts.t_end - t <= sliver {
            return Ok(Propagation {
                times,
                states,
                stop: StopReason::Horizon,
            });
        }
        let mut t_next = t0 + (k + 1) as f64 * opts.dt;
        if t_next <= t {
            // can only happen right after an event landed on the grid point
            k += 1;
            continue;
        }
        if opts.t_end - t_next <= sliver {
            t_next = opts.t_end;
        }
        let h = t_next - t;
        let x_new = rk4_step(&f, t, &x, h);
        if x_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite state at t = {t_next}"
            )));
        }

        let mut earliest: Option<(f64, usize)> = None;
        for (i, ev) in events.iter().enumerate() {
            let g_new = (ev.func)(t_next, &x_new);
            if ev.direction.crossed(g_old[i], g_new) {
                let theta = bisect_event(&f, ev, t, &x, h, g_old[i], opts)?;
                if earliest.is_none_or(|(best, _)| theta < best) {
                    earliest = Some((theta, i));
                }
            }
        }

        if let Some((theta, i)) = earliest {
            let (t_e, x_e) = if theta >= h {
                (t_next, x_new)
            } else {
                (t + theta, rk4_step(&f, t, &x, theta))
            };
            times.push(t_e);
            states.push(x_e);
            if events[i].terminal {
                return Ok(Propagation {
                    times,
                    states,
                    stop: StopReason::Event(i),
                });
            }
            t = t_e;
            x = x_e;
            for (g, ev) in g_old.iter_mut().zip(events) {
                *g = (ev.func)(t, &x);
            }
            if t_e == t_next {
                k += 1;
            }
            continue;
        }

        t = t_next;
        x = x_new;
        k += 1;
        times.push(t);
        states.push(x);
        for (g, ev) in g_old.iter_mut().zip(events) {
            *g = (ev.func)(t, &x);
        }
        if halt(t, &x) {
            return Ok(Propagation {
                times,
                states,
                stop: StopReason::Halted,
            });
        }
    }
}

/// Smallest sub-step `θ ∈ (0, h]` (to `event_tol`) at which the event
/// function has left the sign it had at the start of the step.
fn bisect_event<const N: usize, F>(
    f: &F,
    ev: &EventSpec<'_, N>,
    t: f64,
    x: &[f64; N],
    h: f64,
    g0: f64,
    opts: &StepOptions,
) -> Result<f64>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let positive = g0 > 0.0;
    let (mut lo, mut hi) = (0.0, h);
    let mut iterations = 0;
    while hi - lo > opts.event_tol {
        if iterations >= opts.max_bisections {
            return Err(Error::Numerical(format!(
                "event bisection did not converge after {iterations} iterations near t = {t}"
            )));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = (ev.func)(t + mid, &rk4_step(f, t, x, mid));
        if gm != 0.0 && (gm > 0.0) == positive {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(hi)
}

/// Event on the reduced state, `g(t, state)`.
pub struct StateEvent<'a> {
    pub func: Box<dyn Fn(f64, BlochState) -> f64 + 'a>,
    pub direction: Crossing,
    pub terminal: bool,
}

impl<'a> StateEvent<'a> {
    pub fn terminal(direction: Crossing, func: impl Fn(f64, BlochState) -> f64 + 'a) -> Self {
        Self {
            func: Box::new(func),
            direction,
            terminal: true,
        }
    }

    pub fn marker(direction: Crossing, func: impl Fn(f64, BlochState) -> f64 + 'a) -> Self {
        Self {
            func: Box::new(func),
            direction,
            terminal: false,
        }
    }
}

pub struct IntegrationOptions<'a> {
    pub dt: f64,
    /// Start time of the first sample.
    pub t0: f64,
    /// Absolute end time.
    pub t_max: f64,
    pub event_tol: f64,
    pub events: Vec<StateEvent<'a>>,
    /// Label applied to every sample.
    pub phase: SegmentKind,
}

impl Default for IntegrationOptions<'_> {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t0: 0.0,
            t_max: DEFAULT_T_MAX,
            event_tol: DEFAULT_EVENT_TOL,
            events: Vec::new(),
            phase: SegmentKind::Feedback,
        }
    }
}

impl<'a> IntegrationOptions<'a> {
    pub fn new(dt: f64, t_max: f64) -> Self {
        Self {
            dt,
            t_max,
            ..Default::default()
        }
    }

    pub fn starting_at(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn with_event(mut self, ev: StateEvent<'a>) -> Self {
        self.events.push(ev);
        self
    }

    pub fn with_phase(mut self, phase: SegmentKind) -> Self {
        self.phase = phase;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Integrated {
    pub trajectory: Trajectory,
    pub stop: StopReason,
}

impl Integrated {
    pub fn final_state(&self) -> BlochState {
        self.trajectory.last().map(|s| s.state).unwrap_or_default()
    }

    pub fn final_time(&self) -> f64 {
        self.trajectory.end_time()
    }
}

/// Integrates the reduced dynamics under a state-feedback `policy`.
///
/// The policy is evaluated at every Runge–Kutta stage, so smooth feedback
/// laws keep fourth-order accuracy.
pub fn integrate<P>(
    s0: BlochState,
    policy: P,
    p: &ScaledParams,
    opts: &IntegrationOptions<'_>,
) -> Result<Integrated>
where
    P: Fn(f64, BlochState) -> f64,
{
    integrate_until(s0, policy, p, opts, |_, _| false)
}

/// [`integrate`] with an extra stop predicate checked after every step.
pub fn integrate_until<P, H>(
    s0: BlochState,
    policy: P,
    p: &ScaledParams,
    opts: &IntegrationOptions<'_>,
    mut halt: H,
) -> Result<Integrated>
where
    P: Fn(f64, BlochState) -> f64,
    H: FnMut(f64, BlochState) -> bool,
{
    let f = |t: f64, x: &[f64; 2]| {
        let s = BlochState::from_array(*x);
        rhs(s, policy(t, s), p)
    };
    let events: Vec<EventSpec<'_, 2>> = opts
        .events
        .iter()
        .map(|e| EventSpec {
            func: Box::new(move |t: f64, x: &[f64; 2]| (e.func)(t, BlochState::from_array(*x))),
            direction: e.direction,
            terminal: e.terminal,
        })
        .collect();
    let step = StepOptions {
        event_tol: opts.event_tol,
        ..StepOptions::new(opts.dt, opts.t_max)
    };
    let prop = propagate(f, opts.t0, s0.to_array(), &step, &events, |t, x| {
        halt(t, BlochState::from_array(*x))
    })?;
    let samples = prop
        .times
        .iter()
        .zip(&prop.states)
        .map(|(&t, x)| {
            let state = BlochState::from_array(*x);
            Sample {
                t,
                state,
                u: policy(t, state),
                phase: opts.phase,
            }
        })
        .collect();
    Ok(Integrated {
        trajectory: Trajectory { samples },
        stop: prop.stop,
    })
}
