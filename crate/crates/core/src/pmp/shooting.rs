//! Shooting for the departure point `y_c` of the second bang.
//!
//! At `(y_c, z₀)` the costate is taken orthogonal to `F₁` (so `Φ = 0`; on the
//! line `F₁ ∥ V` gives `Φ̇ = 0` as well), unit length, oriented so that
//! `H > 0`. The final bang is integrated until the axis `y = 0`; there the
//! vertical singular arc needs `Φ = 0` again. The residual is that `Φ`.

use serde::{Deserialize, Serialize};

use super::{coupled_rhs, split, switching_function, AdjointState};
use crate::error::{Error, Result};
use crate::local_control::{seed_start, singular_data, SingularData};
use crate::model::{
    propagate, BlochState, Crossing, EventSpec, Propagation, ScaledParams, StepOptions, StopReason,
    DEFAULT_DT,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    pub dt: f64,
    /// Longest final bang considered before declaring a miss.
    pub horizon: f64,
    /// Stop once `|G| <` this.
    pub tol: f64,
    pub grid: usize,
    /// Inset of the bracket from the ball edge and the admissibility limit.
    pub delta: f64,
    pub max_iterations: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon: 2.0,
            tol: 1e-10,
            grid: 64,
            delta: 1e-6,
            max_iterations: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YcSolution {
    pub y_c: f64,
    /// `Φ` at the axis for the returned `y_c`.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    /// Sign of the control on the final bang.
    pub bang_sign: f64,
}

/// Unit costate at `(y, z₀)` with `Φ = 0` and `H > 0`.
pub(crate) fn departure_adjoint(y: f64, sd: &SingularData) -> AdjointState {
    let n = y.hypot(sd.z0);
    AdjointState::new(-y / n, -sd.z0 / n)
}

fn finite_bound(p: &ScaledParams) -> Result<f64> {
    p.bound
        .finite()
        .ok_or_else(|| Error::NoBoundedSolution("shooting needs a finite control bound".into()))
}

/// Control sign for which `sign Φ = sign u` just after leaving the line.
pub(crate) fn departure_bang_sign(y_c: f64, p: &ScaledParams, dt: f64) -> Result<f64> {
    let omega = finite_bound(p)?;
    let sd = singular_data(p)?;
    let adj = departure_adjoint(y_c, &sd);
    let x0 = [y_c, sd.z0, adj.py, adj.pz];
    let mut consistent = Vec::new();
    for sign in [1.0, -1.0] {
        let u = sign * omega;
        let prop = propagate(
            |_, x: &[f64; 4]| coupled_rhs(x, u, p),
            0.0,
            x0,
            &StepOptions::new(dt, 20.0 * dt),
            &[],
            |_, _| false,
        )?;
        let (s, a) = split(&prop.last().1);
        if switching_function(s, a) * sign > 0.0 {
            consistent.push(sign);
        }
    }
    Ok(match consistent.as_slice() {
        [only] => *only,
        _ => -y_c.signum(),
    })
}

/// Final bang from `(y_c, z₀)` with the departure costate, stopped at the axis.
pub(crate) fn final_bang(
    y_c: f64,
    sign: f64,
    p: &ScaledParams,
    opts: &ShootingOptions,
) -> Result<Propagation<4>> {
    let omega = finite_bound(p)?;
    let sd = singular_data(p)?;
    let adj = departure_adjoint(y_c, &sd);
    let u = sign * omega;
    let direction = if y_c < 0.0 {
        Crossing::Rising
    } else {
        Crossing::Falling
    };
    let events = [EventSpec::terminal(direction, |_, x: &[f64; 4]| x[0])];
    propagate(
        |_, x: &[f64; 4]| coupled_rhs(x, u, p),
        0.0,
        [y_c, sd.z0, adj.py, adj.pz],
        &StepOptions::new(opts.dt, opts.horizon),
        &events,
        |_, _| false,
    )
}

/// `G(y_c)`: `Φ` where the final bang meets the axis, `None` if it never does.
pub fn shooting_residual(
    y_c: f64,
    p: &ScaledParams,
    opts: &ShootingOptions,
) -> Result<Option<f64>> {
    let sign = departure_bang_sign(y_c, p, opts.dt)?;
    let prop = final_bang(y_c, sign, p, opts)?;
    if prop.stop != StopReason::Event(0) {
        return Ok(None);
    }
    let (_, x) = prop.last();
    let (s, a) = split(&x);
    Ok(Some(switching_function(BlochState::new(0.0, s.z), a)))
}

/// `find_yc_with` using default options; the side of the singular line is
/// taken from the (seeded) initial state.
pub fn find_yc(p: &ScaledParams, initial: BlochState) -> Result<YcSolution> {
    let side = seed_start(initial, Some(1e-6)).y;
    find_yc_with(
        p,
        if side > 0.0 { 1.0 } else { -1.0 },
        &ShootingOptions::default(),
    )
}

/// Locates `y_c` on the side `sign(side)` of the axis.
pub fn find_yc_with(p: &ScaledParams, side: f64, opts: &ShootingOptions) -> Result<YcSolution> {
    p.require_saturation_regime()?;
    finite_bound(p)?;
    let sd = singular_data(p)?;
    let lo = -(1.0 - sd.z0 * sd.z0).sqrt() + opts.delta;
    let hi = -sd.y_lim - opts.delta;
    if lo >= hi {
        return Err(Error::NoBoundedSolution(format!(
            "empty bracket ({lo}, {hi})"
        )));
    }
    let mut evaluations = 0usize;
    let mut eval = |y: f64| -> Result<Option<f64>> {
        evaluations += 1;
        shooting_residual(y, p, opts)
    };

    let n = opts.grid.max(2);
    let ys: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let mut gs = Vec::with_capacity(n);
    for &y in &ys {
        gs.push(eval(y)?);
    }
    let mut bracket = None;
    for i in 0..n - 1 {
        if let Some(b) = refine_bracket(&mut eval, (ys[i], gs[i]), (ys[i + 1], gs[i + 1]), 40)? {
            bracket = Some(b);
            break;
        }
    }
    let ((mut a, mut ga), (mut b, mut gb)) = bracket.ok_or_else(|| {
        Error::NoBoundedSolution(format!(
            "switching residual does not change sign on ({lo:.6}, {hi:.6})"
        ))
    })?;
    let bracket_found = (a, b);

    // Illinois variant of regula falsi, falling back to bisection.
    let (mut best_y, mut best_g) = if ga.abs() < gb.abs() {
        (a, ga)
    } else {
        (b, gb)
    };
    let mut side_kept = 0i32;
    for _ in 0..opts.max_iterations {
        if best_g.abs() < opts.tol || (b - a).abs() <= f64::EPSILON * a.abs() {
            break;
        }
        let mut c = b - gb * (b - a) / (gb - ga);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let gc = match eval(c)? {
            Some(g) => g,
            None => {
                c = 0.5 * (a + b);
                eval(c)?.ok_or_else(|| {
                    Error::Numerical(format!("final bang from y_c = {c} misses the axis"))
                })?
            }
        };
        if gc.abs() < best_g.abs() {
            best_y = c;
            best_g = gc;
        }
        if (gc < 0.0) == (gb < 0.0) {
            b = c;
            gb = gc;
            if side_kept == -1 {
                ga *= 0.5;
            }
            side_kept = -1;
        } else {
            a = c;
            ga = gc;
            if side_kept == 1 {
                gb *= 0.5;
            }
            side_kept = 1;
        }
    }
    if best_g.abs() >= opts.tol {
        return Err(Error::Numerical(format!(
            "shooting stalled at y_c = {best_y} with residual {best_g:e}"
        )));
    }
    let bang_sign = departure_bang_sign(best_y, p, opts.dt)?;
    let mirror = if side > 0.0 { -1.0 } else { 1.0 };
    Ok(YcSolution {
        y_c: mirror * best_y,
        residual: best_g,
        bracket: (mirror * bracket_found.0, mirror * bracket_found.1),
        evaluations,
        bang_sign: mirror * bang_sign,
    })
}

type Point = (f64, Option<f64>);
/// A sign-changing pair `((y_a, G_a), (y_b, G_b))`.
type Bracket = ((f64, f64), (f64, f64));

/// Finds a sub-interval with a sign change, subdividing where the residual
/// is undefined at one end (the final bang stops reaching the axis).
fn refine_bracket<F>(eval: &mut F, a: Point, b: Point, depth: u32) -> Result<Option<Bracket>>
where
    F: FnMut(f64) -> Result<Option<f64>>,
{
    match (a.1, b.1) {
        (Some(ga), Some(gb)) => {
            if ga == 0.0 || gb == 0.0 || (ga < 0.0) != (gb < 0.0) {
                Ok(Some(((a.0, ga), (b.0, gb))))
            } else {
                Ok(None)
            }
        }
        (None, None) => Ok(None),
        _ if depth == 0 => Ok(None),
        _ => {
            let m = 0.5 * (a.0 + b.0);
            let mid = (m, eval(m)?);
            if let Some(found) = refine_bracket(eval, a, mid, depth - 1)? {
                return Ok(Some(found));
            }
            refine_bracket(eval, mid, b, depth - 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(big: f64) -> ScaledParams {
        ScaledParams::new(big, 0.5).unwrap()
    }

    #[test]
    fn departure_costate_is_orthogonal_and_positive() {
        let p = params(3.5);
        let sd = singular_data(&p).unwrap();
        let y = -0.2;
        let adj = departure_adjoint(y, &sd);
        let x = BlochState::new(y, sd.z0);
        assert!(switching_function(x, adj).abs() < 1e-16);
        assert!(super::super::pseudo_hamiltonian(x, adj, 0.0, &p) > 0.0);
        assert!((adj.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn case1_switch_point() {
        let sol = find_yc(&params(3.5), BlochState::NORTH_POLE).unwrap();
        assert!(sol.residual.abs() < 1e-10);
        assert!((sol.y_c + 0.13564).abs() < 1e-4, "{sol:?}");
        assert_eq!(sol.bang_sign, 1.0);
    }

    #[test]
    fn case2_switch_point_needs_refined_bracket() {
        let sol = find_yc(&params(5.0), BlochState::NORTH_POLE).unwrap();
        assert!(sol.residual.abs() < 1e-10);
        assert!((sol.y_c + 0.16050).abs() < 1e-4, "{sol:?}");
    }

    #[test]
    fn switch_precedes_admissibility_limit() {
        for big in [3.5, 5.0] {
            let p = params(big);
            let sol = find_yc(&p, BlochState::NORTH_POLE).unwrap();
            assert!(sol.y_c.abs() > singular_data(&p).unwrap().y_lim);
        }
    }

    #[test]
    fn residual_monotone_over_bracket() {
        let p = params(3.5);
        let opts = ShootingOptions::default();
        let sol = find_yc_with(&p, -1.0, &opts).unwrap();
        let (a, b) = sol.bracket;
        let gs: Vec<f64> = (0..=10)
            .map(|i| {
                let y = a + (b - a) * i as f64 / 10.0;
                shooting_residual(y, &p, &opts).unwrap().unwrap()
            })
            .collect();
        assert!(gs[0] * gs[10] <= 0.0);
        let increasing = gs.windows(2).all(|w| w[1] >= w[0]);
        let decreasing = gs.windows(2).all(|w| w[1] <= w[0]);
        assert!(increasing || decreasing, "{gs:?}");
    }

    #[test]
    fn mirrored_side() {
        let p = params(3.5);
        let left = find_yc_with(&p, -1.0, &ShootingOptions::default()).unwrap();
        let right = find_yc_with(&p, 1.0, &ShootingOptions::default()).unwrap();
        assert_eq!(left.y_c, -right.y_c);
        assert_eq!(left.bang_sign, -right.bang_sign);
        // the mirrored departure satisfies the same axis condition
        let g = shooting_residual(right.y_c, &p, &ShootingOptions::default())
            .unwrap()
            .unwrap();
        assert!(g.abs() < 1e-9, "{g}");
    }

    #[test]
    fn unbounded_rejected() {
        let p = ScaledParams::with_bound(3.5, 0.5, crate::model::ControlBound::Unbounded).unwrap();
        assert!(matches!(
            find_yc(&p, BlochState::NORTH_POLE),
            Err(Error::NoBoundedSolution(_))
        ));
    }
}
