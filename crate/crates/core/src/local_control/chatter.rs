use crate::error::{Error, Result};
use crate::model::{
    control_coefficient, rhs, BlochState, Sample, ScaledParams, SegmentKind, Trajectory,
};

use super::{singular_data, singular_feedback};

/// Forward-Euler run of the pure sign law started on the singular line.
#[derive(Clone, Debug)]
pub struct ChatterRun {
    pub trajectory: Trajectory,
    /// Time average of the applied control over the run.
    pub mean_u: f64,
    pub mean_y: f64,
    /// Time average of the singular feedback `ū(y(t))` along the run.
    pub mean_ubar: f64,
    /// Singular feedback evaluated at `(mean_y, z₀)`.
    pub ubar_at_mean_y: f64,
    /// Largest `|z − z₀|` after the first sign change.
    pub z_amplitude: f64,
    pub sign_changes: usize,
}

impl ChatterRun {
    pub fn relative_average_error(&self) -> f64 {
        ((self.mean_u - self.mean_ubar) / self.mean_ubar).abs()
    }

    /// Splits the run into `windows` equal windows and returns the largest
    /// relative gap between the mean of `u` and `ū` at the window's mean `y`.
    pub fn windowed_error(&self, windows: usize, p: &ScaledParams) -> Result<f64> {
        let steps = &self.trajectory.samples[..self.trajectory.len() - 1];
        if windows == 0 || windows > steps.len() {
            return Err(Error::InvalidOption(format!(
                "need 1..={} windows, got {windows}",
                steps.len()
            )));
        }
        let z0 = singular_data(p)?.z0;
        let size = steps.len() / windows;
        let mut worst: f64 = 0.0;
        for w in steps.chunks_exact(size) {
            let n = w.len() as f64;
            let mean_u = w.iter().map(|s| s.u).sum::<f64>() / n;
            let mean_y = w.iter().map(|s| s.state.y).sum::<f64>() / n;
            let ubar = singular_feedback(BlochState::new(mean_y, z0), p)?;
            worst = worst.max(((mean_u - ubar) / ubar).abs());
        }
        Ok(worst)
    }
}

pub fn chattering_demo(y0: f64, dt: f64, n: usize, p: &ScaledParams) -> Result<ChatterRun> {
    let omega = p
        .bound
        .finite()
        .ok_or_else(|| Error::InvalidParameter("chattering needs a finite control bound".into()))?;
    let sd = singular_data(p)?;
    if y0.abs() <= sd.y_lim {
        return Err(Error::InvalidParameter(format!(
            "|y0| = {} must exceed the admissibility limit {}",
            y0.abs(),
            sd.y_lim
        )));
    }
    if dt.is_nan() || dt <= 0.0 || n == 0 {
        return Err(Error::InvalidOption(format!(
            "need dt > 0 and at least one step, got dt = {dt}, n = {n}"
        )));
    }

    let sign_law = |s: BlochState| {
        let mu = control_coefficient(s, p);
        if mu == 0.0 {
            0.0
        } else {
            omega.copysign(mu)
        }
    };

    let mut s = BlochState::new(y0, sd.z0);
    let mut samples = Vec::with_capacity(n + 1);
    let (mut sum_u, mut sum_y, mut sum_ubar) = (0.0, 0.0, 0.0);
    let mut last_sign = 0.0;
    let mut sign_changes = 0;
    let mut z_amplitude: f64 = 0.0;
    for k in 0..n {
        let u = sign_law(s);
        samples.push(Sample {
            t: k as f64 * dt,
            state: s,
            u,
            phase: SegmentKind::Feedback,
        });
        if u != 0.0 {
            if last_sign != 0.0 && u.signum() != last_sign {
                sign_changes += 1;
            }
            last_sign = u.signum();
        }
        if sign_changes > 0 {
            z_amplitude = z_amplitude.max((s.z - sd.z0).abs());
        }
        sum_u += u;
        sum_y += s.y;
        sum_ubar += singular_feedback(BlochState::new(s.y, sd.z0), p)?;
        let d = rhs(s, u, p);
        s = BlochState::new(s.y + dt * d[0], s.z + dt * d[1]);
    }
    samples.push(Sample {
        t: n as f64 * dt,
        state: s,
        u: sign_law(s),
        phase: SegmentKind::Feedback,
    });

    let mean_y = sum_y / n as f64;
    Ok(ChatterRun {
        trajectory: Trajectory { samples },
        mean_u: sum_u / n as f64,
        mean_y,
        mean_ubar: sum_ubar / n as f64,
        ubar_at_mean_y: singular_feedback(BlochState::new(mean_y, sd.z0), p)?,
        z_amplitude,
        sign_changes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case1() -> ScaledParams {
        ScaledParams::new(3.5, 0.5).unwrap()
    }

    #[test]
    fn control_keeps_switching() {
        let run = chattering_demo(-0.2, 1e-4, 2000, &case1()).unwrap();
        let us: Vec<f64> = run.trajectory.samples.iter().map(|s| s.u).collect();
        for w in us[..500].chunks(16) {
            assert!(
                w.iter().any(|&u| u > 0.0) && w.iter().any(|&u| u < 0.0),
                "{w:?}"
            );
        }
        assert!(run.sign_changes > 200, "{}", run.sign_changes);
    }

    #[test]
    fn fluctuation_shrinks_with_step() {
        let p = case1();
        let coarse = chattering_demo(-0.2, 1e-3, 100, &p).unwrap();
        let fine = chattering_demo(-0.2, 1e-4, 1000, &p).unwrap();
        let ratio = coarse.z_amplitude / fine.z_amplitude;
        assert!((ratio - 10.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn average_matches_singular_feedback() {
        let run = chattering_demo(-0.2, 1e-5, 10_000, &case1()).unwrap();
        assert!(
            run.relative_average_error() < 0.02,
            "{}",
            run.relative_average_error()
        );
    }

    #[test]
    fn windowed_average_matches_local_feedback() {
        let p = case1();
        let run = chattering_demo(-0.2, 1e-5, 10_000, &p).unwrap();
        assert!(run.windowed_error(10, &p).unwrap() < 0.02);
        // One window spans a large drift in y, over which ū is far from linear.
        assert!(run.windowed_error(1, &p).unwrap() > run.windowed_error(10, &p).unwrap());
        assert!(run.windowed_error(0, &p).is_err());
    }

    #[test]
    fn rejects_inadmissible_start() {
        assert!(chattering_demo(-0.05, 1e-4, 10, &case1()).is_err());
        assert!(chattering_demo(-0.2, 0.0, 10, &case1()).is_err());
    }
}
