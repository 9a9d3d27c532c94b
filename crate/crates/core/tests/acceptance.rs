//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{LN_2, TAU};
use std::process::ExitCode;

use spinsat::model::{entropy_curvature, rk4_step};
use spinsat::pmp::switching_rate;
use spinsat::scenario::Strategy;
use spinsat::*;

struct Gate {
    failed: usize,
    total: usize,
}

impl Gate {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: String) {
        self.total += 1;
        if !ok {
            self.failed += 1;
        }
        println!(
            "{} {id:<4} {what}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    }

    fn near(&mut self, id: &str, what: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.check(id, what, ok, format!("{got:.6} (want {want} ± {tol:e})"));
    }

    fn fail_err(&mut self, id: &str, what: &str, e: impl std::fmt::Display) {
        self.check(id, what, false, format!("error: {e}"));
    }
}

fn params(big: f64) -> ScaledParams {
    ScaledParams::new(big, 0.5).unwrap()
}

fn report(name: &str, strategy: Strategy) -> Result<ScenarioReport> {
    run(&preset(name)?.with_strategy(strategy)).map(|(_, r)| r)
}

fn criterion_1(g: &mut Gate) {
    let (opt, loc) = match (
        report("case1", Strategy::Optimal),
        report("case1", Strategy::Local),
    ) {
        (Ok(o), Ok(l)) => (o, l),
        (Err(e), _) | (_, Err(e)) => return g.fail_err("1", "case1 runs", e),
    };
    let (o, l) = (
        opt.duration.unwrap_or(f64::NAN),
        loc.duration.unwrap_or(f64::NAN),
    );
    g.near("1a", "case1 optimal duration", o, 0.95050, 1e-3);
    g.near("1b", "case1 local duration", l, 0.95098, 1e-3);
    let delta = compare(&loc, &opt)
        .ok()
        .and_then(|c| c.duration_delta)
        .unwrap_or(f64::NAN);
    g.check(
        "1c",
        "case1 local - optimal in (0, 1.5e-3)",
        delta > 0.0 && delta < 1.5e-3,
        format!("{delta:.4e}"),
    );
    let ok = (delta - 4.81e-4).abs() <= 2.5e-4;
    g.check(
        "1d",
        "case1 local - optimal",
        ok,
        format!("{delta:.4e} (want 4.81e-4 ± 2.5e-4)"),
    );
}

fn criterion_2(g: &mut Gate) {
    for (id, big, want) in [("2a", 3.5, -0.1605), ("2b", 5.0, -0.1356)] {
        match find_yc(&params(big), BlochState::NORTH_POLE) {
            Ok(s) => g.near(id, &format!("find_yc at Γ = {big}"), s.y_c, want, 2e-3),
            Err(e) => g.fail_err(id, "find_yc", e),
        }
    }
}

fn criterion_3(g: &mut Gate) {
    for (id, big, want) in [("3a", 3.5, 0.0862), ("3b", 5.0, 0.0840)] {
        let p = params(big);
        let sd = singular_data(&p).unwrap();
        g.near(id, &format!("y_lim at Γ = {big}"), sd.y_lim, want, 1e-4);
        let (gg, sg) = (p.big_gamma, p.small_gamma);
        let formula = sg * (2.0 * gg - sg) / (2.0 * TAU * (gg - sg));
        let diff = (sd.y_lim - formula).abs();
        g.check(
            &format!("{id}'"),
            "y_lim equals γ(2Γ−γ)/(2Ω(Γ−γ))",
            diff <= 1e-12,
            format!("|Δ| = {diff:e}"),
        );
    }
}

fn criterion_4(g: &mut Gate) {
    match report("case2", Strategy::Optimal) {
        Ok(r) => g.near(
            "4a",
            "case2 optimal duration",
            r.duration.unwrap_or(f64::NAN),
            0.97,
            0.01,
        ),
        Err(e) => g.fail_err("4a", "case2 optimal", e),
    }
    match report("case2", Strategy::Local) {
        Ok(r) => {
            g.check(
                "4b",
                "case2 local not reached",
                !r.reached,
                format!("reached={}", r.reached),
            );
            g.near(
                "4c",
                "case2 local min distance",
                r.min_distance,
                9.9e-4,
                5e-4,
            );
        }
        Err(e) => g.fail_err("4b", "case2 local", e),
    }
}

fn criterion_5(g: &mut Gate) {
    match report("south-pole", Strategy::Local) {
        Ok(r) => g.near(
            "5a",
            "south pole local duration",
            r.duration.unwrap_or(f64::NAN),
            0.8758,
            1.5e-3,
        ),
        Err(e) => g.fail_err("5a", "south pole local", e),
    }
    match report("south-pole", Strategy::Optimal) {
        Ok(r) => g.near(
            "5b",
            "south pole optimal duration",
            r.duration.unwrap_or(f64::NAN),
            0.8753,
            1.5e-3,
        ),
        Err(e) => g.fail_err("5b", "south pole optimal", e),
    }
    match report("south-pole", Strategy::Free) {
        Ok(r) => {
            let d = r.duration.unwrap_or(f64::NAN);
            let exact = LN_2 / 0.5;
            g.check(
                "5c",
                "free relaxation = ln 2 / γ",
                d == exact,
                format!("{d:.12} vs {exact:.12}"),
            );
            g.near("5d", "free relaxation vs 1.3861", d, 1.3861, 3e-4);
        }
        Err(e) => g.fail_err("5c", "south pole free", e),
    }
}

/// Deterministic sample states inside the ball.
fn probe_states() -> Vec<BlochState> {
    let mut out = Vec::new();
    for i in 0..9 {
        for j in 0..9 {
            let y = -0.8 + 0.2 * i as f64 + 0.013;
            let z = -0.8 + 0.2 * j as f64 + 0.007;
            if y * y + z * z < 0.95 {
                out.push(BlochState::new(y, z));
            }
        }
    }
    out
}

fn flow(s: BlochState, u: f64, p: &ScaledParams, h: f64) -> BlochState {
    let f = |_: f64, x: &[f64; 2]| rhs(BlochState::new(x[0], x[1]), u, p);
    let x = rk4_step(&f, 0.0, &s.to_array(), h);
    BlochState::new(x[0], x[1])
}

fn criterion_6(g: &mut Gate) {
    let p = params(3.5);
    let states = probe_states();

    // (a)
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for &s in &states {
        for u in [0.0, -TAU, 3.0] {
            let fd = (linear_entropy(flow(s, u, &p, h)) - linear_entropy(flow(s, u, &p, -h)))
                / (2.0 * h);
            let exact = entropy_rate(s, &p);
            worst = worst.max((fd - exact).abs() / exact.abs().max(1e-2));
        }
    }
    g.check(
        "6a",
        "entropy rate vs finite difference, any u",
        worst < 1e-6,
        format!("max rel {worst:.2e}"),
    );

    // (b)
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for &s in &states {
        for u in [0.0, -TAU, 3.0] {
            let s0 = linear_entropy(s);
            let fd = (linear_entropy(flow(s, u, &p, h)) - 2.0 * s0
                + linear_entropy(flow(s, u, &p, -h)))
                / (h * h);
            let exact = u * control_coefficient(s, &p) + free_curvature(s, &p);
            assert_eq!(exact, entropy_curvature(s, u, &p));
            worst = worst.max((fd - exact).abs() / exact.abs().max(1e-1));
        }
    }
    g.check(
        "6b",
        "u·μ + free curvature vs second difference",
        worst < 1e-4,
        format!("max rel {worst:.2e}"),
    );

    // (c)
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (k, &s) in states.iter().enumerate() {
        let adj = AdjointState::new(0.3 + 0.01 * k as f64, -0.7 + 0.02 * k as f64);
        let u = [0.0, TAU, -2.5][k % 3];
        let dy = (pseudo_hamiltonian(BlochState::new(s.y + h, s.z), adj, u, &p)
            - pseudo_hamiltonian(BlochState::new(s.y - h, s.z), adj, u, &p))
            / (2.0 * h);
        let dz = (pseudo_hamiltonian(BlochState::new(s.y, s.z + h), adj, u, &p)
            - pseudo_hamiltonian(BlochState::new(s.y, s.z - h), adj, u, &p))
            / (2.0 * h);
        let a = adjoint_rhs(s, adj, u, &p);
        let scale = a[0].abs().max(a[1].abs()).max(1.0);
        worst = worst
            .max((a[0] + dy).abs() / scale)
            .max((a[1] + dz).abs() / scale);

        let hh = 1e-5;
        let f = |_: f64, x: &[f64; 4]| {
            let (st, ad) = (BlochState::new(x[0], x[1]), AdjointState::new(x[2], x[3]));
            let ds = rhs(st, u, &p);
            let da = adjoint_rhs(st, ad, u, &p);
            [ds[0], ds[1], da[0], da[1]]
        };
        let x0 = [s.y, s.z, adj.py, adj.pz];
        let phi = |x: [f64; 4]| {
            switching_function(BlochState::new(x[0], x[1]), AdjointState::new(x[2], x[3]))
        };
        let fd = (phi(rk4_step(&f, 0.0, &x0, hh)) - phi(rk4_step(&f, 0.0, &x0, -hh))) / (2.0 * hh);
        let exact = switching_rate(s, adj, &p);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-1));
    }
    g.check(
        "6c",
        "adjoint and Φ̇ = P·V vs finite differences",
        worst < 1e-6,
        format!("max rel {worst:.2e}"),
    );

    // (d)
    let sd = singular_data(&p).unwrap();
    let (y0, y1) = (-0.6, -0.1);
    let d = singular_arc_duration(y0, y1, &p).unwrap();
    let opts = IntegrationOptions::new(1e-4, d);
    let res = integrate(
        BlochState::new(y0, sd.z0),
        |_, s| singular_feedback(s, &p).unwrap_or(0.0),
        &p,
        &opts,
    )
    .unwrap();
    let worst = res
        .trajectory
        .samples
        .iter()
        .map(|s| (s.state.y - singular_arc_position(s.t, y0, &p).unwrap()).abs())
        .fold(0.0, f64::max);
    g.check(
        "6d",
        "singular arc closed form vs feedback",
        worst < 1e-8,
        format!("max |Δy| {worst:.2e}"),
    );

    // (e)
    let s0 = BlochState::new(0.3, -0.5);
    let t_end = 1.0;
    let err = |dt: f64| {
        let r = integrate(s0, |_, _| 0.0, &p, &IntegrationOptions::new(dt, t_end)).unwrap();
        let s = r.final_state();
        let exact_y = s0.y * (-p.big_gamma * t_end).exp();
        let exact_z = 1.0 - (1.0 - s0.z) * (-p.small_gamma * t_end).exp();
        (s.y - exact_y).hypot(s.z - exact_z)
    };
    let (e1, e2, e3) = (err(0.04), err(0.02), err(0.01));
    let (r1, r2) = (e1 / e2, e2 / e3);
    let ok = (r1 - 16.0).abs() < 1.0 && (r2 - 16.0).abs() < 1.0;
    g.check(
        "6e",
        "RK4 order vs closed-form free solution",
        ok,
        format!("ratios {r1:.2}, {r2:.2}"),
    );

    // (f)
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for s in [
        BlochState::new(0.3, 0.6),
        BlochState::new(0.5, -0.2),
        BlochState::new(0.05, 0.9),
    ] {
        let a = synthesize_local(s, &p, &LocalOptions::default())
            .unwrap()
            .trajectory;
        let b = synthesize_local(s.mirrored(), &p, &LocalOptions::default())
            .unwrap()
            .trajectory
            .mirrored();
        ok &= a.len() == b.len();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            ok &= x.phase == y.phase;
            worst = worst
                .max((x.t - y.t).abs())
                .max((x.state.y - y.state.y).abs())
                .max((x.state.z - y.state.z).abs())
                .max((x.u - y.u).abs());
        }
    }
    g.check(
        "6f",
        "mirror symmetry",
        ok && worst <= 1e-12,
        format!("max |Δ| {worst:.2e}"),
    );

    // (g)
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, big, s0) in [
        ("case1", 3.5, BlochState::NORTH_POLE),
        ("case2", 5.0, BlochState::NORTH_POLE),
        ("south", 3.5, BlochState::SOUTH_POLE),
    ] {
        match synthesize_optimal(s0, &params(big), &OptimalOptions::default()) {
            Ok(o) => {
                let d = &o.report.diagnostics;
                ok &= d.h_rel_spread <= 1e-6 && d.h_min >= -1e-6 * d.h_max.abs();
                detail.push(format!(
                    "{name}: spread {:.1e}, min {:.4}",
                    d.h_rel_spread, d.h_min
                ));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("{name}: {e}"));
            }
        }
    }
    g.check(
        "6g",
        "H constant and ≥ 0 on optimal extremals",
        ok,
        detail.join("; "),
    );

    // (h)
    let q = ScaledParams::with_bound(3.5, 0.5, ControlBound::Unbounded).unwrap();
    let local = synthesize_local(BlochState::NORTH_POLE, &q, &LocalOptions::default()).unwrap();
    let opt = synthesize_unbounded(BlochState::NORTH_POLE, &q).unwrap();
    let ld = local.report.duration.unwrap_or(f64::NAN);
    let kinds_l: Vec<_> = local.segments.iter().map(|s| s.kind).collect();
    let kinds_o: Vec<_> = opt.segments.iter().map(|s| s.kind).collect();
    let w = (1.0 - sd.z0 * sd.z0).sqrt();
    let c = sd.g / 3.5;
    let closed = ((w * w - c) / -c).ln() / 7.0 + (1.0 - sd.z0).ln() / 0.5;
    let bounded = synthesize_optimal(BlochState::NORTH_POLE, &p, &OptimalOptions::default())
        .map(|o| o.report.duration)
        .unwrap_or(f64::NAN);
    let ok = (ld - opt.duration).abs() < 1e-9
        && kinds_l == kinds_o
        && (opt.duration - closed).abs() < 1e-9
        && opt.duration < bounded;
    g.check(
        "6h",
        "unbounded local ≡ unbounded optimal, below bounded optimum",
        ok,
        format!(
            "local {ld:.9}, optimal {:.9}, closed {closed:.9}, bounded {bounded:.6}",
            opt.duration
        ),
    );

    // (i)
    match synthesize_optimal(BlochState::NORTH_POLE, &p, &OptimalOptions::default()) {
        Ok(o) => {
            let js = &o.report.diagnostics.junctions;
            let ok = js.len() >= 2
                && js
                    .iter()
                    .all(|j| j.phi.abs() <= 1e-8 && j.phi_dot.abs() <= 1e-6);
            let detail = js
                .iter()
                .map(|j| format!("{} Φ={:.1e} Φ̇={:.1e}", j.label, j.phi, j.phi_dot))
                .collect::<Vec<_>>()
                .join(", ");
            g.check("6i", "Φ and Φ̇ vanish at junctions", ok, detail);
        }
        Err(e) => g.fail_err("6i", "junctions", e),
    }

    // (j)
    match chattering_demo(-0.2, 1e-5, 10_000, &p) {
        Ok(c) => {
            let w = c.windowed_error(10, &p).unwrap_or(f64::NAN);
            g.check(
                "6j",
                "chattering windowed average vs ū at window mean",
                w < 0.02,
                format!(
                    "max rel {w:.2e} over 10 windows; whole run vs mean ū(y(t)) {:.2e}",
                    c.relative_average_error()
                ),
            );
        }
        Err(e) => g.fail_err("6j", "chattering", e),
    }
}

fn main() -> ExitCode {
    let mut g = Gate {
        failed: 0,
        total: 0,
    };
    criterion_1(&mut g);
    criterion_2(&mut g);
    criterion_3(&mut g);
    criterion_4(&mut g);
    criterion_5(&mut g);
    criterion_6(&mut g);
    println!(
        "acceptance: {} of {} checks passed",
        g.total - g.failed,
        g.total
    );
    if g.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
