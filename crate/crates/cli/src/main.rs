use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use spinsat::scenario::{
    export, render_trajectory_csv, render_trajectory_json, run_batch, Format, InitialState,
    Numerics, OutputSpec, ParamSpec, Preset, Strategy,
};
use spinsat::{
    chattering_demo, compare, find_yc, run, singular_data, BlochState, PhysicalParams,
    ScaledParams, ScenarioConfig,
};

/// Saturation control of a dissipative spin-1/2.
#[derive(Debug, Parser)]
#[command(name = "spinsat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one strategy and write its trajectory and report.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        start: StartArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[arg(long, default_value = "local")]
        strategy: Strategy,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run several strategies on one scenario and compare durations.
    Compare {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        start: StartArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[arg(long, value_delimiter = ',', default_value = "local,optimal")]
        strategies: Vec<Strategy>,
        /// Write the comparison record (JSON) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the second switching point on the singular line.
    Yc {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        start: StartArgs,
    },
    /// Print the singular line height, g and the admissibility limit.
    Admissibility {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Forward-Euler run of the sign law started on the singular line.
    Chatter {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
        y0: f64,
        #[arg(long, default_value_t = 1e-5)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// case1, case2 or south-pole. Explicit rates override the preset's.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long, requires = "small_gamma", conflicts_with_all = ["t1", "t2", "omega_max"])]
    big_gamma: Option<f64>,
    #[arg(long, requires = "big_gamma")]
    small_gamma: Option<f64>,
    /// Longitudinal relaxation time in seconds.
    #[arg(long, requires_all = ["t2", "omega_max"])]
    t1: Option<f64>,
    #[arg(long, requires_all = ["t1", "omega_max"])]
    t2: Option<f64>,
    /// Control amplitude in rad/s.
    #[arg(long, requires_all = ["t1", "t2"])]
    omega_max: Option<f64>,
}

#[derive(Debug, Args)]
struct StartArgs {
    #[arg(long, requires = "z0", allow_hyphen_values = true)]
    y0: Option<f64>,
    #[arg(long, requires = "y0", allow_hyphen_values = true)]
    z0: Option<f64>,
}

#[derive(Debug, Args)]
struct NumericArgs {
    #[arg(long)]
    dt: Option<f64>,
    /// Displacement off the vertical axis for polar starts; 0 disables it.
    #[arg(long)]
    seed_eps: Option<f64>,
    #[arg(long)]
    target_tol: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

impl ParamArgs {
    fn base(&self) -> Result<ScenarioConfig> {
        let mut cfg = match self.preset {
            Some(p) => p.config(),
            None => {
                if self.big_gamma.is_none() && self.t1.is_none() {
                    bail!("need --preset, --big-gamma/--small-gamma or --t1/--t2/--omega-max");
                }
                ScenarioConfig::new(
                    ScaledParams::new(3.5, 0.5)?,
                    InitialState::NorthPole,
                    Strategy::Local,
                )
            }
        };
        if let (Some(big), Some(small)) = (self.big_gamma, self.small_gamma) {
            cfg.params = ParamSpec::Scaled(ScaledParams::new(big, small)?);
        }
        if let (Some(t1), Some(t2), Some(w)) = (self.t1, self.t2, self.omega_max) {
            cfg.params = ParamSpec::Physical(PhysicalParams::new(t1, t2, w)?);
        }
        Ok(cfg)
    }

    fn scaled(&self) -> Result<ScaledParams> {
        Ok(self.base()?.scaled()?.0)
    }
}

impl StartArgs {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let (Some(y), Some(z)) = (self.y0, self.z0) {
            cfg.initial = InitialState::Point(BlochState::new(y, z));
        }
    }
}

impl NumericArgs {
    fn apply(&self, n: &mut Numerics) {
        if let Some(dt) = self.dt {
            n.dt = dt;
        }
        if let Some(eps) = self.seed_eps {
            n.seed_eps = (eps > 0.0).then_some(eps);
        }
        if let Some(tol) = self.target_tol {
            n.target_tol = tol;
        }
        if let Some(t) = self.max_time {
            n.t_max = t;
        }
    }
}

fn config(params: &ParamArgs, start: &StartArgs, numerics: &NumericArgs) -> Result<ScenarioConfig> {
    let mut cfg = params.base()?;
    start.apply(&mut cfg);
    numerics.apply(&mut cfg.numerics);
    Ok(cfg)
}

fn exit_for(reached: bool) -> ExitCode {
    if reached {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Simulate {
            params,
            start,
            numerics,
            strategy,
            output,
        } => {
            let mut cfg = config(&params, &start, &numerics)?.with_strategy(strategy);
            cfg.output = output.out.map(|path| OutputSpec {
                path,
                format: output.format,
            });
            let (traj, report) = run(&cfg)?;
            if let Some(spec) = &cfg.output {
                let (tp, rp) = export(&traj, &report, spec)?;
                log::info!("wrote {} and {}", tp.display(), rp.display());
            }
            if let Some(s) = report.diagnostics.duration_seconds {
                eprintln!("duration_seconds={s:.9e}");
            }
            println!("{}", report.summary());
            Ok(exit_for(report.reached))
        }
        Command::Compare {
            params,
            start,
            numerics,
            strategies,
            out,
        } => {
            if strategies.len() < 2 {
                bail!("--strategies needs at least two entries");
            }
            let cfg = config(&params, &start, &numerics)?;
            let configs: Vec<_> = strategies
                .iter()
                .map(|&s| cfg.clone().with_strategy(s))
                .collect();
            let mut reports = Vec::new();
            for r in run_batch(&configs) {
                reports.push(r?.1);
            }
            println!(
                "{:<10} {:<8} {:>12} {:>12}",
                "strategy", "reached", "duration", "min_dist"
            );
            for r in &reports {
                let d = r.duration.map_or_else(|| "-".into(), |d| format!("{d:.6}"));
                println!(
                    "{:<10} {:<8} {:>12} {:>12.3e}",
                    r.strategy, r.reached, d, r.min_distance
                );
            }
            let mut records = Vec::new();
            for b in &reports[1..] {
                let c = compare(&reports[0], b)?;
                match c.duration_delta {
                    Some(d) => println!("delta ({} - {}) = {d:.4e}", c.a, c.b),
                    None => println!("delta ({} - {}) = none", c.a, c.b),
                }
                println!("verdict: {}", c.verdict);
                records.push(c);
            }
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&records)?;
                std::fs::write(&path, text + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(exit_for(reports.iter().all(|r| r.reached)))
        }
        Command::Yc { params, start } => {
            let mut cfg = params.base()?;
            start.apply(&mut cfg);
            let p = cfg.scaled()?.0;
            let s0 = cfg.initial.state();
            let s0 = if s0.y == 0.0 {
                BlochState::new(-1e-6, s0.z)
            } else {
                s0
            };
            let sol = find_yc(&p, s0)?;
            println!(
                "y_c={:.9} residual={:.3e} bracket=[{:.9}, {:.9}] evaluations={}",
                sol.y_c, sol.residual, sol.bracket.0, sol.bracket.1, sol.evaluations
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Admissibility { params } => {
            let p = params.scaled()?;
            let sd = singular_data(&p)?;
            println!("z0={:.9} g={:.9} y_lim={:.9}", sd.z0, sd.g, sd.y_lim);
            Ok(ExitCode::SUCCESS)
        }
        Command::Chatter {
            params,
            y0,
            dt,
            steps,
            output,
        } => {
            let p = params.scaled()?;
            let run = chattering_demo(y0, dt, steps, &p)?;
            println!(
                "mean_u={:.6} mean_ubar={:.6} rel_error={:.3e} window_error={:.3e} sign_changes={} z_amplitude={:.3e}",
                run.mean_u,
                run.mean_ubar,
                run.relative_average_error(),
                run.windowed_error(10.min(steps), &p)?,
                run.sign_changes,
                run.z_amplitude
            );
            if let Some(path) = output.out {
                let text = match output.format {
                    Format::Csv => render_trajectory_csv(&run.trajectory, &p),
                    Format::Json => render_trajectory_json(&run.trajectory, &p),
                };
                std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
