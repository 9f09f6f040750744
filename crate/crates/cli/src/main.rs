//! `quadwalk` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 invalid input, 4 tolerance not met
//! (the partial result is still written).

mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use quadwalk::dp::{
    count_line, count_paths, float_measure, local_prob, survival_error_bound, DpOptions, ExitSpec,
    DEFAULT_PRUNE,
};
use quadwalk::harmonic::{WGrid, WOptions};
use quadwalk::io::{parse_list, parse_pair, parse_pair_f64, read_steps_json, BarrierSetting, OutputFormat, RunConfig};
use quadwalk::ladder::{
    ascending_ladder_partial, descending_ladder_partial, renewal_h, renewal_v, BoundaryConvention, LadderOptions,
    RenewalKind,
};
use quadwalk::model::{compute_moments, lattice_decompose, solve_drift, tilt, StepDistribution};
use quadwalk::montecarlo::simulate_survival;
use quadwalk::pipeline::{ConditionedWalk, LADDER_TOL};
use quadwalk::verify::{verify, McOptions, TheoremId, VerifyOptions};
use quadwalk::{Error, ErrorKind};

use report::Report;

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(name = "quadwalk", version, about = "Random walks conditioned to stay in the positive quadrant")]
struct Cli {
    /// Step-set JSON file; the singular step set when absent.
    #[arg(long, global = true)]
    steps: Option<PathBuf>,
    /// TOML run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Kill rule on the axes: nonpositive or negative.
    #[arg(long, global = true)]
    convention: Option<BoundaryConvention>,
    /// Horizontal DP barrier: an integer, auto or none.
    #[arg(long, global = true)]
    barrier: Option<BarrierSetting>,
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Worker threads.
    #[arg(long, global = true, env = "QUADWALK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Moments and lattice structure of the step law.
    Model {
        #[arg(value_enum)]
        what: ModelWhat,
    },
    /// Exponential change of measure.
    Tilt {
        #[command(subcommand)]
        op: TiltOp,
    },
    /// Ladder-height law of the vertical component.
    Ladders {
        #[arg(long, value_enum)]
        dir: Direction,
        #[arg(long, default_value_t = 50)]
        max_u: usize,
        #[arg(long, default_value_t = LADDER_TOL)]
        tol: f64,
    },
    /// Renewal function table.
    Renewal {
        #[arg(long)]
        kind: RenewalKind,
        #[arg(long, default_value_t = 100)]
        max_u: usize,
    },
    /// Quadrant harmonic function with its bracket.
    HarmonicW {
        #[arg(long, value_parser = pair)]
        x: Option<(i64, i64)>,
        /// Evaluate on the whole grid [1, a] x [1, b] instead of one point.
        #[arg(long, value_parser = pair, conflicts_with = "x")]
        grid: Option<(i64, i64)>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1 << 14)]
        n_max: u64,
    },
    /// Exact finite-n quantities.
    Dp {
        #[command(subcommand)]
        op: DpOp,
    },
    /// Monte Carlo estimates.
    Mc {
        #[command(subcommand)]
        op: McOp,
    },
    /// Finite-n values against the limit predictions.
    Verify {
        /// tail, integral, llt, llt-half, boundary-llt, line, qbar or kernel.
        theorem: TheoremId,
        #[arg(long, value_parser = pair, default_value = "1,1")]
        x: (i64, i64),
        #[arg(long, value_parser = schedule, default_value = "")]
        n_schedule: Schedule,
        /// Split-path predictors for boundary-llt and line.
        #[arg(long)]
        refined: bool,
        /// Measure the tail by simulation with this many paths.
        #[arg(long)]
        mc_reps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1e-40)]
        prune: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelWhat {
    Moments,
    Lattice,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Down,
    Up,
}

#[derive(Subcommand)]
enum TiltOp {
    /// Tilt with the given drift.
    Solve {
        #[arg(long, value_parser = pair_f64, allow_hyphen_values = true)]
        drift: (f64, f64),
    },
}

#[derive(Args)]
struct Start {
    #[arg(long, value_parser = pair, allow_hyphen_values = true)]
    x: (i64, i64),
    #[arg(long)]
    n: u64,
}

#[derive(Subcommand)]
enum DpOp {
    /// P(T > n).
    Survive {
        #[command(flatten)]
        start: Start,
        /// Also write the alive measure as CSV to this file.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// P(x + S(n) = y, T > n).
    Local {
        #[command(flatten)]
        start: Start,
        #[arg(long, value_parser = pair, allow_hyphen_values = true)]
        y: (i64, i64),
    },
    /// Number of quadrant paths from x to y.
    Count {
        #[command(flatten)]
        start: Start,
        #[arg(long, value_parser = pair, allow_hyphen_values = true)]
        y: (i64, i64),
    },
    /// Number of quadrant paths ending on the line at height 1.
    Line {
        #[command(flatten)]
        start: Start,
    },
}

#[derive(Subcommand)]
enum McOp {
    /// Simulated P(T > n).
    Survive {
        #[command(flatten)]
        start: Start,
        #[arg(long)]
        reps: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone)]
struct Schedule(Vec<u64>);

fn pair(s: &str) -> Result<(i64, i64), String> {
    parse_pair(s).map_err(|e| e.to_string())
}

fn pair_f64(s: &str) -> Result<(f64, f64), String> {
    parse_pair_f64(s).map_err(|e| e.to_string())
}

fn schedule(s: &str) -> Result<Schedule, String> {
    if s.trim().is_empty() {
        return Ok(Schedule(Vec::new()));
    }
    parse_list(s).map(Schedule).map_err(|e| e.to_string())
}

/// Settings after merging the config file under the flags.
struct Settings {
    sd: StepDistribution,
    convention: BoundaryConvention,
    barrier: BarrierSetting,
    format: OutputFormat,
    seed: u64,
    threads: usize,
}

impl Settings {
    fn dp(&self) -> DpOptions {
        DpOptions {
            barrier: self.barrier.to_barrier(),
            prune: DEFAULT_PRUNE,
        }
    }

    fn spec(&self) -> ExitSpec {
        ExitSpec::quadrant(self.convention)
    }

    fn walk(&self) -> quadwalk::Result<ConditionedWalk> {
        ConditionedWalk::new(self.sd.clone(), self.convention)
    }
}

fn settings(cli: &Cli) -> quadwalk::Result<Settings> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let steps = cli.steps.clone().or(cfg.steps);
    let sd = match steps {
        Some(path) => read_steps_json(&path)?,
        None => StepDistribution::singular(),
    };
    let convention = match (cli.convention, cfg.convention) {
        (Some(c), _) => c,
        (None, Some(text)) => text.parse()?,
        (None, None) => BoundaryConvention::default(),
    };
    let default_threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(Settings {
        sd,
        convention,
        barrier: cli.barrier.or(cfg.barrier).unwrap_or("auto".parse()?),
        format: cli.format.or(cfg.format).unwrap_or_default(),
        seed: cfg.seed.unwrap_or(0),
        threads: cli.threads.or(cfg.threads).unwrap_or(default_threads).max(1),
    })
}

/// A report plus an optional numeric shortfall that sets exit code 4.
struct Outcome {
    report: Report,
    shortfall: Option<String>,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome {
            report,
            shortfall: None,
        }
    }
}

fn f(v: f64) -> String {
    v.to_string()
}

fn run(cli: &Cli, s: &Settings) -> quadwalk::Result<Outcome> {
    match &cli.command {
        Command::Model { what } => model(s, *what),
        Command::Tilt {
            op: TiltOp::Solve { drift },
        } => {
            let p = solve_drift(&s.sd, [drift.0, drift.1])?;
            let (tilted, _) = tilt(&s.sd, p.h);
            let steps: Vec<_> = tilted.probabilities().collect();
            Ok(Report::rows(
                "tilt solve",
                vec!["h1", "h2", "phi"],
                vec![vec![f(p.h[0]), f(p.h[1]), f(p.phi)]],
                json!({ "h": p.h, "phi": p.phi, "steps": steps }),
            )
            .into())
        }
        Command::Ladders { dir, max_u, tol } => {
            let opts = LadderOptions {
                tol: *tol,
                ..LadderOptions::default()
            };
            let vertical = s.sd.vertical_marginal();
            let ld = match dir {
                Direction::Down => descending_ladder_partial(&vertical, s.convention, &opts)?,
                Direction::Up => ascending_ladder_partial(&vertical, &opts)?,
            };
            let rows = ld
                .pmf
                .iter()
                .enumerate()
                .take(max_u + 1)
                .map(|(k, p)| vec![k.to_string(), f(*p)])
                .collect();
            let shortfall = (!ld.converged).then(|| {
                format!(
                    "ladder iteration stopped with truncation error {} after {} steps",
                    ld.truncation_error, ld.iterations
                )
            });
            Ok(Outcome {
                report: Report::rows("ladders", vec!["k", "prob"], rows, &ld),
                shortfall,
            })
        }
        Command::Renewal { kind, max_u } => {
            let vertical = s.sd.vertical_marginal();
            let opts = LadderOptions {
                tol: LADDER_TOL,
                ..LadderOptions::default()
            };
            let table = match kind {
                RenewalKind::V => renewal_v(
                    &quadwalk::ladder::descending_ladder_with(&vertical, BoundaryConvention::KillOnNonpositive, &opts)?,
                    *max_u,
                )?,
                RenewalKind::H => renewal_h(&quadwalk::ladder::ascending_ladder_with(&vertical, &opts)?, *max_u)?,
            };
            let mut buf = Vec::new();
            quadwalk::io::write_renewal_csv(&table, &mut buf)?;
            Ok(Report::csv("renewal", buf, &table).into())
        }
        Command::HarmonicW { x, grid, tol, n_max } => {
            let cw = s.walk()?;
            let opts = WOptions {
                n_max: *n_max,
                tol: *tol,
                ..WOptions::default()
            };
            let points: Vec<(i64, i64)> = match (x, grid) {
                (_, Some((a, b))) => (1..=*a).flat_map(|i| (1..=*b).map(move |j| (i, j))).collect(),
                (Some(x), None) => vec![*x],
                (None, None) => vec![(1, 1)],
            };
            let w = WGrid::new(&cw, opts);
            with_threads(s.threads, || w.fill(&points))?;
            let snap = w.snapshot();
            let open = snap.values().filter(|e| !e.converged).count();
            let mut buf = Vec::new();
            w.write_csv(&mut buf)?;
            let json: Vec<_> = snap
                .iter()
                .map(|(&(x1, x2), e)| {
                    json!({
                        "x": [x1, x2],
                        "lower": e.lower,
                        "value": e.value,
                        "upper": e.upper,
                        "n_used": e.n_used,
                        "converged": e.converged,
                    })
                })
                .collect();
            Ok(Outcome {
                report: Report::csv("harmonic-w", buf, json),
                shortfall: (open > 0).then(|| format!("{open} bracket(s) wider than {tol}")),
            })
        }
        Command::Dp { op } => dp(s, op),
        Command::Mc {
            op: McOp::Survive { start, reps, seed },
        } => {
            let seed = seed.unwrap_or(s.seed);
            let e = simulate_survival(&s.sd, start.x, start.n, *reps, seed, s.spec(), s.threads)?;
            Ok(Report::rows(
                "mc survive",
                vec!["n", "mean", "half_width_95", "reps", "seed"],
                vec![vec![
                    start.n.to_string(),
                    f(e.mean),
                    f(e.half_width_95),
                    e.reps.to_string(),
                    e.seed.to_string(),
                ]],
                e,
            )
            .into())
        }
        Command::Verify {
            theorem,
            x,
            n_schedule,
            refined,
            mc_reps,
            seed,
            prune,
        } => {
            let cw = s.walk()?;
            let mut opts = VerifyOptions {
                refined: *refined,
                ..VerifyOptions::default()
            };
            opts.dp = DpOptions {
                barrier: s.barrier.to_barrier(),
                prune: *prune,
            };
            if let Some(reps) = mc_reps {
                opts.monte_carlo = Some(McOptions {
                    reps: *reps,
                    seed: seed.unwrap_or(s.seed),
                    threads: s.threads,
                });
            }
            let rows = with_threads(s.threads, || verify(*theorem, &cw, *x, &n_schedule.0, &opts))?;
            let mut buf = Vec::new();
            quadwalk::verify::write_csv(&rows, &mut buf)?;
            let open = rows.iter().any(|r| r.note.contains("w-bracket-open"));
            Ok(Outcome {
                report: Report::csv("verify", buf, &rows),
                shortfall: open.then(|| "harmonic function bracket did not reach its tolerance".to_string()),
            })
        }
    }
}

fn model(s: &Settings, what: ModelWhat) -> quadwalk::Result<Outcome> {
    Ok(match what {
        ModelWhat::Moments => {
            let m = compute_moments(&s.sd);
            let rows = vec![
                vec!["mu1".into(), f(m.mu[0])],
                vec!["mu2".into(), f(m.mu[1])],
                vec!["sigma11".into(), f(m.sigma[0][0])],
                vec!["sigma12".into(), f(m.sigma[0][1])],
                vec!["sigma22".into(), f(m.sigma[1][1])],
                vec!["det".into(), f(m.det())],
            ];
            Report::rows("model moments", vec!["quantity", "value"], rows, m).into()
        }
        ModelWhat::Lattice => {
            let ls = lattice_decompose(&s.sd)?;
            let rows = vec![vec![
                ls.a1.to_string(),
                ls.d1.to_string(),
                ls.a2.to_string(),
                ls.d2.to_string(),
            ]];
            Report::rows("model lattice", vec!["a1", "d1", "a2", "d2"], rows, ls).into()
        }
    })
}

fn dp(s: &Settings, op: &DpOp) -> quadwalk::Result<Outcome> {
    let support = s.sd.steps();
    Ok(match op {
        DpOp::Survive { start, snapshot } => {
            let mut m = float_measure(&s.sd, start.x, s.spec(), &s.dp())?;
            with_threads(s.threads, || m.advance(start.n));
            let value = m.total_alive();
            let bound = survival_error_bound(&s.sd, &m);
            if let Some(path) = snapshot {
                let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                m.write_csv(std::io::BufWriter::new(file))?;
            }
            Report::rows(
                "dp survive",
                vec!["n", "value", "error_bound"],
                vec![vec![start.n.to_string(), f(value), f(bound)]],
                json!({ "n": start.n, "value": value, "error_bound": bound }),
            )
            .into()
        }
        DpOp::Local { start, y } => {
            let b = with_threads(s.threads, || local_prob(&s.sd, start.x, *y, start.n, s.spec(), &s.dp()))?;
            Report::rows(
                "dp local",
                vec!["n", "y1", "y2", "value", "error_bound"],
                vec![vec![start.n.to_string(), y.0.to_string(), y.1.to_string(), f(b.value), f(b.error_bound)]],
                json!({ "n": start.n, "y": [y.0, y.1], "value": b.value, "error_bound": b.error_bound }),
            )
            .into()
        }
        DpOp::Count { start, y } => {
            let c = with_threads(s.threads, || count_paths(&support, start.x, *y, start.n, s.convention))?;
            Report::rows(
                "dp count",
                vec!["count"],
                vec![vec![c.to_string()]],
                json!({ "n": start.n, "y": [y.0, y.1], "count": c.to_string() }),
            )
            .into()
        }
        DpOp::Line { start } => {
            let c = with_threads(s.threads, || count_line(&support, start.x, start.n, s.convention))?;
            Report::rows(
                "dp line",
                vec!["count"],
                vec![vec![c.to_string()]],
                json!({ "n": start.n, "count": c.to_string() }),
            )
            .into()
        }
    })
}

/// Runs `op` on a pool with `threads` workers.
fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = settings(&cli).and_then(|s| run(&cli, &s).map(|o| (o, s.format)));
    match result {
        Ok((outcome, format)) => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            if let Err(e) = outcome.report.write(format, &mut lock).and_then(|_| lock.flush()) {
                if e.kind() == std::io::ErrorKind::BrokenPipe {
                    return ExitCode::SUCCESS;
                }
                eprintln!("error: writing output: {e}");
                return ExitCode::from(EXIT_INPUT);
            }
            match outcome.shortfall {
                Some(msg) => {
                    eprintln!("warning: {msg}");
                    ExitCode::from(EXIT_NUMERIC)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Input => EXIT_INPUT,
                ErrorKind::Numeric => EXIT_NUMERIC,
            })
        }
    }
}
