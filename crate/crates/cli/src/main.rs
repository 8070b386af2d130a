use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use swipt_cli::config::{parse_config, resolve_config_path, CONFIG_DIR_ENV};
use swipt_cli::linkbudget::LinkBudget;
use swipt_cli::report::{compare, feasibility_report};
use swipt_cli::sweep::{provenance, run_sweep, write_csv, Mode, Point, Row, Scheme, SweepSpec};
use swipt_cli::{CliError, CliResult};
use swipt_core::analytic::AllowedOrderSet;
use swipt_core::channel::Scenario;
use swipt_core::sim::{run, BetaSchedule, SchedulerPolicy, SimConfig};

#[derive(Parser)]
#[command(
    name = "swipt",
    version,
    about = "Rate-energy analysis and simulation of multi-user SWIPT schedulers"
)]
struct Cli {
    /// Scenario file. Relative paths that do not exist are looked up in the
    /// config directory; without this flag `scenario.toml` there is used.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Directory holding scenario files.
    #[arg(long, global = true, env = CONFIG_DIR_ENV)]
    config_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic per-user capacity, harvest and scheduling probability.
    Analyze {
        #[command(flatten)]
        policy: PolicyArgs,
        /// CSV output path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo simulation of one policy.
    Simulate {
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Constant ET smoothing factor in (0, 1) instead of 1/t.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate-energy sweep over schemes, orders and allowed sets.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "rr,nsnr,et")]
        schemes: Vec<Scheme>,
        /// N-SNR orders, e.g. `1-7` or `1,4,7` (default: all).
        #[arg(long)]
        orders: Option<AllowedOrderSet>,
        /// ET allowed sets separated by `;`, e.g. `1-2;3-4;6-7`.
        #[arg(long, value_delimiter = ';', default_value = "1-2;3-4;6-7")]
        sets: Vec<AllowedOrderSet>,
        #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
        mode: ModeArg,
        #[command(flatten)]
        sim: SimArgs,
        /// Worker threads (default: machine parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equal-throughput probabilities and feasibility of an allowed set.
    /// Exits with status 2 when infeasible.
    Feasibility {
        /// Allowed orders, e.g. `3,4` or `1-2`.
        #[arg(long)]
        allowed: AllowedOrderSet,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Simulated vs analytic values with z-scores; |z| > 4 is flagged.
    Compare {
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        json: bool,
    },
    /// Mean channel power gain from a log-distance path loss model.
    ///
    /// Omega = 10^(-(PL(1 m) + 10 n log10(d) - G_tx - G_rx) / 10). PL(1 m)
    /// defaults to the free-space loss at the given frequency.
    ///
    /// Antenna gains default to 0 dBi, so the result is the bare channel gain.
    /// Whether a published mean gain already includes the transmit and receive
    /// antenna gains is not always stated; with 0 dBi gains, 915 MHz and
    /// exponent 2.76, distances 2.27 m to 4.6 m give omega of about 7e-5 down
    /// to 1e-5. Pass the gains explicitly if the omega values you want to
    /// reproduce are meant to include them.
    #[command(verbatim_doc_comment)]
    Linkbudget {
        #[arg(long, default_value_t = 915e6)]
        frequency_hz: f64,
        /// One or more distances in metres.
        #[arg(long = "distance", required = true, num_args = 1..)]
        distances: Vec<f64>,
        #[arg(long, default_value_t = 2.76)]
        exponent: f64,
        /// Path loss at 1 m in dB (default: free space).
        #[arg(long)]
        ref_loss_db: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        tx_gain_dbi: f64,
        #[arg(long, default_value_t = 0.0)]
        rx_gain_dbi: f64,
    },
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, default_value = "rr")]
    scheme: Scheme,
    /// N-SNR order j (1 = weakest, N = strongest).
    #[arg(long)]
    order: Option<usize>,
    /// ET allowed orders, e.g. `1-2` or `1,3,5`.
    #[arg(long)]
    allowed: Option<AllowedOrderSet>,
}

impl PolicyArgs {
    fn point(&self) -> CliResult<Point> {
        match self.scheme {
            Scheme::Rr => Ok(Point::RoundRobin),
            Scheme::Nsnr => self
                .order
                .map(Point::Nsnr)
                .ok_or_else(|| CliError::Invalid("--scheme nsnr needs --order".into())),
            Scheme::Et => self
                .allowed
                .clone()
                .map(Point::Et)
                .ok_or_else(|| CliError::Invalid("--scheme et needs --allowed".into())),
        }
    }
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Leading ET slots excluded from the averages (default: 1% of slots).
    #[arg(long)]
    warmup: Option<u64>,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        let mut c = SimConfig::new(self.slots, self.seed);
        if let Some(w) = self.warmup {
            c.warmup_slots = w;
        }
        c
    }

    fn describe(&self) -> String {
        let c = self.config();
        format!(
            "slots = {}, seed = {}, warmup = {}",
            c.n_slots, c.seed, c.warmup_slots
        )
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Simulate,
    Both,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Analytic => Mode::Analytic,
            ModeArg::Simulate => Mode::Simulate,
            ModeArg::Both => Mode::Both,
        }
    }
}

fn load_scenario(cli: &Cli) -> CliResult<Scenario> {
    let path = resolve_config_path(cli.config.as_deref(), cli.config_dir.as_deref());
    log::info!("scenario file {}", path.display());
    Ok(parse_config(&path)?)
}

fn emit_csv(out: Option<&PathBuf>, comments: &[String], rows: &[Row]) -> CliResult<()> {
    match out {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
            write_csv(BufWriter::new(f), comments, rows)
        }
        None => write_csv(std::io::stdout().lock(), comments, rows),
    }
}

fn print(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io("stdout", e))
}

fn execute(cli: &Cli) -> CliResult<ExitCode> {
    match &cli.command {
        Command::Linkbudget {
            frequency_hz,
            distances,
            exponent,
            ref_loss_db,
            tx_gain_dbi,
            rx_gain_dbi,
        } => {
            let lb = LinkBudget {
                frequency_hz: *frequency_hz,
                path_loss_exponent: *exponent,
                ref_loss_db_at_1m: *ref_loss_db,
                tx_antenna_gain_dbi: *tx_gain_dbi,
                rx_antenna_gain_dbi: *rx_gain_dbi,
            };
            let mut text = format!(
                "# {} {}\n# frequency_hz = {frequency_hz}, exponent = {exponent}, ref_loss_db = {:.4} ({}), gains = {tx_gain_dbi} / {rx_gain_dbi} dBi\ndistance_m,net_loss_db,omega\n",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION"),
                lb.ref_loss_db(),
                if ref_loss_db.is_some() { "given" } else { "free space" },
            );
            for &d in distances {
                text.push_str(&format!(
                    "{d},{:.4},{:.8e}\n",
                    lb.net_loss_db(d)?,
                    lb.omega(d)?
                ));
            }
            print(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { policy, out } => {
            let scenario = load_scenario(cli)?;
            let point = policy.point()?;
            let rows = point.analytic_rows(&scenario)?;
            let infeasible = rows.iter().any(|r| !r.feasible);
            emit_csv(
                out.as_ref(),
                &provenance(&scenario, &[format!("analyze: {}", point.policy().kind())]),
                &rows,
            )?;
            Ok(if infeasible {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Simulate {
            policy,
            sim,
            beta,
            out,
        } => {
            let scenario = load_scenario(cli)?;
            let point = policy.point()?;
            let mut pol = point.policy();
            if let (Some(b), SchedulerPolicy::OrderEt { beta: slot, .. }) = (beta, &mut pol) {
                *slot = BetaSchedule::Constant(*b);
            }
            let result = run(&scenario, &pol, &sim.config())?;
            let rows = point.rows_from_result(&scenario, &result)?;
            let mut extra = vec![format!("simulate: {}, {}", pol.kind(), sim.describe())];
            if let Some(b) = beta {
                extra.push(format!("beta = {b}"));
            }
            emit_csv(out.as_ref(), &provenance(&scenario, &extra), &rows)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            schemes,
            orders,
            sets,
            mode,
            sim,
            jobs,
            out,
        } => {
            let scenario = load_scenario(cli)?;
            let n = scenario.n_users();
            let spec = SweepSpec {
                schemes: schemes.clone(),
                nsnr_orders: match orders {
                    Some(o) => o.orders().to_vec(),
                    None => (1..=n).collect(),
                },
                et_sets: sets.clone(),
                mode: (*mode).into(),
                sim: sim.config(),
            };
            let rows = run_sweep(&scenario, &spec, *jobs)?;
            let sets: Vec<String> = spec.et_sets.iter().map(|s| s.to_string()).collect();
            let extra = vec![format!(
                "sweep: schemes = {}, orders = {:?}, sets = {}, mode = {}, {}",
                spec.schemes
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
                spec.nsnr_orders,
                sets.join(" "),
                spec.mode,
                sim.describe()
            )];
            emit_csv(out.as_ref(), &provenance(&scenario, &extra), &rows)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Feasibility { allowed, json } => {
            let scenario = load_scenario(cli)?;
            let report = feasibility_report(&scenario, allowed)?;
            if *json {
                print(&(report.to_json() + "\n"))?;
            } else {
                print(&report.to_text())?;
            }
            Ok(if report.feasible {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Compare { policy, sim, json } => {
            let scenario = load_scenario(cli)?;
            let report = compare(&scenario, &policy.point()?, &sim.config())?;
            let flagged = report.flagged().count();
            if flagged > 0 {
                log::warn!("{flagged} comparison line(s) with |z| > 4");
            }
            if *json {
                print(&(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
            } else {
                print(&report.to_text())?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
