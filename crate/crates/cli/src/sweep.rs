//! Rate-energy sweeps and their CSV form.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use swipt_core::analytic::{
    et_analysis, et_solution, nsnr_analysis, rr_analysis, AllowedOrderSet, EtSolution,
};
use swipt_core::channel::Scenario;
use swipt_core::sim::{run, SchedulerPolicy, SimConfig, SimResult};
use swipt_core::Error;

use crate::config::emit_config;
use crate::error::{CliError, CliResult};

pub const CSV_HEADER: [&str; 12] = [
    "scheme",
    "param",
    "user",
    "omega",
    "k_factor",
    "capacity_bps_hz",
    "harvest_w",
    "sched_prob",
    "cap_stderr",
    "harv_stderr",
    "feasible",
    "notes",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Rr,
    Nsnr,
    Et,
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rr" => Ok(Scheme::Rr),
            "nsnr" => Ok(Scheme::Nsnr),
            "et" => Ok(Scheme::Et),
            other => Err(format!(
                "unknown scheme `{other}` (expected rr, nsnr or et)"
            )),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Rr => "rr",
            Scheme::Nsnr => "nsnr",
            Scheme::Et => "et",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analytic,
    Simulate,
    Both,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytic" => Ok(Mode::Analytic),
            "simulate" => Ok(Mode::Simulate),
            "both" => Ok(Mode::Both),
            other => Err(format!(
                "unknown mode `{other}` (expected analytic, simulate or both)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Analytic => "analytic",
            Mode::Simulate => "simulate",
            Mode::Both => "both",
        })
    }
}

/// One scheduler configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    RoundRobin,
    Nsnr(usize),
    Et(AllowedOrderSet),
}

impl Point {
    pub fn scheme(&self) -> Scheme {
        match self {
            Point::RoundRobin => Scheme::Rr,
            Point::Nsnr(_) => Scheme::Nsnr,
            Point::Et(_) => Scheme::Et,
        }
    }

    /// Value of the CSV `param` column.
    pub fn param(&self) -> String {
        match self {
            Point::RoundRobin => String::new(),
            Point::Nsnr(j) => j.to_string(),
            Point::Et(set) => set.to_string(),
        }
    }

    pub fn policy(&self) -> SchedulerPolicy {
        match self {
            Point::RoundRobin => SchedulerPolicy::RoundRobin,
            Point::Nsnr(j) => SchedulerPolicy::OrderNsnr { order_j: *j },
            Point::Et(set) => SchedulerPolicy::order_et(set.clone()),
        }
    }

    fn base_row(&self, scenario: &Scenario, user: usize) -> Row {
        Row {
            scheme: self.scheme(),
            param: self.param(),
            user: user + 1,
            omega: scenario.users[user].omega,
            k_factor: scenario.users[user].k_factor,
            capacity: None,
            harvest: None,
            sched_prob: None,
            cap_stderr: None,
            harv_stderr: None,
            feasible: true,
            notes: String::new(),
        }
    }

    /// Analytic rows, one per user. An infeasible ET set yields rows with
    /// empty numeric fields and the violations in `notes`.
    pub fn analytic_rows(&self, scenario: &Scenario) -> CliResult<Vec<Row>> {
        let analysis = match self {
            Point::RoundRobin => rr_analysis(scenario)?,
            Point::Nsnr(j) => nsnr_analysis(scenario, *j)?,
            Point::Et(set) => match et_analysis(scenario, set) {
                Ok(a) => a.analysis,
                Err(Error::Infeasible(sol)) => {
                    let note = format!("analytic; {}", violation_summary(&sol));
                    return Ok((0..scenario.n_users())
                        .map(|n| Row {
                            feasible: false,
                            notes: note.clone(),
                            ..self.base_row(scenario, n)
                        })
                        .collect());
                }
                Err(e) => return Err(e.into()),
            },
        };
        Ok((0..scenario.n_users())
            .map(|n| Row {
                capacity: Some(analysis.per_user_capacity[n]),
                harvest: Some(analysis.per_user_harvest[n]),
                sched_prob: Some(analysis.per_user_sched_prob[n]),
                notes: "analytic".into(),
                ..self.base_row(scenario, n)
            })
            .collect())
    }

    /// Monte Carlo rows, one per user. ET rows carry the analytic verdict.
    pub fn simulated_rows(&self, scenario: &Scenario, sim: &SimConfig) -> CliResult<Vec<Row>> {
        let result = run(scenario, &self.policy(), sim)?;
        self.rows_from_result(scenario, &result)
    }

    /// Rows for an existing simulation result of this point's scheme.
    pub fn rows_from_result(&self, scenario: &Scenario, result: &SimResult) -> CliResult<Vec<Row>> {
        let (feasible, note) = match self {
            Point::Et(set) => {
                let sol = et_solution(scenario, set)?;
                if sol.feasible {
                    (true, "simulated".to_string())
                } else {
                    (false, format!("simulated; {}", violation_summary(&sol)))
                }
            }
            _ => (true, "simulated".to_string()),
        };
        Ok((0..scenario.n_users())
            .map(|n| Row {
                capacity: Some(result.per_user_capacity_mean[n]),
                harvest: Some(result.per_user_harvest_mean[n]),
                sched_prob: Some(result.per_user_schedule_frequency[n]),
                cap_stderr: Some(result.per_user_capacity_stderr[n]),
                harv_stderr: Some(result.per_user_harvest_stderr[n]),
                feasible,
                notes: note.clone(),
                ..self.base_row(scenario, n)
            })
            .collect())
    }
}

/// Short description of the violated conditions, users 1-based.
pub fn violation_summary(sol: &EtSolution) -> String {
    let parts: Vec<String> = sol
        .violations
        .iter()
        .map(|v| {
            let users: Vec<String> = v.users.iter().map(|u| (u + 1).to_string()).collect();
            format!(
                "{} L={} users {{{}}} {:.6} > {:.6}",
                v.condition.label(),
                v.subset_size,
                users.join(" "),
                v.lhs,
                v.rhs
            )
        })
        .collect();
    format!("infeasible: {}", parts.join("; "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub schemes: Vec<Scheme>,
    pub nsnr_orders: Vec<usize>,
    pub et_sets: Vec<AllowedOrderSet>,
    pub mode: Mode,
    pub sim: SimConfig,
}

impl SweepSpec {
    pub fn validate(&self, n_users: usize) -> CliResult<()> {
        if self.schemes.is_empty() {
            return Err(CliError::Invalid("sweep needs at least one scheme".into()));
        }
        if self.schemes.contains(&Scheme::Nsnr) {
            if self.nsnr_orders.is_empty() {
                return Err(CliError::Invalid(
                    "nsnr sweep needs at least one order".into(),
                ));
            }
            if let Some(j) = self
                .nsnr_orders
                .iter()
                .find(|j| !(1..=n_users).contains(*j))
            {
                return Err(CliError::Invalid(format!(
                    "order {j} is not in 1..={n_users}"
                )));
            }
        }
        if self.schemes.contains(&Scheme::Et) {
            if self.et_sets.is_empty() {
                return Err(CliError::Invalid(
                    "et sweep needs at least one allowed set".into(),
                ));
            }
            for set in &self.et_sets {
                set.validate_for(n_users)
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
            }
        }
        if self.mode != Mode::Analytic {
            self.sim
                .validate()
                .map_err(|e| CliError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Sweep points in output order.
    pub fn points(&self) -> Vec<Point> {
        let mut points = Vec::new();
        for scheme in &self.schemes {
            match scheme {
                Scheme::Rr => points.push(Point::RoundRobin),
                Scheme::Nsnr => points.extend(self.nsnr_orders.iter().map(|&j| Point::Nsnr(j))),
                Scheme::Et => points.extend(self.et_sets.iter().cloned().map(Point::Et)),
            }
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scheme: Scheme,
    pub param: String,
    /// 1-based.
    pub user: usize,
    pub omega: f64,
    pub k_factor: f64,
    pub capacity: Option<f64>,
    pub harvest: Option<f64>,
    pub sched_prob: Option<f64>,
    pub cap_stderr: Option<f64>,
    pub harv_stderr: Option<f64>,
    pub feasible: bool,
    pub notes: String,
}

/// Nine significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

impl Row {
    pub fn fields(&self) -> [String; 12] {
        [
            self.scheme.to_string(),
            self.param.clone(),
            self.user.to_string(),
            fmt_num(self.omega),
            fmt_num(self.k_factor),
            fmt_opt(self.capacity),
            fmt_opt(self.harvest),
            fmt_opt(self.sched_prob),
            fmt_opt(self.cap_stderr),
            fmt_opt(self.harv_stderr),
            self.feasible.to_string(),
            self.notes.clone(),
        ]
    }
}

/// Evaluates every point on a pool of `jobs` workers (default: all cores).
/// Rows come back in point order whatever the completion order.
pub fn run_sweep(
    scenario: &Scenario,
    spec: &SweepSpec,
    jobs: Option<usize>,
) -> CliResult<Vec<Row>> {
    scenario.validate()?;
    spec.validate(scenario.n_users())?;
    let points = spec.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start worker pool: {e}")))?;
    let chunks: Vec<CliResult<Vec<Row>>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let mut rows = Vec::new();
                if spec.mode != Mode::Simulate {
                    rows.extend(p.analytic_rows(scenario)?);
                }
                if spec.mode != Mode::Analytic {
                    rows.extend(p.simulated_rows(scenario, &spec.sim)?);
                }
                Ok(rows)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for chunk in chunks {
        rows.extend(chunk?);
    }
    Ok(rows)
}

/// Comment lines naming the tool version and the resolved scenario.
pub fn provenance(scenario: &Scenario, extra: &[String]) -> Vec<String> {
    let mut lines = vec![format!(
        "{} {}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    )];
    lines.extend(
        emit_config(scenario)
            .lines()
            .filter(|l| !l.is_empty())
            .map(String::from),
    );
    lines.extend(extra.iter().cloned());
    lines
}

/// Writes `# `-prefixed comments, the header and the rows. LF line endings.
pub fn write_csv<W: Write>(out: W, comments: &[String], rows: &[Row]) -> CliResult<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| CliError::io("csv output", e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(|e| CliError::io("csv output", e))?;
    Ok(())
}

/// Renders the CSV into a string.
pub fn csv_string(comments: &[String], rows: &[Row]) -> CliResult<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, comments, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}
