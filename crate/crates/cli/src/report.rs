//! Feasibility and simulation-vs-analytics reports.

use std::fmt::Write as _;

use serde::Serialize;
use swipt_core::analytic::{et_analysis, nsnr_analysis, rr_analysis, AllowedOrderSet, EtSolution};
use swipt_core::channel::Scenario;
use swipt_core::sim::{run, SimConfig};
use swipt_core::Error;

use crate::error::CliResult;
use crate::sweep::Point;

/// |z| above which a comparison line is flagged.
pub const Z_FLAG: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub condition: &'static str,
    /// Subset size `L`.
    pub subset_size: usize,
    /// 1-based user indices.
    pub users: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub n_users: usize,
    pub allowed: String,
    pub probabilities: Vec<f64>,
    pub equal_throughput_r: f64,
    pub feasible: bool,
    pub violations: Vec<ViolationReport>,
}

impl FeasibilityReport {
    pub fn from_solution(n_users: usize, sol: &EtSolution) -> Self {
        Self {
            n_users,
            allowed: sol.allowed.to_string(),
            probabilities: sol.probabilities.clone(),
            equal_throughput_r: sol.equal_throughput_r,
            feasible: sol.feasible,
            violations: sol
                .violations
                .iter()
                .map(|v| ViolationReport {
                    condition: v.condition.label(),
                    subset_size: v.subset_size,
                    users: v.users.iter().map(|u| u + 1).collect(),
                    lhs: v.lhs,
                    rhs: v.rhs,
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "allowed orders: {}  (N = {})",
            self.allowed, self.n_users
        );
        let _ = writeln!(
            s,
            "equal throughput r = {:.6} bit/s/Hz",
            self.equal_throughput_r
        );
        for (n, p) in self.probabilities.iter().enumerate() {
            let _ = writeln!(s, "  p_{} = {:.6}", n + 1, p);
        }
        let _ = writeln!(
            s,
            "verdict: {}",
            if self.feasible {
                "feasible"
            } else {
                "INFEASIBLE"
            }
        );
        for v in &self.violations {
            let users: Vec<String> = v.users.iter().map(|u| u.to_string()).collect();
            let _ = writeln!(
                s,
                "  violated {} condition, L = {}, users {{{}}}: {:.6} > {:.6}",
                v.condition,
                v.subset_size,
                users.join(","),
                v.lhs,
                v.rhs
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Solves the ET probabilities and checks feasibility.
pub fn feasibility_report(
    scenario: &Scenario,
    allowed: &AllowedOrderSet,
) -> CliResult<FeasibilityReport> {
    let sol = swipt_core::analytic::et_solution(scenario, allowed)?;
    Ok(FeasibilityReport::from_solution(scenario.n_users(), &sol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareLine {
    /// 1-based.
    pub user: usize,
    pub quantity: &'static str,
    pub analytic: Option<f64>,
    pub simulated: f64,
    pub stderr: f64,
    pub z: Option<f64>,
}

impl CompareLine {
    pub fn flagged(&self) -> bool {
        self.z.is_some_and(|z| z.abs() > Z_FLAG)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub policy: String,
    pub slots: u64,
    pub seed: u64,
    /// `None` unless the policy is ET.
    pub feasibility: Option<FeasibilityReport>,
    pub lines: Vec<CompareLine>,
}

impl CompareReport {
    pub fn flagged(&self) -> impl Iterator<Item = &CompareLine> {
        self.lines.iter().filter(|l| l.flagged())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "policy {}  slots {}  seed {}",
            self.policy, self.slots, self.seed
        );
        if let Some(f) = &self.feasibility {
            if !f.feasible {
                let _ = writeln!(s, "analytic side infeasible; simulated values only");
                s.push_str(&f.to_text());
            }
        }
        let _ = writeln!(
            s,
            "{:>4}  {:<10} {:>15} {:>15} {:>12} {:>8}",
            "user", "quantity", "analytic", "simulated", "stderr", "z"
        );
        for l in &self.lines {
            let a = l
                .analytic
                .map(|v| format!("{v:.8e}"))
                .unwrap_or_else(|| "-".into());
            let z = l.z.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:>4}  {:<10} {:>15} {:>15.8e} {:>12.4e} {:>8}{}",
                l.user,
                l.quantity,
                a,
                l.simulated,
                l.stderr,
                z,
                if l.flagged() { "  <-- |z| > 4" } else { "" }
            );
        }
        s
    }
}

fn z_score(sim: f64, analytic: f64, stderr: f64) -> f64 {
    let d = sim - analytic;
    if stderr > 0.0 {
        d / stderr
    } else if d == 0.0 {
        0.0
    } else {
        d.signum() * f64::INFINITY
    }
}

/// Runs the simulation and the analytic path for one policy.
pub fn compare(scenario: &Scenario, point: &Point, sim: &SimConfig) -> CliResult<CompareReport> {
    let result = run(scenario, &point.policy(), sim)?;
    let (analysis, feasibility) = match point {
        Point::RoundRobin => (Some(rr_analysis(scenario)?), None),
        Point::Nsnr(j) => (Some(nsnr_analysis(scenario, *j)?), None),
        Point::Et(set) => match et_analysis(scenario, set) {
            Ok(a) => {
                let f = FeasibilityReport::from_solution(scenario.n_users(), &a.solution);
                (Some(a.analysis), Some(f))
            }
            Err(Error::Infeasible(sol)) => (
                None,
                Some(FeasibilityReport::from_solution(scenario.n_users(), &sol)),
            ),
            Err(e) => return Err(e.into()),
        },
    };
    let m = result.measured_slots as f64;
    let mut lines = Vec::new();
    for n in 0..scenario.n_users() {
        let freq = result.per_user_schedule_frequency[n];
        // RR rotates deterministically and is off from 1/N only by the
        // incomplete last rotation; other policies are Bernoulli per slot.
        let freq_se = if matches!(point, Point::RoundRobin) {
            1.0 / m
        } else {
            (freq * (1.0 - freq) / m).sqrt()
        };
        let entries = [
            (
                "capacity",
                analysis.as_ref().map(|a| a.per_user_capacity[n]),
                result.per_user_capacity_mean[n],
                result.per_user_capacity_stderr[n],
            ),
            (
                "harvest",
                analysis.as_ref().map(|a| a.per_user_harvest[n]),
                result.per_user_harvest_mean[n],
                result.per_user_harvest_stderr[n],
            ),
            (
                "sched_prob",
                analysis.as_ref().map(|a| a.per_user_sched_prob[n]),
                freq,
                freq_se,
            ),
        ];
        for (quantity, analytic, simulated, stderr) in entries {
            lines.push(CompareLine {
                user: n + 1,
                quantity,
                analytic,
                simulated,
                stderr,
                z: analytic.map(|a| z_score(simulated, a, stderr)),
            });
        }
    }
    Ok(CompareReport {
        policy: point.policy().kind().to_string(),
        slots: sim.n_slots,
        seed: sim.seed,
        feasibility,
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_scores() {
        assert_eq!(z_score(1.0, 1.0, 0.0), 0.0);
        assert_eq!(z_score(2.0, 1.0, 0.5), 2.0);
        assert!(z_score(2.0, 1.0, 0.0).is_infinite());
    }
}
