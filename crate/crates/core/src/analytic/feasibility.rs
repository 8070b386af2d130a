//! Equal-throughput feasibility of the order-based ET scheduler.
//!
//! A probability vector `p` (one entry per user, summing to one) can be
//! realized by scheduling among the users whose N-SNR order lies in an allowed
//! set of size `s` iff
//!
//! 1. `p_n <= s / N` for every user `n`, and
//! 2. for every `L` in `s..=N` and every `L`-subset `K` of users,
//!    `sum_{k in K} p_k <= [C(N-1, s-1) L + C(L, s) (1 - s)] / C(N, s)`.
//!
//! **Prefix lemma.** The right-hand side of (2) depends on `L` only. For a fixed
//! `L` the subset with the largest left-hand side is therefore the one holding
//! the `L` largest probabilities, and (2) holds for every `L`-subset iff it
//! holds for that one. [`et_feasibility`] sorts `p` once and checks the
//! descending prefixes, which costs `O(N log N)` instead of `O(2^N)`.
//! [`et_feasibility_exhaustive`] enumerates every subset and is the test
//! oracle for the lemma.

use crate::error::{domain, Error, Result};
use crate::orderstats::binomial;

/// Slack allowed on each inequality to absorb rounding in `p`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-12;

/// Largest N accepted by the exhaustive checker.
pub const EXHAUSTIVE_MAX_USERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionId {
    /// `p_n <= |S_a| / N`.
    PerUserCap,
    /// The subset-sum bound for subsets of size `L`.
    SubsetSum,
}

impl ConditionId {
    pub fn label(self) -> &'static str {
        match self {
            ConditionId::PerUserCap => "per-user",
            ConditionId::SubsetSum => "subset-sum",
        }
    }
}

/// One violated inequality with its witness.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: ConditionId,
    /// `L`, the number of users in the witness (1 for the per-user cap).
    pub subset_size: usize,
    /// 0-based user indices of the witness, ascending.
    pub users: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityVerdict {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            feasible: violations.is_empty(),
            violations,
        }
    }

    /// Smallest `L` whose subset-sum condition fails.
    pub fn min_violated_subset_size(&self) -> Option<usize> {
        self.violations
            .iter()
            .filter(|v| v.condition == ConditionId::SubsetSum)
            .map(|v| v.subset_size)
            .min()
    }

    pub fn per_user_cap_violated(&self) -> bool {
        self.violations
            .iter()
            .any(|v| v.condition == ConditionId::PerUserCap)
    }
}

/// Right-hand side of the subset-sum condition for subsets of size `l`.
pub fn subset_bound(n_users: usize, allowed_size: usize, l: usize) -> f64 {
    let s = allowed_size;
    (binomial(n_users - 1, s - 1) * l as f64 + binomial(l, s) * (1.0 - s as f64))
        / binomial(n_users, s)
}

fn validate(p: &[f64], allowed_size: usize, n_users: usize) -> Result<()> {
    if n_users == 0 || p.len() != n_users {
        return Err(domain(format!(
            "expected {n_users} probabilities, got {}",
            p.len()
        )));
    }
    if allowed_size == 0 || allowed_size > n_users {
        return Err(domain(format!(
            "allowed-set size {allowed_size} is not in 1..={n_users}"
        )));
    }
    if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(domain("probabilities must be finite and nonnegative"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(domain(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

fn per_user_violations(p: &[f64], allowed_size: usize, n_users: usize) -> Vec<Violation> {
    let cap = allowed_size as f64 / n_users as f64;
    p.iter()
        .enumerate()
        .filter(|(_, &pn)| pn > cap + FEASIBILITY_TOLERANCE)
        .map(|(n, &pn)| Violation {
            condition: ConditionId::PerUserCap,
            subset_size: 1,
            users: vec![n],
            lhs: pn,
            rhs: cap,
        })
        .collect()
}

/// Feasibility test using the descending-prefix lemma. Reports every violated
/// per-user cap and, for each violated `L`, the maximal-sum witness.
pub fn et_feasibility(
    p: &[f64],
    allowed_size: usize,
    n_users: usize,
) -> Result<FeasibilityVerdict> {
    validate(p, allowed_size, n_users)?;
    let mut violations = per_user_violations(p, allowed_size, n_users);

    let mut order: Vec<usize> = (0..n_users).collect();
    // Descending by probability, lower index first among equals.
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    let mut prefix = 0.0;
    for (i, &user) in order.iter().enumerate() {
        prefix += p[user];
        let l = i + 1;
        if l < allowed_size {
            continue;
        }
        let rhs = subset_bound(n_users, allowed_size, l);
        if prefix > rhs + FEASIBILITY_TOLERANCE {
            let mut users = order[..l].to_vec();
            users.sort_unstable();
            violations.push(Violation {
                condition: ConditionId::SubsetSum,
                subset_size: l,
                users,
                lhs: prefix,
                rhs,
            });
        }
    }
    Ok(FeasibilityVerdict::from_violations(violations))
}

/// Reference checker that enumerates all `C(N, L)` subsets for every `L`.
/// Every violating subset is reported.
pub fn et_feasibility_exhaustive(
    p: &[f64],
    allowed_size: usize,
    n_users: usize,
) -> Result<FeasibilityVerdict> {
    if n_users > EXHAUSTIVE_MAX_USERS {
        return Err(Error::Size(format!(
            "exhaustive feasibility is limited to N <= {EXHAUSTIVE_MAX_USERS}, got {n_users}"
        )));
    }
    validate(p, allowed_size, n_users)?;
    let mut violations = per_user_violations(p, allowed_size, n_users);
    for l in allowed_size..=n_users {
        let rhs = subset_bound(n_users, allowed_size, l);
        for_each_combination(n_users, l, |subset| {
            let lhs: f64 = subset.iter().map(|&k| p[k]).sum();
            if lhs > rhs + FEASIBILITY_TOLERANCE {
                violations.push(Violation {
                    condition: ConditionId::SubsetSum,
                    subset_size: l,
                    users: subset.to_vec(),
                    lhs,
                    rhs,
                });
            }
        });
    }
    Ok(FeasibilityVerdict::from_violations(violations))
}

/// Calls `visit` with every ascending `k`-combination of `0..n`, in
/// lexicographic order.
fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        // Rightmost position that can still advance.
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for t in i + 1..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_enumerated_once() {
        let mut seen = Vec::new();
        for_each_combination(5, 3, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen.first().unwrap(), &vec![0, 1, 2]);
        assert_eq!(seen.last().unwrap(), &vec![2, 3, 4]);
        let mut count = 0;
        for_each_combination(4, 0, |_| count += 1);
        assert_eq!(count, 1);
    }

    #[test]
    fn full_allowed_set_is_always_feasible() {
        let p = [0.7, 0.1, 0.1, 0.05, 0.05];
        let v = et_feasibility(&p, 5, 5).unwrap();
        assert!(v.feasible);
    }

    #[test]
    fn last_subset_condition_is_sum_to_one() {
        for n in 1..8 {
            for s in 1..=n {
                assert!((subset_bound(n, s, n) - 1.0).abs() < 1e-12, "n={n} s={s}");
            }
        }
    }

    #[test]
    fn single_user_is_feasible() {
        assert!(et_feasibility(&[1.0], 1, 1).unwrap().feasible);
        assert!(et_feasibility_exhaustive(&[1.0], 1, 1).unwrap().feasible);
    }

    #[test]
    fn four_user_bound_at_l_two() {
        // N = 4, |S_a| = 2: L = 2 bound is (3*2 - 1) / 6.
        assert!((subset_bound(4, 2, 2) - 5.0 / 6.0).abs() < 1e-15);
        let infeasible = [0.06, 0.06, 0.44, 0.44];
        let v = et_feasibility(&infeasible, 2, 4).unwrap();
        assert!(!v.feasible);
        assert_eq!(v.min_violated_subset_size(), Some(2));
        assert_eq!(v.violations[0].users, vec![2, 3]);
    }

    #[test]
    fn per_user_cap_is_reported() {
        let p = [0.8, 0.1, 0.1];
        let v = et_feasibility(&p, 1, 3).unwrap();
        assert!(v.per_user_cap_violated());
        let ex = et_feasibility_exhaustive(&p, 1, 3).unwrap();
        assert!(ex.per_user_cap_violated());
    }

    #[test]
    fn invalid_inputs() {
        assert!(et_feasibility(&[0.5, 0.6], 1, 2).is_err());
        assert!(et_feasibility(&[0.5, 0.5], 3, 2).is_err());
        assert!(et_feasibility(&[1.5, -0.5], 1, 2).is_err());
        assert!(et_feasibility(&[1.0], 1, 2).is_err());
        let big = vec![1.0 / 21.0; 21];
        assert!(matches!(
            et_feasibility_exhaustive(&big, 2, 21),
            Err(Error::Size(_))
        ));
    }
}
