//! Reference implementations used to check the diagrams and the solver.
//! Nothing here is fast; nothing here shares code with the diagram builders.

use serde::{Deserialize, Serialize};

use crate::diagram::{Assignment, DiagramSystem};
use crate::error::OracleError;
use crate::tree::Confidence;

/// Largest number of joint assignments [`brute_force_optimum`] will visit.
pub const ENUMERATION_GUARD: u128 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_assignment: Assignment,
    pub best_value: f64,
    pub evaluated_count: u64,
}

/// Direct edit-distance DP over `g` (intent) and `s` (annotated suggestion).
///
/// Matches earn 1 (SURE) or `alpha` (UNSURE), deletions of suggestion tokens
/// cost 1 or `beta`, insertions of intent tokens are free.
pub fn sequence_edit_utility<T: PartialEq>(
    g: &[T],
    s: &[(T, Confidence)],
    alpha: f64,
    beta: f64,
) -> f64 {
    let (m, n) = (g.len(), s.len());
    let mut t = vec![vec![f64::NEG_INFINITY; n + 1]; m + 1];
    t[0][0] = 0.0;
    for i in 0..=m {
        for j in 0..=n {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            if i > 0 {
                best = best.max(t[i - 1][j]);
            }
            if j > 0 {
                let cost = match s[j - 1].1 {
                    Confidence::Sure => 1.0,
                    Confidence::Unsure => beta,
                };
                best = best.max(t[i][j - 1] - cost);
            }
            if i > 0 && j > 0 && g[i - 1] == s[j - 1].0 {
                let gain = match s[j - 1].1 {
                    Confidence::Sure => 1.0,
                    Confidence::Unsure => alpha,
                };
                best = best.max(t[i - 1][j - 1] + gain);
            }
            t[i][j] = best;
        }
    }
    t[m][n]
}

/// Exhaustive search over every assignment of the system's variables.
///
/// Enumeration runs in lexicographic order with variable 0 most significant,
/// and a later assignment only replaces the incumbent when it is better by
/// more than the solver's tie tolerance, so among near-ties the earliest
/// assignment wins, which is the same preference the greedy rounding has.
pub fn brute_force_optimum(system: &DiagramSystem) -> Result<OracleResult, OracleError> {
    let domains = system.domains();
    let total: u128 = domains.iter().map(|&d| d as u128).product();
    if total > ENUMERATION_GUARD {
        return Err(OracleError::TooLarge(total));
    }
    let n = domains.len();
    let mut cur = vec![0u8; n];
    let mut best: Option<(Vec<u8>, f64)> = None;
    let mut count = 0u64;
    loop {
        count += 1;
        let v = system.value(&Assignment(cur.clone()));
        if v > f64::NEG_INFINITY {
            match &best {
                Some((_, b)) if v <= b + crate::solver::TIE_EPS => {}
                _ => best = Some((cur.clone(), v)),
            }
        }
        // odometer increment, last variable fastest
        let mut k = n;
        loop {
            if k == 0 {
                let (a, v) = best.unwrap_or((vec![0; n], f64::NEG_INFINITY));
                return Ok(OracleResult {
                    best_assignment: Assignment(a),
                    best_value: v,
                    evaluated_count: count,
                });
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < domains[k] {
                break;
            }
            cur[k] = 0;
        }
    }
}
