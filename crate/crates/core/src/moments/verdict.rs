//! Weak-intermittency verdict from estimated exponents.
//!
//! Every clause is decided with a 3 standard error margin and may come out undecided.
//! A clause that fails outright makes the verdict negative; otherwise any undecided
//! clause, or a false positivity gate, leaves it inconclusive.

use serde::Serialize;

use super::exponent::ExponentEstimate;

/// Margin in standard errors.
pub const MARGIN: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// gamma(1) is zero within uncertainty.
    GammaOneZero,
    /// gamma(2) > 0.
    GammaTwoPositive,
    /// gamma(p)/p strictly increasing along the grid.
    RatioIncreasing,
    /// p -> gamma(p) convex along the grid.
    Convex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClauseResult {
    pub clause: Clause,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Intermittent,
    NotIntermittent { failed: Vec<Clause> },
    /// `undecided` is empty when only the positivity gate is missing.
    Inconclusive { undecided: Vec<Clause>, positivity: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictReport {
    pub positivity: bool,
    pub clauses: Vec<ClauseResult>,
    pub verdict: Verdict,
}

impl VerdictReport {
    /// Some(true) or Some(false) when decided.
    pub fn decided(&self) -> Option<bool> {
        match self.verdict {
            Verdict::Intermittent => Some(true),
            Verdict::NotIntermittent { .. } => Some(false),
            Verdict::Inconclusive { .. } => None,
        }
    }
}

/// Positive when `value` exceeds `margin`, negative when `value + margin <= 0`.
fn sign_test(value: f64, margin: f64) -> Outcome {
    if value > margin {
        Outcome::Pass
    } else if value + margin <= 0.0 {
        Outcome::Fail
    } else {
        Outcome::Undecided
    }
}

fn combine(outcomes: impl IntoIterator<Item = Outcome>) -> Outcome {
    let mut out = Outcome::Pass;
    for o in outcomes {
        match o {
            Outcome::Fail => return Outcome::Fail,
            Outcome::Undecided => out = Outcome::Undecided,
            Outcome::Pass => {}
        }
    }
    out
}

fn find(sorted: &[ExponentEstimate], p: f64) -> Option<&ExponentEstimate> {
    sorted.iter().find(|e| e.p == p)
}

pub fn intermittency_verdict(estimates: &[ExponentEstimate], positivity: bool) -> VerdictReport {
    let mut est = estimates.to_vec();
    est.sort_by(|a, b| a.p.total_cmp(&b.p));
    let mut clauses = Vec::with_capacity(4);

    clauses.push(match find(&est, 1.0) {
        None => ClauseResult { clause: Clause::GammaOneZero, outcome: Outcome::Undecided, detail: "p = 1 is not on the grid".into() },
        Some(e) => {
            let ok = e.slope.abs() <= MARGIN * e.stderr;
            ClauseResult {
                clause: Clause::GammaOneZero,
                outcome: if ok { Outcome::Pass } else { Outcome::Fail },
                detail: format!("gamma(1) = {:.6e} +- {:.2e}", e.slope, e.stderr),
            }
        }
    });

    clauses.push(match find(&est, 2.0) {
        None => ClauseResult { clause: Clause::GammaTwoPositive, outcome: Outcome::Undecided, detail: "p = 2 is not on the grid".into() },
        Some(e) => ClauseResult {
            clause: Clause::GammaTwoPositive,
            outcome: sign_test(e.slope, MARGIN * e.stderr),
            detail: format!("gamma(2) = {:.6e} +- {:.2e}", e.slope, e.stderr),
        },
    });

    let ratio: Vec<Outcome> = est
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let d = b.slope / b.p - a.slope / a.p;
            let se = ((b.stderr / b.p).powi(2) + (a.stderr / a.p).powi(2)).sqrt();
            sign_test(d, MARGIN * se)
        })
        .collect();
    clauses.push(ClauseResult {
        clause: Clause::RatioIncreasing,
        outcome: if est.len() < 2 { Outcome::Undecided } else { combine(ratio.iter().copied()) },
        detail: format!("{} consecutive pairs: {:?}", ratio.len(), ratio),
    });

    // gamma(b) <= chord(a, c) at b, failing only when the excess is clear of the margin
    let convex: Vec<Outcome> = est
        .windows(3)
        .map(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            let t = (b.p - a.p) / (c.p - a.p);
            let excess = b.slope - ((1.0 - t) * a.slope + t * c.slope);
            let se = (b.stderr.powi(2) + ((1.0 - t) * a.stderr).powi(2) + (t * c.stderr).powi(2)).sqrt();
            if excess > MARGIN * se {
                Outcome::Fail
            } else {
                Outcome::Pass
            }
        })
        .collect();
    clauses.push(ClauseResult {
        clause: Clause::Convex,
        outcome: combine(convex.iter().copied()),
        detail: format!("{} consecutive triples: {:?}", convex.len(), convex),
    });

    let failed: Vec<Clause> = clauses.iter().filter(|c| c.outcome == Outcome::Fail).map(|c| c.clause).collect();
    let undecided: Vec<Clause> = clauses.iter().filter(|c| c.outcome == Outcome::Undecided).map(|c| c.clause).collect();
    let verdict = if !failed.is_empty() {
        Verdict::NotIntermittent { failed }
    } else if !undecided.is_empty() || !positivity {
        Verdict::Inconclusive { undecided, positivity }
    } else {
        Verdict::Intermittent
    };
    VerdictReport { positivity, clauses, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(p: f64, slope: f64, stderr: f64) -> ExponentEstimate {
        ExponentEstimate { p, slope, stderr, ratio_slope: slope, window: (0, 1) }
    }

    #[test]
    fn doubling_is_not_intermittent() {
        let e: Vec<_> = (1..=4).map(|p| est(p as f64, p as f64 * 2f64.ln(), 0.0)).collect();
        let r = intermittency_verdict(&e, true);
        match r.verdict {
            Verdict::NotIntermittent { failed } => {
                assert!(failed.contains(&Clause::RatioIncreasing));
                assert!(failed.contains(&Clause::GammaOneZero));
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn decaying_exponents_fail() {
        let e: Vec<_> = (1..=4).map(|p| est(p as f64, -0.01 * p as f64, 1e-4)).collect();
        let r = intermittency_verdict(&e, true);
        assert_eq!(r.decided(), Some(false));
        assert_eq!(r.clauses[1].outcome, Outcome::Fail);
    }

    #[test]
    fn convex_increasing_profile_is_intermittent() {
        // gamma(p) = 0.1 p (p - 1)
        let e: Vec<_> = (1..=4).map(|p| est(p as f64, 0.1 * (p * (p - 1)) as f64, 1e-3)).collect();
        let r = intermittency_verdict(&e, true);
        assert_eq!(r.verdict, Verdict::Intermittent);
        let gated = intermittency_verdict(&e, false);
        assert_eq!(gated.verdict, Verdict::Inconclusive { undecided: vec![], positivity: false });
    }

    #[test]
    fn overlapping_errors_are_undecided() {
        let e: Vec<_> = (1..=4).map(|p| est(p as f64, 0.001 * (p * (p - 1)) as f64, 0.05)).collect();
        let r = intermittency_verdict(&e, true);
        match r.verdict {
            Verdict::Inconclusive { undecided, .. } => assert!(undecided.contains(&Clause::GammaTwoPositive)),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn concave_profile_fails_convexity() {
        let e = vec![est(1.0, 0.0, 1e-4), est(2.0, 1.0, 1e-4), est(3.0, 1.6, 1e-4)];
        let r = intermittency_verdict(&e, true);
        assert_eq!(r.clauses[3].outcome, Outcome::Fail);
    }
}
