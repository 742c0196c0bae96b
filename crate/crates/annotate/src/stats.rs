//! Summary of an aggregated gold set.

use serde::Serialize;

use crate::aggregate::Aggregation;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StatsReport {
    pub validated: usize,
    pub yes: usize,
    pub no: usize,
    pub yes_pct: f64,
    pub no_pct: f64,
    pub unanimous_pct: f64,
    pub one_disagreement_pct: f64,
    pub two_disagreements_pct: f64,
    /// Share of panel votes equal to their candidate's gold label.
    pub individual_equals_gold_pct: f64,
    /// Candidates per disagreement count (0, 1, 2) for each gold label.
    pub disagreements_yes: [usize; 3],
    pub disagreements_no: [usize; 3],
}

fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

pub fn stats_report(agg: &Aggregation) -> StatsReport {
    let mut r = StatsReport {
        validated: agg.gold.len(),
        ..Default::default()
    };
    let mut by_count = [0usize; 3];
    let (mut votes, mut agreeing) = (0, 0);
    for g in agg.gold.values() {
        let d = (g.disagreements as usize).min(2);
        by_count[d] += 1;
        if g.label {
            r.yes += 1;
            r.disagreements_yes[d] += 1;
        } else {
            r.no += 1;
            r.disagreements_no[d] += 1;
        }
        votes += g.votes.len();
        agreeing += g.votes.iter().filter(|v| v.1 == g.label).count();
    }
    r.yes_pct = pct(r.yes, r.validated);
    r.no_pct = pct(r.no, r.validated);
    r.unanimous_pct = pct(by_count[0], r.validated);
    r.one_disagreement_pct = pct(by_count[1], r.validated);
    r.two_disagreements_pct = pct(by_count[2], r.validated);
    r.individual_equals_gold_pct = pct(agreeing, votes);
    r
}

impl std::fmt::Display for StatsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "validated\t{}", self.validated)?;
        writeln!(f, "balance_yes_no\t{:.0}% / {:.0}%", self.yes_pct, self.no_pct)?;
        writeln!(f, "unanimous\t{:.1}%", self.unanimous_pct)?;
        writeln!(f, "one_disagreement\t{:.1}%", self.one_disagreement_pct)?;
        writeln!(f, "two_disagreements\t{:.1}%", self.two_disagreements_pct)?;
        writeln!(f, "individual_equals_gold\t{:.1}%", self.individual_equals_gold_pct)
    }
}
