//! Pairwise significance across environments and the report tables.

use serde::{Deserialize, Serialize};

use super::matrix::TrialTable;
use super::stats::{mean, welch_t};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub env: String,
    pub a: String,
    pub b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
    /// `a` has the larger mean time and `p < alpha`.
    pub a_worse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub alpha: f64,
    /// Variant names from worst to best mean time.
    pub order: Vec<String>,
    /// Mean score over all environments and runs, in `order`.
    pub mean_times: Vec<f64>,
    /// `pct[i][j]`: percentage of environments where `order[i]` is
    /// significantly worse than `order[j]`.
    pub pct: Vec<Vec<f64>>,
    pub tests: Vec<PairTest>,
}

impl SignificanceMatrix {
    pub fn get(&self, worse: &str, better: &str) -> Option<f64> {
        let i = self.order.iter().position(|v| v == worse)?;
        let j = self.order.iter().position(|v| v == better)?;
        Some(self.pct[i][j])
    }
}

/// Welch tests for every ordered pair of variants in every environment.
pub fn significance_matrix(table: &TrialTable, alpha: f64) -> SignificanceMatrix {
    let nv = table.variants.len();
    let ne = table.envs.len();
    let overall: Vec<f64> = (0..nv)
        .map(|v| mean(&(0..ne).flat_map(|e| table.scores(e, v)).collect::<Vec<_>>()))
        .collect();
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by(|a, b| overall[*b].total_cmp(&overall[*a]).then(a.cmp(b)));
    let mut counts = vec![vec![0usize; nv]; nv];
    let mut tests = Vec::new();
    for e in 0..ne {
        for a in 0..nv {
            for b in 0..nv {
                if a == b {
                    continue;
                }
                let (sa, sb) = (table.scores(e, a), table.scores(e, b));
                let (ma, mb) = (mean(&sa), mean(&sb));
                let w = welch_t(&sa, &sb).ok();
                let a_worse = ma > mb && w.is_some_and(|w| w.p < alpha);
                if a_worse {
                    counts[a][b] += 1;
                }
                tests.push(PairTest {
                    env: table.envs[e].clone(),
                    a: table.variants[a].clone(),
                    b: table.variants[b].clone(),
                    mean_a: ma,
                    mean_b: mb,
                    t: w.map(|w| w.t),
                    p: w.map(|w| w.p),
                    a_worse,
                });
            }
        }
    }
    let pct = order
        .iter()
        .map(|&a| {
            order
                .iter()
                .map(|&b| if ne == 0 { 0.0 } else { 100.0 * counts[a][b] as f64 / ne as f64 })
                .collect()
        })
        .collect();
    SignificanceMatrix {
        alpha,
        order: order.iter().map(|&i| table.variants[i].clone()).collect(),
        mean_times: order.iter().map(|&i| overall[i]).collect(),
        pct,
        tests,
    }
}

pub fn to_markdown(m: &SignificanceMatrix) -> String {
    let mut s = String::from("| Variant | Mean time (s) |\n|---|---|\n");
    for (v, t) in m.order.iter().zip(&m.mean_times) {
        s.push_str(&format!("| {v} | {t:.2} |\n"));
    }
    s.push_str(&format!(
        "\nPercentage of environments where the row variant is significantly worse than the column variant (p < {}).\n\n",
        m.alpha
    ));
    s.push_str("| Method 1 \\ Method 2 |");
    for v in &m.order {
        s.push_str(&format!(" {v} |"));
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(m.order.len()));
    s.push('\n');
    for (v, row) in m.order.iter().zip(&m.pct) {
        s.push_str(&format!("| {v} |"));
        for p in row {
            s.push_str(&format!(" {p:.0}% |"));
        }
        s.push('\n');
    }
    s
}

pub fn to_csv(m: &SignificanceMatrix) -> String {
    let mut s = String::from("method,mean_time");
    for v in &m.order {
        s.push_str(&format!(",{v}"));
    }
    s.push('\n');
    for ((v, t), row) in m.order.iter().zip(&m.mean_times).zip(&m.pct) {
        s.push_str(&format!("{v},{t:.4}"));
        for p in row {
            s.push_str(&format!(",{p:.2}"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::matrix::Trial;
    use crate::pipeline::Outcome;

    fn table(data: Vec<Vec<Vec<f64>>>) -> TrialTable {
        let nv = data[0].len();
        TrialTable {
            envs: (0..data.len()).map(|e| format!("e{e}")).collect(),
            variants: (0..nv).map(|v| format!("v{v}")).collect(),
            penalty: 50.0,
            cells: data
                .into_iter()
                .map(|env| {
                    env.into_iter()
                        .map(|runs| {
                            runs.into_iter()
                                .enumerate()
                                .map(|(run, s)| Trial {
                                    run,
                                    seed: 0,
                                    outcome: Outcome::Reached,
                                    time: s,
                                    score: s,
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn identical_variants_are_never_significant() {
        let runs = vec![7.0, 7.2, 6.9, 7.1];
        let m = significance_matrix(&table(vec![vec![runs.clone(), runs.clone()]; 3]), 0.05);
        assert!(m.pct.iter().flatten().all(|p| *p == 0.0));
    }

    #[test]
    fn counts_one_of_two() {
        let slow = vec![10.0, 10.2, 9.9, 10.1];
        let fast = vec![7.0, 7.2, 6.9, 7.1];
        let m = significance_matrix(
            &table(vec![vec![slow.clone(), fast.clone()], vec![fast.clone(), fast.clone()]]),
            0.05,
        );
        assert_eq!(m.get("v0", "v1"), Some(50.0));
        assert_eq!(m.get("v1", "v0"), Some(0.0));
        assert_eq!(m.order, vec!["v0", "v1"]);
        assert_eq!(m.pct[0][0], 0.0);
    }
}
