//! Run aggregation and the two-sample Wilcoxon rank-sum (Mann–Whitney) test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::emo::RunRecord;
use crate::error::{Error, Result};

/// Summary of repeated runs of one algorithm on one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub function_id: String,
    pub algorithm_id: String,
    pub runs: usize,
    pub averaged_best: f64,
    pub averaged_iterations: f64,
    pub averaged_evaluations: f64,
    pub best_values: Vec<f64>,
    pub iteration_counts: Vec<usize>,
    pub evaluation_counts: Vec<u64>,
    /// Best-so-far trace of the run with the lowest final value.
    pub best_trace: Vec<f64>,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Averages a set of runs. The first run wins ties for the best trace.
pub fn aggregate(
    function_id: &str,
    algorithm_id: &str,
    records: &[RunRecord],
) -> Result<AggregateResult> {
    if records.is_empty() {
        return Err(Error::invalid("cannot aggregate zero runs"));
    }
    let best_values: Vec<f64> = records.iter().map(|r| r.best_fitness).collect();
    let iteration_counts: Vec<usize> = records.iter().map(|r| r.iterations).collect();
    let evaluation_counts: Vec<u64> = records.iter().map(|r| r.evaluations).collect();
    let best_run = records
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.best_fitness.total_cmp(&b.best_fitness).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("non-empty");
    Ok(AggregateResult {
        function_id: function_id.to_string(),
        algorithm_id: algorithm_id.to_string(),
        runs: records.len(),
        averaged_best: mean(best_values.iter().copied()),
        averaged_iterations: mean(iteration_counts.iter().map(|&v| v as f64)),
        averaged_evaluations: mean(evaluation_counts.iter().map(|&v| v as f64)),
        best_values,
        iteration_counts,
        evaluation_counts,
        best_trace: best_run.trace.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Mann–Whitney `U` of the first sample (`R_a - n_a (n_a + 1) / 2`).
    pub statistic: f64,
    pub p_value: f64,
    pub significant_at_5pct: bool,
    pub method: PValueMethod,
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;
pub const MIN_SAMPLE_SIZE: usize = 5;
/// Below this many observations in the smaller sample the null distribution
/// is enumerated exactly.
pub const EXACT_BELOW: usize = 10;
const EXACT_MAX_TOTAL: usize = 400;

struct Ranked {
    /// Twice the average rank of each observation of `a`, then of `b`.
    doubled: Vec<u64>,
    /// Sizes of tie groups.
    ties: Vec<usize>,
    n_a: usize,
    n_b: usize,
}

fn rank(a: &[f64], b: &[f64]) -> Result<Ranked> {
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("samples must not contain NaN"));
    }
    let total = a.len() + b.len();
    let mut order: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut doubled = vec![0u64; total];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < total {
        let mut end = start;
        while end + 1 < total && order[end + 1].0 == order[start].0 {
            end += 1;
        }
        // 1-based ranks start+1 ..= end+1 share (start + end + 2) / 2.
        let twice = (start + end + 2) as u64;
        for item in &order[start..=end] {
            doubled[item.1] = twice;
        }
        ties.push(end - start + 1);
        start = end + 1;
    }
    Ok(Ranked {
        doubled,
        ties,
        n_a: a.len(),
        n_b: b.len(),
    })
}

impl Ranked {
    fn u_statistic(&self) -> f64 {
        let r_a: u64 = self.doubled[..self.n_a].iter().sum();
        let n_a = self.n_a as f64;
        r_a as f64 / 2.0 - n_a * (n_a + 1.0) / 2.0
    }

    /// Two-sided p-value from the exact permutation distribution of the rank
    /// sum of the smaller sample, ties included.
    fn exact_p(&self) -> f64 {
        let (k, observed): (usize, u64) = if self.n_a <= self.n_b {
            (self.n_a, self.doubled[..self.n_a].iter().sum())
        } else {
            (self.n_b, self.doubled[self.n_a..].iter().sum())
        };
        let max_sum: usize = {
            let mut all = self.doubled.clone();
            all.sort_unstable_by(|x, y| y.cmp(x));
            all[..k].iter().sum::<u64>() as usize
        };
        // counts[j][s]: subsets of size j with doubled rank sum s.
        let mut counts = vec![vec![0u128; max_sum + 1]; k + 1];
        counts[0][0] = 1;
        for &r in &self.doubled {
            let r = r as usize;
            for j in (1..=k).rev() {
                let (lower, upper) = counts.split_at_mut(j);
                let prev = &lower[j - 1];
                let cur = &mut upper[0];
                for s in (r..=max_sum).rev() {
                    cur[s] += prev[s - r];
                }
            }
        }
        let dist = &counts[k];
        let total: u128 = dist.iter().sum();
        let observed = observed as usize;
        let at_most: u128 = dist[..=observed].iter().sum();
        let at_least: u128 = dist[observed..].iter().sum();
        let tail = at_most.min(at_least) as f64 / total as f64;
        (2.0 * tail).min(1.0)
    }

    /// Two-sided p-value from the normal approximation with tie and
    /// continuity corrections.
    fn normal_p(&self) -> f64 {
        let (n_a, n_b) = (self.n_a as f64, self.n_b as f64);
        let n = n_a + n_b;
        let tie_term: f64 = self
            .ties
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let variance = n_a * n_b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
        if variance.is_nan() || variance <= 0.0 {
            return 1.0;
        }
        let mean = n_a * n_b / 2.0;
        let deviation = ((self.u_statistic() - mean).abs() - 0.5).max(0.0);
        let z = deviation / variance.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    }
}

fn check_sizes(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < MIN_SAMPLE_SIZE || b.len() < MIN_SAMPLE_SIZE {
        return Err(Error::invalid(format!(
            "rank-sum test needs at least {MIN_SAMPLE_SIZE} observations per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Exact two-sided p-value, regardless of sample size.
pub fn exact_p_value(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("samples must be non-empty"));
    }
    Ok(rank(a, b)?.exact_p())
}

/// Normal-approximation two-sided p-value, regardless of sample size.
pub fn normal_p_value(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("samples must be non-empty"));
    }
    Ok(rank(a, b)?.normal_p())
}

/// Two-sided rank-sum test of "no difference in location" between two
/// independent samples. The null distribution is enumerated exactly when the
/// smaller sample has fewer than [`EXACT_BELOW`] observations.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    check_sizes(a, b)?;
    let ranked = rank(a, b)?;
    let use_exact = a.len().min(b.len()) < EXACT_BELOW && a.len() + b.len() <= EXACT_MAX_TOTAL;
    let (p_value, method) = if use_exact {
        (ranked.exact_p(), PValueMethod::Exact)
    } else {
        (ranked.normal_p(), PValueMethod::Normal)
    };
    Ok(WilcoxonResult {
        statistic: ranked.u_statistic(),
        p_value,
        significant_at_5pct: p_value < SIGNIFICANCE_LEVEL,
        method,
    })
}

/// Tests best values and iteration counts of two aggregates of the same
/// function. Returns `(best, iterations)`.
pub fn compare_algorithms(
    a: &AggregateResult,
    b: &AggregateResult,
) -> Result<(WilcoxonResult, WilcoxonResult)> {
    if a.function_id != b.function_id {
        return Err(Error::invalid(format!(
            "cannot compare runs on {} with runs on {}",
            a.function_id, b.function_id
        )));
    }
    if a.runs != b.runs {
        return Err(Error::invalid(format!(
            "run counts differ: {} vs {}",
            a.runs, b.runs
        )));
    }
    let best = wilcoxon_rank_sum(&a.best_values, &b.best_values)?;
    let as_f64 = |v: &[usize]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    let iterations = wilcoxon_rank_sum(&as_f64(&a.iteration_counts), &as_f64(&b.iteration_counts))?;
    Ok((best, iterations))
}
