//! Normalized best-so-far scores and the suite aggregates BtR, MP, MnP and
//! MnR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed rewards of one method on one task, with the task's references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub method_id: String,
    pub accuracies: Vec<f64>,
    pub y_rand: f64,
    pub y_max: f64,
}

impl TaskResult {
    pub fn new(task_id: impl Into<String>, method_id: impl Into<String>, accuracies: Vec<f64>, y_rand: f64, y_max: f64) -> Result<Self> {
        if accuracies.is_empty() {
            return Err(Error::Metric("a task result needs at least one trial".into()));
        }
        if !accuracies.iter().chain([&y_rand, &y_max]).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("task result"));
        }
        Ok(TaskResult {
            task_id: task_id.into(),
            method_id: method_id.into(),
            accuracies,
            y_rand,
            y_max,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.y_max == self.y_rand
    }

    pub fn final_best(&self) -> f64 {
        self.accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best normalized score over trials `1..=t` for every `t`.
    pub fn curve(&self) -> Result<Vec<f64>> {
        self.check_normalizable()?;
        let span = self.y_max - self.y_rand;
        let mut best = f64::NEG_INFINITY;
        Ok(self
            .accuracies
            .iter()
            .map(|&y| {
                best = best.max((y - self.y_rand) / span);
                best
            })
            .collect())
    }

    fn check_normalizable(&self) -> Result<()> {
        if self.is_degenerate() {
            return Err(Error::Metric(format!(
                "task `{}` is degenerate (y_max = y_rand = {})",
                self.task_id, self.y_rand
            )));
        }
        Ok(())
    }
}

/// `max_{i <= t} (y_i - y_rand) / (y_max - y_rand)`.
pub fn normalized_best(result: &TaskResult, t: usize) -> Result<f64> {
    if t == 0 || t > result.accuracies.len() {
        return Err(Error::Metric(format!(
            "trial {t} outside 1..={}",
            result.accuracies.len()
        )));
    }
    result.check_normalizable()?;
    let best = result.accuracies[..t].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((best - result.y_rand) / (result.y_max - result.y_rand))
}

/// Percentage of tasks whose final best observed accuracy strictly exceeds
/// `y_rand`.
pub fn beat_the_random(results: &[TaskResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Metric("beat-the-random needs at least one task".into()));
    }
    let wins = results.iter().filter(|r| r.final_best() > r.y_rand).count();
    Ok(100.0 * wins as f64 / results.len() as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn final_scores(results: &[TaskResult]) -> Result<Vec<f64>> {
    let scores: Vec<f64> = results
        .iter()
        .filter(|r| !r.is_degenerate())
        .map(|r| normalized_best(r, r.accuracies.len()))
        .collect::<Result<_>>()?;
    if scores.is_empty() {
        return Err(Error::Metric("every task is degenerate".into()));
    }
    Ok(scores)
}

/// Median over non-degenerate tasks of the full-budget normalized score.
pub fn median_performance(results: &[TaskResult]) -> Result<f64> {
    Ok(median(&final_scores(results)?).expect("non-empty"))
}

pub fn mean_performance(results: &[TaskResult]) -> Result<f64> {
    Ok(mean(&final_scores(results)?).expect("non-empty"))
}

/// Ranks of one task's scores, highest first, ties sharing the average of
/// their positions.
pub fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Positions i+1 ..= j share their mean.
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Mean rank per method; `scores[task][method]`.
pub fn mean_rank(scores: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = scores.first() else {
        return Err(Error::Metric("mean rank needs at least one task".into()));
    };
    let m = first.len();
    if m == 0 {
        return Err(Error::Metric("mean rank needs at least one method".into()));
    }
    let mut sums = vec![0.0; m];
    for (t, row) in scores.iter().enumerate() {
        if row.len() != m {
            return Err(Error::Metric(format!("task {t} has {} scores, expected {m}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Metric(format!("task {t} has a missing or non-finite score")));
        }
        for (s, r) in sums.iter_mut().zip(average_ranks(row)) {
            *s += r;
        }
    }
    Ok(sums.into_iter().map(|s| s / scores.len() as f64).collect())
}

/// Aggregates of one method over a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub btr: f64,
    pub mp: f64,
    pub mnp: f64,
    pub mnr: f64,
}

/// Final normalized score and rank of each method on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub scores: Vec<f64>,
    pub ranks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub methods: Vec<MethodSummary>,
    pub per_task: Vec<TaskRow>,
    /// Tasks left out of MP, MnP and MnR.
    pub degenerate: Vec<String>,
}

impl SuiteSummary {
    /// `results[method][task]`, with tasks in the same order for every
    /// method. `None` marks a failed run: the task drops out of MP, MnP and
    /// MnR for every method, and BtR counts only the runs that completed.
    pub fn compute(methods: &[String], results: &[Vec<Option<TaskResult>>]) -> Result<Self> {
        if methods.is_empty() || methods.len() != results.len() {
            return Err(Error::Metric("one result column per method is required".into()));
        }
        let tasks = results[0].len();
        if results.iter().any(|r| r.len() != tasks) {
            return Err(Error::Metric("methods cover different task lists".into()));
        }
        let mut per_task = Vec::new();
        let mut degenerate = Vec::new();
        for t in 0..tasks {
            let cells: Option<Vec<&TaskResult>> = results.iter().map(|r| r[t].as_ref()).collect();
            let Some(cells) = cells else {
                continue;
            };
            if cells[0].is_degenerate() {
                degenerate.push(cells[0].task_id.clone());
                continue;
            }
            let scores = cells
                .iter()
                .map(|c| normalized_best(c, c.accuracies.len()))
                .collect::<Result<Vec<_>>>()?;
            per_task.push(TaskRow {
                task_id: cells[0].task_id.clone(),
                ranks: average_ranks(&scores),
                scores,
            });
        }
        let ranks = if per_task.is_empty() {
            vec![f64::NAN; methods.len()]
        } else {
            mean_rank(&per_task.iter().map(|r| r.scores.clone()).collect::<Vec<_>>())?
        };
        let mut out = Vec::new();
        for (m, name) in methods.iter().enumerate() {
            let present: Vec<TaskResult> = results[m].iter().flatten().cloned().collect();
            let btr = if present.is_empty() { f64::NAN } else { beat_the_random(&present)? };
            let scores: Vec<f64> = per_task.iter().map(|r| r.scores[m]).collect();
            out.push(MethodSummary {
                method: name.clone(),
                btr,
                mp: median(&scores).unwrap_or(f64::NAN),
                mnp: mean(&scores).unwrap_or(f64::NAN),
                mnr: ranks[m],
            });
        }
        Ok(SuiteSummary {
            methods: out,
            per_task,
            degenerate,
        })
    }

    /// `method,BtR,MP,MnP,MnR` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,BtR,MP,MnP,MnR\n");
        for m in &self.methods {
            s.push_str(&format!("{},{:.4},{:.6},{:.6},{:.4}\n", m.method, m.btr, m.mp, m.mnp, m.mnr));
        }
        s
    }

    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// `trial,best_normalized` rows.
pub fn curve_csv(curve: &[f64]) -> String {
    let mut s = String::from("trial,best_normalized\n");
    for (i, v) in curve.iter().enumerate() {
        s.push_str(&format!("{},{:.9}\n", i + 1, v));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tr(acc: Vec<f64>, y_rand: f64, y_max: f64) -> TaskResult {
        TaskResult::new("t", "m", acc, y_rand, y_max).unwrap()
    }

    #[test]
    fn normalized_examples() {
        assert!((normalized_best(&tr(vec![0.2, 0.5], 0.2, 0.6), 2).unwrap() - 0.75).abs() < 1e-12);
        assert!((normalized_best(&tr(vec![0.1], 0.2, 0.6), 1).unwrap() + 0.25).abs() < 1e-12);
        assert_eq!(normalized_best(&tr(vec![0.3, 0.6, 0.1], 0.2, 0.6), 3).unwrap(), 1.0);
        assert!(normalized_best(&tr(vec![0.3], 0.2, 0.6), 0).is_err());
        assert!(normalized_best(&tr(vec![0.3], 0.2, 0.6), 2).is_err());
        assert!(normalized_best(&tr(vec![0.3], 0.4, 0.4), 1).is_err());
        assert!(TaskResult::new("t", "m", vec![], 0.0, 1.0).is_err());
    }

    #[test]
    fn btr_examples() {
        let mut rs: Vec<TaskResult> = (0..34).map(|_| tr(vec![0.9], 0.5, 1.0)).collect();
        rs.extend((0..2).map(|_| tr(vec![0.4], 0.5, 1.0)));
        assert!((beat_the_random(&rs).unwrap() - 94.444_444).abs() < 1e-4);
        assert_eq!(format!("{:.2}", beat_the_random(&rs).unwrap()), "94.44");
        let ties: Vec<TaskResult> = (0..3).map(|_| tr(vec![0.5], 0.5, 1.0)).collect();
        assert_eq!(beat_the_random(&ties).unwrap(), 0.0);
        assert_eq!(beat_the_random(&[tr(vec![0.6], 0.5, 1.0)]).unwrap(), 100.0);
        assert!(beat_the_random(&[]).is_err());
    }

    #[test]
    fn performance_examples() {
        // Scores 0.2, 0.8, 1.0 with y_rand = 0, y_max = 1.
        let rs: Vec<TaskResult> = [0.2, 0.8, 1.0].iter().map(|&s| tr(vec![s], 0.0, 1.0)).collect();
        assert!((median_performance(&rs).unwrap() - 0.8).abs() < 1e-12);
        assert!((mean_performance(&rs).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let one = [tr(vec![0.5], 0.0, 1.0)];
        assert_eq!(median_performance(&one).unwrap(), 0.5);
        assert_eq!(mean_performance(&one).unwrap(), 0.5);
        let two: Vec<TaskResult> = [0.4, 0.6].iter().map(|&s| tr(vec![s], 0.0, 1.0)).collect();
        assert!((median_performance(&two).unwrap() - 0.5).abs() < 1e-12);
        assert!(median_performance(&[tr(vec![0.5], 0.5, 0.5)]).is_err());
    }

    /// Brute-force oracle: the average rank of i is 1 + (#strictly better) +
    /// (#tied others) / 2.
    fn oracle_ranks(scores: &[f64]) -> Vec<f64> {
        scores
            .iter()
            .map(|&s| {
                let better = scores.iter().filter(|&&o| o > s).count() as f64;
                let tied = scores.iter().filter(|&&o| o == s).count() as f64 - 1.0;
                1.0 + better + tied / 2.0
            })
            .collect()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(mean_rank(&[vec![0.9, 0.1], vec![0.2, 0.7]]).unwrap(), vec![1.5, 1.5]);
        assert_eq!(average_ranks(&[0.5, 0.5]), vec![1.5, 1.5]);
        assert_eq!(average_ranks(&[0.1, 0.9, 0.5]), vec![3.0, 1.0, 2.0]);
        assert_eq!(average_ranks(&[0.3, 0.7, 0.3, 0.7]), oracle_ranks(&[0.3, 0.7, 0.3, 0.7]));
        assert!(mean_rank(&[vec![0.1, 0.2], vec![0.3]]).is_err());
        assert!(mean_rank(&[vec![0.1, f64::NAN]]).is_err());
    }

    #[test]
    fn suite_summary_two_methods() {
        let methods = vec!["grpoformer".to_string(), "random_search".to_string()];
        let mk = |task: &str, m: &str, y: f64| Some(TaskResult::new(task, m, vec![0.1, y], 0.3, 0.9).unwrap());
        let results = vec![
            vec![mk("a", "g", 0.9), mk("b", "g", 0.8), mk("c", "g", 0.5)],
            vec![mk("a", "r", 0.3), mk("b", "r", 0.4), mk("c", "r", 0.2)],
        ];
        let s = SuiteSummary::compute(&methods, &results).unwrap();
        assert_eq!(s.method("grpoformer").unwrap().mnr, 1.0);
        assert_eq!(s.method("random_search").unwrap().mnr, 2.0);
        assert_eq!(s.method("grpoformer").unwrap().btr, 100.0);
        // Only task b (0.4 > 0.3) beats the reference; a ties it.
        assert!((s.method("random_search").unwrap().btr - 100.0 / 3.0).abs() < 1e-12);
        assert!(s.to_csv().starts_with("method,BtR,MP,MnP,MnR\n"));
        assert_eq!(s.to_csv().lines().count(), 3);
    }

    #[test]
    fn suite_summary_excludes_missing_and_degenerate() {
        let methods = vec!["x".to_string(), "y".to_string()];
        let ok = |y: f64| Some(TaskResult::new("a", "m", vec![y], 0.0, 1.0).unwrap());
        let deg = || Some(TaskResult::new("d", "m", vec![0.5], 0.5, 0.5).unwrap());
        let results = vec![vec![ok(0.9), deg(), ok(0.4)], vec![ok(0.2), deg(), None]];
        let s = SuiteSummary::compute(&methods, &results).unwrap();
        assert_eq!(s.per_task.len(), 1);
        assert_eq!(s.degenerate, vec!["d".to_string()]);
        assert_eq!(s.method("x").unwrap().mnp, 0.9);
    }

    #[test]
    fn curve_rows() {
        let c = tr(vec![0.2, 0.1, 0.5, 0.4], 0.2, 0.6).curve().unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.windows(2).all(|w| w[0] <= w[1]));
        let csv = curve_csv(&c);
        assert_eq!(csv.lines().next().unwrap(), "trial,best_normalized");
        assert_eq!(csv.lines().count(), 5);
    }

    proptest! {
        #[test]
        fn normalized_best_is_monotone(acc in prop::collection::vec(-1.0f64..2.0, 1..40), y_rand in -0.5f64..0.5, span in 0.01f64..2.0) {
            let r = tr(acc.clone(), y_rand, y_rand + span);
            let mut prev = f64::NEG_INFINITY;
            for t in 1..=acc.len() {
                let v = normalized_best(&r, t).unwrap();
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn bounded_by_one_when_y_max_is_the_maximum(acc in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let y_max = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let r = tr(acc.clone(), -0.1, y_max);
            prop_assert!(normalized_best(&r, acc.len()).unwrap() <= 1.0);
        }

        #[test]
        fn ranks_conserve_sum_and_match_oracle(scores in prop::collection::vec(prop::sample::select(vec![0.0, 0.25, 0.5, 0.75, 1.0]), 1..9)) {
            let ranks = average_ranks(&scores);
            let m = scores.len() as f64;
            prop_assert!((ranks.iter().sum::<f64>() - m * (m + 1.0) / 2.0).abs() < 1e-9);
            prop_assert_eq!(ranks, oracle_ranks(&scores));
        }

        #[test]
        fn ranks_are_affine_invariant(scores in prop::collection::vec(-5.0f64..5.0, 1..8), a in 0.1f64..10.0, b in -3.0f64..3.0) {
            let shifted: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
            let strict = |v: &[f64]| {
                let mut x = v.to_vec();
                x.sort_by(f64::total_cmp);
                x.windows(2).all(|w| w[0] != w[1])
            };
            prop_assume!(strict(&scores) && strict(&shifted));
            prop_assert_eq!(average_ranks(&scores), average_ranks(&shifted));
        }

        #[test]
        fn distinct_scores_give_a_permutation(scores in prop::collection::hash_set(0u32..1000, 1..10)) {
            let v: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let mut r = average_ranks(&v);
            r.sort_by(f64::total_cmp);
            let expect: Vec<f64> = (1..=v.len()).map(|i| i as f64).collect();
            prop_assert_eq!(r, expect);
        }
    }
}
