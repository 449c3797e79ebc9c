use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::run::BenchmarkRecord;
use super::BenchError;

pub const SUMMARY_FORMAT: &str = "pinsat-summary";
pub const SUMMARY_VERSION: u32 = 1;

/// Which problems enter the time and cost statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsFilter {
    /// Only problems solved by every planner and budget in the records.
    CommonSolved,
    /// Every problem the group itself solved.
    OwnSolved,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub planner: String,
    pub threads: usize,
    pub attempted: usize,
    pub solved: usize,
    /// Percentage of attempted problems solved.
    pub success_rate: f64,
    /// Problems entering the time and cost statistics.
    pub stats_problems: usize,
    /// `None` when no problem qualifies.
    pub time: Option<MeanStd>,
    pub cost: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub version: u32,
    pub filter: StatsFilter,
    /// Problems solved by every group.
    pub common_problems: Vec<usize>,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn row(&self, planner: &str, threads: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.planner == planner && r.threads == threads)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Per planner and budget: success rate over all attempted problems, and
/// mean and standard deviation of time and cost over the filtered subset.
pub fn aggregate(records: &[BenchmarkRecord], filter: StatsFilter) -> Result<Summary, BenchError> {
    if records.is_empty() {
        return Err(BenchError::EmptyRecords);
    }
    let mut groups: BTreeMap<(String, usize), Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.planner.clone(), r.threads)).or_default().push(r);
    }
    let solved_sets: Vec<BTreeSet<usize>> = groups
        .values()
        .map(|rs| rs.iter().filter(|r| r.success).map(|r| r.problem_id).collect())
        .collect();
    let common: BTreeSet<usize> = solved_sets
        .iter()
        .skip(1)
        .fold(solved_sets[0].clone(), |acc, s| acc.intersection(s).copied().collect());

    let rows = groups
        .iter()
        .map(|((planner, threads), rs)| {
            let attempted: BTreeSet<usize> = rs.iter().map(|r| r.problem_id).collect();
            let solved_ids: BTreeSet<usize> = rs.iter().filter(|r| r.success).map(|r| r.problem_id).collect();
            let chosen: Vec<&&BenchmarkRecord> = rs
                .iter()
                .filter(|r| {
                    r.success
                        && match filter {
                            StatsFilter::CommonSolved => common.contains(&r.problem_id),
                            StatsFilter::OwnSolved => true,
                        }
                })
                .collect();
            let times: Vec<f64> = chosen.iter().map(|r| r.wall_time_s).collect();
            let costs: Vec<f64> = chosen.iter().filter_map(|r| r.cost).collect();
            SummaryRow {
                planner: planner.clone(),
                threads: *threads,
                attempted: attempted.len(),
                solved: solved_ids.len(),
                success_rate: 100.0 * solved_ids.len() as f64 / attempted.len() as f64,
                stats_problems: chosen.len(),
                time: MeanStd::of(&times),
                cost: MeanStd::of(&costs),
            }
        })
        .collect();
    Ok(Summary {
        format: SUMMARY_FORMAT.into(),
        version: SUMMARY_VERSION,
        filter,
        common_problems: common.into_iter().collect(),
        rows,
    })
}

/// Success rate and mean time against thread budget for each planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    pub planner: String,
    pub threads: Vec<usize>,
    pub success_rate: Vec<f64>,
    /// `null` where unavailable.
    pub time_mean: Vec<Option<f64>>,
}

pub fn scaling_series(summary: &Summary) -> Vec<ScalingSeries> {
    let mut by: BTreeMap<&str, ScalingSeries> = BTreeMap::new();
    for r in &summary.rows {
        let s = by.entry(r.planner.as_str()).or_insert_with(|| ScalingSeries {
            planner: r.planner.clone(),
            threads: Vec::new(),
            success_rate: Vec::new(),
            time_mean: Vec::new(),
        });
        s.threads.push(r.threads);
        s.success_rate.push(r.success_rate);
        s.time_mean.push(r.time.map(|t| t.mean));
    }
    by.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(problem_id: usize, planner: &str, threads: usize, time: f64, cost: Option<f64>) -> BenchmarkRecord {
        BenchmarkRecord {
            problem_id,
            planner: planner.into(),
            threads,
            success: cost.is_some(),
            status: if cost.is_some() { "solved" } else { "exhausted" }.into(),
            wall_time_s: time,
            heuristic_time_s: 0.0,
            cost,
            optimizer_calls: 0,
            expansions: 0,
            evaluations: 0,
            trajectory: None,
            error: None,
        }
    }

    #[test]
    fn equal_times_have_zero_std() {
        let rs = vec![rec(0, "a", 1, 2.0, Some(1.0)), rec(1, "a", 1, 2.0, Some(3.0))];
        let s = aggregate(&rs, StatsFilter::CommonSolved).unwrap();
        let row = s.row("a", 1).unwrap();
        assert_eq!(row.time.unwrap(), MeanStd { mean: 2.0, std: 0.0 });
        assert_eq!(row.cost.unwrap(), MeanStd { mean: 2.0, std: 1.0 });
        assert_eq!(row.success_rate, 100.0);
    }

    #[test]
    fn empty_records_error() {
        assert!(matches!(aggregate(&[], StatsFilter::CommonSolved), Err(BenchError::EmptyRecords)));
    }

    #[test]
    fn disjoint_solutions_are_unavailable() {
        let rs = vec![rec(0, "a", 1, 1.0, Some(1.0)), rec(0, "b", 1, 1.0, None), rec(1, "b", 1, 1.0, Some(1.0))];
        let s = aggregate(&rs, StatsFilter::CommonSolved).unwrap();
        assert!(s.common_problems.is_empty());
        assert!(s.row("a", 1).unwrap().time.is_none());
        let own = aggregate(&rs, StatsFilter::OwnSolved).unwrap();
        assert_eq!(own.row("b", 1).unwrap().stats_problems, 1);
    }

    #[test]
    fn series_groups_by_planner() {
        let rs = vec![rec(0, "a", 1, 1.0, Some(1.0)), rec(0, "a", 4, 0.5, Some(1.0))];
        let s = scaling_series(&aggregate(&rs, StatsFilter::CommonSolved).unwrap());
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].threads, vec![1, 4]);
        assert_eq!(s[0].time_mean, vec![Some(1.0), Some(0.5)]);
    }
}
