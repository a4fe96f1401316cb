use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub feature: String,
    /// Position of the feature in the scored design; breaks score ties.
    pub column: usize,
    pub score: f64,
    pub rank: usize,
}

/// Features ordered by score, descending; equal scores keep column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorRanking {
    pub method_id: String,
    pub direction: Direction,
    pub entries: Vec<RankEntry>,
    /// Features whose score was forced (zero variance, capped statistic, ...).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<String>,
}

impl SelectorRanking {
    /// Non-finite scores are treated as zero.
    pub fn from_scores(method_id: impl Into<String>, names: &[String], scores: &[f64]) -> Self {
        assert_eq!(names.len(), scores.len(), "one score per feature");
        let mut order: Vec<usize> = (0..names.len()).collect();
        let clean = |s: f64| if s.is_finite() { s } else { 0.0 };
        order.sort_by(|&a, &b| clean(scores[b]).total_cmp(&clean(scores[a])).then(a.cmp(&b)));
        let entries = order
            .iter()
            .enumerate()
            .map(|(r, &j)| RankEntry {
                feature: names[j].clone(),
                column: j,
                score: clean(scores[j]),
                rank: r + 1,
            })
            .collect();
        SelectorRanking {
            method_id: method_id.into(),
            direction: Direction::HigherIsBetter,
            entries,
            flagged: Vec::new(),
        }
    }

    pub fn with_flagged(mut self, flagged: Vec<String>) -> Self {
        self.flagged = flagged;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_of(&self, feature: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.score)
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.rank)
    }

    pub fn top(&self, k: usize) -> Vec<String> {
        self.entries.iter().take(k).map(|e| e.feature.clone()).collect()
    }

    pub fn write_csv<W: std::io::Write>(rankings: &[SelectorRanking], w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["method_id", "feature", "score", "rank"])?;
        for r in rankings {
            for e in &r.entries {
                w.write_record([
                    r.method_id.as_str(),
                    e.feature.as_str(),
                    &e.score.to_string(),
                    &e.rank.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<ranking csv>", e))
    }
}

/// Top `k` features by rank.
pub fn select_k_best(ranking: &SelectorRanking, k: usize) -> Result<Vec<String>> {
    if k == 0 || k > ranking.len() {
        return Err(Error::InvalidParam(format!(
            "k = {k} outside 1..={}",
            ranking.len()
        )));
    }
    Ok(ranking.top(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn ranks_permutation_and_ties_by_column() {
        let r = SelectorRanking::from_scores("m", &names(4), &[0.5, 0.9, 0.5, f64::NAN]);
        let order: Vec<&str> = r.entries.iter().map(|e| e.feature.as_str()).collect();
        assert_eq!(order, vec!["x1", "x0", "x2", "x3"]);
        assert_eq!(r.entries.iter().map(|e| e.rank).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(r.score_of("x3"), Some(0.0));
    }

    #[test]
    fn k_best_rules() {
        let r = SelectorRanking::from_scores("m", &names(3), &[0.1, 0.3, 0.3]);
        assert_eq!(select_k_best(&r, 3).unwrap().len(), 3);
        assert_eq!(select_k_best(&r, 1).unwrap(), vec!["x1"]);
        // tie at the boundary goes to the lower column index
        assert_eq!(select_k_best(&r, 1).unwrap(), vec!["x1"]);
        assert_eq!(select_k_best(&r, 2).unwrap(), vec!["x1", "x2"]);
        assert!(select_k_best(&r, 0).is_err());
        assert!(select_k_best(&r, 4).is_err());
    }
}
