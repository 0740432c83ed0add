use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::hungarian::max_weight_matching;
use crate::error::{Error, Result};
use crate::types::{matrix_to_rows, SegmentTable};

/// Clustering recall of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub session_id: String,
    pub n_segments: usize,
    /// Seconds of scored speech.
    pub total_speech: f64,
    /// Seconds whose cluster maps to the true speaker.
    pub correct: f64,
    pub recall_pct: f64,
    pub error_pct: f64,
    pub missed_speech_pct: f64,
    pub false_alarm_pct: f64,
    /// Reference speakers, column order of `confusion`.
    pub speakers: Vec<String>,
    /// Cluster id to reference speaker; unmapped clusters are absent.
    pub mapping: BTreeMap<usize, String>,
    /// Seconds per (cluster, speaker).
    pub confusion: Vec<Vec<f64>>,
}

/// Which segments `score_filtered` keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationFilter {
    /// duration > threshold
    LongerThan,
    /// duration <= threshold
    AtMost,
}

/// Scores per-segment cluster ids against labeled reference segments.
pub fn score(reference: &SegmentTable, hyp: &[usize]) -> Result<ScoreReport> {
    if hyp.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "hypothesis labels vs reference segments",
            expected: reference.len(),
            got: hyp.len(),
        });
    }
    if reference.is_empty() {
        return Err(Error::NotEnoughSamples {
            msg: "no segments to score".into(),
        });
    }
    let speakers = reference.speakers();
    let k = hyp.iter().max().map_or(0, |&m| m + 1);
    let mut confusion = Array2::zeros((k, speakers.len()));
    for (i, (seg, &c)) in reference.segments().iter().zip(hyp).enumerate() {
        let who = seg.ref_speaker.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("reference segment #{i} has no speaker label"))
        })?;
        let col = speakers.binary_search(who).expect("speaker list is complete");
        confusion[[c, col]] += seg.duration();
    }
    let matching = max_weight_matching(confusion.view());
    let mut mapping = BTreeMap::new();
    let mut correct = 0.0;
    for (c, col) in matching.iter().enumerate() {
        if let Some(col) = *col {
            mapping.insert(c, speakers[col].clone());
            correct += confusion[[c, col]];
        }
    }
    let total: f64 = confusion.sum();
    // summation order differs; keep a perfect score from overshooting
    let correct = correct.min(total);
    let recall = 100.0 * correct / total;
    Ok(ScoreReport {
        session_id: reference.session_id.clone(),
        n_segments: reference.len(),
        total_speech: total,
        correct,
        recall_pct: recall,
        error_pct: 100.0 * (total - correct) / total,
        missed_speech_pct: 0.0,
        false_alarm_pct: 0.0,
        speakers,
        mapping,
        confusion: matrix_to_rows(confusion.view()),
    })
}

/// Scores only the segments passing a duration threshold.
pub fn score_filtered(
    reference: &SegmentTable,
    hyp: &[usize],
    threshold: f64,
    filter: DurationFilter,
) -> Result<ScoreReport> {
    if hyp.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "hypothesis labels vs reference segments",
            expected: reference.len(),
            got: hyp.len(),
        });
    }
    let keep: Vec<bool> = reference
        .segments()
        .iter()
        .map(|s| match filter {
            DurationFilter::LongerThan => s.duration() > threshold,
            DurationFilter::AtMost => s.duration() <= threshold,
        })
        .collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::NotEnoughSamples {
            msg: format!("no segment passes the {filter:?} {threshold} s filter"),
        });
    }
    let mut it = keep.iter();
    let kept = reference.filtered(|_| *it.next().expect("one flag per segment"));
    let kept_hyp: Vec<usize> = hyp.iter().zip(&keep).filter(|(_, &k)| k).map(|(&h, _)| h).collect();
    score(&kept, &kept_hyp)
}

impl ScoreReport {
    /// Pools several reports: recall is correct time over total time.
    pub fn pooled(reports: &[ScoreReport]) -> Option<(f64, f64, f64)> {
        let total: f64 = reports.iter().map(|r| r.total_speech).sum();
        let correct: f64 = reports.iter().map(|r| r.correct).sum();
        (total > 0.0).then(|| (total, correct, 100.0 * correct / total))
    }
}

/// One labeled row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

/// Fixed-width table, two decimals, `N/A` for missing cells.
pub fn format_table(title: &str, columns: &[String], rows: &[TableRow]) -> String {
    let first = rows
        .iter()
        .map(|r| r.label.len())
        .chain([title.len()])
        .max()
        .unwrap_or(0)
        + 2;
    let width = columns.iter().map(|c| c.len()).max().unwrap_or(0).max(8) + 2;
    let mut s = String::new();
    write!(s, "{title:<first$}").expect("string write");
    for c in columns {
        write!(s, "{c:>width$}").expect("string write");
    }
    s.push('\n');
    s.push_str(&"-".repeat(first + width * columns.len()));
    s.push('\n');
    for r in rows {
        write!(s, "{:<first$}", r.label).expect("string write");
        for v in &r.values {
            match v {
                Some(v) => write!(s, "{v:>width$.2}"),
                None => write!(s, "{:>width$}", "N/A"),
            }
            .expect("string write");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Segment;

    fn table(spec: &[(f64, f64, &str)]) -> SegmentTable {
        SegmentTable::new(
            "t",
            spec.iter().map(|&(s, e, w)| Segment::labeled(s, e, w).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_swapped_segment() {
        let t = table(&[(0.0, 1.0, "A"), (1.0, 2.0, "B"), (2.0, 3.0, "A"), (3.0, 4.0, "B")]);
        let r = score(&t, &[0, 1, 1, 1]).unwrap();
        assert_eq!(r.recall_pct, 75.0);
        assert_eq!(r.error_pct, 25.0);
        assert_eq!(r.confusion, vec![vec![1.0, 0.0], vec![1.0, 2.0]]);
        assert_eq!(r.mapping[&0], "A");
    }

    #[test]
    fn single_cluster_gets_half() {
        let t = table(&[(0.0, 2.0, "A"), (2.0, 4.0, "B")]);
        assert_eq!(score(&t, &[0, 0]).unwrap().recall_pct, 50.0);
    }

    #[test]
    fn extra_clusters_count_as_error() {
        let t = table(&[(0.0, 1.0, "A"), (1.0, 2.0, "A"), (2.0, 4.0, "B")]);
        let r = score(&t, &[0, 2, 1]).unwrap();
        assert_eq!(r.correct, 3.0);
        assert!(!r.mapping.contains_key(&2));
    }

    #[test]
    fn filtering() {
        let t = table(&[(0.0, 0.4, "A"), (0.5, 0.9, "B"), (1.0, 3.0, "A"), (3.0, 5.0, "B")]);
        let hyp = [1, 0, 0, 1];
        assert_eq!(score_filtered(&t, &hyp, 0.0, DurationFilter::LongerThan).unwrap(), score(&t, &hyp).unwrap());
        let long = score_filtered(&t, &hyp, 0.5, DurationFilter::LongerThan).unwrap();
        assert_eq!(long.recall_pct, 100.0);
        assert_eq!(long.total_speech, 4.0);
        let short = score_filtered(&t, &hyp, 0.5, DurationFilter::AtMost).unwrap();
        assert_eq!(short.n_segments, 2);
        assert!(score_filtered(&t, &hyp, 10.0, DurationFilter::LongerThan).is_err());
        assert!(score(&t, &hyp[..3]).is_err());
    }

    #[test]
    fn table_layout() {
        let rows = [
            TableRow { label: "kmeans".into(), values: vec![Some(91.234), None] },
            TableRow { label: "dec_improved".into(), values: vec![Some(100.0), Some(7.5)] },
        ];
        let t = format_table("Method", &["All".into(), "> 0.5s".into()], &rows);
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].ends_with("91.23       N/A"));
        assert!(lines.iter().skip(2).all(|l| l.len() == lines[0].len()));
    }
}
