//! Minimal-edit alignment of model words to reference words, and projection
//! of predicted durations onto reference positions.

use serde::{Deserialize, Serialize};

use crate::corpus::RtSentence;
use crate::parse::{DurationMap, MapStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOp {
    Match,
    Substitute,
    Delete,
    Insert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignStep {
    pub op: EditOp,
    pub ref_index: Option<usize>,
    pub hyp_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub ops: Vec<AlignStep>,
    pub cost: usize,
}

/// Case-folded word with leading and trailing punctuation removed.
pub fn normalize_word(w: &str) -> String {
    w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// Unit-cost edit alignment. Ties on the backtrace prefer match, then
/// substitute, then delete, then insert, starting from the end of both
/// sequences.
pub fn align_sequences<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hypothesis: &[H]) -> Alignment {
    let r: Vec<String> = reference.iter().map(|w| normalize_word(w.as_ref())).collect();
    let h: Vec<String> = hypothesis.iter().map(|w| normalize_word(w.as_ref())).collect();
    align_normalized(&r, &h)
}

/// Alignment over already-comparable tokens.
pub fn align_normalized<T: PartialEq>(r: &[T], h: &[T]) -> Alignment {
    let (n, m) = (r.len(), h.len());
    let width = m + 1;
    let mut dist = vec![0usize; (n + 1) * width];
    for i in 0..=n {
        dist[i * width] = i;
    }
    for (j, d) in dist[..width].iter_mut().enumerate() {
        *d = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = dist[(i - 1) * width + j - 1] + usize::from(r[i - 1] != h[j - 1]);
            let up = dist[(i - 1) * width + j] + 1;
            let left = dist[i * width + j - 1] + 1;
            dist[i * width + j] = diag.min(up).min(left);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        if i > 0 && j > 0 {
            let diag = dist[(i - 1) * width + j - 1];
            let same = r[i - 1] == h[j - 1];
            if same && here == diag {
                ops.push(AlignStep {
                    op: EditOp::Match,
                    ref_index: Some(i - 1),
                    hyp_index: Some(j - 1),
                });
                i -= 1;
                j -= 1;
                continue;
            }
            if !same && here == diag + 1 {
                ops.push(AlignStep {
                    op: EditOp::Substitute,
                    ref_index: Some(i - 1),
                    hyp_index: Some(j - 1),
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == dist[(i - 1) * width + j] + 1 {
            ops.push(AlignStep {
                op: EditOp::Delete,
                ref_index: Some(i - 1),
                hyp_index: None,
            });
            i -= 1;
            continue;
        }
        ops.push(AlignStep {
            op: EditOp::Insert,
            ref_index: None,
            hyp_index: Some(j - 1),
        });
        j -= 1;
    }
    ops.reverse();
    Alignment {
        ops,
        cost: dist[n * width + m],
    }
}

/// Predicted durations on reference positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPrediction {
    pub sentence_id: String,
    pub values: Vec<Option<f64>>,
    pub coverage: f64,
}

impl AlignedPrediction {
    pub fn empty(sentence_id: &str, len: usize) -> Self {
        AlignedPrediction {
            sentence_id: sentence_id.to_string(),
            values: vec![None; len],
            coverage: 0.0,
        }
    }

    pub fn present(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectOptions {
    /// Substituted positions receive the hypothesis value.
    pub keep_substitutions: bool,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions {
            keep_substitutions: true,
        }
    }
}

pub fn project_predictions(reference: &RtSentence, dmap: &DurationMap, opts: ProjectOptions) -> AlignedPrediction {
    let n = reference.tokens.len();
    if dmap.status == MapStatus::Unparseable || n == 0 {
        return AlignedPrediction::empty(&reference.id, n);
    }
    let alignment = align_sequences(&reference.words(), &dmap.words());
    let mut values = vec![None; n];
    for step in &alignment.ops {
        let (Some(ri), Some(hi)) = (step.ref_index, step.hyp_index) else {
            continue;
        };
        if step.op == EditOp::Match || opts.keep_substitutions {
            values[ri] = Some(dmap.pairs[hi].1);
        }
    }
    let present = values.iter().filter(|v| v.is_some()).count();
    AlignedPrediction {
        sentence_id: reference.id.clone(),
        values,
        coverage: present as f64 / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(a: &Alignment) -> Vec<EditOp> {
        a.ops.iter().map(|s| s.op).collect()
    }

    #[test]
    fn identity() {
        let a = align_sequences(&["I", "like", "cats"], &["I", "like", "cats"]);
        assert_eq!(a.cost, 0);
        assert_eq!(ops(&a), [EditOp::Match; 3]);
    }

    #[test]
    fn single_deletion() {
        let a = align_sequences(&["the", "cat", "sat"], &["the", "sat"]);
        assert_eq!(a.cost, 1);
        assert_eq!(ops(&a), [EditOp::Match, EditOp::Delete, EditOp::Match]);
        assert_eq!(a.ops[1].ref_index, Some(1));
        assert_eq!(a.ops[1].hyp_index, None);
    }

    #[test]
    fn empty_hypothesis() {
        let a = align_sequences(&["a", "b"], &[] as &[&str]);
        assert_eq!(a.cost, 2);
        assert_eq!(ops(&a), [EditOp::Delete, EditOp::Delete]);
    }

    #[test]
    fn normalization_ignores_case_and_edge_punctuation() {
        let a = align_sequences(&["\"Hello,", "World."], &["hello", "world"]);
        assert_eq!(a.cost, 0);
        assert_eq!(normalize_word("don't!"), "don't");
    }

    #[test]
    fn projection_cases() {
        let s = RtSentence::from_pairs("s", [("a", 1.0), ("b", 1.0), ("c", 1.0), ("d", 1.0), ("e", 1.0)]);
        let echo = DurationMap {
            pairs: vec![
                ("a".into(), 1.0),
                ("b".into(), 2.0),
                ("c".into(), 3.0),
                ("d".into(), 4.0),
                ("e".into(), 5.0),
            ],
            status: MapStatus::Ok,
        };
        let p = project_predictions(&s, &echo, ProjectOptions::default());
        assert_eq!(p.coverage, 1.0);
        assert_eq!(p.values, [Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)]);

        let mut dropped = echo.clone();
        dropped.pairs.remove(2);
        let p = project_predictions(&s, &dropped, ProjectOptions::default());
        assert!((p.coverage - 0.8).abs() < 1e-12);
        assert_eq!(p.values, [Some(1.0), Some(2.0), None, Some(4.0), Some(5.0)]);

        let mut extra = echo.clone();
        extra.pairs.insert(1, ("zzz".into(), 999.0));
        let p = project_predictions(&s, &extra, ProjectOptions::default());
        assert_eq!(p.coverage, 1.0);
        assert_eq!(p.values, [Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)]);
    }

    #[test]
    fn substitutions_project_unless_disabled() {
        let s = RtSentence::from_pairs("s", [("the", 1.0), ("cat", 1.0)]);
        let m = DurationMap {
            pairs: vec![("the".into(), 100.0), ("kat".into(), 150.0)],
            status: MapStatus::Recovered,
        };
        let p = project_predictions(&s, &m, ProjectOptions::default());
        assert_eq!(p.values, [Some(100.0), Some(150.0)]);
        let p = project_predictions(
            &s,
            &m,
            ProjectOptions {
                keep_substitutions: false,
            },
        );
        assert_eq!(p.values, [Some(100.0), None]);
        assert_eq!(p.coverage, 0.5);
    }

    #[test]
    fn unparseable_map_projects_nothing() {
        let s = RtSentence::from_pairs("s", [("a", 1.0)]);
        let p = project_predictions(&s, &DurationMap::unparseable(), ProjectOptions::default());
        assert_eq!(p.values, [None]);
        assert_eq!(p.coverage, 0.0);
    }
}
