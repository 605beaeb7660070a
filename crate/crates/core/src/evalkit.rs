//! Two-class confusion matrices, derived metrics and the text tables used in
//! evaluation reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disambig::CommunityProfile;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("row {row}: label `{label}` is neither `{positive}` nor `{negative}`")]
    ForeignLabel { row: usize, label: String, positive: String, negative: String },
    #[error("confusion matrix is empty")]
    Empty,
}

/// Counts indexed by (actual, predicted).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix2 {
    pub positive: String,
    pub negative: String,
    pub pos_pos: u64,
    pub pos_neg: u64,
    pub neg_pos: u64,
    pub neg_neg: u64,
}

impl ConfusionMatrix2 {
    pub fn new(positive: impl Into<String>, negative: impl Into<String>, counts: [u64; 4]) -> Self {
        let [pos_pos, pos_neg, neg_pos, neg_neg] = counts;
        ConfusionMatrix2 { positive: positive.into(), negative: negative.into(), pos_pos, pos_neg, neg_pos, neg_neg }
    }

    pub fn total(&self) -> u64 {
        self.pos_pos + self.pos_neg + self.neg_pos + self.neg_neg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub matrix: ConfusionMatrix2,
    /// Rows left out of the matrix, by predicted label.
    pub skipped: BTreeMap<String, u64>,
}

pub fn tally<'a>(
    rows: impl IntoIterator<Item = (&'a str, &'a str)>,
    positive: &str,
    negative: &str,
    skip: &BTreeSet<String>,
) -> Result<Tally, EvalError> {
    let mut matrix = ConfusionMatrix2::new(positive, negative, [0; 4]);
    let mut skipped = BTreeMap::new();
    for (row, (gold, predicted)) in rows.into_iter().enumerate() {
        if skip.contains(predicted) {
            *skipped.entry(predicted.to_string()).or_default() += 1;
            continue;
        }
        let side = |label: &str| match label {
            l if l == positive => Ok(true),
            l if l == negative => Ok(false),
            l => Err(EvalError::ForeignLabel {
                row,
                label: l.to_string(),
                positive: positive.to_string(),
                negative: negative.to_string(),
            }),
        };
        match (side(gold)?, side(predicted)?) {
            (true, true) => matrix.pos_pos += 1,
            (true, false) => matrix.pos_neg += 1,
            (false, true) => matrix.neg_pos += 1,
            (false, false) => matrix.neg_neg += 1,
        }
    }
    Ok(Tally { matrix, skipped })
}

/// Percentages; `None` where a denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    /// Human-readable notes on undefined or conventional values.
    pub flags: Vec<String>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

fn class_metrics(label: &str, hit: u64, missed: u64, false_alarm: u64, flags: &mut Vec<String>) -> ClassMetrics {
    let precision = ratio(hit, hit + false_alarm);
    let recall = ratio(hit, hit + missed);
    if precision.is_none() {
        flags.push(format!("{label}: precision undefined (no predictions)"));
    }
    if recall.is_none() {
        flags.push(format!("{label}: recall undefined (no actual members)"));
    }
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r == 0.0 => {
            flags.push(format!("{label}: f1 set to 0 (precision and recall are 0)"));
            Some(0.0)
        }
        (Some(p), Some(r)) => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    ClassMetrics { label: label.to_string(), precision, recall, f1 }
}

pub fn derive_metrics(cm: &ConfusionMatrix2) -> Result<Metrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let mut flags = Vec::new();
    let positive = class_metrics(&cm.positive, cm.pos_pos, cm.pos_neg, cm.neg_pos, &mut flags);
    let negative = class_metrics(&cm.negative, cm.neg_neg, cm.neg_pos, cm.pos_neg, &mut flags);
    Ok(Metrics {
        accuracy: 100.0 * (cm.pos_pos + cm.neg_neg) as f64 / total as f64,
        positive,
        negative,
        flags,
    })
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    // Absorbs representation error such as 0.125 * 100 = 12.499999...
    let nudged = scaled + scaled.signum() * 1e-9;
    nudged.round() / 100.0
}

pub fn format_pct(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.2}", round2(v)),
        None => "undefined".to_string(),
    }
}

/// One row per community in id order: `id | positive% | negative%`.
pub fn distribution_table(profiles: &[CommunityProfile], positive: &str, negative: &str) -> String {
    let mut out = format!("Cluster | {positive} entities (%) | {negative} entities (%)\n");
    let mut sorted: Vec<&CommunityProfile> = profiles.iter().collect();
    sorted.sort_by_key(|p| p.community);
    for p in sorted {
        if p.label_distribution.is_empty() {
            writeln!(out, "{} | - | -", p.community).unwrap();
            continue;
        }
        let cell = |label: &str| format!("{}%", format_pct(Some(p.label_distribution.get(label).copied().unwrap_or(0.0))));
        writeln!(out, "{} | {} | {}", p.community, cell(positive), cell(negative)).unwrap();
    }
    out
}

pub fn confusion_table(cm: &ConfusionMatrix2) -> String {
    let (p, n) = (&cm.positive, &cm.negative);
    let mut out = format!("actual \\ predicted | {p} | {n}\n");
    writeln!(out, "{p} | {} | {}", cm.pos_pos, cm.pos_neg).unwrap();
    writeln!(out, "{n} | {} | {}", cm.neg_pos, cm.neg_neg).unwrap();
    out
}

/// Plain-text evaluation report: confusion matrix, metrics and skipped rows.
pub fn render_report(t: &Tally, m: &Metrics) -> String {
    let mut out = confusion_table(&t.matrix);
    writeln!(out, "\naccuracy: {}%", format_pct(Some(m.accuracy))).unwrap();
    for c in [&m.positive, &m.negative] {
        writeln!(
            out,
            "{}: precision {} recall {} f1 {}",
            c.label,
            format_pct(c.precision),
            format_pct(c.recall),
            format_pct(c.f1)
        )
        .unwrap();
    }
    for (label, n) in &t.skipped {
        writeln!(out, "skipped ({label}): {n}").unwrap();
    }
    for f in &m.flags {
        writeln!(out, "note: {f}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{ToPrimitive, Zero};
    use proptest::prelude::*;

    fn q(n: u64, d: u64) -> Option<BigRational> {
        (d > 0).then(|| BigRational::new(BigInt::from(100 * n), BigInt::from(d)))
    }

    fn f1(p: &Option<BigRational>, r: &Option<BigRational>) -> Option<BigRational> {
        let (p, r) = (p.as_ref()?, r.as_ref()?);
        let sum = p + r;
        if sum.is_zero() {
            return Some(BigRational::zero());
        }
        Some(BigRational::from_integer(BigInt::from(2)) * p * r / sum)
    }

    /// Exact accuracy, then (P, R, F1) for each class.
    fn oracle(c: [u64; 4]) -> Vec<Option<BigRational>> {
        let [a, b, x, d] = c;
        let (pp, pr) = (q(a, a + x), q(a, a + b));
        let (np, nr) = (q(d, d + b), q(d, d + x));
        let pf = f1(&pp, &pr);
        let nf = f1(&np, &nr);
        vec![q(a + d, a + b + x + d), pp, pr, pf, np, nr, nf]
    }

    fn flat(m: &Metrics) -> Vec<Option<f64>> {
        vec![
            Some(m.accuracy),
            m.positive.precision,
            m.positive.recall,
            m.positive.f1,
            m.negative.precision,
            m.negative.recall,
            m.negative.f1,
        ]
    }

    fn rows<'a>(pairs: &'a [(&'a str, &'a str)]) -> impl Iterator<Item = (&'a str, &'a str)> {
        pairs.iter().copied()
    }

    #[test]
    fn tally_basic() {
        let t = tally(rows(&[("c", "c"), ("c", "m"), ("m", "m")]), "c", "m", &BTreeSet::new()).unwrap();
        assert_eq!(t.matrix, ConfusionMatrix2::new("c", "m", [1, 1, 0, 1]));
        let t = tally(std::iter::empty(), "c", "m", &BTreeSet::new()).unwrap();
        assert_eq!(t.matrix.total(), 0);
    }

    #[test]
    fn tally_skips_unknown() {
        let mut data = vec![("c", "c"); 5];
        data.extend([("m", "m"); 3]);
        data.extend([("c", "unknown"), ("m", "unknown")]);
        let skip = BTreeSet::from(["unknown".to_string()]);
        let t = tally(rows(&data), "c", "m", &skip).unwrap();
        assert_eq!(t.matrix.total(), 8);
        assert_eq!(t.skipped["unknown"], 2);
    }

    #[test]
    fn tally_rejects_foreign_label() {
        let err = tally(rows(&[("c", "c"), ("x", "m")]), "c", "m", &BTreeSet::new()).unwrap_err();
        assert!(matches!(err, EvalError::ForeignLabel { row: 1, ref label, .. } if label == "x"));
    }

    #[test]
    fn reported_confusion_matrix() {
        let m = derive_metrics(&ConfusionMatrix2::new("crater", "mission", [1159, 293, 391, 418])).unwrap();
        let close = |got: Option<f64>, want: f64| (got.unwrap() - want).abs() <= 0.02;
        assert!(close(Some(m.accuracy), 69.76));
        assert!(close(m.positive.precision, 74.77));
        assert!(close(m.positive.recall, 79.82));
        assert!(close(m.positive.f1, 77.21));
        assert!(close(m.negative.precision, 58.78));
        assert!(close(m.negative.recall, 51.67));
        // 2·418 / (2·418 + 293 + 391) is exactly 55.
        assert!((m.negative.f1.unwrap() - 55.0).abs() < 1e-9);
        // Exact arithmetic rounds to 69.75 and 58.79.
        assert_eq!(format_pct(Some(m.accuracy)), "69.75");
        assert_eq!(format_pct(m.negative.precision), "58.79");
    }

    #[test]
    fn perfect_diagonal() {
        let m = derive_metrics(&ConfusionMatrix2::new("c", "m", [5, 0, 0, 5])).unwrap();
        assert!(flat(&m).iter().all(|v| *v == Some(100.0)));
        assert!(m.flags.is_empty());
    }

    #[test]
    fn undefined_metrics_flagged() {
        let m = derive_metrics(&ConfusionMatrix2::new("c", "m", [0, 4, 0, 3])).unwrap();
        assert_eq!(m.positive.precision, None);
        assert_eq!(m.positive.recall, Some(0.0));
        assert_eq!(m.positive.f1, None);
        assert!(!m.flags.is_empty());
        let m = derive_metrics(&ConfusionMatrix2::new("c", "m", [0, 2, 2, 0])).unwrap();
        assert_eq!(m.positive.f1, Some(0.0));
        assert!(m.flags.iter().any(|f| f.contains("f1 set to 0")));
        assert_eq!(derive_metrics(&ConfusionMatrix2::new("c", "m", [0; 4])), Err(EvalError::Empty));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_pct(Some(12.125)), "12.13");
        assert_eq!(format_pct(Some(0.005)), "0.01");
        assert_eq!(format_pct(Some(99.994)), "99.99");
        assert_eq!(format_pct(None), "undefined");
    }

    fn profile(community: usize, dist: &[(&str, f64)]) -> CommunityProfile {
        CommunityProfile {
            community,
            label_distribution: dist.iter().map(|&(l, v)| (l.to_string(), v)).collect(),
            assigned_label: dist.first().map_or("unlabeled".into(), |d| d.0.to_string()),
            member_count: 1,
            labeled_members: dist.len(),
            tie: false,
        }
    }

    #[test]
    fn distribution_rows() {
        let profiles = [
            profile(2, &[]),
            profile(0, &[("crater", 100.0 * 48.0 / 182.0), ("mission", 100.0 * 134.0 / 182.0)]),
            profile(1, &[("crater", 100.0)]),
        ];
        let table = distribution_table(&profiles, "crater", "mission");
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0 | 26.37% | 73.63%");
        assert_eq!(lines[2], "1 | 100.00% | 0.00%");
        assert_eq!(lines[3], "2 | - | -");
    }

    #[test]
    fn report_mentions_skips() {
        let t = Tally {
            matrix: ConfusionMatrix2::new("c", "m", [3, 1, 1, 3]),
            skipped: BTreeMap::from([("unknown".to_string(), 2)]),
        };
        let r = render_report(&t, &derive_metrics(&t.matrix).unwrap());
        assert!(r.contains("accuracy: 75.00%"));
        assert!(r.contains("skipped (unknown): 2"));
    }

    proptest! {
        #[test]
        fn matches_rational_oracle(c in prop::array::uniform4(0u64..5000)) {
            prop_assume!(c.iter().sum::<u64>() > 0);
            let got = flat(&derive_metrics(&ConfusionMatrix2::new("c", "m", c)).unwrap());
            for (g, want) in got.iter().zip(oracle(c)) {
                match (g, want) {
                    (Some(g), Some(w)) => prop_assert!((g - w.to_f64().unwrap()).abs() < 1e-9),
                    (None, None) => {}
                    other => prop_assert!(false, "definedness differs: {:?}", other),
                }
            }
        }

        #[test]
        fn accuracy_is_weighted_recall(c in prop::array::uniform4(1u64..5000)) {
            let m = derive_metrics(&ConfusionMatrix2::new("c", "m", c)).unwrap();
            let (pos, neg) = ((c[0] + c[1]) as f64, (c[2] + c[3]) as f64);
            let weighted = (m.positive.recall.unwrap() * pos + m.negative.recall.unwrap() * neg) / (pos + neg);
            prop_assert!((weighted - m.accuracy).abs() < 1e-9);
        }

        #[test]
        fn tally_order_invariant(data in prop::collection::vec((prop::bool::ANY, prop::bool::ANY), 1..60), rot in 0usize..60) {
            let label = |b: bool| if b { "c" } else { "m" };
            let pairs: Vec<(&str, &str)> = data.iter().map(|&(g, p)| (label(g), label(p))).collect();
            let mut rotated = pairs.clone();
            rotated.rotate_left(rot % pairs.len());
            rotated.reverse();
            let none = BTreeSet::new();
            let a = tally(rows(&pairs), "c", "m", &none).unwrap();
            let b = tally(rows(&rotated), "c", "m", &none).unwrap();
            prop_assert_eq!(derive_metrics(&a.matrix).unwrap(), derive_metrics(&b.matrix).unwrap());
        }
    }
}
