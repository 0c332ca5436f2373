//! Confusion matrices and the precision / recall / F1 / accuracy report.
//!
//! Rows are actual classes, columns are predicted classes. All values are
//! fractions in `[0, 1]`; percentages only appear in rendered text.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Self {
            classes,
            counts: vec![0; n * n],
        }
    }

    /// Builds a matrix from explicit row-major counts (rows = actual).
    pub fn from_counts(classes: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        let n = classes.len();
        if counts.len() != n * n {
            return Err(Error::Mismatch {
                expected: n * n,
                actual: counts.len(),
            });
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes.len() + predicted]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn add(&mut self, actual: usize, predicted: usize) -> Result<()> {
        let n = self.classes.len();
        if actual >= n || predicted >= n {
            return Err(Error::UnknownLabel(format!("index {}", actual.max(predicted))));
        }
        self.counts[actual * n + predicted] += 1;
        Ok(())
    }

    fn index_of(&self, label: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn accumulate(&mut self, actual: &str, predicted: &str) -> Result<()> {
        let a = self.index_of(actual)?;
        let p = self.index_of(predicted)?;
        self.add(a, p)
    }

    /// Cell-wise sum; both matrices must share the class list.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::Dataset("cannot merge matrices over different classes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.get(i, i)).sum()
    }

    pub fn report(&self) -> Result<MetricReport> {
        report(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// One-vs-rest precision, recall and F1 per class (0/0 := 0), unweighted
/// macro means, and accuracy = trace / total.
pub fn report(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let n = cm.n_classes();
    let mut per_class = Vec::with_capacity(n);
    for c in 0..n {
        let tp = cm.get(c, c) as f64;
        let predicted: u64 = (0..n).map(|a| cm.get(a, c)).sum();
        let actual: u64 = (0..n).map(|p| cm.get(c, p)).sum();
        let fp = predicted as f64 - tp;
        let fn_ = actual as f64 - tp;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        per_class.push(ClassMetrics {
            class: cm.classes[c].clone(),
            precision,
            recall,
            f1,
            support: actual,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n as f64;
    Ok(MetricReport {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy: cm.trace() as f64 / total as f64,
        per_class,
    })
}

impl MetricReport {
    /// Aligned plain-text table, values in percent.
    pub fn render_text(&self) -> String {
        let width = self
            .per_class
            .iter()
            .map(|m| m.class.len())
            .max()
            .unwrap_or(5)
            .max("macro avg".len());
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>8}",
            "class", "precision", "recall", "f1", "support"
        );
        for m in &self.per_class {
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>8}",
                m.class,
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.f1,
                m.support
            );
        }
        let support: u64 = self.per_class.iter().map(|m| m.support).sum();
        let _ = writeln!(
            s,
            "{:<width$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>8}",
            "macro avg",
            100.0 * self.macro_precision,
            100.0 * self.macro_recall,
            100.0 * self.macro_f1,
            support
        );
        let _ = writeln!(s, "accuracy {:.2}", 100.0 * self.accuracy);
        s
    }

    /// `class,precision,recall,f1,support` rows followed by `macro` and
    /// `accuracy` summary rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,precision,recall,f1,support\n");
        for m in &self.per_class {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                csv_field(&m.class),
                m.precision,
                m.recall,
                m.f1,
                m.support
            );
        }
        let support: u64 = self.per_class.iter().map(|m| m.support).sum();
        let _ = writeln!(
            s,
            "macro,{},{},{},{}",
            self.macro_precision, self.macro_recall, self.macro_f1, support
        );
        let _ = writeln!(s, "accuracy,,,,{}", self.accuracy);
        s
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn accumulate_basics() {
        let mut cm = ConfusionMatrix::new(vec!["A".into(), "B".into()]);
        cm.accumulate("A", "A").unwrap();
        assert_eq!(cm.trace(), 1);
        cm.accumulate("A", "B").unwrap();
        assert_eq!(cm.total(), 2);
        assert!(matches!(cm.accumulate("A", "Z"), Err(Error::UnknownLabel(_))));
        assert!(matches!(
            ConfusionMatrix::new(names(2)).report(),
            Err(Error::EmptyConfusion)
        ));
    }

    #[test]
    fn precision_example() {
        // positive class 0: 99 true positives, 1 false positive
        let cm = ConfusionMatrix::from_counts(names(2), vec![99, 0, 1, 0]).unwrap();
        let r = cm.report().unwrap();
        assert!((r.per_class[0].precision - 0.99).abs() < 1e-12);
    }

    #[test]
    fn f1_harmonic_example() {
        // P = 1, R = 0.5 for class 0
        let cm = ConfusionMatrix::from_counts(names(2), vec![1, 1, 0, 2]).unwrap();
        let r = cm.report().unwrap();
        assert_eq!(r.per_class[0].precision, 1.0);
        assert_eq!(r.per_class[0].recall, 0.5);
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_class_scores_zero() {
        let cm = ConfusionMatrix::from_counts(names(3), vec![3, 0, 0, 0, 2, 0, 0, 0, 0]).unwrap();
        let r = cm.report().unwrap();
        assert_eq!(r.per_class[2].precision, 0.0);
        assert_eq!(r.per_class[2].f1, 0.0);
        assert_eq!(r.per_class[2].support, 0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn diagonal_and_zero_diagonal() {
        let cm = ConfusionMatrix::from_counts(names(2), vec![5, 0, 0, 7]).unwrap();
        let r = cm.report().unwrap();
        assert_eq!((r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1), (1.0, 1.0, 1.0, 1.0));
        let cm = ConfusionMatrix::from_counts(names(2), vec![0, 5, 7, 0]).unwrap();
        assert_eq!(cm.report().unwrap().accuracy, 0.0);
    }

    #[test]
    fn text_and_csv_render() {
        let cm = ConfusionMatrix::from_counts(vec!["a,b".into(), "c".into()], vec![2, 1, 0, 3]).unwrap();
        let r = cm.report().unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("class,precision,recall,f1,support\n\"a,b\","));
        assert!(csv.contains("\naccuracy,,,,0.8333333333333334\n"));
        assert!(r.render_text().contains("accuracy 83.33"));
    }

    fn matrix() -> impl Strategy<Value = (usize, Vec<u64>)> {
        (2usize..5).prop_flat_map(|n| (Just(n), prop::collection::vec(0u64..20, n * n)))
    }

    proptest! {
        #[test]
        fn report_invariants((n, counts) in matrix()) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let cm = ConfusionMatrix::from_counts(names(n), counts.clone()).unwrap();
            let r = cm.report().unwrap();
            prop_assert_eq!(r.accuracy, cm.trace() as f64 / cm.total() as f64);
            // micro recall equals accuracy
            let micro_tp: u64 = (0..n).map(|i| cm.get(i, i)).sum();
            prop_assert_eq!(micro_tp as f64 / cm.total() as f64, r.accuracy);
            for m in &r.per_class {
                for v in [m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!(m.f1 <= (m.precision + m.recall) / 2.0 + 1e-12);
                prop_assert_eq!(m.f1 == 0.0, m.precision * m.recall == 0.0);
            }
            // permuting classes permutes per-class metrics, macro unchanged
            let perm: Vec<usize> = (0..n).rev().collect();
            let mut permuted = vec![0u64; n * n];
            for a in 0..n {
                for p in 0..n {
                    permuted[perm[a] * n + perm[p]] = counts[a * n + p];
                }
            }
            let mut pnames = names(n);
            for (i, &pi) in perm.iter().enumerate() {
                pnames[pi] = format!("c{i}");
            }
            let r2 = ConfusionMatrix::from_counts(pnames, permuted).unwrap().report().unwrap();
            prop_assert!((r2.macro_f1 - r.macro_f1).abs() < 1e-12);
            prop_assert!((r2.macro_precision - r.macro_precision).abs() < 1e-12);
            prop_assert_eq!(r2.accuracy, r.accuracy);
            for i in 0..n {
                prop_assert_eq!(r2.per_class[perm[i]].f1, r.per_class[i].f1);
            }
        }

        #[test]
        fn accumulation_is_order_independent(log in prop::collection::vec((0usize..3, 0usize..3), 1..40)) {
            let mut a = ConfusionMatrix::new(names(3));
            for &(x, y) in &log {
                a.add(x, y).unwrap();
            }
            let mut b = ConfusionMatrix::new(names(3));
            for &(x, y) in log.iter().rev() {
                b.add(x, y).unwrap();
            }
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.total(), log.len() as u64);
            let mut merged = ConfusionMatrix::new(names(3));
            merged.merge(&a).unwrap();
            merged.merge(&b).unwrap();
            prop_assert_eq!(merged.total(), 2 * log.len() as u64);
        }
    }
}
