//! Detection metrics over a confusion matrix and the between/within-class
//! separability of a labeled representation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Counts indexed by `(true class, predicted class)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes {
            return Err(Error::dim(format!(
                "{} class names for {} classes",
                names.len(),
                self.n_classes
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    /// Header `true\predicted,<class>...`, then one row per true class.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        w.write_record(&header)?;
        for t in 0..self.n_classes {
            let mut rec = vec![self.class_names[t].clone()];
            rec.extend((0..self.n_classes).map(|p| self.get(t, p).to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    fn require_rows(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::EmptyInput("confusion matrix has no entries".into()));
        }
        Ok(())
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::dim(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::dim(format!(
                "label pair ({t}, {p}) out of range for {n_classes} classes"
            )));
        }
        counts[t * n_classes + p] += 1;
    }
    Ok(ConfusionMatrix {
        n_classes,
        counts,
        class_names: (0..n_classes).map(|c| c.to_string()).collect(),
    })
}

/// Fraction of correctly classified rows.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.require_rows()?;
    Ok(cm.trace() as f64 / cm.total() as f64)
}

/// One-vs-rest F1 of class `c`; zero when precision and recall are both zero.
pub fn class_f1(cm: &ConfusionMatrix, c: usize) -> f64 {
    let tp = cm.get(c, c) as f64;
    let predicted: u64 = (0..cm.n_classes).map(|t| cm.get(t, c)).sum();
    let actual: u64 = (0..cm.n_classes).map(|p| cm.get(c, p)).sum();
    let precision = if predicted > 0 {
        tp / predicted as f64
    } else {
        0.0
    };
    let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Unweighted mean of per-class F1 scores.
pub fn fscore(cm: &ConfusionMatrix) -> Result<f64> {
    cm.require_rows()?;
    let sum: f64 = (0..cm.n_classes).map(|c| class_f1(cm, c)).sum();
    Ok(sum / cm.n_classes as f64)
}

/// False alarm rate `FP / (FP + TN)` and miss detection rate `FN / (FN + TP)`
/// after collapsing every non-normal class into "attack".
pub fn far_mdr(cm: &ConfusionMatrix, normal_class: usize) -> Result<(f64, f64)> {
    if normal_class >= cm.n_classes {
        return Err(Error::config(format!(
            "normal class {normal_class} out of range for {} classes",
            cm.n_classes
        )));
    }
    let (mut tp, mut tn, mut fp, mut f_n) = (0u64, 0u64, 0u64, 0u64);
    for t in 0..cm.n_classes {
        for p in 0..cm.n_classes {
            let n = cm.get(t, p);
            match (t == normal_class, p == normal_class) {
                (true, true) => tn += n,
                (true, false) => fp += n,
                (false, true) => f_n += n,
                (false, false) => tp += n,
            }
        }
    }
    if fp + tn == 0 {
        return Err(Error::UndefinedMetric(
            "FAR needs at least one normal sample".into(),
        ));
    }
    if f_n + tp == 0 {
        return Err(Error::UndefinedMetric(
            "MDR needs at least one attack sample".into(),
        ));
    }
    Ok((fp as f64 / (fp + tn) as f64, f_n as f64 / (f_n + tp) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionReport {
    pub accuracy: f64,
    pub fscore: f64,
    pub far: f64,
    pub mdr: f64,
}

impl DetectionReport {
    pub fn from_confusion(cm: &ConfusionMatrix, normal_class: usize) -> Result<Self> {
        let (far, mdr) = far_mdr(cm, normal_class)?;
        Ok(Self {
            accuracy: accuracy(cm)?,
            fscore: fscore(cm)?,
            far,
            mdr,
        })
    }

    pub fn rows(&self) -> [(&'static str, f64); 4] {
        [
            ("accuracy", self.accuracy),
            ("fscore", self.fscore),
            ("far", self.far),
            ("mdr", self.mdr),
        ]
    }

    /// `metric,value` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_metric_rows(path, &self.rows())
    }
}

pub(crate) fn write_metric_rows(path: impl AsRef<Path>, rows: &[(&str, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "value"])?;
    for (name, v) in rows {
        w.write_record([name.to_string(), format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-class mean row of `z`, for classes `0..n_classes`.
pub fn class_means(z: &Matrix, labels: &[usize], n_classes: usize) -> Result<Vec<Vec<f64>>> {
    if labels.len() != z.rows() {
        return Err(Error::dim(format!(
            "{} labels for {} rows",
            labels.len(),
            z.rows()
        )));
    }
    let mut sums = vec![vec![0.0; z.cols()]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (row, &c) in z.iter_rows().zip(labels) {
        if c >= n_classes {
            return Err(Error::dim(format!(
                "label {c} out of range for {n_classes} classes"
            )));
        }
        counts[c] += 1;
        for (s, &v) in sums[c].iter_mut().zip(row) {
            *s += v;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyInput(format!("class {c} has no samples")));
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(sums)
}

/// Separability of a labeled representation.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub d_bet: f64,
    pub d_wit: f64,
    /// `d_bet / d_wit`.
    pub data_quality: f64,
    pub class_means: Vec<Vec<f64>>,
    pub class_counts: Vec<usize>,
    pub dim: usize,
}

impl QualityReport {
    pub fn rows(&self) -> [(&'static str, f64); 3] {
        [
            ("d_bet", self.d_bet),
            ("d_wit", self.d_wit),
            ("data_quality", self.data_quality),
        ]
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_metric_rows(path, &self.rows())
    }
}

/// Between-class variance, within-class variance, and their ratio.
///
/// `d_bet = 1/(2·d) Σ_k Σ_c Σ_c' (μ_c,k − μ_c',k)²` over all ordered class pairs,
/// `d_wit = 1/(d·n) Σ_k Σ_c Σ_i∈c (z_i,k − μ_c,k)²`.
/// Classes are the distinct labels present in `labels`.
pub fn quality(z: &Matrix, labels: &[usize]) -> Result<QualityReport> {
    if labels.len() != z.rows() {
        return Err(Error::dim(format!(
            "{} labels for {} rows",
            labels.len(),
            z.rows()
        )));
    }
    if z.cols() == 0 {
        return Err(Error::dim("representation has no columns"));
    }
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::config(format!(
            "data quality needs at least two classes, found {}",
            present.len()
        )));
    }
    let compact: Vec<usize> = labels
        .iter()
        .map(|l| present.binary_search(l).expect("label is present"))
        .collect();
    let means = class_means(z, &compact, present.len())?;
    let mut counts = vec![0usize; present.len()];
    compact.iter().for_each(|&c| counts[c] += 1);

    let d = z.cols() as f64;
    let mut between = 0.0;
    for mc in &means {
        for mc2 in &means {
            between += mc
                .iter()
                .zip(mc2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
    }
    let d_bet = between / (d * 2.0);

    let mut within = 0.0;
    for (row, &c) in z.iter_rows().zip(&compact) {
        within += row
            .iter()
            .zip(&means[c])
            .map(|(v, m)| (v - m) * (v - m))
            .sum::<f64>();
    }
    let d_wit = within / (d * z.rows() as f64);

    if d_wit.is_nan() || d_wit <= 0.0 {
        return Err(Error::UndefinedQuality { d_bet, d_wit });
    }
    Ok(QualityReport {
        d_bet,
        d_wit,
        data_quality: d_bet / d_wit,
        class_means: means,
        class_counts: counts,
        dim: z.cols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn binary_cm(tp: usize, tn: usize, fp: usize, f_n: usize) -> ConfusionMatrix {
        // class 0 = negative/normal, class 1 = positive/attack
        let mut t = Vec::new();
        let mut p = Vec::new();
        for _ in 0..tp {
            t.push(1);
            p.push(1);
        }
        for _ in 0..tn {
            t.push(0);
            p.push(0);
        }
        for _ in 0..fp {
            t.push(0);
            p.push(1);
        }
        for _ in 0..f_n {
            t.push(1);
            p.push(0);
        }
        confusion(&t, &p, 2).unwrap()
    }

    #[test]
    fn confusion_cases() {
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                assert_eq!(cm.get(t, p), u64::from(t == p));
            }
        }
        let cm = confusion(&[0], &[1], 2).unwrap();
        assert_eq!(cm.get(0, 1), 1);
        assert_eq!(cm.total(), 1);
        assert!(confusion(&[0, 3], &[0, 0], 3).is_err());
        assert!(confusion(&[0], &[0, 0], 3).is_err());
    }

    #[test]
    fn binary_hand_values() {
        let cm = binary_cm(4, 4, 1, 1);
        assert!((accuracy(&cm).unwrap() - 0.8).abs() < 1e-15);
        assert!((class_f1(&cm, 1) - 0.8).abs() < 1e-15);
        let perfect = binary_cm(3, 5, 0, 0);
        assert_eq!(accuracy(&perfect).unwrap(), 1.0);
        assert_eq!(fscore(&perfect).unwrap(), 1.0);
        assert_eq!(far_mdr(&perfect, 0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn far_hand_case() {
        let cm = binary_cm(5, 9, 1, 0);
        let (far, mdr) = far_mdr(&cm, 0).unwrap();
        assert!((far - 0.1).abs() < 1e-15);
        assert_eq!(mdr, 0.0);
    }

    #[test]
    fn far_mdr_undefined_cases() {
        let only_attacks = confusion(&[1, 1], &[1, 0], 2).unwrap();
        assert!(matches!(
            far_mdr(&only_attacks, 0),
            Err(Error::UndefinedMetric(_))
        ));
        let only_normal = confusion(&[0, 0], &[0, 1], 2).unwrap();
        assert!(matches!(
            far_mdr(&only_normal, 0),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(far_mdr(&only_normal, 2).is_err());
    }

    #[test]
    fn empty_matrix_errors() {
        let cm = confusion(&[], &[], 3).unwrap();
        assert!(accuracy(&cm).is_err());
        assert!(fscore(&cm).is_err());
    }

    #[test]
    fn class_f1_with_no_predictions_is_zero() {
        let cm = confusion(&[0, 1, 2], &[0, 0, 0], 3).unwrap();
        assert_eq!(class_f1(&cm, 1), 0.0);
        assert!((fscore(&cm).unwrap() - (0.5 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn class_means_cases() {
        let z = Matrix::from_rows(&[[0.0], [0.2], [1.0]]).unwrap();
        let m = class_means(&z, &[0, 0, 1], 2).unwrap();
        assert!((m[0][0] - 0.1).abs() < 1e-15);
        assert_eq!(m[1][0], 1.0);
        assert!(class_means(&z, &[0, 0, 0], 2).is_err());

        let mut rng = Rng::new(3);
        let z = Matrix::from_vec(4, 2, (0..8).map(|_| rng.normal()).collect()).unwrap();
        let m = class_means(&z, &[3, 1, 0, 2], 4).unwrap();
        assert_eq!(m[3], z.row(0).to_vec());
        assert_eq!(m[0], z.row(2).to_vec());
    }

    #[test]
    fn quality_hand_fixture() {
        let z = Matrix::from_rows(&[[0.0], [0.2], [1.0], [1.2]]).unwrap();
        let q = quality(&z, &[0, 0, 1, 1]).unwrap();
        assert!((q.d_bet - 1.0).abs() < 1e-12);
        assert!((q.d_wit - 0.01).abs() < 1e-12);
        assert!((q.data_quality - 100.0).abs() < 1e-9);
    }

    #[test]
    fn quality_invariances() {
        let mut rng = Rng::new(5);
        let z = Matrix::from_vec(30, 3, (0..90).map(|_| rng.normal()).collect()).unwrap();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let q = quality(&z, &labels).unwrap();

        let shifted = Matrix::from_vec(
            30,
            3,
            z.as_slice()
                .iter()
                .enumerate()
                .map(|(i, v)| v + [3.0, -7.0, 0.5][i % 3])
                .collect(),
        )
        .unwrap();
        let qs = quality(&shifted, &labels).unwrap();
        assert!((qs.d_bet - q.d_bet).abs() < 1e-9);
        assert!((qs.d_wit - q.d_wit).abs() < 1e-9);

        let scaled = quality(&z.scale(2.5), &labels).unwrap();
        assert!((scaled.d_bet - 6.25 * q.d_bet).abs() < 1e-9);
        assert!((scaled.d_wit - 6.25 * q.d_wit).abs() < 1e-9);
        assert!((scaled.data_quality - q.data_quality).abs() < 1e-9);
    }

    #[test]
    fn quality_errors() {
        let z = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(quality(&z, &[0, 0]), Err(Error::InvalidConfig(_))));
        match quality(&z, &[0, 1]) {
            Err(Error::UndefinedQuality { d_bet, d_wit }) => {
                assert_eq!(d_bet, 1.0);
                assert_eq!(d_wit, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quality_ignores_label_gaps() {
        let z = Matrix::from_rows(&[[0.0], [0.2], [1.0], [1.2]]).unwrap();
        let q = quality(&z, &[4, 4, 9, 9]).unwrap();
        assert!((q.data_quality - 100.0).abs() < 1e-9);
    }

    #[test]
    fn csv_exports() {
        let dir = tempfile::tempdir().unwrap();
        let cm = confusion(&[0, 1, 1], &[0, 1, 0], 2)
            .unwrap()
            .with_class_names(vec!["normal".into(), "dos".into()])
            .unwrap();
        let p = dir.path().join("cm.csv");
        cm.write_csv(&p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "true\\predicted,normal,dos\nnormal,1,0\ndos,1,1\n"
        );
        let report = DetectionReport::from_confusion(&cm, 0).unwrap();
        let p = dir.path().join("m.csv");
        report.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let names: Vec<&str> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        assert_eq!(names, vec!["accuracy", "fscore", "far", "mdr"]);
    }
}
