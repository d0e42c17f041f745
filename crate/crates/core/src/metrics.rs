//! Classification metrics: AUROC, step-interpolated AUPRC and macro-averaged
//! accuracy, precision, recall and F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores and ground truth for one evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredLabels {
    /// One probability vector per sample.
    pub probs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl ScoredLabels {
    pub fn new(probs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if probs.len() != labels.len() {
            return Err(Error::Dimension(format!("{} score rows for {} labels", probs.len(), labels.len())));
        }
        Ok(ScoredLabels { probs, labels })
    }

    /// Binary case from positive-class scores.
    pub fn binary(scores: &[f64], labels: &[usize]) -> Result<Self> {
        ScoredLabels::new(scores.iter().map(|&p| vec![1.0 - p, p]).collect(), labels.to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Scores of class `class` against a one-vs-rest truth vector.
    pub fn one_vs_rest(&self, class: usize) -> (Vec<f64>, Vec<bool>) {
        let scores = self.probs.iter().map(|p| p.get(class).copied().unwrap_or(0.0)).collect();
        let truth = self.labels.iter().map(|&l| l == class).collect();
        (scores, truth)
    }

    /// Argmax predictions; ties go to the lowest class.
    pub fn predictions(&self) -> Vec<usize> {
        self.probs
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect()
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auroc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if scores.len() != positive.len() {
        return Err(Error::Dimension(format!("{} scores for {} labels", scores.len(), positive.len())));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::MetricUndefined(format!("AUROC needs both classes ({n_pos} positive, {n_neg} negative)")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over tie groups
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Average precision `Σ (R_k - R_{k-1}) P_k` over descending distinct score
/// thresholds.
pub fn auprc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Dimension(format!("{} scores for {} labels", scores.len(), positive.len())));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(Error::MetricUndefined("AUPRC needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += usize::from(positive[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Ok(ap)
}

/// Per-class confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// `matrix[truth][predicted]`.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], num_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; num_classes]; num_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        m[t][p] += 1;
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MulticlassReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ConfusionCounts>,
    /// Classes present in neither truth nor predictions; they score 0 and
    /// still count in the macro denominator.
    pub absent_classes: Vec<usize>,
}

pub fn multiclass_report(s: &ScoredLabels, num_classes: usize) -> Result<MulticlassReport> {
    if s.is_empty() {
        return Err(Error::MetricUndefined("no samples to score".into()));
    }
    if let Some(&bad) = s.labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Dimension(format!("label {bad} outside {num_classes} classes")));
    }
    let pred = s.predictions();
    let m = confusion_matrix(&s.labels, &pred, num_classes);
    let n = s.len();
    let trace: usize = (0..num_classes).map(|c| m[c][c]).sum();
    let mut per_class = Vec::with_capacity(num_classes);
    let mut absent = Vec::new();
    for c in 0..num_classes {
        let tp = m[c][c];
        let row: usize = m[c].iter().sum();
        let col: usize = m.iter().map(|r| r[c]).sum();
        if row == 0 && col == 0 {
            absent.push(c);
        }
        per_class.push(ConfusionCounts { tp, fp: col - tp, fn_: row - tp, tn: n + tp - row - col });
    }
    let k = num_classes as f64;
    Ok(MulticlassReport {
        accuracy: trace as f64 / n as f64,
        macro_precision: per_class.iter().map(ConfusionCounts::precision).sum::<f64>() / k,
        macro_recall: per_class.iter().map(ConfusionCounts::recall).sum::<f64>() / k,
        macro_f1: per_class.iter().map(ConfusionCounts::f1).sum::<f64>() / k,
        per_class,
        absent_classes: absent,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn pairwise(scores: &[f64], pos: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    fn enumerate_thresholds(scores: &[f64], pos: &[bool]) -> f64 {
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let n_pos = pos.iter().filter(|&&p| p).count() as f64;
        let (mut ap, mut prev) = (0.0, 0.0);
        for t in thresholds {
            let sel: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
            let tp = sel.iter().filter(|&&i| pos[i]).count() as f64;
            let r = tp / n_pos;
            ap += (r - prev) * tp / sel.len() as f64;
            prev = r;
        }
        ap
    }

    fn random_case(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<bool>) {
        loop {
            // coarse grid so ties occur
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..20) as f64 / 20.0).collect();
            let pos: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            if pos.iter().any(|&p| p) && pos.iter().any(|&p| !p) {
                return (scores, pos);
            }
        }
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert!(matches!(auroc(&[0.1, 0.2], &[true, true]), Err(Error::MetricUndefined(_))));
    }

    #[test]
    fn auroc_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (s, p) = random_case(&mut rng, 100);
            assert!((auroc(&s, &p).unwrap() - pairwise(&s, &p)).abs() < 1e-9);
        }
    }

    #[test]
    fn auprc_examples() {
        assert_eq!(auprc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        let p = [true, false, false, true, false];
        assert!((auprc(&[0.5; 5], &p).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(auprc(&[0.5, 0.2], &[false, false]), Err(Error::MetricUndefined(_))));
    }

    #[test]
    fn auprc_matches_threshold_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (s, p) = random_case(&mut rng, 100);
            assert!((auprc(&s, &p).unwrap() - enumerate_thresholds(&s, &p)).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_multiclass() {
        let s = ScoredLabels::new(vec![vec![0.9, 0.1, 0.0], vec![0.1, 0.8, 0.1], vec![0.0, 0.2, 0.8]], vec![0, 1, 2])
            .unwrap();
        let r = multiclass_report(&s, 3).unwrap();
        assert_eq!((r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_prediction_binary() {
        let s = ScoredLabels::binary(&[0.1, 0.2, 0.3, 0.4], &[0, 1, 0, 1]).unwrap();
        let r = multiclass_report(&s, 2).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.macro_recall, 0.5);
        assert_eq!(r.macro_precision, 0.25);
        assert_eq!(r.per_class[0], ConfusionCounts { tp: 2, fp: 2, fn_: 0, tn: 0 });
    }

    #[test]
    fn absent_classes_are_flagged_and_averaged_in() {
        let s = ScoredLabels::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec![0, 1]).unwrap();
        let r = multiclass_report(&s, 3).unwrap();
        assert_eq!(r.absent_classes, vec![2]);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn three_class_matches_direct_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 60;
        let probs: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let s = ScoredLabels::new(probs.clone(), labels.clone()).unwrap();
        let r = multiclass_report(&s, 3).unwrap();
        let pred: Vec<usize> =
            probs.iter().map(|p| (0..3).max_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap()).unwrap()).collect();
        let mut prec = 0.0;
        let mut rec = 0.0;
        for c in 0..3 {
            let tp = (0..n).filter(|&i| pred[i] == c && labels[i] == c).count() as f64;
            let pp = (0..n).filter(|&i| pred[i] == c).count() as f64;
            let ap = (0..n).filter(|&i| labels[i] == c).count() as f64;
            prec += tp / pp / 3.0;
            rec += tp / ap / 3.0;
        }
        let acc = (0..n).filter(|&i| pred[i] == labels[i]).count() as f64 / n as f64;
        assert_eq!(r.accuracy, acc);
        assert!((r.macro_precision - prec).abs() < 1e-15);
        assert!((r.macro_recall - rec).abs() < 1e-15);
        for c in &r.per_class {
            assert_eq!(c.tp + c.fp + c.fn_ + c.tn, n);
        }
    }

    proptest! {
        #[test]
        fn auroc_monotone_invariance(raw in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..60)) {
            let (s, p): (Vec<f64>, Vec<bool>) = raw.into_iter().unzip();
            prop_assume!(p.iter().any(|&x| x) && p.iter().any(|&x| !x));
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert!((auroc(&s, &p).unwrap() - auroc(&t, &p).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn auroc_label_flip_complements(n in 2usize..60, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // distinct scores
            let s: Vec<f64> = (0..n).map(|i| i as f64 + rng.gen::<f64>() * 0.5).collect();
            let p: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            prop_assume!(p.iter().any(|&x| x) && p.iter().any(|&x| !x));
            let flipped: Vec<bool> = p.iter().map(|x| !x).collect();
            prop_assert!((auroc(&s, &p).unwrap() + auroc(&s, &flipped).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn auprc_perfect_ranking(n_pos in 1usize..20, n_neg in 0usize..20) {
            let s: Vec<f64> = (0..n_pos + n_neg).map(|i| -(i as f64)).collect();
            let p: Vec<bool> = (0..n_pos + n_neg).map(|i| i < n_pos).collect();
            prop_assert!((auprc(&s, &p).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
