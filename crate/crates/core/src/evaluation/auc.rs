use crate::data::{Label, TaskMode};
use crate::error::{ensure, Error, Result};

/// Area under the ROC curve via the Mann-Whitney rank sum; tied scores
/// count one half.
///
/// Fails when the labels contain only one class or a score is NaN.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    ensure!(scores.len() == labels.len(), Argument, "{} scores for {} labels", scores.len(), labels.len());
    ensure!(scores.iter().all(|s| !s.is_nan()), Numerical, "AUC of NaN scores");
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data("AUC is undefined for single-class labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks, 1-based; sums of half-integers stay exact at these sizes
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        rank_sum_pos += mid * order[i..j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j;
    }
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// One AUC per output: one-vs-rest per class for multiclass, per task for
/// multi-task. `None` where the evaluated labels hold a single class.
pub fn output_aucs(probs: &[Vec<f64>], labels: &[Label], task_mode: TaskMode) -> Vec<Option<f64>> {
    (0..task_mode.arity())
        .map(|k| {
            let scores: Vec<f64> = probs.iter().map(|p| p[k]).collect();
            let truth: Vec<bool> = labels
                .iter()
                .map(|l| match l {
                    Label::Class(c) => *c == k,
                    Label::Tasks(t) => t[k] > 0.5,
                })
                .collect();
            auc(&scores, &truth).ok()
        })
        .collect()
}

/// Unweighted mean of the defined per-output AUCs; a binary task reports
/// its single AUC.
pub fn mean_auc(probs: &[Vec<f64>], labels: &[Label], task_mode: TaskMode) -> Option<f64> {
    let defined: Vec<f64> = output_aucs(probs, labels, task_mode).into_iter().flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    num += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    #[test]
    fn examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert_eq!(auc(&[0.3; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn multiclass_one_vs_rest() {
        let probs = vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]];
        let labels = vec![Label::Class(0), Label::Class(1), Label::Class(2)];
        assert_eq!(mean_auc(&probs, &labels, TaskMode::Multiclass(3)), Some(1.0));
        let labels = vec![Label::Class(0), Label::Class(0), Label::Class(0)];
        assert_eq!(mean_auc(&probs, &labels, TaskMode::Multiclass(3)), None);
    }

    proptest! {
        #[test]
        fn matches_pair_count(raw in prop::collection::vec((0u8..6, any::<bool>()), 2..60)) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64 / 5.0).collect();
            let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let a = auc(&scores, &labels).unwrap();
            prop_assert!((a - brute(&scores, &labels)).abs() <= 1e-12);
            let shifted: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 2.0).collect();
            prop_assert_eq!(auc(&shifted, &labels).unwrap(), a);
        }
    }
}
