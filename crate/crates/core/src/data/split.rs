use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Label;
use crate::error::{ensure, Result};
use crate::numeric::Rng;

/// Fraction of each training fold held out for early stopping.
pub const VALIDATION_FRACTION: f64 = 0.2;

const STREAM_FOLDS: u64 = 0x5f01d;
const STREAM_VALIDATION: u64 = 0x5f02d;
const STREAM_SUBSAMPLE: u64 = 0x5f03d;

/// Index partition for one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

fn strata(labels: &[Label], indices: impl IntoIterator<Item = usize>) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in indices {
        groups.entry(labels[i].stratum()).or_default().push(i);
    }
    groups
}

/// Splits `0..labels.len()` into `k` test folds; the remaining indices of
/// each fold are divided into training and validation (20% stratified).
///
/// With `k == 1` a single stratified 20% hold-out plays the test fold.
pub fn kfold_split(labels: &[Label], k: usize, seed: u64, stratify: bool) -> Result<Vec<Fold>> {
    ensure!(k >= 1, Config, "fold count must be at least 1");
    ensure!(labels.len() >= 2, Config, "need at least two samples to split");
    let mut rng = Rng::for_stream(seed, &[STREAM_FOLDS, k as u64]);
    if k == 1 {
        let all: Vec<usize> = (0..labels.len()).collect();
        let (rest, test) = validation_split(labels, &all, seed ^ 0x7e57, VALIDATION_FRACTION);
        let (train, validation) = validation_split(labels, &rest, seed, VALIDATION_FRACTION);
        return Ok(vec![Fold { train, validation, test }]);
    }
    let groups = if stratify {
        let groups = strata(labels, 0..labels.len());
        for (class, members) in &groups {
            ensure!(
                members.len() >= k,
                Config,
                "stratum {class} has {} members, fewer than {k} folds",
                members.len()
            );
        }
        groups
    } else {
        ensure!(labels.len() >= k, Config, "{} samples cannot fill {k} folds", labels.len());
        BTreeMap::from([(0usize, (0..labels.len()).collect::<Vec<_>>())])
    };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut position = 0usize;
    for (_, mut members) in groups {
        rng.shuffle(&mut members);
        for i in members {
            buckets[position % k].push(i);
            position += 1;
        }
    }
    let folds = (0..k)
        .map(|f| {
            let mut test = buckets[f].clone();
            test.sort_unstable();
            let rest: Vec<usize> = (0..k)
                .filter(|&g| g != f)
                .flat_map(|g| buckets[g].iter().copied())
                .collect();
            let (train, validation) =
                validation_split(labels, &rest, seed.wrapping_add(f as u64), VALIDATION_FRACTION);
            Fold { train, validation, test }
        })
        .collect();
    Ok(folds)
}

/// Stratified split of `indices` into `(kept, held_out)` with `fraction` of
/// each stratum held out (rounded, and never the whole stratum).
pub fn validation_split(labels: &[Label], indices: &[usize], seed: u64, fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = Rng::for_stream(seed, &[STREAM_VALIDATION]);
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for (_, mut members) in strata(labels, indices.iter().copied()) {
        rng.shuffle(&mut members);
        let n = members.len();
        let take = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
        held.extend_from_slice(&members[..take]);
        kept.extend_from_slice(&members[take..]);
    }
    kept.sort_unstable();
    held.sort_unstable();
    (kept, held)
}

/// Draws `size` indices preserving each stratum's share (largest-remainder
/// rounding).
pub fn stratified_subsample(labels: &[Label], size: usize, seed: u64) -> Result<Vec<usize>> {
    ensure!(
        size <= labels.len(),
        Config,
        "subsample size {size} exceeds dataset size {}",
        labels.len()
    );
    let n = labels.len() as f64;
    let groups = strata(labels, 0..labels.len());
    let mut quotas: Vec<(usize, usize, f64)> = groups
        .iter()
        .map(|(&class, members)| {
            let exact = size as f64 * members.len() as f64 / n;
            (class, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut missing = size - quotas.iter().map(|q| q.1).sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
    for i in order {
        if missing == 0 {
            break;
        }
        quotas[i].1 += 1;
        missing -= 1;
    }
    let mut rng = Rng::for_stream(seed, &[STREAM_SUBSAMPLE, size as u64]);
    let mut out = Vec::with_capacity(size);
    for (class, quota, _) in quotas {
        let mut members = groups[&class].clone();
        rng.shuffle(&mut members);
        out.extend_from_slice(&members[..quota]);
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classes(v: &[usize]) -> Vec<Label> {
        v.iter().map(|&c| Label::Class(c)).collect()
    }

    #[test]
    fn two_folds_on_four_balanced() {
        let labels = classes(&[0, 0, 1, 1]);
        let folds = kfold_split(&labels, 2, 3, true).unwrap();
        for f in &folds {
            let mut cls: Vec<usize> = f.test.iter().map(|&i| labels[i].stratum()).collect();
            cls.sort_unstable();
            assert_eq!(cls, vec![0, 1]);
        }
    }

    #[test]
    fn folds_are_deterministic() {
        let labels = classes(&(0..40).map(|i| i % 3).collect::<Vec<_>>());
        assert_eq!(kfold_split(&labels, 5, 11, true).unwrap(), kfold_split(&labels, 5, 11, true).unwrap());
        assert_ne!(kfold_split(&labels, 5, 11, true).unwrap(), kfold_split(&labels, 5, 12, true).unwrap());
    }

    #[test]
    fn small_class_rejected() {
        let labels = classes(&[0, 0, 0, 0, 0, 1, 1]);
        assert!(kfold_split(&labels, 3, 0, true).is_err());
        assert!(kfold_split(&labels, 3, 0, false).is_ok());
    }

    #[test]
    fn subsample_preserves_rate() {
        let labels: Vec<Label> = (0..1000).map(|i| Label::Tasks(vec![(i % 10 == 0) as u8 as f64])).collect();
        let sub = stratified_subsample(&labels, 200, 4).unwrap();
        assert_eq!(sub.len(), 200);
        let pos = sub.iter().filter(|&&i| labels[i].stratum() == 1).count();
        assert_eq!(pos, 20);
    }

    proptest! {
        #[test]
        fn folds_partition_indices(n in 10usize..80, k in 2usize..5, seed in any::<u64>(), c in 1usize..3) {
            let labels = classes(&(0..n).map(|i| i % (c + 1)).collect::<Vec<_>>());
            prop_assume!(n / (c + 1) >= k);
            let folds = kfold_split(&labels, k, seed, true).unwrap();
            let mut all_test: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
            all_test.sort_unstable();
            prop_assert_eq!(all_test, (0..n).collect::<Vec<_>>());
            for f in &folds {
                let mut union: Vec<usize> = f.train.iter().chain(&f.validation).chain(&f.test).copied().collect();
                union.sort_unstable();
                prop_assert_eq!(union, (0..n).collect::<Vec<_>>());
                for class in 0..=c {
                    let total = labels.iter().filter(|l| l.stratum() == class).count() as f64;
                    let got = f.test.iter().filter(|&&i| labels[i].stratum() == class).count() as f64;
                    prop_assert!((got - total / k as f64).abs() <= 1.0);
                }
            }
        }
    }
}
