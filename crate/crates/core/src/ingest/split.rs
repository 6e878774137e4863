//! Stratified partitioning: train/test splits, k-fold assignments and
//! class-balanced samples.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::ingest::dataset::LabeledDataset;
use crate::rng::rng_for;
use crate::types::Label;

const CLASSES: [Label; 2] = [Label::Safe, Label::Crash];

fn shuffled_class(labels: &[Label], class: Label, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
    idx.shuffle(&mut rng_for(seed, class.as_u8() as u64));
    idx
}

/// Per-class test counts are `round(n_class * test_fraction)`, kept within
/// `[1, n_class - 1]`. Both parts come back in original row order. When the
/// dataset carries group ids the split is made over groups instead, see
/// [`grouped_split_indices`].
pub fn stratified_split(
    data: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = dataset_split_indices(data, test_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Train/test indices for a dataset, grouped when it has group ids.
pub fn dataset_split_indices(
    data: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    match &data.groups {
        Some(groups) => grouped_split_indices(&data.labels, groups, test_fraction, seed),
        None => split_indices(&data.labels, test_fraction, seed),
    }
}

/// Fold assignment for a dataset, grouped when it has group ids.
pub fn dataset_folds(data: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    match &data.groups {
        Some(groups) => grouped_folds(&data.labels, groups, k, seed),
        None => stratified_folds(&data.labels, k, seed),
    }
}

/// Groups bucketed by composition `(crash rows, safe rows)`, each bucket
/// shuffled. Buckets come back in composition order, so the result depends
/// only on the data and the seed.
fn shuffled_group_buckets(labels: &[Label], groups: &[usize], seed: u64) -> Vec<Vec<Vec<usize>>> {
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    let mut buckets: BTreeMap<(usize, usize), Vec<Vec<usize>>> = BTreeMap::new();
    for rows in members.into_values() {
        let crashes = rows.iter().filter(|&&i| labels[i] == Label::Crash).count();
        buckets.entry((crashes, rows.len() - crashes)).or_default().push(rows);
    }
    buckets
        .into_values()
        .enumerate()
        .map(|(b, mut bucket)| {
            bucket.shuffle(&mut rng_for(seed, 100 + b as u64));
            bucket
        })
        .collect()
}

fn check_groups(labels: &[Label], groups: &[usize]) -> Result<()> {
    if labels.len() != groups.len() {
        return Err(Error::Split(format!("{} group ids for {} rows", groups.len(), labels.len())));
    }
    Ok(())
}

fn has_both_classes(labels: &[Label], rows: &[usize]) -> bool {
    CLASSES.iter().all(|&c| rows.iter().any(|&i| labels[i] == c))
}

/// Split whole groups. Within each composition bucket `round(n_groups *
/// test_fraction)` groups go to test, so a dataset of crash/clone pairs splits
/// exactly like the per-row version while no pair straddles the boundary.
pub fn grouped_split_indices(
    labels: &[Label],
    groups: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    check_groups(labels, groups)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for bucket in shuffled_group_buckets(labels, groups, seed) {
        let n_test = (bucket.len() as f64 * test_fraction).round() as usize;
        for (n, rows) in bucket.into_iter().enumerate() {
            if n < n_test { &mut test } else { &mut train }.extend(rows);
        }
    }
    if !has_both_classes(labels, &train) || !has_both_classes(labels, &test) {
        return Err(Error::Split("too few groups to put both classes on each side".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Round-robin whole groups into `k` folds, bucket by bucket.
pub fn grouped_folds(labels: &[Label], groups: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::CrossValidation(format!("k = {k}; need at least 2 folds")));
    }
    check_groups(labels, groups).map_err(|e| Error::CrossValidation(e.to_string()))?;
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for bucket in shuffled_group_buckets(labels, groups, seed) {
        let n = bucket.len();
        for (j, rows) in bucket.into_iter().enumerate() {
            folds[(j + offset) % k].extend(rows);
        }
        offset = (offset + n) % k;
    }
    for (f, fold) in folds.iter_mut().enumerate() {
        fold.sort_unstable();
        let rest: Vec<usize> = (0..labels.len()).filter(|i| fold.binary_search(i).is_err()).collect();
        if !has_both_classes(labels, fold) || !has_both_classes(labels, &rest) {
            return Err(Error::CrossValidation(format!("fold {f} lacks a class; too few groups for {k} folds")));
        }
    }
    Ok(folds)
}

pub fn split_indices(labels: &[Label], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in CLASSES {
        let idx = shuffled_class(labels, class, seed);
        if idx.len() < 2 {
            return Err(Error::Split(format!(
                "class {class:?} has {} rows; at least 2 are needed",
                idx.len()
            )));
        }
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Assign rows to `k` stratified folds. Returns the test indices of each fold,
/// sorted; every row lands in exactly one fold.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::CrossValidation(format!("k = {k}; need at least 2 folds")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for class in CLASSES {
        let idx = shuffled_class(labels, class, seed);
        if idx.len() < k {
            return Err(Error::CrossValidation(format!(
                "class {class:?} has {} rows, fewer than {k} folds",
                idx.len()
            )));
        }
        // Continue the round-robin across classes so fold sizes differ by at
        // most one overall.
        for (n, i) in idx.into_iter().enumerate() {
            folds[(n + offset) % k].push(i);
        }
        offset = (offset + labels.iter().filter(|&&l| l == class).count()) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Class-stratified sample of up to `n` rows, in original row order. The whole
/// dataset is returned when it has at most `n` rows.
pub fn stratified_sample(data: &LabeledDataset, n: usize, seed: u64) -> LabeledDataset {
    if data.len() <= n {
        return data.clone();
    }
    let mut picked = Vec::with_capacity(n);
    let total = data.len() as f64;
    let mut remaining = n;
    for (ci, class) in CLASSES.into_iter().enumerate() {
        let idx = shuffled_class(&data.labels, class, seed);
        let take = if ci == CLASSES.len() - 1 {
            remaining
        } else {
            ((idx.len() as f64 / total) * n as f64).round() as usize
        }
        .min(idx.len());
        picked.extend_from_slice(&idx[..take]);
        remaining -= take;
    }
    picked.sort_unstable();
    data.subset(&picked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(crash: usize, safe: usize) -> Vec<Label> {
        let mut v = vec![Label::Crash; crash];
        v.extend(vec![Label::Safe; safe]);
        v
    }

    #[test]
    fn exact_proportions() {
        let l = labels(100, 100);
        let (train, test) = split_indices(&l, 0.2, 1).unwrap();
        assert_eq!(train.len(), 160);
        assert_eq!(test.len(), 40);
        assert_eq!(test.iter().filter(|&&i| l[i] == Label::Crash).count(), 20);
    }

    #[test]
    fn published_split_sizes() {
        let l = labels(23_194, 23_194);
        let (train, test) = split_indices(&l, 0.2, 42).unwrap();
        assert_eq!(train.len(), 37_110);
        assert_eq!(test.len(), 9_278);
        assert_eq!(test.iter().filter(|&&i| l[i] == Label::Crash).count(), 4_639);
    }

    #[test]
    fn tiny_class_is_an_error() {
        assert!(split_indices(&labels(1, 10), 0.2, 1).is_err());
        assert!(split_indices(&labels(10, 10), 1.0, 1).is_err());
    }

    #[test]
    fn folds_partition_rows() {
        let l = labels(37, 23);
        let folds = stratified_folds(&l, 5, 9).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..60).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    fn pairs(n: usize) -> (Vec<Label>, Vec<usize>) {
        let l = labels(n, n);
        let g = (0..2 * n).map(|i| i % n).collect();
        (l, g)
    }

    #[test]
    fn grouped_split_keeps_pairs_together() {
        let (l, g) = pairs(23_194);
        let (train, test) = grouped_split_indices(&l, &g, 0.2, 42).unwrap();
        assert_eq!(train.len(), 37_110);
        assert_eq!(test.len(), 9_278);
        assert_eq!(test.iter().filter(|&&i| l[i] == Label::Crash).count(), 4_639);
        let test_groups: std::collections::HashSet<usize> = test.iter().map(|&i| g[i]).collect();
        assert!(train.iter().all(|&i| !test_groups.contains(&g[i])));
    }

    #[test]
    fn grouped_folds_keep_pairs_together() {
        let (mut l, mut g) = pairs(40);
        // A few unpaired crashes form their own bucket.
        l.extend([Label::Crash; 7]);
        g.extend(100..107);
        let folds = grouped_folds(&l, &g, 5, 3).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..87).collect::<Vec<_>>());
        for fold in &folds {
            for &i in fold {
                assert!(l.iter().enumerate().all(|(j, _)| g[j] != g[i] || fold.contains(&j)));
            }
        }
    }

    #[test]
    fn too_few_groups_is_an_error() {
        let (l, g) = pairs(1);
        assert!(grouped_split_indices(&l, &g, 0.2, 1).is_err());
        assert!(grouped_folds(&l, &g, 2, 1).is_err());
    }
}
