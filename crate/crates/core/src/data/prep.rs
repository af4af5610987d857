use rand::seq::{index, SliceRandom};

use super::{ColumnSpec, DroppedColumn, EncodedDataset};
use crate::error::{Error, Result};
use crate::rng;

/// Indices of a 50/50 subset: every fraud row (label 1) plus an equal number
/// of non-fraud rows drawn uniformly without replacement. Indices come back
/// in ascending order.
pub fn undersample_balance(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let fraud: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let legit: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if fraud.len() + legit.len() != labels.len() {
        return Err(Error::Data("labels must be 0 or 1".into()));
    }
    if fraud.is_empty() || legit.is_empty() {
        return Err(Error::Data("undersampling needs both classes present".into()));
    }
    if legit.len() < fraud.len() {
        return Err(Error::Data(format!(
            "majority class ({} rows) is smaller than the fraud class ({} rows); undersampling is undefined",
            legit.len(),
            fraud.len()
        )));
    }
    let mut r = rng::seeded(seed);
    let mut keep: Vec<usize> = index::sample(&mut r, legit.len(), fraud.len())
        .into_iter()
        .map(|k| legit[k])
        .chain(fraud)
        .collect();
    keep.sort_unstable();
    Ok(keep)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split. The train set has `round(fraction · n)` rows; each class
/// contributes `floor(fraction · n_c)` and the leftover rows go to the classes
/// with the largest fractional parts (lower label first on ties). Index
/// lists are ascending.
pub fn split(labels: &[u8], fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("train fraction must lie in (0, 1), got {fraction}")));
    }
    if labels.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let classes: Vec<Vec<usize>> = (0..=1u8)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    if classes.iter().map(Vec::len).sum::<usize>() != labels.len() {
        return Err(Error::Data("labels must be 0 or 1".into()));
    }
    let total = (fraction * labels.len() as f64).round() as usize;
    let exact: Vec<f64> = classes.iter().map(|c| fraction * c.len() as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut k = 0;
    while counts.iter().sum::<usize>() < total {
        let c = order[k % order.len()];
        if counts[c] < classes[c].len() {
            counts[c] += 1;
        }
        k += 1;
    }

    let mut r = rng::seeded(seed);
    let mut train = Vec::with_capacity(total);
    let mut test = Vec::with_capacity(labels.len() - total);
    for (members, &count) in classes.iter().zip(&counts) {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut r);
        train.extend_from_slice(&shuffled[..count]);
        test.extend_from_slice(&shuffled[count..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Pearson correlation; `None` when either column is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Drops numerical columns that correlate with an earlier kept numerical
/// column at `|r| >= threshold`. Pairs are visited in spec order and the
/// later column of each pair is the one removed.
pub fn correlation_filter(dataset: &EncodedDataset, threshold: f64) -> Result<(EncodedDataset, Vec<DroppedColumn>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("correlation threshold must lie in (0, 1], got {threshold}")));
    }
    let mut numeric: Vec<(String, Vec<f64>)> = Vec::new();
    let mut col = 0;
    for spec in &dataset.specs {
        if let ColumnSpec::Numerical { name, .. } = spec {
            numeric.push((name.clone(), dataset.features.column(col).to_vec()));
        }
        col += spec.width();
    }
    let mut dropped: Vec<DroppedColumn> = Vec::new();
    for j in 1..numeric.len() {
        for i in 0..j {
            if dropped.iter().any(|d| d.name == numeric[i].0) {
                continue;
            }
            if let Some(r) = pearson(&numeric[i].1, &numeric[j].1) {
                if r.abs() >= threshold {
                    dropped.push(DroppedColumn {
                        name: numeric[j].0.clone(),
                        kept: numeric[i].0.clone(),
                        r,
                    });
                    break;
                }
            }
        }
    }
    let mut out = dataset.clone();
    out.drop_numerical(&dropped.iter().map(|d| d.name.clone()).collect::<Vec<_>>())?;
    out.provenance.dropped.extend(dropped.iter().cloned());
    Ok((out, dropped))
}
