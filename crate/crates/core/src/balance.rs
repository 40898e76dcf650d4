//! SMOTE oversampling of the minority class.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::learners::Label;
use crate::linalg::{squared_distance, MinMaxScaler};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority/majority ratio after synthesis.
    pub target: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target: 1.0,
            seed: 0,
        }
    }
}

/// A synthetic row together with the two rows it interpolates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub gap: f64,
}

/// Output of [`smote`]: original rows first, then synthetic minority rows.
#[derive(Debug, Clone)]
pub struct Oversampled {
    pub features: Array2<f64>,
    pub labels: Vec<Label>,
    pub origins: Vec<SyntheticOrigin>,
}

/// Appends synthetic minority rows until the minority/majority ratio
/// reaches `cfg.target` (to the nearest row).
///
/// Neighbours are searched with Euclidean distance on min-max scaled
/// columns, scaled from the rows given here. `k` is clipped to
/// `minority_count - 1`.
pub fn smote(x: ArrayView2<f64>, y: &[Label], cfg: &SmoteConfig) -> Result<Oversampled> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    if cfg.k_neighbors == 0 || !(cfg.target > 0.0 && cfg.target <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "smote needs k >= 1 and target in (0, 1], got k={} target={}",
            cfg.k_neighbors, cfg.target
        )));
    }
    let pos = y.iter().filter(|&&l| l == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let (minority_label, minority, majority) = if pos <= neg { (1, pos, neg) } else { (0, neg, pos) };
    if minority < 2 {
        return Err(Error::MinorityTooSmall(minority));
    }
    let wanted = (cfg.target * majority as f64).round() as usize;
    let n_new = wanted.saturating_sub(minority);

    let min_rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let scaled = MinMaxScaler::fit(x).transform(x);
    let k = cfg.k_neighbors.min(minority - 1);
    let neighbors: Vec<Vec<usize>> = min_rows
        .iter()
        .map(|&i| {
            let mut cand: Vec<(f64, usize)> = min_rows
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (squared_distance(scaled.row(i), scaled.row(j)), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = seed::rng(cfg.seed);
    let mut synthetic = Array2::zeros((n_new, x.ncols()));
    let mut origins = Vec::with_capacity(n_new);
    for mut out in synthetic.axis_iter_mut(Axis(0)) {
        let m = rng.gen_range(0..min_rows.len());
        let base = min_rows[m];
        let neighbor = neighbors[m][rng.gen_range(0..k)];
        let gap: f64 = rng.gen();
        for c in 0..x.ncols() {
            let a = x[[base, c]];
            out[c] = a + gap * (x[[neighbor, c]] - a);
        }
        origins.push(SyntheticOrigin { base, neighbor, gap });
    }
    let features = ndarray::concatenate(Axis(0), &[x.view(), synthetic.view()]).expect("same width");
    let mut labels = y.to_vec();
    labels.extend(std::iter::repeat_n(minority_label, n_new));
    Ok(Oversampled {
        features,
        labels,
        origins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn balances_ten_vs_four() {
        let mut x = Array2::zeros((14, 2));
        for i in 0..14 {
            x[[i, 0]] = i as f64;
            x[[i, 1]] = (i * i) as f64;
        }
        let y: Vec<Label> = (0..14).map(|i| u8::from(i >= 10)).collect();
        let out = smote(x.view(), &y, &SmoteConfig::default()).unwrap();
        assert_eq!(out.features.nrows(), 20);
        assert_eq!(out.labels.iter().filter(|&&l| l == 1).count(), 10);
        assert_eq!(out.features.slice(ndarray::s![..14, ..]), x);
    }

    #[test]
    fn synthetic_rows_stay_in_unit_square() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [6.0, 5.0], [7.0, 5.0], [8.0, 5.0]];
        let y = vec![1, 1, 0, 0, 0, 0];
        let cfg = SmoteConfig {
            k_neighbors: 1,
            ..Default::default()
        };
        let out = smote(x.view(), &y, &cfg).unwrap();
        assert_eq!(out.features.nrows(), 8);
        for r in 6..8 {
            for c in 0..2 {
                let v = out.features[[r, c]];
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn errors() {
        let x = array![[0.0], [1.0], [2.0]];
        assert_eq!(
            smote(x.view(), &[0, 0, 0], &SmoteConfig::default()).unwrap_err(),
            Error::SingleClass
        );
        assert_eq!(
            smote(x.view(), &[0, 0, 1], &SmoteConfig::default()).unwrap_err(),
            Error::MinorityTooSmall(1)
        );
    }

    #[test]
    fn k_is_clipped_to_minority_size() {
        let x = array![[0.0], [1.0], [4.0], [5.0], [6.0], [7.0], [8.0]];
        let y = vec![1, 1, 0, 0, 0, 0, 0];
        let cfg = SmoteConfig {
            k_neighbors: 5,
            target: 0.8,
            seed: 3,
        };
        let out = smote(x.view(), &y, &cfg).unwrap();
        assert_eq!(out.labels.iter().filter(|&&l| l == 1).count(), 4);
    }

    proptest! {
        #[test]
        fn synthetic_rows_lie_between_parents(
            seed in 0u64..1000,
            n_min in 2usize..8,
            n_maj in 8usize..20,
            target in 0.3f64..=1.0,
        ) {
            let n = n_min + n_maj;
            let mut rng = crate::seed::rng(seed);
            let x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-10.0..10.0));
            let y: Vec<Label> = (0..n).map(|i| u8::from(i < n_min)).collect();
            let cfg = SmoteConfig { k_neighbors: 3, target, seed };
            let out = smote(x.view(), &y, &cfg).unwrap();
            prop_assert_eq!(out.features.slice(ndarray::s![..n, ..]), x.view());
            let minority = out.labels.iter().filter(|&&l| l == 1).count() as f64;
            prop_assert!((minority - (target * n_maj as f64).round().max(n_min as f64)).abs() <= 1.0);
            for (s, o) in out.origins.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(&o.gap));
                for c in 0..3 {
                    let (a, b) = (x[[o.base, c]], x[[o.neighbor, c]]);
                    let v = out.features[[n + s, c]];
                    prop_assert!(v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12);
                }
            }
        }
    }
}
