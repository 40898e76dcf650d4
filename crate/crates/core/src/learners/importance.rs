//! Feature ranking by single-threshold information gain.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::learners::Label;

fn entropy(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// Best information gain of any single threshold on each column.
pub fn information_gains(x: ArrayView2<f64>, y: &[Label]) -> Result<Vec<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    let n = y.len() as f64;
    let pos = y.iter().filter(|&&l| l == 1).count() as f64;
    if pos == 0.0 || pos == n {
        return Err(Error::SingleClass);
    }
    let parent = entropy(pos, n);
    let mut gains = Vec::with_capacity(x.ncols());
    let mut pairs: Vec<(f64, Label)> = Vec::with_capacity(y.len());
    for col in x.columns() {
        pairs.clear();
        pairs.extend(col.iter().copied().zip(y.iter().copied()));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = 0.0f64;
        let mut left_pos = 0.0;
        for k in 0..pairs.len() - 1 {
            left_pos += f64::from(pairs[k].1);
            if pairs[k + 1].0 <= pairs[k].0 {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let child = (nl * entropy(left_pos, nl) + nr * entropy(pos - left_pos, nr)) / n;
            best = best.max(parent - child);
        }
        gains.push(best);
    }
    Ok(gains)
}

/// Column indices ranked by descending information gain, ties by index.
pub fn feature_importance(x: ArrayView2<f64>, y: &[Label]) -> Result<Vec<usize>> {
    let gains = information_gains(x, y)?;
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn perfect_separator_ranks_first_and_constant_last() {
        let x = array![[5.0, 0.3, 1.0], [5.0, 0.1, 2.0], [5.0, 0.9, 3.0], [5.0, 0.2, 4.0]];
        let y = [0, 0, 1, 1];
        let ranking = feature_importance(x.view(), &y).unwrap();
        assert_eq!(ranking[0], 2);
        assert_eq!(*ranking.last().unwrap(), 0);
        assert_eq!(information_gains(x.view(), &y).unwrap()[0], 0.0);
    }

    #[test]
    fn informative_column_beats_noise_over_trials() {
        for trial in 0..100 {
            let mut rng = seed::rng(trial);
            let n = 200;
            let y: Vec<Label> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let x = Array2::from_shape_fn((n, 6), |(i, j)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if j == 4 {
                    z + 3.0 * f64::from(y[i])
                } else {
                    z
                }
            });
            assert_eq!(feature_importance(x.view(), &y).unwrap()[0], 4, "trial {trial}");
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[1.0], [2.0]];
        assert_eq!(feature_importance(x.view(), &[1, 1]).unwrap_err(), Error::SingleClass);
    }
}
