//! Small numeric helpers shared across learners.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Column-wise z-scoring with statistics fixed at fit time.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        Self::fit_weighted(x, None)
    }

    pub fn fit_weighted(x: ArrayView2<f64>, weights: Option<&[f64]>) -> Self {
        let d = x.ncols();
        let mut mean = Array1::zeros(d);
        let mut var = Array1::zeros(d);
        let total: f64 = match weights {
            Some(w) => w.iter().sum(),
            None => x.nrows() as f64,
        };
        if total <= 0.0 {
            return Self {
                mean,
                scale: Array1::ones(d),
            };
        }
        for (i, row) in x.outer_iter().enumerate() {
            let wi = weights.map_or(1.0, |w| w[i]);
            mean.scaled_add(wi, &row);
        }
        mean /= total;
        for (i, row) in x.outer_iter().enumerate() {
            let wi = weights.map_or(1.0, |w| w[i]);
            for j in 0..d {
                let diff = row[j] - mean[j];
                var[j] += wi * diff * diff;
            }
        }
        var /= total;
        let scale = var.mapv(|v: f64| {
            let s = v.sqrt();
            if s > 1e-12 && s.is_finite() {
                s
            } else {
                1.0
            }
        });
        Self { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.outer_iter_mut() {
            row -= &self.mean;
            row /= &self.scale;
        }
        out
    }

    pub fn transform_row(&self, row: ArrayView1<f64>) -> Array1<f64> {
        (&row - &self.mean) / &self.scale
    }
}

/// Column-wise min-max scaling to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct MinMaxScaler {
    pub min: Array1<f64>,
    pub range: Array1<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let d = x.ncols();
        let mut min = Array1::from_elem(d, f64::INFINITY);
        let mut max = Array1::from_elem(d, f64::NEG_INFINITY);
        for row in x.outer_iter() {
            for j in 0..d {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        let range =
            Array1::from_iter(
                min.iter()
                    .zip(max.iter())
                    .map(|(lo, hi)| if hi - lo > 0.0 { hi - lo } else { 1.0 }),
            );
        Self { min, range }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.outer_iter_mut() {
            row -= &self.min;
            row /= &self.range;
        }
        out
    }
}

#[inline]
pub fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense matrix of squared Euclidean distances.
pub fn pairwise_sq_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = squared_distance(x.row(i), x.row(j));
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Median of the off-diagonal pairwise Euclidean distances.
///
/// For large inputs the median is estimated from a deterministic stride of
/// at most `max_pairs` pairs.
pub fn median_pairwise_distance(x: ArrayView2<f64>) -> f64 {
    const MAX_PAIRS: usize = 200_000;
    let n = x.nrows();
    if n < 2 {
        return 0.0;
    }
    let total = n * (n - 1) / 2;
    let stride = total.div_ceil(MAX_PAIRS).max(1);
    let mut dists = Vec::with_capacity(total.min(MAX_PAIRS) + 1);
    let mut k = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if k.is_multiple_of(stride) {
                dists.push(squared_distance(x.row(i), x.row(j)).sqrt());
            }
            k += 1;
        }
    }
    median(&mut dists)
}

/// Median of a slice (averages the two middle values for even lengths).
pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Linear-interpolated quantile, `q` in `[0, 1]`, of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn select_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

pub fn select_columns(x: ArrayView2<f64>, cols: &[usize]) -> Array2<f64> {
    x.select(Axis(1), cols)
}

/// Stacks two matrices with equal column counts vertically.
pub fn vstack(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    if a.nrows() == 0 {
        return Ok(b.to_owned());
    }
    if b.nrows() == 0 {
        return Ok(a.to_owned());
    }
    ndarray::concatenate(Axis(0), &[a.view(), b.view()]).map_err(|_| Error::DimensionMismatch {
        expected: a.ncols(),
        found: b.ncols(),
    })
}

pub fn to_nalgebra(a: &Array2<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Solves `a x = b` by LU; on failure retries once with a `1e-8` ridge.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    let rhs = nalgebra::DVector::from_iterator(n, b.iter().copied());
    let mut m = to_nalgebra(a);
    for attempt in 0..2 {
        if attempt == 1 {
            for i in 0..n {
                m[(i, i)] += 1e-8;
            }
        }
        if let Some(sol) = m.clone().lu().solve(&rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                return Ok(Array1::from_iter(sol.iter().copied()));
            }
        }
    }
    Err(Error::SingularSystem)
}

/// Eigen-decomposition of a symmetric matrix, eigenpairs sorted by
/// descending eigenvalue. Column `k` of the returned matrix is the `k`-th
/// eigenvector.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let eig = nalgebra::SymmetricEigen::new(to_nalgebra(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, k]] = eig.eigenvectors[(r, i)];
        }
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standardizer_centers_and_scales() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(x.view());
        let t = s.transform(x.view());
        assert_eq!(t, array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn median_and_quantiles() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let x = solve(&a, &array![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn eigen_sorted_descending() {
        let a = array![[2.0, 0.0], [0.0, 5.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        assert_eq!(vals, vec![5.0, 2.0]);
        assert!((vecs[[1, 0]].abs() - 1.0).abs() < 1e-12);
    }
}
