//! Small dense helpers over slices and `ndarray` matrices.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

#[inline]
pub fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

pub fn sq_dist_view<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// Pairwise squared distances: `out[i, c] = ||rows[i] - centers[c]||^2`.
pub fn pairwise_sq_dists<T: Scalar>(
    rows: ArrayView2<'_, T>,
    centers: ArrayView2<'_, T>,
) -> Array2<T> {
    let mut out = Array2::zeros((rows.nrows(), centers.nrows()));
    for (i, r) in rows.outer_iter().enumerate() {
        for (c, m) in centers.outer_iter().enumerate() {
            out[[i, c]] = sq_dist_view(r, m);
        }
    }
    out
}

/// `log(sum(exp(v)))` with max-subtraction.
pub fn log_sum_exp<T: Scalar>(v: ArrayView1<'_, T>) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    let s: T = v.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Row-wise stable softmax of a logit matrix.
pub fn softmax_rows<T: Scalar>(logits: ArrayView2<'_, T>) -> Array2<T> {
    let mut out = logits.to_owned();
    for mut row in out.outer_iter_mut() {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|x| (x - m).exp());
        let s: T = row.iter().copied().sum();
        row.mapv_inplace(|x| x / s);
    }
    out
}

/// Per-label means of `rows`; labels without rows get a zero mean.
pub fn class_means<T: Scalar>(
    rows: ArrayView2<'_, T>,
    labels: &[usize],
    classes: usize,
) -> Array2<T> {
    let mut means = Array2::<T>::zeros((classes, rows.ncols()));
    let mut counts = vec![0usize; classes];
    for (row, &l) in rows.outer_iter().zip(labels) {
        means.row_mut(l).scaled_add(T::one(), &row);
        counts[l] += 1;
    }
    for (mut m, &n) in means.outer_iter_mut().zip(&counts) {
        if n > 0 {
            m.mapv_inplace(|v| v / T::lit(n as f64));
        }
    }
    means
}

pub fn row_norms<T: Scalar>(m: ArrayView2<'_, T>) -> Array1<T> {
    m.map_axis(Axis(1), |r| r.dot(&r).sqrt())
}

pub fn argmax<T: Scalar>(row: ArrayView1<'_, T>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

pub fn all_finite<T: Scalar>(m: impl IntoIterator<Item = T>) -> bool {
    m.into_iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax_rows(array![[1.0, 2.0, 3.0], [1000.0, 1000.0, -1000.0]].view());
        for row in p.outer_iter() {
            assert!((row.sum() - 1.0f64).abs() < 1e-15);
        }
        assert!((p[[1, 0]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_matches_naive() {
        let v = array![0.1f64, -2.0, 3.5];
        let naive = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(v.view()) - naive).abs() < 1e-14);
    }

    #[test]
    fn argmax_takes_first_of_ties() {
        assert_eq!(argmax(array![1.0f64, 3.0, 3.0].view()), 1);
    }
}
