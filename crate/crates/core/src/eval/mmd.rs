use crate::scalar::Scalar;

use super::EvalError;

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum()
}

fn check_dims<T>(sets: &[&[Vec<T>]]) -> Result<usize, EvalError> {
    let dim = sets[0][0].len();
    for set in sets {
        if let Some(bad) = set.iter().find(|v| v.len() != dim) {
            return Err(EvalError::Dimension(dim, bad.len()));
        }
    }
    Ok(dim)
}

/// Squared maximum mean discrepancy under a Gaussian kernel, biased (V-statistic) form:
/// every pair including self-pairs is averaged.
pub fn mmd_squared<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>], bandwidth: T) -> Result<T, EvalError> {
    if x.is_empty() {
        return Err(EvalError::EmptySet("x"));
    }
    if y.is_empty() {
        return Err(EvalError::EmptySet("y"));
    }
    if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
        return Err(EvalError::Bandwidth(bandwidth.as_f64()));
    }
    check_dims(&[x, y])?;
    let scale = T::of(-0.5) / (bandwidth * bandwidth);
    let mean_kernel = |a: &[Vec<T>], b: &[Vec<T>]| {
        let total: T = a.iter().flat_map(|p| b.iter().map(move |q| (scale * sq_dist(p, q)).exp())).sum();
        total / T::of((a.len() * b.len()) as f64)
    };
    let value = mean_kernel(x, x) + mean_kernel(y, y) - T::of(2.0) * mean_kernel(x, y);
    Ok(value.max(T::zero()))
}

/// Median of the pairwise Euclidean distances over the pooled samples (distinct pairs only).
/// Falls back to 1 when the median is zero or there is only one sample.
pub fn median_heuristic<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>]) -> T {
    let pooled: Vec<&Vec<T>> = x.iter().chain(y).collect();
    let mut dists = Vec::with_capacity(pooled.len() * pooled.len().saturating_sub(1) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            dists.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return T::one();
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = dists.len();
    let median = if n % 2 == 1 { dists[n / 2] } else { (dists[n / 2 - 1] + dists[n / 2]) / T::of(2.0) };
    if median > T::zero() && median.is_finite() {
        median
    } else {
        T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_points_closed_form() {
        let v: f64 = mmd_squared(&[vec![0.0, 0.0]], &[vec![1.0, 0.0]], 1.0).unwrap();
        assert!((v - 0.786_938_680_574_733).abs() < 1e-12);
    }

    #[test]
    fn identical_sets_vanish() {
        let x = vec![vec![1.0f32], vec![2.5], vec![-3.0]];
        let mut y = x.clone();
        y.reverse();
        assert!(mmd_squared(&x, &y, 0.7).unwrap().abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![1.0]];
        assert!(matches!(mmd_squared::<f64>(&[], &x, 1.0), Err(EvalError::EmptySet("x"))));
        assert!(matches!(mmd_squared(&x, &x, 0.0), Err(EvalError::Bandwidth(_))));
        assert!(matches!(mmd_squared(&x, &[vec![1.0, 2.0]], 1.0), Err(EvalError::Dimension(1, 2))));
    }

    #[test]
    fn median_of_pooled_distances() {
        // Distances: 1, 3, 2 -> median 2.
        let m = median_heuristic(&[vec![0.0], vec![1.0]], &[vec![3.0]]);
        assert_eq!(m, 2.0);
        assert_eq!(median_heuristic(&[vec![1.0]], &[vec![1.0]]), 1.0);
    }
}
