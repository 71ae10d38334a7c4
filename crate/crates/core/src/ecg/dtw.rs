//! Dynamic time warping with absolute-difference local cost.
//!
//! Step pattern is the symmetric `{(1,0), (0,1), (1,1)}` set with unit
//! weights and no band constraint, so the distance is the minimum over all
//! monotone, continuous warping paths of `sum |a_i - b_j|`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Alignment distance plus the optimal warping path.
///
/// Path indices are 0-based and run from `(0, 0)` to `(n - 1, m - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub distance: f64,
    pub path: Vec<(usize, usize)>,
}

impl DtwResult {
    /// Distance divided by the number of aligned pairs.
    pub fn normalized_distance(&self) -> f64 {
        self.distance / self.path.len() as f64
    }
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("DTW needs two non-empty series"));
    }
    Ok(())
}

/// Full DTW with traceback.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<DtwResult> {
    check(a, b)?;
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let cost = (a[i] - b[j]).abs();
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[at(i - 1, j - 1)] } else { f64::INFINITY };
                let up = if i > 0 { acc[at(i - 1, j)] } else { f64::INFINITY };
                let left = if j > 0 { acc[at(i, j - 1)] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[at(i, j)] = cost + best;
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    path.push((i, j));
    while i > 0 || j > 0 {
        // Ties prefer the diagonal, then the longer axis.
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[at(i - 1, j - 1)];
            let up = acc[at(i - 1, j)];
            let left = acc[at(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwResult {
        distance: acc[at(n - 1, m - 1)],
        path,
    })
}

/// Distance only, using two rolling rows.
pub fn dtw_cost(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for (i, &ai) in a.iter().enumerate() {
        for j in 0..m {
            let cost = (ai - b[j]).abs();
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            cur[j] = cost + best;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Plain Euclidean distance between equal-length series.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("Euclidean distance needs equal lengths"));
    }
    Ok(libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A: [f64; 6] = [1.0, 1.0, 1.0, 2.0, 8.0, 1.0];
    const B: [f64; 6] = [1.0, 1.0, 1.0, 8.0, 2.0, 1.0];

    /// Independent oracle: explicit enumeration of every warping path.
    fn brute_force(a: &[f64], b: &[f64]) -> f64 {
        fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
            let acc = acc + (a[i] - b[j]).abs();
            if i + 1 == a.len() && j + 1 == b.len() {
                *best = best.min(acc);
                return;
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                walk(a, b, i + 1, j + 1, acc, best);
            }
            if i + 1 < a.len() {
                walk(a, b, i + 1, j, acc, best);
            }
            if j + 1 < b.len() {
                walk(a, b, i, j + 1, acc, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(a, b, 0, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn worked_example_pair() {
        assert_eq!(dtw_distance(&A, &A).unwrap().distance, 0.0);
        let e = euclidean_distance(&A, &B).unwrap();
        assert!((e - libm::sqrt(72.0)).abs() < 1e-12);
        let d = dtw_distance(&A, &B).unwrap();
        let abs_sum: f64 = A.iter().zip(&B).map(|(x, y)| (x - y).abs()).sum();
        assert_eq!(abs_sum, 12.0);
        // Frozen from the path-enumeration oracle.
        assert_eq!(brute_force(&A, &B), 2.0);
        assert_eq!(d.distance, 2.0);
        assert!(d.distance < abs_sum);
    }

    #[test]
    fn repeated_element_costs_nothing() {
        let a = [0.5, 2.0, -1.0, 3.0];
        let b = [0.5, 2.0, 2.0, -1.0, 3.0];
        assert_eq!(dtw_distance(&a, &b).unwrap().distance, 0.0);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(dtw_distance(&[], &[1.0]).is_err());
        assert!(dtw_cost(&[1.0], &[]).is_err());
    }

    fn valid_path(p: &[(usize, usize)], n: usize, m: usize) -> bool {
        p.first() == Some(&(0, 0))
            && p.last() == Some(&(n - 1, m - 1))
            && p.windows(2).all(|w| {
                let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }

    proptest! {
        #[test]
        fn matches_path_enumeration(a in prop::collection::vec(-3.0f64..3.0, 1..6),
                                    b in prop::collection::vec(-3.0f64..3.0, 1..6)) {
            let r = dtw_distance(&a, &b).unwrap();
            prop_assert!((r.distance - brute_force(&a, &b)).abs() < 1e-9);
            prop_assert!((dtw_cost(&a, &b).unwrap() - r.distance).abs() < 1e-12);
            prop_assert!(valid_path(&r.path, a.len(), b.len()));
            let along: f64 = r.path.iter().map(|&(i, j)| (a[i] - b[j]).abs()).sum();
            prop_assert!((along - r.distance).abs() < 1e-9);
        }

        #[test]
        fn identity_symmetry_and_diagonal_bound(a in prop::collection::vec(-10.0f64..10.0, 1..40),
                                                seed in prop::collection::vec(-10.0f64..10.0, 40)) {
            prop_assert_eq!(dtw_cost(&a, &a).unwrap(), 0.0);
            let b = &seed[..a.len()];
            let ab = dtw_cost(&a, b).unwrap();
            let ba = dtw_cost(b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            let diag: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
            prop_assert!(ab <= diag + 1e-9);
        }
    }
}
