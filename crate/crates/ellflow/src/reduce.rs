//! Exact compression of profiles with repeated rows.
//!
//! Indices whose rows of `S` and `T` coincide are interchangeable: the Dyson
//! solution, the right Perron vector of `𝔇_{|𝔟|²}S` and the kernel solve all
//! take one value per class. Grouping them turns N-dimensional problems into
//! K-dimensional ones with the class-summed matrices
//! `Ŝ_ac = Σ_{j∈c} s_{r(a),j}` (r(a) any member of class a). The constant
//! profile compresses to K = 1 and block profiles to one class per block.

use std::collections::HashMap;

use ndarray::{Array1, Array2};

use crate::ensemble::CorrelationProfile;
use crate::linalg::C64;

/// A profile compressed over classes of identical rows.
#[derive(Debug, Clone)]
pub struct ReducedProfile {
    /// Original dimension N.
    pub n: usize,
    /// Class index of every original index.
    pub labels: Vec<usize>,
    /// One representative original index per class.
    pub reps: Vec<usize>,
    /// Class sizes m_c.
    pub sizes: Vec<usize>,
    /// Class-summed variances `Ŝ`.
    pub s_hat: Array2<f64>,
    /// Class-summed covariances `T̂`.
    pub t_hat: Array2<C64>,
}

impl ReducedProfile {
    /// Groups identical rows of `(S, T)`.
    pub fn new(p: &CorrelationProfile) -> Self {
        let n = p.n;
        let mut classes: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut labels = Vec::with_capacity(n);
        let mut reps = Vec::new();
        for i in 0..n {
            let key: Vec<u64> = p
                .s
                .row(i)
                .iter()
                .map(|v| v.to_bits())
                .chain(p.t.row(i).iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]))
                .collect();
            let next = reps.len();
            let c = *classes.entry(key).or_insert(next);
            if c == next {
                reps.push(i);
            }
            labels.push(c);
        }
        let k = reps.len();
        let mut sizes = vec![0usize; k];
        for &c in &labels {
            sizes[c] += 1;
        }
        let mut s_hat = Array2::<f64>::zeros((k, k));
        let mut t_hat = Array2::<C64>::zeros((k, k));
        for (a, &r) in reps.iter().enumerate() {
            for j in 0..n {
                s_hat[[a, labels[j]]] += p.s[[r, j]];
                t_hat[[a, labels[j]]] += p.t[[r, j]];
            }
        }
        ReducedProfile { n, labels, reps, sizes, s_hat, t_hat }
    }

    /// Number of classes K.
    pub fn k(&self) -> usize {
        self.reps.len()
    }

    /// Class weights `m_c / N`.
    pub fn weights(&self) -> Array1<f64> {
        self.sizes.iter().map(|&m| m as f64 / self.n as f64).collect()
    }

    /// Expands a class vector to the original N indices.
    pub fn expand<T: Copy>(&self, v: &Array1<T>) -> Array1<T> {
        self.labels.iter().map(|&c| v[c]).collect()
    }

    /// Averages a class-constant quantity over the original indices.
    pub fn mean(&self, v: &Array1<C64>) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (c, &m) in self.sizes.iter().enumerate() {
            acc += v[c] * m as f64;
        }
        acc / self.n as f64
    }

    /// Restricts a full vector to class representatives.
    pub fn restrict<T: Copy>(&self, v: &Array1<T>) -> Array1<T> {
        self.reps.iter().map(|&r| v[r]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::constant_profiles;

    #[test]
    fn constant_profile_compresses_to_one_class() {
        let p = constant_profiles(7, C64::new(0.3, 0.1)).unwrap();
        let r = ReducedProfile::new(&p);
        assert_eq!(r.k(), 1);
        assert!((r.s_hat[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((r.t_hat[[0, 0]] - C64::new(0.3, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn blocks_compress_to_block_count() {
        let sb = Array2::from_shape_vec((2, 2), vec![0.1, 0.3, 0.2, 0.3]).unwrap();
        let tb = Array2::from_elem((2, 2), C64::new(0.05, 0.0));
        let p = CorrelationProfile::from_blocks(&[3, 5], &sb, &tb).unwrap();
        let r = ReducedProfile::new(&p);
        assert_eq!(r.k(), 2);
        assert_eq!(r.sizes, vec![3, 5]);
        assert!((r.s_hat[[0, 1]] - 1.5).abs() < 1e-15);
        assert!((r.s_hat[[1, 0]] - 0.6).abs() < 1e-15);
    }
}
