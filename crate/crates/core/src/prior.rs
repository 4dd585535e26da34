//! Moving-average estimate of the unlabeled class distribution.
//!
//! Starting from uniform, once per epoch the prior is blended with the
//! hard histogram of the classifier's argmax predictions:
//! `r <- mu r + (1 - mu) z`.

use crate::error::{Error, Result};
use crate::linalg::{argmax, Matrix};
use crate::losses::SIMPLEX_TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassPrior {
    r: Vec<f64>,
    mu: f64,
    epoch_count: usize,
}

impl ClassPrior {
    pub fn uniform(num_classes: usize, mu: f64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("num_classes", format!("a prior needs C >= 2, got {num_classes}")));
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::invalid("mu", format!("must lie in [0, 1], got {mu}")));
        }
        Ok(Self {
            r: vec![1.0 / num_classes as f64; num_classes],
            mu,
            epoch_count: 0,
        })
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn epoch_count(&self) -> usize {
        self.epoch_count
    }

    pub fn ema_update(&mut self, z: &[f64]) -> Result<()> {
        if z.len() != self.r.len() {
            return Err(Error::invalid("z", format!("length {} for C = {}", z.len(), self.r.len())));
        }
        let sum: f64 = z.iter().sum();
        if z.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid("z", format!("not a probability vector (sum {sum})")));
        }
        for (r, &zc) in self.r.iter_mut().zip(z) {
            *r = self.mu * *r + (1.0 - self.mu) * zc;
        }
        self.epoch_count += 1;
        Ok(())
    }
}

/// Fraction of rows whose argmax is each class; ties go to the lowest index.
pub fn hard_histogram(probs: &Matrix) -> Result<Vec<f64>> {
    if probs.rows() == 0 {
        return Err(Error::invalid("hard_histogram", "needs at least one row"));
    }
    let mut z = vec![0.0; probs.cols()];
    for row in probs.row_iter() {
        z[argmax(row)] += 1.0;
    }
    let n = probs.rows() as f64;
    z.iter_mut().for_each(|v| *v /= n);
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_start() {
        assert_eq!(ClassPrior::uniform(4, 0.99).unwrap().r(), &[0.25; 4]);
        assert_eq!(ClassPrior::uniform(2, 0.99).unwrap().r(), &[0.5, 0.5]);
        assert!(ClassPrior::uniform(1, 0.99).is_err());
        assert!(ClassPrior::uniform(3, 1.01).is_err());
    }

    #[test]
    fn histogram_counts_and_ties() {
        let p = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.6, 0.4], vec![0.2, 0.8]]).unwrap();
        let z = hard_histogram(&p).unwrap();
        assert!((z[0] - 2.0 / 3.0).abs() < 1e-15 && (z[1] - 1.0 / 3.0).abs() < 1e-15);
        let third = 1.0 / 3.0;
        let flat = Matrix::from_rows(&vec![vec![third; 3]; 3]).unwrap();
        assert_eq!(hard_histogram(&flat).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(hard_histogram(&Matrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn one_hot_rows_give_label_frequencies() {
        let labels = [2, 0, 2, 1, 2];
        let rows: Vec<Vec<f64>> = labels.iter().map(|&l| (0..3).map(|c| f64::from(u8::from(c == l))).collect()).collect();
        let z = hard_histogram(&Matrix::from_rows(&rows).unwrap()).unwrap();
        assert_eq!(z, vec![0.2, 0.2, 0.6]);
    }

    #[test]
    fn one_step() {
        let mut p = ClassPrior::uniform(2, 0.99).unwrap();
        p.ema_update(&[1.0, 0.0]).unwrap();
        assert!((p.r()[0] - 0.505).abs() < 1e-15);
        assert!((p.r()[1] - 0.495).abs() < 1e-15);
        assert_eq!(p.epoch_count(), 1);
    }

    #[test]
    fn frozen_prior() {
        let mut p = ClassPrior::uniform(3, 1.0).unwrap();
        let r0 = p.r().to_vec();
        p.ema_update(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.r(), &r0[..]);
    }

    #[test]
    fn rejects_off_simplex() {
        let mut p = ClassPrior::uniform(2, 0.9).unwrap();
        assert!(p.ema_update(&[0.7, 0.7]).is_err());
        assert!(p.ema_update(&[1.0]).is_err());
    }

    #[test]
    fn geometric_closed_form() {
        let mu = 0.99;
        let z = [0.7, 0.2, 0.1];
        let mut p = ClassPrior::uniform(3, mu).unwrap();
        let r0 = p.r().to_vec();
        for _ in 0..100 {
            p.ema_update(&z).unwrap();
        }
        let muk = mu.powi(100);
        for c in 0..3 {
            let expected = muk * r0[c] + (1.0 - muk) * z[c];
            assert!((p.r()[c] - expected).abs() <= 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn simplex_and_contraction(mu in 0.0f64..=1.0, raw in proptest::collection::vec(0.0f64..1.0, 4), steps in 1usize..50) {
            let total: f64 = raw.iter().sum::<f64>() + 1e-3;
            let z: Vec<f64> = raw.iter().map(|v| (v + 2.5e-4) / total).collect();
            let mut p = ClassPrior::uniform(4, mu).unwrap();
            for _ in 0..steps {
                let before = p.r().iter().zip(&z).map(|(r, z)| (r - z).abs()).fold(0.0, f64::max);
                p.ema_update(&z).unwrap();
                let after = p.r().iter().zip(&z).map(|(r, z)| (r - z).abs()).fold(0.0, f64::max);
                proptest::prop_assert!((after - mu * before).abs() <= 1e-12);
                let s: f64 = p.r().iter().sum();
                proptest::prop_assert!((s - 1.0).abs() <= 1e-9);
                proptest::prop_assert!(p.r().iter().all(|&v| v >= 0.0));
            }
        }
    }
}
