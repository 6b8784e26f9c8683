//! Pairwise support vector machines with a Gaussian kernel.
//!
//! Multi-class problems are reduced one-vs-one: a binary machine per class
//! pair, combined by voting with the summed decision values as tie-break.
//! Each binary machine is trained by sequential minimal optimization with
//! the classic working-set heuristics, except that every fallback scan
//! starts from index zero instead of a random position, so training is
//! fully deterministic for a given dataset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// KKT violation tolerance for the optimizer.
const KKT_TOL: f64 = 1e-3;
/// Minimum meaningful change of a dual coefficient.
const ALPHA_EPS: f64 = 1e-12;
/// Guard against pathological non-convergence.
const MAX_PASSES: usize = 10_000;

/// One binary machine of the one-vs-one ensemble. A positive decision value
/// votes for `pos`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    pub pos: u32,
    pub neg: u32,
    /// Support vectors.
    pub support: Vec<Vec<f64>>,
    /// Dual coefficients `alpha_i * y_i`, one per support vector.
    pub coeff: Vec<f64>,
    pub bias: f64,
}

/// A trained one-vs-one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub cost: f64,
    pub num_classes: usize,
    pub machines: Vec<PairMachine>,
}

fn kernel(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl PairMachine {
    pub fn decision(&self, gamma: f64, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coeff)
            .map(|(s, &c)| c * kernel(gamma, s, x))
            .sum::<f64>()
            + self.bias
    }
}

impl SvmModel {
    /// Majority vote over all pair machines; ties fall back to the summed
    /// signed decision values, then to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> u32 {
        let mut votes = vec![0u32; self.num_classes];
        let mut margin = vec![0.0f64; self.num_classes];
        for m in &self.machines {
            let f = m.decision(self.gamma, x);
            if f >= 0.0 {
                votes[m.pos as usize] += 1;
            } else {
                votes[m.neg as usize] += 1;
            }
            margin[m.pos as usize] += f;
            margin[m.neg as usize] -= f;
        }
        let mut best = 0;
        for c in 1..self.num_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && margin[c] > margin[best]) {
                best = c;
            }
        }
        best as u32
    }
}

// ---------------------------------------------------------------------------
// Sequential minimal optimization
// ---------------------------------------------------------------------------

struct Smo<'a> {
    x: &'a [&'a [f64]],
    y: &'a [f64],
    gram: Vec<f64>,
    alpha: Vec<f64>,
    bias: f64,
    /// `f(x_i) - y_i` for every training point.
    err: Vec<f64>,
    cost: f64,
}

impl<'a> Smo<'a> {
    fn new(x: &'a [&'a [f64]], y: &'a [f64], gamma: f64, cost: f64) -> Self {
        let n = x.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let k = kernel(gamma, x[i], x[j]);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }
        // With all alphas at zero, f(x) = 0 and the error is -y.
        let err = y.iter().map(|&v| -v).collect();
        Smo { x, y, gram, alpha: vec![0.0; n], bias: 0.0, err, cost }
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.x.len() + j]
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.err[i1], self.err[i2]);
        let s = y1 * y2;
        let (lo, hi) = if (y1 - y2).abs() > 0.5 {
            ((a2_old - a1_old).max(0.0), (self.cost + a2_old - a1_old).min(self.cost))
        } else {
            ((a1_old + a2_old - self.cost).max(0.0), (a1_old + a2_old).min(self.cost))
        };
        if lo >= hi {
            return false;
        }
        let (k11, k12, k22) = (self.k(i1, i1), self.k(i1, i2), self.k(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let a2 = if eta > 0.0 {
            (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Degenerate curvature: compare the objective at both bounds.
            let f1 = y1 * (e1 + self.bias) - a1_old * k11 - s * a2_old * k12;
            let f2 = y2 * (e2 + self.bias) - s * a1_old * k12 - a2_old * k22;
            let l1 = a1_old + s * (a2_old - lo);
            let h1 = a1_old + s * (a2_old - hi);
            let lobj = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
            let hobj = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
            if lobj < hobj - ALPHA_EPS {
                lo
            } else if lobj > hobj + ALPHA_EPS {
                hi
            } else {
                return false;
            }
        };
        if (a2 - a2_old).abs() < ALPHA_EPS * (a2 + a2_old + ALPHA_EPS) {
            return false;
        }
        let a1 = a1_old + s * (a2_old - a2);

        let d1 = y1 * (a1 - a1_old);
        let d2 = y2 * (a2 - a2_old);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_bias = if a1 > 0.0 && a1 < self.cost {
            b1
        } else if a2 > 0.0 && a2 < self.cost {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = new_bias - self.bias;
        for k in 0..self.x.len() {
            self.err[k] += d1 * self.k(i1, k) + d2 * self.k(i2, k) + db;
        }
        self.alpha[i1] = a1;
        self.alpha[i2] = a2;
        self.bias = new_bias;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.y[i2];
        let a2 = self.alpha[i2];
        let r2 = self.err[i2] * y2;
        let violates = (r2 < -KKT_TOL && a2 < self.cost) || (r2 > KKT_TOL && a2 > 0.0);
        if !violates {
            return false;
        }
        // Best second choice: the largest error gap among non-bound points.
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.x.len() {
            if self.alpha[i] > 0.0 && self.alpha[i] < self.cost {
                let gap = (self.err[i] - self.err[i2]).abs();
                if best.map_or(true, |(_, g)| gap > g) {
                    best = Some((i, gap));
                }
            }
        }
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // Fallback scans, in fixed order for determinism.
        for i1 in 0..self.x.len() {
            if self.alpha[i1] > 0.0 && self.alpha[i1] < self.cost && self.take_step(i1, i2) {
                return true;
            }
        }
        for i1 in 0..self.x.len() {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn solve(&mut self) {
        let n = self.x.len();
        let mut examine_all = true;
        let mut passes = 0;
        loop {
            let mut changed = 0;
            for i in 0..n {
                let non_bound = self.alpha[i] > 0.0 && self.alpha[i] < self.cost;
                if (examine_all || non_bound) && self.examine(i) {
                    changed += 1;
                }
            }
            passes += 1;
            if passes >= MAX_PASSES {
                break;
            }
            if examine_all {
                if changed == 0 {
                    break;
                }
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
    }
}

/// Trains the one-vs-one ensemble.
pub(crate) fn train_svm(x: &[Vec<f64>], y: &[u32], classes: usize, gamma: f64, cost: f64) -> Result<SvmModel> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Argument(format!("kernel width gamma must be positive, got {gamma}")));
    }
    if !(cost > 0.0) || !cost.is_finite() {
        return Err(Error::Argument(format!("box constraint must be positive, got {cost}")));
    }
    let mut machines = Vec::with_capacity(classes * (classes - 1) / 2);
    for pos in 0..classes as u32 {
        for neg in pos + 1..classes as u32 {
            let idx: Vec<usize> = y
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == pos || l == neg)
                .map(|(i, _)| i)
                .collect();
            let px: Vec<&[f64]> = idx.iter().map(|&i| x[i].as_slice()).collect();
            let py: Vec<f64> = idx.iter().map(|&i| if y[i] == pos { 1.0 } else { -1.0 }).collect();
            let mut smo = Smo::new(&px, &py, gamma, cost);
            smo.solve();
            let mut support = Vec::new();
            let mut coeff = Vec::new();
            for (i, &a) in smo.alpha.iter().enumerate() {
                if a > ALPHA_EPS {
                    support.push(px[i].to_vec());
                    coeff.push(a * py[i]);
                }
            }
            machines.push(PairMachine { pos, neg, support, coeff, bias: smo.bias });
        }
    }
    Ok(SvmModel { gamma, cost, num_classes: classes, machines })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::tests::blobs;

    #[test]
    fn kernel_is_one_at_zero_distance_and_decays() {
        let a = vec![1.0, -2.0, 3.0];
        assert_eq!(kernel(0.7, &a, &a), 1.0);
        let b = vec![1.0, -2.0, 4.0];
        assert!((kernel(0.7, &a, &b) - (-0.7f64).exp()).abs() < 1e-15);
        assert!(kernel(0.7, &a, &b) < kernel(0.07, &a, &b));
    }

    #[test]
    fn dual_constraints_hold_after_training() {
        let (x, y) = blobs(&[(0.0, 0.0), (3.0, 0.5)], 40, 0.6, 41);
        let model = train_svm(&x, &y, 2, 0.5, 10.0).unwrap();
        assert_eq!(model.machines.len(), 1);
        let m = &model.machines[0];
        // Box constraint on every dual coefficient, and the equality
        // constraint sum(alpha_i y_i) = 0.
        assert!(m.coeff.iter().all(|&c| c.abs() <= 10.0 + 1e-9));
        let balance: f64 = m.coeff.iter().sum();
        assert!(balance.abs() < 1e-6, "sum alpha_i y_i = {balance}");
        assert!(!m.support.is_empty());
    }

    #[test]
    fn kkt_conditions_hold_within_tolerance() {
        let (x, y) = blobs(&[(0.0, 0.0), (4.0, 0.0)], 30, 0.4, 19);
        let model = train_svm(&x, &y, 2, 0.5, 10.0).unwrap();
        let m = &model.machines[0];
        for (row, &label) in x.iter().zip(&y) {
            let yv = if label == m.pos { 1.0 } else { -1.0 };
            let f = m.decision(model.gamma, row);
            // Recover this point's alpha (zero if it is not a support vector).
            let alpha = m
                .support
                .iter()
                .zip(&m.coeff)
                .find(|(s, _)| s.as_slice() == row.as_slice())
                .map(|(_, &c)| c.abs())
                .unwrap_or(0.0);
            if alpha < 1e-9 {
                assert!(yv * f >= 1.0 - 10.0 * KKT_TOL, "margin {} for free point", yv * f);
            } else if alpha > 10.0 - 1e-9 {
                assert!(yv * f <= 1.0 + 10.0 * KKT_TOL, "margin {} for bound point", yv * f);
            }
        }
    }

    #[test]
    fn three_classes_vote_correctly() {
        let (x, y) = blobs(&[(0.0, 0.0), (4.0, 0.0), (2.0, 3.5)], 50, 0.4, 27);
        let model = train_svm(&x, &y, 3, 0.5, 10.0).unwrap();
        assert_eq!(model.machines.len(), 3);
        let wrong = x.iter().zip(&y).filter(|(r, &l)| model.predict(r) != l).count();
        assert!(wrong <= 1, "{wrong} of {} misvoted", x.len());
    }

    #[test]
    fn narrow_kernel_memorizes_training_data() {
        // Heavily overlapping clouds: a narrow kernel can still carve out
        // every training point.
        let (x, y) = blobs(&[(0.0, 0.0), (0.8, 0.0)], 40, 0.5, 33);
        let model = train_svm(&x, &y, 2, 50.0, 100.0).unwrap();
        let wrong = x.iter().zip(&y).filter(|(r, &l)| model.predict(r) != l).count();
        assert_eq!(wrong, 0, "narrow-kernel machine should fit the training set exactly");
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = blobs(&[(0.0, 0.0), (2.0, 2.0)], 35, 0.7, 3);
        let a = train_svm(&x, &y, 2, 0.5, 10.0).unwrap();
        let b = train_svm(&x, &y, 2, 0.5, 10.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(train_svm(&x, &[0, 1], 2, 0.0, 10.0).is_err());
        assert!(train_svm(&x, &[0, 1], 2, 0.5, -1.0).is_err());
    }
}
