//! Single-hidden-layer network trained by damped least squares.
//!
//! The network is `tanh` in the hidden layer and identity at the output,
//! fitted to one-hot targets by a Levenberg-Marquardt loop: each epoch
//! solves `(J'J + lambda I) step = J' r` for the packed weight vector,
//! accepts the step only when the sum of squared residuals does not
//! increase, and adapts `lambda` by factors of ten. Training stops on a
//! small gradient, a stretch of epochs without cross-validation
//! improvement, a flat error, or the epoch cap; the weights returned are
//! the best seen on the cross-validation set.
//!
//! The output layer starts at exactly zero. The first accepted step then
//! solves an ordinary least-squares readout over the random hidden basis,
//! and relabeling classes merely permutes rows of that readout, so the
//! whole training trajectory is equivariant under label permutation.
//!
//! [`ea_refine`] adds an evolutionary polish: a small population of
//! jittered weight vectors per generation, moved by the momentum rule in
//! [`momentum_update`], accepted greedily on cross-validation score. The
//! refined network is never worse than its input on that score.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e10;
const LAMBDA_MIN: f64 = 1e-15;
const GRADIENT_TOL: f64 = 1e-7;
const MAX_EPOCHS: usize = 200;
const CV_PATIENCE: usize = 6;
const SSE_FLAT_REL: f64 = 1e-12;

const EA_GENERATIONS: usize = 40;
const EA_POPULATION: usize = 10;
const EA_STALL: usize = 12;
const EA_JITTER_REL: f64 = 1e-3;

const ANN_TAG: u64 = 0x414E4E;
const EA_TAG: u64 = 0x4541;

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Feed-forward network with one tanh hidden layer and identity outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    /// Hidden weights, `hidden x inputs`.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// Output weights, `classes x hidden`.
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl AnnModel {
    pub fn n_inputs(&self) -> usize {
        self.w1[0].len()
    }

    pub fn hidden(&self) -> usize {
        self.w1.len()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.len()
    }

    fn hidden_act(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, &b)| {
                let a: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
                a.tanh()
            })
            .collect()
    }

    /// Raw output activations, one per class.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let h = self.hidden_act(x);
        self.w2
            .iter()
            .zip(&self.b2)
            .map(|(row, &b)| row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Index of the largest output; ties go to the lowest class.
    pub fn predict(&self, x: &[f64]) -> u32 {
        let out = self.forward(x);
        let mut best = 0;
        for (c, &v) in out.iter().enumerate().skip(1) {
            if v > out[best] {
                best = c;
            }
        }
        best as u32
    }

    /// Sum of squared one-hot residuals over a dataset.
    pub fn sse(&self, x: &[Vec<f64>], y: &[u32]) -> f64 {
        let mut acc = 0.0;
        for (row, &label) in x.iter().zip(y) {
            for (c, out) in self.forward(row).into_iter().enumerate() {
                let t = if c as u32 == label { 1.0 } else { 0.0 };
                acc += (out - t) * (out - t);
            }
        }
        acc
    }
}

/// Why training ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The loss gradient fell below tolerance.
    GradientSmall,
    /// No cross-validation improvement for the patience window.
    CvPatience,
    /// An accepted step no longer changed the training error.
    SseFlat,
    /// Epoch budget exhausted.
    MaxEpochs,
}

/// Epoch-by-epoch account of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    /// Training SSE after each accepted epoch, starting with the initial net.
    pub train_sse: Vec<f64>,
    /// Cross-validation SSE after each accepted epoch (empty without a CV set).
    pub cv_sse: Vec<f64>,
    pub stop: StopReason,
}

/// One momentum step: blends the previous increment with a new one.
///
/// Returns `momentum * previous + (1 - momentum) * step`. This is the
/// velocity rule used by the evolutionary refinement; it is exposed
/// separately because its arithmetic is part of the training contract.
pub fn momentum_update(momentum: f64, previous: f64, step: f64) -> f64 {
    momentum * previous + (1.0 - momentum) * step
}

// ---------------------------------------------------------------------------
// Packed parameter layout
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Shape {
    n_in: usize,
    hidden: usize,
    classes: usize,
}

impl Shape {
    fn w1_len(&self) -> usize {
        self.hidden * (self.n_in + 1)
    }

    fn class_offset(&self, c: usize) -> usize {
        self.w1_len() + c * (self.hidden + 1)
    }

    fn len(&self) -> usize {
        self.w1_len() + self.classes * (self.hidden + 1)
    }

    fn pack(&self, m: &AnnModel) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.len());
        for j in 0..self.hidden {
            p.extend_from_slice(&m.w1[j]);
            p.push(m.b1[j]);
        }
        for c in 0..self.classes {
            p.extend_from_slice(&m.w2[c]);
            p.push(m.b2[c]);
        }
        p
    }

    fn unpack(&self, p: &[f64]) -> AnnModel {
        let f = self.n_in;
        let mut w1 = Vec::with_capacity(self.hidden);
        let mut b1 = Vec::with_capacity(self.hidden);
        for j in 0..self.hidden {
            let base = j * (f + 1);
            w1.push(p[base..base + f].to_vec());
            b1.push(p[base + f]);
        }
        let mut w2 = Vec::with_capacity(self.classes);
        let mut b2 = Vec::with_capacity(self.classes);
        for c in 0..self.classes {
            let base = self.class_offset(c);
            w2.push(p[base..base + self.hidden].to_vec());
            b2.push(p[base + self.hidden]);
        }
        AnnModel { w1, b1, w2, b2 }
    }
}

// ---------------------------------------------------------------------------
// Normal equations
// ---------------------------------------------------------------------------

/// Accumulates the Gauss-Newton normal equations for one-hot least squares:
/// `jtj` receives the upper triangle of J'J and `grad` receives J'r, where
/// J is the Jacobian of the outputs and r the residuals. Returns the SSE.
///
/// The residual rows for sample `s` factor over classes: the hidden-weight
/// part of row `(s, c)` is an outer product of `w2[c] .* (1 - h^2)` with the
/// augmented input, so the hidden-block of J'J sums to a Kronecker-style
/// product that costs `hidden^2 * (inputs+1)^2` per sample instead of that
/// again per class.
fn accumulate(model: &AnnModel, shape: Shape, x: &[Vec<f64>], y: &[u32], jtj: &mut [f64], grad: &mut [f64]) -> f64 {
    let (f, hh, cc) = (shape.n_in, shape.hidden, shape.classes);
    let p = shape.len();
    jtj.iter_mut().for_each(|v| *v = 0.0);
    grad.iter_mut().for_each(|v| *v = 0.0);

    // Class-summed output weight products, upper triangle.
    let mut w2tw2 = vec![0.0; hh * hh];
    for j in 0..hh {
        for j2 in j..hh {
            let mut s = 0.0;
            for c in 0..cc {
                s += model.w2[c][j] * model.w2[c][j2];
            }
            w2tw2[j * hh + j2] = s;
        }
    }

    // The output-block of J'J is the same Gram matrix of augmented hidden
    // activations for every class; accumulate it once.
    let mut hgram = vec![0.0; (hh + 1) * (hh + 1)];

    let mut sse = 0.0;
    let mut xa = vec![0.0; f + 1];
    let mut ha = vec![0.0; hh + 1];
    for (row, &label) in x.iter().zip(y) {
        xa[..f].copy_from_slice(row);
        xa[f] = 1.0;
        let h = model.hidden_act(row);
        ha[..hh].copy_from_slice(&h);
        ha[hh] = 1.0;
        let d: Vec<f64> = h.iter().map(|v| 1.0 - v * v).collect();
        let out = model.forward(row);
        let r: Vec<f64> = out
            .iter()
            .enumerate()
            .map(|(c, &o)| o - if c as u32 == label { 1.0 } else { 0.0 })
            .collect();
        sse += r.iter().map(|v| v * v).sum::<f64>();

        // Hidden-block of J'J.
        for j in 0..hh {
            for j2 in j..hh {
                let u = w2tw2[j * hh + j2] * d[j] * d[j2];
                if u == 0.0 {
                    continue;
                }
                let a_base = j * (f + 1);
                let b_base = j2 * (f + 1);
                if j == j2 {
                    for k in 0..=f {
                        let v = u * xa[k];
                        let arow = (a_base + k) * p;
                        for k2 in k..=f {
                            jtj[arow + b_base + k2] += v * xa[k2];
                        }
                    }
                } else {
                    for k in 0..=f {
                        let v = u * xa[k];
                        let arow = (a_base + k) * p;
                        for k2 in 0..=f {
                            jtj[arow + b_base + k2] += v * xa[k2];
                        }
                    }
                }
            }
        }

        // Cross blocks between hidden weights and each class readout.
        for c in 0..cc {
            let off = shape.class_offset(c);
            for j in 0..hh {
                let u = model.w2[c][j] * d[j];
                if u == 0.0 {
                    continue;
                }
                let a_base = j * (f + 1);
                for k in 0..=f {
                    let v = u * xa[k];
                    let arow = (a_base + k) * p;
                    for (j2, &hv) in ha.iter().enumerate() {
                        jtj[arow + off + j2] += v * hv;
                    }
                }
            }
        }

        for j in 0..=hh {
            for j2 in j..=hh {
                hgram[j * (hh + 1) + j2] += ha[j] * ha[j2];
            }
        }

        // Gradient.
        for j in 0..hh {
            let mut e = 0.0;
            for c in 0..cc {
                e += model.w2[c][j] * r[c];
            }
            e *= d[j];
            if e == 0.0 {
                continue;
            }
            let base = j * (f + 1);
            for k in 0..=f {
                grad[base + k] += e * xa[k];
            }
        }
        for c in 0..cc {
            let off = shape.class_offset(c);
            for (j2, &hv) in ha.iter().enumerate() {
                grad[off + j2] += r[c] * hv;
            }
        }
    }

    for c in 0..cc {
        let off = shape.class_offset(c);
        for j in 0..=hh {
            for j2 in j..=hh {
                jtj[(off + j) * p + off + j2] += hgram[j * (hh + 1) + j2];
            }
        }
    }
    sse
}

/// Solves `A x = b` for symmetric positive-definite `A` stored as a flat
/// row-major upper triangle. Returns `None` if the factorization breaks
/// down.
fn cholesky_solve(a_upper: &[f64], p: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a_upper[j * p + i];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..p {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * p + k] * y[k];
        }
        y[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in i + 1..p {
            s -= l[k * p + i] * y[k];
        }
        y[i] = s / l[i * p + i];
    }
    Some(y)
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Trains a fresh network by the damped least-squares loop described in the
/// module docs. `x_cv` may be empty, which disables early stopping.
pub(crate) fn train_lm(
    x: &[Vec<f64>],
    y: &[u32],
    x_cv: &[Vec<f64>],
    y_cv: &[u32],
    classes: usize,
    hidden: usize,
    seed: u64,
) -> Result<(AnnModel, TrainReport)> {
    if hidden == 0 || hidden > 512 {
        return Err(Error::Argument(format!("hidden layer size must be in 1..=512, got {hidden}")));
    }
    let n_in = x[0].len();
    let shape = Shape { n_in, hidden, classes };

    // Hidden layer starts uniform in +-1/sqrt(inputs); the readout starts at
    // zero so the first accepted step is a pure least-squares fit of the
    // readout and training is equivariant under label permutation.
    let mut rng = rng_from_seed(derive_seed(seed, &[ANN_TAG]));
    let bound = 1.0 / (n_in as f64).sqrt();
    let mut model = AnnModel {
        w1: (0..hidden)
            .map(|_| (0..n_in).map(|_| rng.gen_range(-bound..bound)).collect())
            .collect(),
        b1: (0..hidden).map(|_| rng.gen_range(-bound..bound)).collect(),
        w2: vec![vec![0.0; hidden]; classes],
        b2: vec![0.0; classes],
    };

    let p = shape.len();
    let mut jtj = vec![0.0; p * p];
    let mut grad = vec![0.0; p];
    let mut lambda = LAMBDA_START;

    let mut report = TrainReport {
        epochs: 0,
        train_sse: Vec::new(),
        cv_sse: Vec::new(),
        stop: StopReason::MaxEpochs,
    };
    let mut best_cv = f64::INFINITY;
    let mut best_model = model.clone();
    let mut since_best = 0;

    let mut sse = accumulate(&model, shape, x, y, &mut jtj, &mut grad);
    report.train_sse.push(sse);

    for epoch in 0..MAX_EPOCHS {
        report.epochs = epoch + 1;
        let gmax = grad.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if gmax < GRADIENT_TOL {
            report.stop = StopReason::GradientSmall;
            break;
        }

        // Retry with increasing damping until a step does not raise the SSE.
        let mut params = shape.pack(&model);
        let accepted = loop {
            let mut damped = jtj.to_vec();
            for i in 0..p {
                damped[i * p + i] += lambda;
            }
            let step = cholesky_solve(&damped, p, &grad);
            let candidate = step.map(|s| {
                let q: Vec<f64> = params.iter().zip(&s).map(|(w, d)| w - d).collect();
                let m = shape.unpack(&q);
                let e = m.sse(x, y);
                (q, m, e)
            });
            match candidate {
                Some((q, m, e)) if e.is_finite() && e <= sse => {
                    lambda = (lambda / 10.0).max(LAMBDA_MIN);
                    params = q;
                    let improved = sse - e;
                    model = m;
                    sse = e;
                    break improved;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        return Err(Error::TrainingStalled(format!(
                            "no damping up to {LAMBDA_MAX:e} yields a non-increasing step at epoch {epoch}"
                        )));
                    }
                }
            }
        };
        report.train_sse.push(sse);

        if !x_cv.is_empty() {
            let cv = model.sse(x_cv, y_cv);
            report.cv_sse.push(cv);
            if cv < best_cv {
                best_cv = cv;
                best_model = model.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= CV_PATIENCE {
                    report.stop = StopReason::CvPatience;
                    break;
                }
            }
        }

        if accepted <= SSE_FLAT_REL * sse.max(1.0) {
            report.stop = StopReason::SseFlat;
            break;
        }

        sse = accumulate(&model, shape, x, y, &mut jtj, &mut grad);
    }

    if !x_cv.is_empty() && best_cv.is_finite() {
        model = best_model;
    }
    Ok((model, report))
}

// ---------------------------------------------------------------------------
// Evolutionary refinement
// ---------------------------------------------------------------------------

/// Classification error and SSE, the lexicographic score used by the
/// refinement loop.
fn score(model: &AnnModel, x: &[Vec<f64>], y: &[u32]) -> (f64, f64) {
    let wrong = x.iter().zip(y).filter(|(r, &l)| model.predict(r) != l).count();
    (wrong as f64 / x.len().max(1) as f64, model.sse(x, y))
}

/// Polishes a trained network by a small evolutionary search.
///
/// Each generation proposes [`EA_POPULATION`] candidates: a Gaussian jitter
/// scaled to `1e-3` of the weight norm, blended with the last applied
/// increment by [`momentum_update`]. The best candidate replaces the
/// incumbent only when it strictly improves the cross-validation score
/// (training score when no CV set is given), so the result is never worse
/// than the input.
pub(crate) fn ea_refine(
    model: AnnModel,
    x: &[Vec<f64>],
    y: &[u32],
    x_cv: &[Vec<f64>],
    y_cv: &[u32],
    momentum: f64,
    seed: u64,
) -> AnnModel {
    let (sx, sy) = if x_cv.is_empty() { (x, y) } else { (x_cv, y_cv) };
    let shape = Shape { n_in: model.n_inputs(), hidden: model.hidden(), classes: model.num_classes() };
    let mut best = shape.pack(&model);
    let mut best_score = score(&model, sx, sy);
    let mut velocity = vec![0.0; best.len()];
    let mut stalled = 0;

    for gen in 0..EA_GENERATIONS {
        let norm = best.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sigma = EA_JITTER_REL * norm.max(1e-6);
        let mut generation_best: Option<(Vec<f64>, Vec<f64>, (f64, f64))> = None;
        for member in 0..EA_POPULATION {
            let mut rng = rng_from_seed(derive_seed(seed, &[EA_TAG, gen as u64, member as u64]));
            let cand_velocity: Vec<f64> = velocity
                .iter()
                .map(|&v| {
                    let jitter: f64 = StandardNormal.sample(&mut rng);
                    momentum_update(momentum, v, sigma * jitter)
                })
                .collect();
            let cand: Vec<f64> = best.iter().zip(&cand_velocity).map(|(w, d)| w + d).collect();
            let cand_score = score(&shape.unpack(&cand), sx, sy);
            let better = match &generation_best {
                None => true,
                Some((_, _, s)) => cand_score < *s,
            };
            if better {
                generation_best = Some((cand, cand_velocity, cand_score));
            }
        }
        let (cand, cand_velocity, cand_score) = generation_best.unwrap();
        if cand_score < best_score {
            best = cand;
            // The velocity carries the applied increment, jitter included.
            velocity = cand_velocity;
            best_score = cand_score;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= EA_STALL {
                break;
            }
        }
    }
    shape.unpack(&best)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::tests::{blobs, take};
    use crate::learn::{split, train, Algorithm, Model, Normalizer, DEFAULT_FRACTIONS};

    #[test]
    fn momentum_update_arithmetic() {
        assert_eq!(momentum_update(0.5, 0.25, 0.0), 0.125);
        assert_eq!(momentum_update(0.0, 123.0, 7.0), 7.0);
        assert_eq!(momentum_update(1.0, 0.5, 99.0), 0.5);
        // Linear blend: the two parts add up.
        let full = momentum_update(0.3, 2.0, 4.0);
        assert!((full - (0.3 * 2.0 + 0.7 * 4.0)).abs() < 1e-15);
    }

    /// The structured normal-equations accumulation must agree with a
    /// finite-difference Jacobian of the raw outputs.
    #[test]
    fn normal_equations_match_finite_differences() {
        let shape = Shape { n_in: 3, hidden: 4, classes: 3 };
        let mut rng = rng_from_seed(77);
        let model = AnnModel {
            w1: (0..4).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            b1: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            w2: (0..3).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            b2: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let x: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<u32> = vec![0, 2, 1, 1, 0];

        let p = shape.len();
        let mut jtj = vec![0.0; p * p];
        let mut grad = vec![0.0; p];
        let sse = accumulate(&model, shape, &x, &y, &mut jtj, &mut grad);
        assert!((sse - model.sse(&x, &y)).abs() < 1e-12);

        // Jacobian by central differences on the packed parameters.
        let params = shape.pack(&model);
        let eps = 1e-6;
        let rows = x.len() * 3;
        let mut j_fd = vec![vec![0.0; p]; rows];
        for q in 0..p {
            let mut plus = params.clone();
            plus[q] += eps;
            let mut minus = params.clone();
            minus[q] -= eps;
            let (mp, mm) = (shape.unpack(&plus), shape.unpack(&minus));
            for (s, row) in x.iter().enumerate() {
                let (op, om) = (mp.forward(row), mm.forward(row));
                for c in 0..3 {
                    j_fd[s * 3 + c][q] = (op[c] - om[c]) / (2.0 * eps);
                }
            }
        }
        let residual: Vec<f64> = x
            .iter()
            .zip(&y)
            .flat_map(|(row, &l)| {
                model
                    .forward(row)
                    .into_iter()
                    .enumerate()
                    .map(move |(c, o)| o - if c as u32 == l { 1.0 } else { 0.0 })
                    .collect::<Vec<_>>()
            })
            .collect();
        for a in 0..p {
            let g_fd: f64 = (0..rows).map(|r| j_fd[r][a] * residual[r]).sum();
            assert!((grad[a] - g_fd).abs() < 1e-6, "grad[{a}]: {} vs {g_fd}", grad[a]);
            for b in a..p {
                let jj: f64 = (0..rows).map(|r| j_fd[r][a] * j_fd[r][b]).sum();
                assert!((jtj[a * p + b] - jj).abs() < 1e-5, "jtj[{a},{b}]: {} vs {jj}", jtj[a * p + b]);
            }
        }
    }

    #[test]
    fn cholesky_solves_a_known_system() {
        // A = [[4,2,0],[2,5,1],[0,1,3]], x = [1,-2,3] -> b = A x.
        let p = 3;
        let a = vec![4.0, 2.0, 0.0, 0.0, 5.0, 1.0, 0.0, 0.0, 3.0];
        let b = vec![4.0 - 4.0, 2.0 - 10.0 + 3.0, -2.0 + 9.0];
        let x = cholesky_solve(&a, p, &b).unwrap();
        for (got, want) in x.iter().zip([1.0, -2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        // Not positive definite.
        let bad = vec![1.0, 2.0, 0.0, 1.0];
        assert!(cholesky_solve(&bad, 2, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn accepted_epochs_never_raise_training_sse() {
        let (x, y) = blobs(&[(0.0, 0.0), (2.5, 0.5), (1.0, 3.0)], 40, 0.6, 17);
        let (_, report) = train_lm(&x, &y, &[], &[], 3, 8, 17).unwrap();
        for w in report.train_sse.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "SSE rose from {} to {}", w[0], w[1]);
        }
        assert!(report.train_sse.len() >= 2, "no epoch was accepted");
    }

    #[test]
    fn network_learns_xor() {
        // XOR with jitter: not linearly separable, so the hidden layer must
        // do real work.
        let mut rng = rng_from_seed(5);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for k in 0..200 {
            let (a, b) = ((k >> 1) & 1, k & 1);
            x.push(vec![
                a as f64 + 0.15 * rng.gen_range(-1.0..1.0),
                b as f64 + 0.15 * rng.gen_range(-1.0..1.0),
            ]);
            y.push((a ^ b) as u32);
        }
        let (model, _) = train_lm(&x[..160], &y[..160], &x[160..], &y[160..], 2, 6, 5).unwrap();
        let err = x
            .iter()
            .zip(&y)
            .filter(|(row, &l)| model.predict(row) != l)
            .count() as f64
            / x.len() as f64;
        assert!(err <= 0.02, "XOR error {err}");
    }

    #[test]
    fn relabeling_classes_permutes_predictions() {
        // Swap classes 0 and 2 everywhere; the trained predictors must be
        // related by the same swap on every query point.
        let (x, y) = blobs(&[(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)], 50, 0.5, 31);
        let swap = |l: u32| match l {
            0 => 2,
            2 => 0,
            other => other,
        };
        let y_swapped: Vec<u32> = y.iter().map(|&l| swap(l)).collect();
        let s = split(&y, DEFAULT_FRACTIONS, 31).unwrap();
        let (xt, yt) = take(&x, &y, &s.train);
        let (_, yt_s) = take(&x, &y_swapped, &s.train);
        let (xc, yc) = take(&x, &y, &s.cv);
        let (_, yc_s) = take(&x, &y_swapped, &s.cv);

        let (m1, _) = train_lm(&xt, &yt, &xc, &yc, 3, 10, 9).unwrap();
        let (m2, _) = train_lm(&xt, &yt_s, &xc, &yc_s, 3, 10, 9).unwrap();
        for row in &x {
            assert_eq!(swap(m1.predict(row)), m2.predict(row));
        }
    }

    #[test]
    fn refinement_never_hurts_cv_score() {
        let (x, y) = blobs(&[(0.0, 0.0), (1.6, 0.4), (0.5, 1.8)], 50, 0.7, 23);
        let s = split(&y, DEFAULT_FRACTIONS, 23).unwrap();
        let (xt, yt) = take(&x, &y, &s.train);
        let (xc, yc) = take(&x, &y, &s.cv);
        let norm = Normalizer::fit(&xt).unwrap();
        let (xt, xc) = (norm.apply_all(&xt), norm.apply_all(&xc));

        let (base, _) = train_lm(&xt, &yt, &xc, &yc, 3, 8, 13).unwrap();
        let refined = ea_refine(base.clone(), &xt, &yt, &xc, &yc, 0.5, 13);
        let (be, bs) = score(&base, &xc, &yc);
        let (re, rs) = score(&refined, &xc, &yc);
        assert!((re, rs) <= (be, bs), "refined ({re}, {rs}) vs base ({be}, {bs})");
    }

    #[test]
    fn training_is_reproducible() {
        let (x, y) = blobs(&[(0.0, 0.0), (3.0, 1.0)], 30, 0.5, 2);
        let a = train(Algorithm::Ann { hidden: 5 }, &x, &y, &[], &[], 11).unwrap();
        let b = train(Algorithm::Ann { hidden: 5 }, &x, &y, &[], &[], 11).unwrap();
        match (&a, &b) {
            (Model::Ann(ma), Model::Ann(mb)) => assert_eq!(ma, mb),
            _ => unreachable!(),
        }
        let c = train(Algorithm::Ann { hidden: 5 }, &x, &y, &[], &[], 12).unwrap();
        match (&a, &c) {
            (Model::Ann(ma), Model::Ann(mc)) => assert_ne!(ma, mc),
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_zero_hidden_units() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            train_lm(&x, &[0, 1], &[], &[], 2, 0, 0),
            Err(Error::Argument(_))
        ));
    }
}
