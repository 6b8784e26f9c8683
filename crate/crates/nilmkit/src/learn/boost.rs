//! Boosted decision stumps, one binary ensemble per class.
//!
//! Each class gets its own AdaBoost ensemble trained on the binary
//! question "is this sample that class". A round fits the best
//! axis-aligned one-level tree under the current sample weights, earns the
//! vote `alpha = ln((1 - err)/err)`, then reweights its misses by
//! `exp(alpha)`. Rounds stop early when a stump is perfect or when no
//! stump beats chance. Prediction takes the class whose ensemble reports
//! the largest signed margin.
//!
//! The reduction to per-class margins is deliberate. A single ensemble
//! whose stumps name one class per side can lock into a two-stump cycle
//! on well-separated clusters: the round-t stump undoes the weight update
//! of round t-1, every round repeats one of two splits, and the vote
//! totals of the classes those splits never name stop growing. Binary
//! subproblems cannot cycle that way because each round must cut the
//! weighted error of the *same* two-sided question, so the usual
//! exponential training-error bound applies per class.
//!
//! When several stumps tie for the lowest weighted error, the round picks
//! one of them with the seeded RNG, spreading equivalent splits over
//! independent features. Equal seeds still give byte-equal models.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

/// Weighted-error floor that caps the vote of a perfect stump.
const ERR_FLOOR: f64 = 1e-12;

/// An axis-aligned threshold test voting for or against one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// True when the `<= threshold` side is the "is this class" side.
    pub positive_le: bool,
    /// Vote weight `ln((1 - err)/err)` earned at training time.
    pub alpha: f64,
}

impl Stump {
    /// Signed vote: `+alpha` for the class, `-alpha` against it.
    pub fn vote(&self, x: &[f64]) -> f64 {
        if (x[self.feature] <= self.threshold) == self.positive_le {
            self.alpha
        } else {
            -self.alpha
        }
    }
}

/// One-vs-rest ensembles of boosted stumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub num_classes: usize,
    /// `ensembles[c]` scores membership of class `c`, stumps in training
    /// order.
    pub ensembles: Vec<Vec<Stump>>,
}

impl BoostModel {
    /// Per-class margins, the summed signed votes of each ensemble.
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        self.ensembles
            .iter()
            .map(|e| e.iter().map(|s| s.vote(x)).sum())
            .collect()
    }

    /// Class with the largest margin; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> u32 {
        let margins = self.margins(x);
        let mut best = 0;
        for c in 1..self.num_classes {
            if margins[c] > margins[best] {
                best = c;
            }
        }
        best as u32
    }
}

/// Two weighted errors within this distance count as a tie. Weights are
/// normalized to sum 1, so the slack only absorbs summation-order dust.
const TIE_SLACK: f64 = 1e-12;

/// The best stump for a binary target under the given sample weights, or
/// `None` when every feature is constant. Candidate thresholds are
/// midpoints between consecutive distinct feature values; both polarities
/// of every cut are scored. When several candidates tie for the lowest
/// error, one of them is drawn uniformly with `rng`.
fn best_stump(
    x: &[Vec<f64>],
    positive: &[bool],
    weights: &[f64],
    order: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
) -> Option<(Stump, f64)> {
    let dim = x[0].len();
    let total_pos: f64 = weights
        .iter()
        .zip(positive)
        .filter(|(_, &p)| p)
        .map(|(w, _)| w)
        .sum();
    let total: f64 = weights.iter().sum();
    let mut best_err = f64::INFINITY;
    let mut ties: Vec<Stump> = Vec::new();

    for f in 0..dim {
        let idx = &order[f];
        let mut pos_left = 0.0f64;
        let mut all_left = 0.0f64;
        for pos in 0..idx.len() - 1 {
            let i = idx[pos];
            if positive[i] {
                pos_left += weights[i];
            }
            all_left += weights[i];
            let (v0, v1) = (x[i][f], x[idx[pos + 1]][f]);
            if v0 == v1 {
                continue;
            }
            let threshold = v0 + (v1 - v0) / 2.0;
            // Voting positive on the `<=` side misses the negatives that
            // fell left of the cut and the positives that fell right.
            let err_le = (all_left - pos_left) + (total_pos - pos_left);
            for (err, positive_le) in [(err_le, true), (total - err_le, false)] {
                if err < best_err - TIE_SLACK {
                    best_err = err;
                    ties.clear();
                }
                if err <= best_err + TIE_SLACK {
                    ties.push(Stump { feature: f, threshold, positive_le, alpha: 0.0 });
                }
            }
        }
    }
    if ties.is_empty() {
        return None;
    }
    let pick = ties.swap_remove(rng.gen_range(0..ties.len()));
    Some((pick, best_err.max(0.0)))
}

/// Boosts up to `rounds` stumps against one binary target.
fn train_binary(
    x: &[Vec<f64>],
    positive: &[bool],
    rounds: usize,
    order: &[Vec<usize>],
    seed: u64,
) -> Result<Vec<Stump>> {
    let mut rng = rng_from_seed(seed);
    let n = x.len();
    let mut weights = vec![1.0 / n as f64; n];
    let mut stumps: Vec<Stump> = Vec::new();

    for round in 0..rounds {
        let found = best_stump(x, positive, &weights, order, &mut rng);
        let (mut stump, err) = match found {
            Some(v) => v,
            None => {
                if round == 0 {
                    return Err(Error::DegenerateInput(
                        "every feature is constant; no stump can split".into(),
                    ));
                }
                break;
            }
        };
        if err >= 0.5 {
            if round == 0 {
                return Err(Error::TrainingStalled(format!(
                    "first weak learner error {err:.3} is no better than chance 0.500"
                )));
            }
            break;
        }
        stump.alpha = ((1.0 - err) / err.max(ERR_FLOOR)).ln();
        stumps.push(stump.clone());
        if err < ERR_FLOOR {
            break;
        }
        let boost = stump.alpha.exp();
        let mut total = 0.0;
        for ((row, &is_pos), w) in x.iter().zip(positive).zip(weights.iter_mut()) {
            if (stump.vote(row) > 0.0) != is_pos {
                *w *= boost;
            }
            total += *w;
        }
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
    Ok(stumps)
}

/// Trains one ensemble of up to `rounds` stumps per class. `seed` only
/// breaks ties between equally good stumps; the search itself is
/// exhaustive every round.
pub(crate) fn train_boost(
    x: &[Vec<f64>],
    y: &[u32],
    classes: usize,
    rounds: usize,
    seed: u64,
) -> Result<BoostModel> {
    if rounds == 0 {
        return Err(Error::Argument("boosting needs at least one round".into()));
    }
    let n = x.len();
    let dim = x[0].len();

    // Sort orders per feature, computed once and shared by all ensembles.
    let order: Vec<Vec<usize>> = (0..dim)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).unwrap().then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut ensembles = Vec::with_capacity(classes);
    for class in 0..classes {
        let positive: Vec<bool> = y.iter().map(|&l| l as usize == class).collect();
        let ensemble = train_binary(x, &positive, rounds, &order, derive_seed(seed, &[class as u64]))?;
        ensembles.push(ensemble);
    }
    Ok(BoostModel { num_classes: classes, ensembles })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn wrong(model: &BoostModel, x: &[Vec<f64>], y: &[u32]) -> usize {
        x.iter().zip(y).filter(|(r, &l)| model.predict(r) != l).count()
    }

    #[test]
    fn learns_interval_classes_exactly() {
        // Three classes laid out on a line: two clean thresholds suffice.
        let x: Vec<Vec<f64>> = (0..90).map(|k| vec![-3.0 + 6.0 * k as f64 / 89.0]).collect();
        let y: Vec<u32> = x
            .iter()
            .map(|r| if r[0] < -1.0 { 0 } else if r[0] < 1.0 { 1 } else { 2 })
            .collect();
        let model = train_boost(&x, &y, 3, 30, 0).unwrap();
        assert_eq!(wrong(&model, &x, &y), 0);
    }

    #[test]
    fn first_round_alpha_matches_the_vote_formula() {
        // Uniform weights over four points with one positive for class 1.
        // The only cut that beats 0.5 puts the two rightmost points on the
        // positive side and misses one of them, so err = 0.25 and
        // alpha = ln((1 - 0.25)/0.25) = ln 3.
        let x: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64]).collect();
        let y = vec![0u32, 0, 1, 0];
        let model = train_boost(&x, &y, 2, 1, 0).unwrap();
        let stump = &model.ensembles[1][0];
        assert_eq!(stump.threshold, 1.5);
        assert!(!stump.positive_le);
        assert!((stump.alpha - 3.0f64.ln()).abs() < 1e-12, "alpha {}", stump.alpha);
        // The class-0 ensemble sees the mirrored target and earns the
        // same vote at the same cut.
        let mirror = &model.ensembles[0][0];
        assert_eq!(mirror.threshold, 1.5);
        assert!(mirror.positive_le);
        assert!((mirror.alpha - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_stump_stops_boosting_early() {
        let x: Vec<Vec<f64>> = (0..40).map(|k| vec![k as f64, (k % 7) as f64]).collect();
        let y: Vec<u32> = (0..40).map(|k| (k >= 20) as u32).collect();
        let model = train_boost(&x, &y, 2, 50, 0).unwrap();
        for ensemble in &model.ensembles {
            assert_eq!(ensemble.len(), 1, "one clean threshold is enough");
        }
        assert_eq!(wrong(&model, &x, &y), 0);
    }

    #[test]
    fn chance_level_first_stump_is_an_error() {
        // Exact XOR: every single threshold is at chance level.
        let x = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let y = vec![0u32, 1, 1, 0];
        assert!(matches!(
            train_boost(&x, &y, 2, 10, 0),
            Err(Error::TrainingStalled(_))
        ));
    }

    #[test]
    fn constant_features_are_degenerate() {
        let x = vec![vec![3.0, 1.0]; 6];
        let y = vec![0u32, 1, 0, 1, 0, 1];
        assert!(matches!(
            train_boost(&x, &y, 2, 5, 0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn point_mass_classes_do_not_deadlock_the_votes() {
        // Four classes, each a single point duplicated with uneven counts.
        // Coordinates are chosen so that many cuts tie exactly; the seeded
        // tie-break must not stop the per-class margins from separating.
        let protos = [
            [-1.0, -0.9, -0.6, 1.4, -0.9, 1.6],
            [1.0, 1.6, -0.6, 0.5, 1.6, 0.4],
            [-1.0, -0.9, 1.6, -1.4, -0.9, -0.7],
            [1.0, 0.0, -0.6, -0.1, 0.0, -0.9],
        ];
        let counts = [25usize, 30, 32, 32];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                x.push(protos[c].to_vec());
                y.push(c as u32);
            }
        }
        let model = train_boost(&x, &y, 4, 60, 7).unwrap();
        assert_eq!(wrong(&model, &x, &y), 0);
    }

    #[test]
    fn separated_clusters_on_a_line_train_to_zero() {
        // Four tight clusters with uneven counts on one axis. A single
        // shared-vote ensemble falls into the two-stump cycle described in
        // the module docs and never separates two of the classes; the
        // per-class ensembles must reach zero training error.
        let mut rng = rng_from_seed(5);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (class, (center, count)) in
            [(1500.0, 93), (150.0, 90), (80.0, 96), (500.0, 86)].iter().enumerate()
        {
            for _ in 0..*count {
                x.push(vec![center + rng.gen_range(-3.0..3.0)]);
                y.push(class as u32);
            }
        }
        let model = train_boost(&x, &y, 4, 60, 5).unwrap();
        assert_eq!(wrong(&model, &x, &y), 0);
    }

    #[test]
    fn later_rounds_fix_points_missed_by_the_first_stump() {
        // A 1-D problem no single stump solves: class 1 sits in a band.
        let x: Vec<Vec<f64>> = (0..120).map(|k| vec![-3.0 + 6.0 * k as f64 / 119.0, 0.0]).collect();
        let y: Vec<u32> = x.iter().map(|r| (r[0].abs() < 1.0) as u32).collect();
        let model = train_boost(&x, &y, 2, 40, 0).unwrap();
        assert!(model.ensembles.iter().any(|e| e.len() > 1));
        let n = wrong(&model, &x, &y);
        assert!(n <= 2, "{n} of {} wrong", x.len());
    }
}
