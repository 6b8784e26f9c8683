//! Differential evolution for hyper-parameter search.
//!
//! The optimizer minimizes a non-negative objective over a box of real or
//! integer genes. Each generation proposes one mutant per individual from
//! three distinct partners, `u = a + F (b - c)`, then recombines mutant and
//! incumbent gene by gene. The recombination probability is where this
//! variant differs from textbook DE: in [`Acceptance::Adaptive`] mode the
//! probability is the incumbent's share of the combined objective,
//! `of_x / (of_x + of_u)`, so improving mutants contribute most of their
//! genes and poor mutants barely any. [`Acceptance::Classic`] uses a fixed
//! rate instead. Selection stays greedy, and the best vector ever seen is
//! preserved, so the reported best objective never worsens.
//!
//! Objective evaluations are counted and reported per generation. When a
//! trial vector coincides with the mutant or the incumbent its objective is
//! reused instead of re-evaluated; for a single-gene problem every trial
//! coincides with one of the two, so the total budget is exactly
//! `pop_size * (generations + 1)`.
//!
//! [`model_select`] runs this search over classifier hyper-parameters with
//! cross-validation error as the objective.
//!
//! ## Example
//!
//! ```
//! use nilmkit::optimize::{run_de, DeConfig, GeneSpec};
//!
//! let genes = [GeneSpec::real("x", -10.0, 10.0)];
//! let result = run_de(&genes, &DeConfig::default(), |g| (g[0] - 3.0).abs()).unwrap();
//! assert!((result.best[0] - 3.0).abs() < 0.05);
//! ```

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{self, Algorithm};
use crate::seed::{derive_seed, rng_from_seed};

const DE_TAG: u64 = 0x4445;
const OBJECTIVE_TAG: u64 = 0x4F424A;
/// Two best objectives closer than this count as "unchanged" for stalling.
const STALL_TOL: f64 = 1e-12;
/// Floor for the combined objective in the acceptance ratio.
const ACCEPT_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

/// One coordinate of the search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    /// Integer genes are rounded to the nearest whole value after every
    /// mutation and initialization.
    pub integer: bool,
}

impl GeneSpec {
    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        GeneSpec { name: name.into(), lo, hi, integer: false }
    }

    pub fn integer(name: &str, lo: f64, hi: f64) -> Self {
        GeneSpec { name: name.into(), lo, hi, integer: true }
    }

    fn constrain(&self, v: f64) -> f64 {
        let c = v.clamp(self.lo, self.hi);
        if self.integer {
            c.round()
        } else {
            c
        }
    }
}

/// Gene recombination policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Acceptance {
    /// Probability of taking a mutant gene is `of_x / (of_x + of_u)`.
    Adaptive,
    /// Fixed recombination rate in `[0, 1]`.
    Classic { rate: f64 },
}

/// Search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub pop_size: usize,
    pub generations: usize,
    /// Differential weight applied to the partner difference.
    pub weight: f64,
    pub acceptance: Acceptance,
    /// Stop as soon as the best objective reaches this value, if set.
    pub of_threshold: Option<f64>,
    /// Stop after this many generations without the best changing, if set.
    pub stall_generations: Option<usize>,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            pop_size: 12,
            generations: 60,
            weight: 0.5,
            acceptance: Acceptance::Adaptive,
            of_threshold: None,
            stall_generations: None,
            seed: 0,
        }
    }
}

/// Why the search ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeStop {
    Threshold,
    Stall,
    Generations,
}

/// Per-generation progress record. Generation 0 is the initial population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: usize,
    pub best_of: f64,
    pub mean_of: f64,
    /// Cumulative objective evaluations up to and including this generation.
    pub evaluations: usize,
}

/// Search outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_of: f64,
    pub evaluations: usize,
    pub history: Vec<GenerationStat>,
    pub stop: DeStop,
}

impl DeResult {
    /// History as CSV with a header line.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best_of,mean_of,evaluations\n");
        for h in &self.history {
            out.push_str(&format!("{},{},{},{}\n", h.generation, h.best_of, h.mean_of, h.evaluations));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// The optimizer
// ---------------------------------------------------------------------------

/// Probability of adopting a mutant gene given the incumbent objective
/// `of_x` and the mutant objective `of_u`. Infinite objectives resolve to
/// the sensible limits.
pub fn acceptance_probability(of_x: f64, of_u: f64) -> f64 {
    match (of_x.is_finite(), of_u.is_finite()) {
        (false, false) => 0.5,
        (false, true) => 1.0,
        (true, false) => 0.0,
        (true, true) => of_x / (of_x + of_u).max(ACCEPT_FLOOR),
    }
}

fn validate(genes: &[GeneSpec], config: &DeConfig) -> Result<()> {
    if genes.is_empty() {
        return Err(Error::Argument("the search needs at least one gene".into()));
    }
    for g in genes {
        if !(g.lo < g.hi) || !g.lo.is_finite() || !g.hi.is_finite() {
            return Err(Error::Argument(format!("gene {:?} has an invalid range [{}, {}]", g.name, g.lo, g.hi)));
        }
    }
    if config.pop_size < 4 {
        return Err(Error::Argument(format!(
            "population must have at least 4 individuals to draw three distinct partners, got {}",
            config.pop_size
        )));
    }
    if config.generations == 0 {
        return Err(Error::Argument("the search needs at least one generation".into()));
    }
    if !(config.weight > 0.0 && config.weight <= 2.0) {
        return Err(Error::Argument(format!("differential weight must lie in (0, 2], got {}", config.weight)));
    }
    if let Acceptance::Classic { rate } = config.acceptance {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Argument(format!("recombination rate must lie in [0, 1], got {rate}")));
        }
    }
    Ok(())
}

/// Minimizes `objective` over the gene box. The objective must be
/// non-negative (infinity is allowed to mark failed evaluations); a negative
/// or NaN value aborts the search with an argument error.
pub fn run_de(genes: &[GeneSpec], config: &DeConfig, mut objective: impl FnMut(&[f64]) -> f64) -> Result<DeResult> {
    validate(genes, config)?;
    let m = config.pop_size;
    let dim = genes.len();

    let mut evaluations = 0usize;
    let mut eval = |v: &[f64], evaluations: &mut usize| -> Result<f64> {
        let of = objective(v);
        *evaluations += 1;
        if of.is_nan() || of < 0.0 {
            return Err(Error::Argument(format!(
                "objective returned {of} at {v:?}; the acceptance rule needs non-negative values"
            )));
        }
        Ok(of)
    };

    // Initial population, uniform over the box.
    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(m);
    {
        let mut rng = rng_from_seed(derive_seed(config.seed, &[DE_TAG, 0]));
        for _ in 0..m {
            pop.push(
                genes
                    .iter()
                    .map(|g| g.constrain(rng.gen_range(g.lo..=g.hi)))
                    .collect(),
            );
        }
    }
    let mut of: Vec<f64> = Vec::with_capacity(m);
    for v in &pop {
        of.push(eval(v, &mut evaluations)?);
    }

    let mut best_idx = (0..m).min_by(|&a, &b| of[a].partial_cmp(&of[b]).unwrap()).unwrap();
    let mut best = pop[best_idx].clone();
    let mut best_of = of[best_idx];

    let mut history = Vec::with_capacity(config.generations + 1);
    let stat = |generation: usize, of: &[f64], best_of: f64, evaluations: usize| GenerationStat {
        generation,
        best_of,
        mean_of: of.iter().sum::<f64>() / of.len() as f64,
        evaluations,
    };
    history.push(stat(0, &of, best_of, evaluations));

    let mut stop = DeStop::Generations;
    let mut stalled = 0usize;

    'search: for gen in 1..=config.generations {
        if let Some(t) = config.of_threshold {
            if best_of <= t {
                stop = DeStop::Threshold;
                break;
            }
        }
        let prev_best_of = best_of;

        for v in 0..m {
            let mut rng = rng_from_seed(derive_seed(config.seed, &[DE_TAG, gen as u64, v as u64]));
            // Three pairwise distinct partners, none of them v.
            let mut partners = [0usize; 3];
            let mut chosen = 0;
            while chosen < 3 {
                let cand = rng.gen_range(0..m);
                if cand != v && !partners[..chosen].contains(&cand) {
                    partners[chosen] = cand;
                    chosen += 1;
                }
            }
            let [a, b, c] = partners;

            let mutant: Vec<f64> = (0..dim)
                .map(|g| genes[g].constrain(pop[a][g] + config.weight * (pop[b][g] - pop[c][g])))
                .collect();
            let of_u = eval(&mutant, &mut evaluations)?;

            let take_prob = match config.acceptance {
                Acceptance::Adaptive => acceptance_probability(of[v], of_u),
                Acceptance::Classic { rate } => rate,
            };
            let trial: Vec<f64> = (0..dim)
                .map(|g| if rng.gen::<f64>() < take_prob { mutant[g] } else { pop[v][g] })
                .collect();

            // Reuse known objectives when the recombination reproduced one
            // of its parents; this keeps the evaluation budget exact for
            // single-gene problems.
            let of_trial = if trial == mutant {
                of_u
            } else if trial == pop[v] {
                of[v]
            } else {
                eval(&trial, &mut evaluations)?
            };

            if of_trial <= of[v] {
                pop[v] = trial;
                of[v] = of_trial;
                if of_trial < best_of {
                    best_of = of_trial;
                    best = pop[v].clone();
                    best_idx = v;
                }
            }
        }

        // Elitism: greedy selection cannot lose the best slot, but guard the
        // invariant anyway so the reported best objective is monotone even
        // if the population drifts.
        if of[best_idx] > best_of {
            pop[best_idx] = best.clone();
            of[best_idx] = best_of;
        }

        history.push(stat(gen, &of, best_of, evaluations));

        if (best_of - prev_best_of).abs() <= STALL_TOL {
            stalled += 1;
            if let Some(limit) = config.stall_generations {
                if stalled >= limit {
                    stop = DeStop::Stall;
                    break 'search;
                }
            }
        } else {
            stalled = 0;
        }
        if let Some(t) = config.of_threshold {
            if best_of <= t {
                stop = DeStop::Threshold;
                break;
            }
        }
    }

    Ok(DeResult { best, best_of, evaluations, history, stop })
}

// ---------------------------------------------------------------------------
// Model selection
// ---------------------------------------------------------------------------

/// Which classifier family to search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectKind {
    Ann,
    AnnEa,
    Svm,
}

impl SelectKind {
    /// The search box for this family.
    pub fn genes(&self) -> Vec<GeneSpec> {
        match self {
            SelectKind::Ann => vec![GeneSpec::integer("hidden", 2.0, 40.0)],
            SelectKind::AnnEa => vec![
                GeneSpec::integer("hidden", 2.0, 40.0),
                GeneSpec::real("momentum", 0.01, 0.99),
            ],
            SelectKind::Svm => vec![
                GeneSpec::real("log10_gamma", -4.0, 2.0),
                GeneSpec::real("log10_cost", -2.0, 3.0),
            ],
        }
    }

    /// Maps a gene vector to a concrete algorithm.
    pub fn algorithm(&self, genes: &[f64]) -> Algorithm {
        match self {
            SelectKind::Ann => Algorithm::Ann { hidden: genes[0] as usize },
            SelectKind::AnnEa => Algorithm::AnnEa { hidden: genes[0] as usize, momentum: genes[1] },
            SelectKind::Svm => Algorithm::Svm {
                gamma: Some(10f64.powf(genes[0])),
                cost: 10f64.powf(genes[1]),
            },
        }
    }
}

impl std::str::FromStr for SelectKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ann" => Ok(SelectKind::Ann),
            "ann+ea" | "ann-ea" => Ok(SelectKind::AnnEa),
            "svm" => Ok(SelectKind::Svm),
            "boost" | "adaboost" => Err(Error::Argument(
                "boosted stumps have no searched hyper-parameters; model selection does not apply".into(),
            )),
            other => Err(Error::Argument(format!("unknown model-selection family {other:?}"))),
        }
    }
}

/// Searches a classifier family's hyper-parameters by differential
/// evolution, using cross-validation error as the objective.
///
/// Every candidate trains with the same derived seed, so the objective is a
/// pure function of the genes and results are memoized. Candidates whose
/// training fails score infinity rather than aborting the search.
pub fn model_select(
    kind: SelectKind,
    x_train: &[Vec<f64>],
    y_train: &[u32],
    x_cv: &[Vec<f64>],
    y_cv: &[u32],
    config: &DeConfig,
) -> Result<(Algorithm, DeResult)> {
    if x_cv.is_empty() {
        return Err(Error::Argument("model selection needs a non-empty cross-validation set".into()));
    }
    let train_seed = derive_seed(config.seed, &[OBJECTIVE_TAG]);
    let mut memo: HashMap<Vec<u64>, f64> = HashMap::new();
    let genes = kind.genes();
    let result = run_de(&genes, config, |g| {
        let key: Vec<u64> = g.iter().map(|v| v.to_bits()).collect();
        if let Some(&cached) = memo.get(&key) {
            return cached;
        }
        let of = match learn::train(kind.algorithm(g), x_train, y_train, x_cv, y_cv, train_seed) {
            Ok(model) => model.error_rate(x_cv, y_cv),
            Err(_) => f64::INFINITY,
        };
        memo.insert(key, of);
        of
    })?;
    Ok((kind.algorithm(&result.best), result))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acceptance_probability_follows_the_objective_ratio() {
        assert_eq!(acceptance_probability(1.0, 3.0), 0.25);
        assert_eq!(acceptance_probability(3.0, 1.0), 0.75);
        assert_eq!(acceptance_probability(2.0, 2.0), 0.5);
        // Perfect incumbent keeps its genes; perfect mutant takes over fully
        // only in the limit, and the zero/zero case floors to zero.
        assert_eq!(acceptance_probability(0.0, 0.0), 0.0);
        assert_eq!(acceptance_probability(f64::INFINITY, 1.0), 1.0);
        assert_eq!(acceptance_probability(1.0, f64::INFINITY), 0.0);
        assert_eq!(acceptance_probability(f64::INFINITY, f64::INFINITY), 0.5);
    }

    #[test]
    fn minimizes_a_vee_function() {
        let genes = [GeneSpec::real("x", 0.0, 20.0)];
        let config = DeConfig { generations: 80, ..DeConfig::default() };
        let result = run_de(&genes, &config, |g| (g[0] - 7.0).abs()).unwrap();
        assert!((result.best[0] - 7.0).abs() < 0.01, "best {:?}", result.best);
        assert!(result.best_of < 0.01);
        assert_eq!(result.stop, DeStop::Generations);
    }

    #[test]
    fn integer_genes_land_on_whole_values() {
        let genes = [GeneSpec::integer("n", 0.0, 20.0)];
        let config = DeConfig { generations: 40, ..DeConfig::default() };
        let result = run_de(&genes, &config, |g| (g[0] - 7.3) * (g[0] - 7.3)).unwrap();
        assert_eq!(result.best[0], 7.0);
        for h in &result.history {
            assert!(h.best_of >= 0.09 - 1e-12); // (7 - 7.3)^2 is the floor
        }
    }

    #[test]
    fn single_gene_budget_is_exactly_pop_times_generations_plus_one() {
        let genes = [GeneSpec::real("x", -5.0, 5.0)];
        let config = DeConfig { pop_size: 10, generations: 25, ..DeConfig::default() };
        let result = run_de(&genes, &config, |g| g[0] * g[0]).unwrap();
        // One evaluation per individual for the initial population, one
        // mutant per individual per generation, and every trial reuses a
        // parent's objective because a one-gene trial equals one of them.
        assert_eq!(result.evaluations, 10 * 26);
        assert_eq!(result.history.last().unwrap().evaluations, 260);
    }

    #[test]
    fn best_objective_is_monotone_over_generations() {
        let genes = [GeneSpec::real("x", -5.12, 5.12), GeneSpec::real("y", -5.12, 5.12)];
        let config = DeConfig { generations: 50, seed: 9, ..DeConfig::default() };
        // A bumpy bowl: plenty of local structure to stress selection.
        let result = run_de(&genes, &config, |g| {
            20.0 + g.iter().map(|&v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos()).sum::<f64>()
        })
        .unwrap();
        for w in result.history.windows(2) {
            assert!(w[1].best_of <= w[0].best_of + 1e-15);
        }
        assert!(result.best_of < 5.0, "best {:?} -> {}", result.best, result.best_of);
    }

    #[test]
    fn classic_zero_rate_keeps_the_population_frozen() {
        let genes = [GeneSpec::real("x", -1.0, 1.0), GeneSpec::real("y", -1.0, 1.0)];
        let config = DeConfig {
            acceptance: Acceptance::Classic { rate: 0.0 },
            generations: 15,
            ..DeConfig::default()
        };
        let result = run_de(&genes, &config, |g| g[0] * g[0] + g[1] * g[1] + 1.0).unwrap();
        let first = result.history.first().unwrap();
        let last = result.history.last().unwrap();
        // Every trial is its own parent, so nothing can improve.
        assert_eq!(first.best_of, last.best_of);
        assert_eq!(first.mean_of, last.mean_of);
    }

    #[test]
    fn classic_full_rate_behaves_like_plain_de() {
        let genes = [GeneSpec::real("x", -4.0, 4.0)];
        let config = DeConfig {
            acceptance: Acceptance::Classic { rate: 1.0 },
            generations: 60,
            ..DeConfig::default()
        };
        let result = run_de(&genes, &config, |g| (g[0] + 2.0).abs()).unwrap();
        assert!((result.best[0] + 2.0).abs() < 0.02, "best {:?}", result.best);
    }

    #[test]
    fn threshold_stops_the_search_early() {
        let genes = [GeneSpec::real("x", -5.0, 5.0)];
        let config = DeConfig {
            of_threshold: Some(0.5),
            generations: 500,
            ..DeConfig::default()
        };
        let result = run_de(&genes, &config, |g| g[0].abs()).unwrap();
        assert_eq!(result.stop, DeStop::Threshold);
        assert!(result.best_of <= 0.5);
        assert!(result.history.len() < 500);
    }

    #[test]
    fn flat_objective_triggers_the_stall_stop() {
        let genes = [GeneSpec::real("x", 0.0, 1.0)];
        let config = DeConfig {
            stall_generations: Some(4),
            generations: 100,
            ..DeConfig::default()
        };
        let result = run_de(&genes, &config, |_| 1.0).unwrap();
        assert_eq!(result.stop, DeStop::Stall);
        // Generation 0 plus exactly four stalled generations.
        assert_eq!(result.history.len(), 5);
    }

    #[test]
    fn negative_objective_is_an_argument_error() {
        let genes = [GeneSpec::real("x", 0.0, 1.0)];
        let r = run_de(&genes, &DeConfig::default(), |g| g[0] - 10.0);
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn search_is_reproducible() {
        let genes = [GeneSpec::real("x", -3.0, 3.0)];
        let config = DeConfig { seed: 77, generations: 20, ..DeConfig::default() };
        let a = run_de(&genes, &config, |g| (g[0] - 1.0).abs()).unwrap();
        let b = run_de(&genes, &config, |g| (g[0] - 1.0).abs()).unwrap();
        assert_eq!(a, b);
        let other = DeConfig { seed: 78, ..config };
        let c = run_de(&genes, &other, |g| (g[0] - 1.0).abs()).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn rejects_degenerate_configurations() {
        let genes = [GeneSpec::real("x", 0.0, 1.0)];
        let bad_pop = DeConfig { pop_size: 3, ..DeConfig::default() };
        assert!(run_de(&genes, &bad_pop, |_| 0.0).is_err());
        let bad_range = [GeneSpec::real("x", 1.0, 1.0)];
        assert!(run_de(&bad_range, &DeConfig::default(), |_| 0.0).is_err());
        let bad_rate = DeConfig { acceptance: Acceptance::Classic { rate: 1.5 }, ..DeConfig::default() };
        assert!(run_de(&genes, &bad_rate, |_| 0.0).is_err());
        assert!(run_de(&[], &DeConfig::default(), |_| 0.0).is_err());
    }

    #[test]
    fn model_select_tunes_network_capacity() {
        let (x, y) = crate::learn::tests::blobs(&[(0.0, 0.0), (2.5, 0.0), (0.0, 2.5)], 30, 0.5, 61);
        let (xt, yt) = (x[..60].to_vec(), y[..60].to_vec());
        let (xc, yc) = (x[60..].to_vec(), y[60..].to_vec());
        let config = DeConfig { pop_size: 5, generations: 3, seed: 4, ..DeConfig::default() };
        let (alg, result) = model_select(SelectKind::Ann, &xt, &yt, &xc, &yc, &config).unwrap();
        match alg {
            Algorithm::Ann { hidden } => assert!((2..=40).contains(&hidden)),
            other => panic!("unexpected algorithm {other:?}"),
        }
        assert!(result.best_of <= 0.2, "cv error {}", result.best_of);
        assert_eq!(result.evaluations, 5 * 4);
    }

    #[test]
    fn model_select_rejects_boosting_and_missing_cv() {
        assert!("boost".parse::<SelectKind>().is_err());
        let x = vec![vec![0.0], vec![1.0]];
        let r = model_select(SelectKind::Ann, &x, &[0, 1], &[], &[], &DeConfig::default());
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn history_csv_has_header_and_rows() {
        let genes = [GeneSpec::real("x", 0.0, 1.0)];
        let config = DeConfig { generations: 3, ..DeConfig::default() };
        let result = run_de(&genes, &config, |g| g[0]).unwrap();
        let csv = result.history_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "generation,best_of,mean_of,evaluations");
        assert_eq!(lines.len(), result.history.len() + 1);
    }
}
