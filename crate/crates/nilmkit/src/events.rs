//! Switching-event detection and delta-form signatures.
//!
//! An appliance turning on or off shows up as a persistent step in
//! cycle-granular active power. Subtracting the last steady cycle before the
//! step from the first steady cycle after it isolates the switched
//! appliance's current, even while other loads stay on; that difference
//! cycle is the delta-form signature everything downstream consumes.
//!
//! Unsupervised grouping of signatures (k-means with k-means++ seeding, plus
//! a silhouette scan when the number of appliances is unknown) and the
//! cluster purity metric live here too.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::signal::{extract_cycle, CyclePair, Waveform};
use rand::Rng;

/// Cycles an appliance gets to settle after a switching transient.
pub const DEFAULT_SETTLE_CYCLES: usize = 5;

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 300;

// ---------------------------------------------------------------------------
// Delta signatures
// ---------------------------------------------------------------------------

/// Direction of a switching event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    On,
    Off,
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarity::On => "on",
            Polarity::Off => "off",
        })
    }
}

impl std::str::FromStr for Polarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on" => Ok(Polarity::On),
            "off" => Ok(Polarity::Off),
            other => Err(Error::Argument(format!("unknown polarity {other:?}"))),
        }
    }
}

/// One switching event reduced to a signature cycle.
///
/// `cycle.i` holds the post-minus-pre current difference; `cycle.v` is the
/// voltage of the post-event cycle. `p_delta` is the active power of that
/// difference (positive: something turned on).
#[derive(Debug, Clone)]
pub struct DeltaSignature {
    pub cycle: CyclePair,
    pub event_index: usize,
    pub polarity: Polarity,
    pub p_delta: f64,
}

/// Active power of each whole cycle, taken in non-overlapping blocks from
/// the start of the record.
pub fn cycle_powers(v: &Waveform, i: &Waveform) -> Result<Vec<f64>> {
    if v.sample_rate() != i.sample_rate() || v.len() != i.len() {
        return Err(Error::Argument("voltage and current waveforms must share rate and length".into()));
    }
    let n = v.samples_per_cycle();
    let cycles = v.num_cycles();
    let vs = v.samples();
    let is = i.samples();
    let mut out = Vec::with_capacity(cycles);
    for c in 0..cycles {
        let base = c * n;
        let mut acc = 0.0;
        for k in 0..n {
            acc += vs[base + k] * is[base + k];
        }
        out.push(acc / n as f64);
    }
    Ok(out)
}

/// Event detector core operating on a per-cycle power series.
///
/// A cycle starts an event when its power differs from the previous cycle's
/// by at least `p_min` watts and stays at least `p_min` away from that
/// pre-event level for `settle` consecutive cycles. Reported events are at
/// least `settle` cycles apart. Returns event cycle indices.
pub fn detect_in_powers(powers: &[f64], p_min: f64, settle: usize) -> Result<Vec<usize>> {
    if !(p_min.is_finite() && p_min > 0.0) {
        return Err(Error::Argument(format!("p_min must be positive, got {p_min}")));
    }
    if settle == 0 {
        return Err(Error::Argument("settle window must be at least 1 cycle".into()));
    }
    let mut events = Vec::new();
    let mut c = 1usize;
    while c < powers.len() {
        let pre = powers[c - 1];
        if (powers[c] - pre).abs() >= p_min {
            let end = c + settle;
            if end <= powers.len() && powers[c..end].iter().all(|p| (p - pre).abs() >= p_min) {
                events.push(c);
                c += settle;
                continue;
            }
        }
        c += 1;
    }
    Ok(events)
}

/// Detects switching events in a voltage/current record.
///
/// Returns sample indices of the first changed cycle, using the default
/// settle window of [`DEFAULT_SETTLE_CYCLES`].
pub fn detect_events(v: &Waveform, i: &Waveform, p_min: f64) -> Result<Vec<usize>> {
    detect_events_with(v, i, p_min, DEFAULT_SETTLE_CYCLES)
}

/// [`detect_events`] with an explicit settle window.
pub fn detect_events_with(v: &Waveform, i: &Waveform, p_min: f64, settle: usize) -> Result<Vec<usize>> {
    let powers = cycle_powers(v, i)?;
    let spc = v.samples_per_cycle();
    Ok(detect_in_powers(&powers, p_min, settle)?.into_iter().map(|c| c * spc).collect())
}

/// Extracts the delta-form signature for an event at `event_index` (sample
/// units), using the default settle window.
pub fn extract_delta(v: &Waveform, i: &Waveform, event_index: usize) -> Result<DeltaSignature> {
    extract_delta_with(v, i, event_index, DEFAULT_SETTLE_CYCLES)
}

/// [`extract_delta`] with an explicit settle window.
///
/// The signature is (first post-settle steady cycle) minus (last pre-event
/// steady cycle), both phase-aligned to their own voltage zero crossings;
/// the voltage channel is taken from the post-event cycle.
pub fn extract_delta_with(v: &Waveform, i: &Waveform, event_index: usize, settle: usize) -> Result<DeltaSignature> {
    let spc = v.samples_per_cycle();
    let ce = event_index / spc;
    let margin = settle.max(2);
    if ce < margin {
        return Err(Error::Boundary(format!(
            "event at cycle {ce} needs {margin} steady cycles before it"
        )));
    }
    if (ce + settle + 2) * spc > v.len() {
        return Err(Error::Boundary(format!(
            "event at cycle {ce} needs {} steady cycles after it",
            settle + 2
        )));
    }
    let pre = extract_cycle(v, i, (ce - 2) * spc)?;
    let post = extract_cycle(v, i, (ce + settle) * spc)?;
    let delta_i: Vec<f64> = post.i().iter().zip(pre.i()).map(|(a, b)| a - b).collect();
    let cycle = CyclePair::new(post.v().to_vec(), delta_i, v.mains_freq())?;
    let p_delta = cycle.active_power();
    let polarity = if p_delta > 0.0 { Polarity::On } else { Polarity::Off };
    Ok(DeltaSignature { cycle, event_index, polarity, p_delta })
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

/// Result of a k-means run.
#[derive(Debug, Clone)]
pub struct Clustering {
    /// Cluster index per input point, aligned with the input order.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn validate_points(points: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = points.first() else {
        return Err(Error::Argument("no points to cluster".into()));
    };
    let dim = first.len();
    if dim == 0 {
        return Err(Error::Argument("points must have at least one dimension".into()));
    }
    for (idx, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::Argument(format!(
                "point {idx} has dimension {}, expected {dim}",
                p.len()
            )));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument(format!("point {idx} has non-finite coordinates")));
        }
    }
    Ok(dim)
}

/// Lloyd's algorithm with k-means++ seeding, run to an assignment fixed
/// point (at most 300 iterations), best of 10 seeded restarts by WCSS.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Clustering> {
    let dim = validate_points(points)?;
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k = {k} must be in 1..={n}")));
    }
    let mut best: Option<Clustering> = None;
    for restart in 0..KMEANS_RESTARTS {
        let run = kmeans_once(points, k, dim, derive_seed(seed, &[restart as u64]));
        if best.as_ref().map_or(true, |b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

fn kmeans_once(points: &[Vec<f64>], k: usize, dim: usize, seed: u64) -> Clustering {
    let n = points.len();
    let mut rng = rng_from_seed(seed);

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist_sq(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (idx, &w) in d2.iter().enumerate() {
                r -= w;
                if r <= 0.0 {
                    chosen = idx;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (idx, p) in points.iter().enumerate() {
            d2[idx] = d2[idx].min(dist_sq(p, centroids.last().unwrap()));
        }
    }

    let mut assignments = vec![0usize; n];
    let mut prev_wcss = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITERS {
        // Assignment step; ties go to the lowest cluster index.
        let mut changed = false;
        for (idx, p) in points.iter().enumerate() {
            let mut best_c = 0;
            let mut best_d = dist_sq(p, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = dist_sq(p, centroid);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            if assignments[idx] != best_c {
                assignments[idx] = best_c;
                changed = true;
            }
        }
        // Any empty cluster takes the point farthest from its own centroid.
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far_idx = 0;
            let mut far_d = -1.0;
            for (idx, p) in points.iter().enumerate() {
                if counts[assignments[idx]] <= 1 {
                    continue;
                }
                let d = dist_sq(p, &centroids[assignments[idx]]);
                if d > far_d {
                    far_d = d;
                    far_idx = idx;
                }
            }
            counts[assignments[far_idx]] -= 1;
            assignments[far_idx] = c;
            counts[c] = 1;
            changed = true;
        }
        // Update step.
        for centroid in centroids.iter_mut() {
            centroid.iter_mut().for_each(|x| *x = 0.0);
        }
        for (idx, p) in points.iter().enumerate() {
            for d in 0..dim {
                centroids[assignments[idx]][d] += p[d];
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            if counts[c] > 0 {
                centroid.iter_mut().for_each(|x| *x /= counts[c] as f64);
            }
        }
        let wcss: f64 = points
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| dist_sq(p, &centroids[a]))
            .sum();
        debug_assert!(
            wcss <= prev_wcss * (1.0 + 1e-9) + 1e-12,
            "k-means objective increased: {prev_wcss} -> {wcss}"
        );
        prev_wcss = wcss;
        if !changed {
            break;
        }
    }
    Clustering { assignments, centroids, wcss: prev_wcss }
}

/// Fraction of points whose cluster's majority label matches their own.
pub fn purity(assignments: &[usize], truth: &[usize]) -> Result<f64> {
    if assignments.is_empty() || assignments.len() != truth.len() {
        return Err(Error::Argument(format!(
            "assignments ({}) and truth ({}) must be equal-length and non-empty",
            assignments.len(),
            truth.len()
        )));
    }
    let k = assignments.iter().max().unwrap() + 1;
    let mut counts: Vec<std::collections::HashMap<usize, usize>> = vec![Default::default(); k];
    for (&a, &t) in assignments.iter().zip(truth) {
        *counts[a].entry(t).or_insert(0) += 1;
    }
    let majority: usize = counts.iter().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    Ok(majority as f64 / assignments.len() as f64)
}

/// Picks the cluster count by scanning k in `2..=40` and keeping the best
/// mean silhouette. For large inputs the silhouette is evaluated on a
/// seeded subsample of 2000 points.
pub fn select_k(points: &[Vec<f64>], seed: u64) -> Result<(usize, Clustering)> {
    validate_points(points)?;
    let n = points.len();
    if n < 3 {
        return Err(Error::Argument(format!("need at least 3 points to choose k, got {n}")));
    }
    let kmax = 40.min(n - 1);
    let sample: Vec<usize> = if n > 2000 {
        let mut rng = rng_from_seed(derive_seed(seed, &[0x51]));
        let mut idx: Vec<usize> = (0..n).collect();
        for j in 0..2000 {
            let swap = rng.gen_range(j..n);
            idx.swap(j, swap);
        }
        idx.truncate(2000);
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let mut best: Option<(f64, usize, Clustering)> = None;
    for k in 2..=kmax {
        let clustering = kmeans(points, k, derive_seed(seed, &[k as u64]))?;
        let score = mean_silhouette(points, &clustering.assignments, k, &sample);
        if best.as_ref().map_or(true, |(s, _, _)| score > *s) {
            best = Some((score, k, clustering));
        }
    }
    let (_, k, clustering) = best.unwrap();
    Ok((k, clustering))
}

fn mean_silhouette(points: &[Vec<f64>], assignments: &[usize], k: usize, sample: &[usize]) -> f64 {
    let mut total = 0.0;
    for &idx in sample {
        let own = assignments[idx];
        let mut sums = vec![0.0f64; k];
        let mut counts = vec![0usize; k];
        for &other in sample {
            if other == idx {
                continue;
            }
            let d = dist_sq(&points[idx], &points[other]).sqrt();
            sums[assignments[other]] += d;
            counts[assignments[other]] += 1;
        }
        let a = if counts[own] > 0 { sums[own] / counts[own] as f64 } else { 0.0 };
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if counts[own] == 0 || !b.is_finite() {
            continue; // singleton in the sample: contributes 0
        }
        total += (b - a) / a.max(b);
    }
    total / sample.len() as f64
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
