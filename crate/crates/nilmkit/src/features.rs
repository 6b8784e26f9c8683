//! Feature spaces for delta-form signature cycles.
//!
//! Three views of the same cycle, from cheapest to most shape-aware:
//!
//! - **PQ**: active power, fundamental reactive power, and odd/even total
//!   harmonic distortion of the current. Four values.
//! - **HAR**: the magnitude-squared current spectrum folded into 77 equal
//!   bands spanning 0 to 4 kHz, normalized to unit sum. Captures harmonic
//!   structure while staying robust to overall amplitude.
//! - **WS**: seven wave-shape scalars of the V-I trajectory (the closed
//!   polygon traced by plotting current against voltage over one cycle):
//!   looping direction, enclosed area, mean-curve nonlinearity, transversal
//!   self-intersection count, mid-range slope, end-cap area, and current
//!   span.
//!
//! ## Example
//!
//! ```
//! use nilmkit::signal::CyclePair;
//! use nilmkit::features::extract_ws;
//!
//! let n = 256;
//! let theta = |k: usize| 2.0 * std::f64::consts::PI * k as f64 / n as f64;
//! let v: Vec<f64> = (0..n).map(|k| 170.0 * theta(k).sin()).collect();
//! // Current lagging by 30 degrees: an inductive load.
//! let i: Vec<f64> = (0..n).map(|k| 7.0 * (theta(k) - 0.5236).sin()).collect();
//! let ws = extract_ws(&CyclePair::new(v, i, 60.0).unwrap()).unwrap();
//! assert_eq!(ws.looping_direction, 1.0);
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::DeltaSignature;
use crate::signal::{dft_real, idft, rms, CyclePair};

/// Number of spectral bands in the HAR space.
pub const HAR_BANDS: usize = 77;
/// Upper edge of the HAR analysis range in Hz (exclusive).
pub const HAR_RANGE_HZ: f64 = 4_000.0;
/// Cycle sampling must support at least this rate for HAR extraction.
pub const HAR_MIN_RATE_HZ: f64 = 8_000.0;
/// Points on the common voltage grid used for the mean curve.
const WS_GRID: usize = 64;

// ---------------------------------------------------------------------------
// Feature spaces
// ---------------------------------------------------------------------------

/// The three feature spaces, with their vector layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSpace {
    Pq,
    Har,
    Ws,
}

impl FeatureSpace {
    pub fn dim(&self) -> usize {
        match self {
            FeatureSpace::Pq => 4,
            FeatureSpace::Har => HAR_BANDS,
            FeatureSpace::Ws => 7,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureSpace::Pq => "pq",
            FeatureSpace::Har => "har",
            FeatureSpace::Ws => "ws",
        }
    }

    pub const ALL: [FeatureSpace; 3] = [FeatureSpace::Pq, FeatureSpace::Har, FeatureSpace::Ws];
}

impl std::fmt::Display for FeatureSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pq" => Ok(FeatureSpace::Pq),
            "har" => Ok(FeatureSpace::Har),
            "ws" => Ok(FeatureSpace::Ws),
            other => Err(Error::Argument(format!("unknown feature space {other:?} (expected pq, har or ws)"))),
        }
    }
}

/// A feature vector in one space, optionally labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub space: FeatureSpace,
    pub values: Vec<f64>,
    pub label: Option<u32>,
}

/// Power-quantity features of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqFeatures {
    /// Active power `mean(v * i)` in watts.
    pub p: f64,
    /// Fundamental reactive power in vars; positive for inductive loads.
    pub q: f64,
    /// Odd-harmonic distortion of the current, relative to the fundamental.
    pub thd_odd: f64,
    /// Even-harmonic distortion of the current.
    pub thd_even: f64,
}

impl PqFeatures {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.p, self.q, self.thd_odd, self.thd_even]
    }
}

/// Wave-shape features of the V-I trajectory polygon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WsFeatures {
    /// Sign of the signed (shoelace) trajectory area: +1 counter-clockwise
    /// (inductive), -1 clockwise (capacitive), 0 below the area deadband.
    pub looping_direction: f64,
    /// Absolute shoelace area of the trajectory, in volt-amperes.
    pub area_enclosed: f64,
    /// Integral of |mean curve - straight line through its endpoints| over
    /// the voltage grid. Zero for a purely resistive (linear) trajectory.
    pub curve_nonlinearity: f64,
    /// Transversal self-intersections of the trajectory polygon.
    pub num_intersections: usize,
    /// Least-squares slope of the mean curve over the central third of the
    /// voltage grid, in A/V.
    pub middle_slope: f64,
    /// Combined end-cap area: the trajectory restricted to the outer 20% of
    /// the voltage span on each side, closed by its chord.
    pub area_rl: f64,
    /// Peak-to-peak current.
    pub span: f64,
}

impl WsFeatures {
    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.looping_direction,
            self.area_enclosed,
            self.curve_nonlinearity,
            self.num_intersections as f64,
            self.middle_slope,
            self.area_rl,
            self.span,
        ]
    }
}

// ---------------------------------------------------------------------------
// PQ extraction
// ---------------------------------------------------------------------------

fn check_finite(cycle: &CyclePair) -> Result<()> {
    if cycle.v().iter().chain(cycle.i()).any(|x| !x.is_finite()) {
        return Err(Error::Argument("cycle contains non-finite samples".into()));
    }
    Ok(())
}

/// Extracts active power, fundamental reactive power, and odd/even THD.
///
/// Reactive power is `mean(v90 * i)` where `v90` is the voltage fundamental
/// delayed by a quarter cycle (a spectral rotation of bin 1 by `-j`), so an
/// inductive (current-lagging) load yields positive Q. THD sums harmonic
/// magnitudes from the 2nd up to the Nyquist bin, split by parity, relative
/// to the fundamental.
pub fn extract_pq(cycle: &CyclePair) -> Result<PqFeatures> {
    check_finite(cycle)?;
    let n = cycle.n();
    let p = cycle.active_power();

    // Quarter-cycle delay of the voltage fundamental.
    let v_spec = dft_real(cycle.v())?;
    let mut fund = vec![Complex64::new(0.0, 0.0); n];
    fund[1] = v_spec[1] * Complex64::new(0.0, -1.0);
    fund[n - 1] = fund[1].conj();
    let v90 = idft(&fund)?;
    let q = v90
        .iter()
        .zip(cycle.i())
        .map(|(v, i)| v.re * i)
        .sum::<f64>()
        / n as f64;

    // Harmonic distortion of the current.
    let i_spec = dft_real(cycle.i())?;
    let i_rms = rms(cycle.i())?;
    let fundamental = i_spec[1].norm();
    if fundamental <= 1e-12 * i_rms || i_rms == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "current fundamental {fundamental:e} is vanishing relative to rms {i_rms:e}"
        )));
    }
    let mut odd_sq = 0.0;
    let mut even_sq = 0.0;
    for h in 2..n / 2 {
        let m_sq = i_spec[h].norm_sqr();
        if h % 2 == 1 {
            odd_sq += m_sq;
        } else {
            even_sq += m_sq;
        }
    }
    Ok(PqFeatures {
        p,
        q,
        thd_odd: odd_sq.sqrt() / fundamental,
        thd_even: even_sq.sqrt() / fundamental,
    })
}

// ---------------------------------------------------------------------------
// HAR extraction
// ---------------------------------------------------------------------------

/// Folds the magnitude-squared current spectrum into 77 equal bands over
/// [0, 4 kHz), normalized to unit sum.
///
/// The cycle's implied sample rate must be at least 8 kHz so the analysis
/// range is fully covered.
pub fn extract_har(cycle: &CyclePair) -> Result<Vec<f64>> {
    check_finite(cycle)?;
    let rate = cycle.sample_rate();
    if rate < HAR_MIN_RATE_HZ {
        return Err(Error::Size {
            what: "HAR cycle rate",
            details: format!("cycle implies {rate} Hz sampling, need >= {HAR_MIN_RATE_HZ} Hz"),
        });
    }
    let spec = dft_real(cycle.i())?;
    let f0 = cycle.mains_freq();
    let mut bands = vec![0.0f64; HAR_BANDS];
    for (k, coeff) in spec.iter().enumerate().take(cycle.n() / 2 + 1) {
        let freq = k as f64 * f0;
        if freq >= HAR_RANGE_HZ {
            break;
        }
        let band = (freq * HAR_BANDS as f64 / HAR_RANGE_HZ) as usize;
        bands[band] += coeff.norm_sqr();
    }
    let total: f64 = bands.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInput("current has no spectral mass below 4 kHz".into()));
    }
    for b in bands.iter_mut() {
        *b /= total;
    }
    Ok(bands)
}

// ---------------------------------------------------------------------------
// WS extraction
// ---------------------------------------------------------------------------

fn signed_area(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    for k in 0..n {
        let (x0, y0) = pts[k];
        let (x1, y1) = pts[(k + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

fn span_of(x: &[f64]) -> (f64, f64, f64) {
    let mut lo = x[0];
    let mut hi = x[0];
    for &v in x {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi, hi - lo)
}

/// Interpolates arc samples onto `grid`, treating the arc as a piecewise
/// linear function of voltage (points sorted by voltage; exact duplicates
/// averaged).
fn arc_on_grid(mut arc: Vec<(f64, f64)>, grid: &[f64]) -> Vec<f64> {
    arc.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(arc.len());
    for (v, i) in arc {
        match pts.last_mut() {
            Some((pv, pi)) if *pv == v => *pi = (*pi + i) / 2.0,
            _ => pts.push((v, i)),
        }
    }
    grid.iter()
        .map(|&q| {
            let j = pts.partition_point(|&(v, _)| v < q);
            if j == 0 {
                pts[0].1
            } else if j >= pts.len() {
                pts[pts.len() - 1].1
            } else {
                let (v0, i0) = pts[j - 1];
                let (v1, i1) = pts[j];
                if v1 == v0 {
                    i0
                } else {
                    i0 + (q - v0) / (v1 - v0) * (i1 - i0)
                }
            }
        })
        .collect()
}

/// Splits the cycle at the voltage extremes and averages the two resulting
/// arcs on a common 64-point voltage grid.
fn mean_curve(v: &[f64], i: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut imin = 0;
    let mut imax = 0;
    for k in 1..n {
        if v[k] < v[imin] {
            imin = k;
        }
        if v[k] > v[imax] {
            imax = k;
        }
    }
    let walk = |from: usize, to: usize| {
        let mut pts = Vec::new();
        let mut k = from;
        loop {
            pts.push((v[k], i[k]));
            if k == to {
                break;
            }
            k = (k + 1) % n;
        }
        pts
    };
    let grid: Vec<f64> = (0..WS_GRID)
        .map(|j| v[imin] + (v[imax] - v[imin]) * j as f64 / (WS_GRID - 1) as f64)
        .collect();
    let rising = arc_on_grid(walk(imin, imax), &grid);
    let falling = arc_on_grid(walk(imax, imin), &grid);
    let mean = rising.iter().zip(&falling).map(|(a, b)| (a + b) / 2.0).collect();
    (grid, mean)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counts transversal self-intersections of the closed trajectory polygon.
///
/// Edge pairs sharing a vertex are excluded, and orientation magnitudes
/// within `eps` are treated as zero, so touches and near-endpoint grazes do
/// not count.
fn count_intersections(v: &[f64], i: &[f64], eps: f64) -> usize {
    let n = v.len();
    let pt = |k: usize| (v[k % n], i[k % n]);
    let sign = |x: f64| {
        if x > eps {
            1
        } else if x < -eps {
            -1
        } else {
            0
        }
    };
    let mut count = 0;
    for j in 0..n {
        let (a, b) = (pt(j), pt(j + 1));
        let (jlo_x, jhi_x) = (a.0.min(b.0), a.0.max(b.0));
        let (jlo_y, jhi_y) = (a.1.min(b.1), a.1.max(b.1));
        for k in j + 2..n {
            if j == 0 && k == n - 1 {
                continue; // adjacent through the wrap-around vertex
            }
            let (c, d) = (pt(k), pt(k + 1));
            // Cheap bounding-box rejection.
            if c.0.max(d.0) < jlo_x || c.0.min(d.0) > jhi_x || c.1.max(d.1) < jlo_y || c.1.min(d.1) > jhi_y {
                continue;
            }
            let d1 = sign(cross(c, d, a));
            let d2 = sign(cross(c, d, b));
            let d3 = sign(cross(a, b, c));
            let d4 = sign(cross(a, b, d));
            if d1 * d2 < 0 && d3 * d4 < 0 {
                count += 1;
            }
        }
    }
    count
}

/// Absolute area of the sub-polyline whose vertices satisfy `keep`,
/// implicitly closed by the chord from last to first kept vertex.
fn cap_area(v: &[f64], i: &[f64], keep: impl Fn(f64) -> bool) -> f64 {
    let pts: Vec<(f64, f64)> = v
        .iter()
        .zip(i)
        .filter(|(&vv, _)| keep(vv))
        .map(|(&vv, &ii)| (vv, ii))
        .collect();
    if pts.len() < 3 {
        return 0.0;
    }
    signed_area(&pts).abs()
}

/// Extracts the seven wave-shape features of the V-I trajectory.
///
/// All tolerances scale with the trajectory's voltage/current spans, so the
/// features are equivariant under positive rescaling of the current channel.
pub fn extract_ws(cycle: &CyclePair) -> Result<WsFeatures> {
    check_finite(cycle)?;
    let v = cycle.v();
    let i = cycle.i();
    let (v_min, v_max, v_span) = span_of(v);
    let (i_min, i_max, i_span) = span_of(i);
    if v_span <= 0.0 {
        return Err(Error::DegenerateInput("voltage span is zero; trajectory is a vertical line".into()));
    }

    let eps_area = 1e-9 * v_span * i_span;
    let area = signed_area(&v.iter().copied().zip(i.iter().copied()).collect::<Vec<_>>());
    let looping_direction = if area > eps_area {
        1.0
    } else if area < -eps_area {
        -1.0
    } else {
        0.0
    };

    let (grid, mean) = mean_curve(v, i);
    let dv = (v_max - v_min) / (WS_GRID - 1) as f64;
    let first = mean[0];
    let last = mean[WS_GRID - 1];
    let mut nonlin = 0.0;
    let mut prev_dev = 0.0;
    for (j, &m) in mean.iter().enumerate() {
        let line = first + (last - first) * j as f64 / (WS_GRID - 1) as f64;
        let dev = (m - line).abs();
        if j > 0 {
            nonlin += (dev + prev_dev) / 2.0 * dv;
        }
        prev_dev = dev;
    }

    // Least-squares slope over the central third of the grid.
    let lo = WS_GRID / 3 + 1; // 22
    let hi = 2 * WS_GRID / 3; // 42, inclusive
    let m_pts = hi - lo + 1;
    let gx: f64 = grid[lo..=hi].iter().sum::<f64>() / m_pts as f64;
    let gy: f64 = mean[lo..=hi].iter().sum::<f64>() / m_pts as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for j in lo..=hi {
        sxx += (grid[j] - gx) * (grid[j] - gx);
        sxy += (grid[j] - gx) * (mean[j] - gy);
    }
    let middle_slope = sxy / sxx;

    let band = 0.2 * v_span;
    let area_rl = cap_area(v, i, |vv| vv <= v_min + band) + cap_area(v, i, |vv| vv >= v_max - band);

    Ok(WsFeatures {
        looping_direction,
        area_enclosed: area.abs(),
        curve_nonlinearity: nonlin,
        num_intersections: count_intersections(v, i, eps_area),
        middle_slope,
        area_rl,
        span: i_max - i_min,
    })
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Extracts the feature vector of a delta signature in the given space.
/// The label field is left unset; callers attach labels from truth logs or
/// clustering.
pub fn featurize(sig: &DeltaSignature, space: FeatureSpace) -> Result<FeatureVector> {
    let values = match space {
        FeatureSpace::Pq => extract_pq(&sig.cycle)?.to_vec(),
        FeatureSpace::Har => extract_har(&sig.cycle)?,
        FeatureSpace::Ws => extract_ws(&sig.cycle)?.to_vec(),
    };
    Ok(FeatureVector { space, values, label: None })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::CyclePair;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn cycle_from(n: usize, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> CyclePair {
        let v: Vec<f64> = (0..n).map(|k| f(TWO_PI * k as f64 / n as f64)).collect();
        let i: Vec<f64> = (0..n).map(|k| g(TWO_PI * k as f64 / n as f64)).collect();
        CyclePair::new(v, i, 60.0).unwrap()
    }

    fn rl_cycle(n: usize, v_rms: f64, i_rms: f64, lag: f64) -> CyclePair {
        cycle_from(
            n,
            |t| 2f64.sqrt() * v_rms * t.sin(),
            |t| 2f64.sqrt() * i_rms * (t - lag).sin(),
        )
    }

    #[test]
    fn pq_matches_textbook_rl_load() {
        let c = rl_cycle(256, 120.0, 10.0, 60f64.to_radians());
        let pq = extract_pq(&c).unwrap();
        let p_want = 120.0 * 10.0 * 60f64.to_radians().cos();
        let q_want = 120.0 * 10.0 * 60f64.to_radians().sin();
        assert!((pq.p - p_want).abs() < 1e-6 * p_want, "P = {}", pq.p);
        assert!((pq.q - q_want).abs() < 1e-6 * q_want, "Q = {}", pq.q);
        assert!(pq.thd_odd < 1e-9);
        assert!(pq.thd_even < 1e-9);
    }

    #[test]
    fn q_is_negative_for_leading_current() {
        let c = rl_cycle(256, 120.0, 10.0, -60f64.to_radians());
        let pq = extract_pq(&c).unwrap();
        assert!(pq.q < -1000.0, "capacitive load must have negative Q, got {}", pq.q);
    }

    #[test]
    fn p_and_q_are_additive_over_superposed_loads() {
        let a = rl_cycle(256, 120.0, 4.0, 0.3);
        let b = rl_cycle(256, 120.0, 7.0, -0.9);
        let sum_i: Vec<f64> = a.i().iter().zip(b.i()).map(|(x, y)| x + y).collect();
        let combined = CyclePair::new(a.v().to_vec(), sum_i, 60.0).unwrap();
        let (fa, fb, fc) = (
            extract_pq(&a).unwrap(),
            extract_pq(&b).unwrap(),
            extract_pq(&combined).unwrap(),
        );
        assert!((fa.p + fb.p - fc.p).abs() < 1e-9 * fc.p.abs());
        assert!((fa.q + fb.q - fc.q).abs() < 1e-9 * (fa.q.abs() + fb.q.abs()));
    }

    #[test]
    fn square_wave_thd_matches_series_value() {
        let n = 256;
        let v: Vec<f64> = (0..n).map(|k| 170.0 * (TWO_PI * k as f64 / n as f64).sin()).collect();
        let i: Vec<f64> = (0..n).map(|k| if k < n / 2 { 1.0 } else { -1.0 }).collect();
        let pq = extract_pq(&CyclePair::new(v, i, 60.0).unwrap()).unwrap();
        let want = (std::f64::consts::PI.powi(2) / 8.0 - 1.0).sqrt(); // 0.4834
        assert!(
            (pq.thd_odd - want).abs() < 0.01 * want,
            "THD_odd {} vs {want}",
            pq.thd_odd
        );
        assert!(pq.thd_even < 1e-9, "ideal square wave has no even harmonics");
    }

    #[test]
    fn missing_fundamental_is_degenerate() {
        // Pure third harmonic: plenty of rms, no fundamental.
        let c = cycle_from(256, |t| t.sin(), |t| (3.0 * t).sin());
        assert!(matches!(extract_pq(&c), Err(Error::DegenerateInput(_))));
        let zero = cycle_from(256, |t| t.sin(), |_| 0.0);
        assert!(matches!(extract_pq(&zero), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn har_places_harmonics_in_their_bands() {
        // 180 Hz: band floor(180 * 77 / 4000) = 3.
        let c = cycle_from(256, |t| t.sin(), |t| (3.0 * t).sin());
        let bands = extract_har(&c).unwrap();
        assert_eq!(bands.len(), HAR_BANDS);
        assert!((bands[3] - 1.0).abs() < 1e-9, "band 3 holds {}", bands[3]);
        assert!(bands.iter().enumerate().filter(|&(j, _)| j != 3).all(|(_, &b)| b < 1e-12));
    }

    #[test]
    fn har_splits_equal_harmonics_evenly() {
        let c = cycle_from(256, |t| t.sin(), |t| t.sin() + (3.0 * t).sin());
        let bands = extract_har(&c).unwrap();
        assert!((bands[1] - 0.5).abs() < 1e-9, "60 Hz band = {}", bands[1]);
        assert!((bands[3] - 0.5).abs() < 1e-9, "180 Hz band = {}", bands[3]);
    }

    #[test]
    fn har_is_normalized() {
        let c = cycle_from(
            512,
            |t| t.sin(),
            |t| t.sin() + 0.4 * (3.0 * t).sin() + 0.2 * (5.0 * t + 0.3).sin() + 0.05 * (12.0 * t).cos(),
        );
        let bands = extract_har(&c).unwrap();
        let sum: f64 = bands.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(bands.iter().all(|&b| b >= 0.0));
    }

    #[test]
    fn har_rejects_low_rate_and_silence() {
        // 128 samples at 60 Hz is 7.68 kHz, below the 8 kHz floor.
        let c = cycle_from(128, |t| t.sin(), |t| t.sin());
        assert!(matches!(extract_har(&c), Err(Error::Size { .. })));
        let zero = cycle_from(256, |t| t.sin(), |_| 0.0);
        assert!(matches!(extract_har(&zero), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn ws_of_inductive_ellipse() {
        let (a, b, phi) = (170.0, 7.0, 30f64.to_radians());
        let n = 256;
        let c = cycle_from(n, |t| a * t.sin(), |t| b * (t - phi).sin());
        let ws = extract_ws(&c).unwrap();
        assert_eq!(ws.looping_direction, 1.0, "lagging current loops counter-clockwise");
        // The sampled polygon area is the continuous ellipse area scaled by
        // sinc(2 pi / n).
        let sinc = (TWO_PI / n as f64).sin() / (TWO_PI / n as f64);
        let want = std::f64::consts::PI * a * b * phi.sin() * sinc;
        assert!((ws.area_enclosed - want).abs() < 1e-12 * want, "area {}", ws.area_enclosed);
        assert_eq!(ws.num_intersections, 0);
        // Mean curve of an ellipse is the line i = (B/A) cos(phi) v.
        let slope_want = b / a * phi.cos();
        assert!(
            (ws.middle_slope - slope_want).abs() < 1e-3 * slope_want,
            "slope {} vs {slope_want}",
            ws.middle_slope
        );
        assert!(ws.curve_nonlinearity < 1e-3 * a * b);
        // Each cap keeps v within 20% of the span from an extreme, i.e.
        // |v| >= 0.6 A here. Per cap: 2AB sin(phi) int_{0.6}^{1} sqrt(1-u^2) du.
        let cap_int = 0.223_647_6;
        let rl_want = 2.0 * 2.0 * a * b * phi.sin() * cap_int;
        assert!(
            (ws.area_rl - rl_want).abs() < 0.1 * rl_want,
            "area_rl {} vs {rl_want}",
            ws.area_rl
        );
        assert!(ws.area_rl > 0.0);
        // The sample grid misses the true current peak by up to half a step.
        assert!((ws.span - 2.0 * b).abs() < 1e-3 * b, "span {}", ws.span);
    }

    #[test]
    fn ws_of_capacitive_ellipse_loops_clockwise() {
        let c = cycle_from(256, |t| t.sin(), |t| (t + 0.5).sin());
        assert_eq!(extract_ws(&c).unwrap().looping_direction, -1.0);
    }

    #[test]
    fn ws_of_resistive_line() {
        let r = 24.0;
        let c = cycle_from(256, |t| 170.0 * t.sin(), |t| 170.0 * t.sin() / r);
        let ws = extract_ws(&c).unwrap();
        assert_eq!(ws.looping_direction, 0.0);
        assert!(ws.area_enclosed < 1e-9 * 170.0 * 170.0 / r);
        assert!(ws.curve_nonlinearity < 1e-9);
        assert_eq!(ws.num_intersections, 0);
        assert!((ws.middle_slope - 1.0 / r).abs() < 0.01 / r, "slope {}", ws.middle_slope);
        assert!(ws.area_rl < 1e-9);
        assert!((ws.span - 2.0 * 170.0 / r).abs() < 1e-12 * 170.0 / r);
    }

    #[test]
    fn ws_counts_figure_eight_crossing() {
        // Half-sample phase offset keeps polygon vertices off the crossing.
        let d = std::f64::consts::PI / 256.0;
        let c = cycle_from(256, |t| (t + d).sin(), |t| (2.0 * (t + d)).sin());
        let ws = extract_ws(&c).unwrap();
        assert_eq!(ws.num_intersections, 1);
    }

    #[test]
    fn ws_scales_exactly_with_current() {
        let c = cycle_from(256, |t| 120.0 * t.sin(), |t| 3.0 * (t - 0.4).sin() + 0.8 * (3.0 * t).sin());
        let scaled = CyclePair::new(
            c.v().to_vec(),
            c.i().iter().map(|x| 4.0 * x).collect(),
            60.0,
        )
        .unwrap();
        let w1 = extract_ws(&c).unwrap();
        let w4 = extract_ws(&scaled).unwrap();
        // Scaling by a power of two is exact in floating point, so the
        // equivariance holds bitwise.
        assert_eq!(w4.looping_direction, w1.looping_direction);
        assert_eq!(w4.area_enclosed, 4.0 * w1.area_enclosed);
        assert_eq!(w4.curve_nonlinearity, 4.0 * w1.curve_nonlinearity);
        assert_eq!(w4.num_intersections, w1.num_intersections);
        assert_eq!(w4.middle_slope, 4.0 * w1.middle_slope);
        assert_eq!(w4.area_rl, 4.0 * w1.area_rl);
        assert_eq!(w4.span, 4.0 * w1.span);
    }

    #[test]
    fn ws_time_reversal_flips_direction_only() {
        let c = cycle_from(256, |t| t.sin(), |t| (t - 0.7).sin());
        let rev = CyclePair::new(
            c.v().iter().rev().copied().collect(),
            c.i().iter().rev().copied().collect(),
            60.0,
        )
        .unwrap();
        let w = extract_ws(&c).unwrap();
        let wr = extract_ws(&rev).unwrap();
        assert_eq!(wr.looping_direction, -w.looping_direction);
        assert!((wr.area_enclosed - w.area_enclosed).abs() < 1e-12 * w.area_enclosed);
    }

    #[test]
    fn ws_rejects_flat_voltage() {
        let c = CyclePair::new(vec![5.0; 256], (0..256).map(|k| k as f64).collect(), 60.0).unwrap();
        assert!(matches!(extract_ws(&c), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn featurize_produces_declared_dimensions() {
        use crate::events::{DeltaSignature, Polarity};
        let cycle = rl_cycle(256, 120.0, 2.0, 0.4);
        let p_delta = cycle.active_power();
        let sig = DeltaSignature { cycle, event_index: 2560, polarity: Polarity::On, p_delta };
        for space in FeatureSpace::ALL {
            let fv = featurize(&sig, space).unwrap();
            assert_eq!(fv.values.len(), space.dim());
            assert_eq!(fv.space, space);
            assert!(fv.label.is_none());
        }
    }
}
