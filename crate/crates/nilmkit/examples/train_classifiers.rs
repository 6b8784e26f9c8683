//! Trains all four classifier families on the same event set.
//!
//! Builds a labeled signature set from a synthetic scenario, projects it
//! onto the trajectory shape space, and fits a neural net (plain and with
//! evolutionary pre-training), support vector machines and boosted stumps
//! on an identical split, printing held-out precision for each.

use nilmkit::events::{detect_events_with, extract_delta_with, DEFAULT_SETTLE_CYCLES};
use nilmkit::features::{featurize, FeatureSpace};
use nilmkit::learn::{split, train, Algorithm, Normalizer, DEFAULT_FRACTIONS};
use nilmkit::simulate::{generate_scenario, sample_appliances, GridSpec, ScenarioConfig};

fn main() -> nilmkit::Result<()> {
    let grid = GridSpec::default();
    let appliances = sample_appliances(&grid, 4, 3)?;
    // A compressed timeline (a switch every few seconds) keeps the demo fast.
    let config = ScenarioConfig {
        hours: 0.1,
        events_per_hour: 4000.0,
        snr_db: Some(35.0),
        dynamics: false,
        seed: 3,
    };
    let scenario = generate_scenario(&grid, &appliances, &config)?;
    let (v, i) = scenario.window_waveforms(0, scenario.duration_cycles as usize)?;

    // Label each detection with the appliance of the nearest truth event.
    let spc = v.samples_per_cycle();
    let settle = DEFAULT_SETTLE_CYCLES;
    let mut rows = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    for idx in detect_events_with(&v, &i, 50.0, settle)? {
        let ce = idx / spc;
        if ce < settle.max(2) || (ce + settle + 2) * spc > v.len() {
            continue;
        }
        let mut sig = extract_delta_with(&v, &i, idx, settle)?;
        // Flip off-events so both edges of an appliance share one shape.
        if sig.p_delta < 0.0 {
            sig.cycle = sig.cycle.with_negated_current();
        }
        let truth = scenario
            .truth
            .iter()
            .min_by_key(|t| t.cycle.abs_diff(ce as u64))
            .expect("scenario has events");
        rows.push(featurize(&sig, FeatureSpace::Ws)?.values);
        labels.push(truth.appliance as u32);
    }
    println!("{} labeled events across {} appliances", rows.len(), appliances.len());

    let parts = split(&labels, DEFAULT_FRACTIONS, 3)?;
    let gather = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<u32>) {
        (idx.iter().map(|&k| rows[k].clone()).collect(), idx.iter().map(|&k| labels[k]).collect())
    };
    let (x_train_raw, y_train) = gather(&parts.train);
    let (x_cv_raw, y_cv) = gather(&parts.cv);
    let (x_test_raw, y_test) = gather(&parts.test);

    // Scale with statistics from the training portion only.
    let norm = Normalizer::fit(&x_train_raw)?;
    let x_train = norm.apply_all(&x_train_raw);
    let x_cv = norm.apply_all(&x_cv_raw);
    let x_test = norm.apply_all(&x_test_raw);
    println!("split: {} train / {} cv / {} test", x_train.len(), x_cv.len(), x_test.len());
    println!();
    println!("{:<22} {:>10} {:>9}", "algorithm", "train", "test");

    for algorithm in Algorithm::ALL_DEFAULT {
        let model = train(algorithm, &x_train, &y_train, &x_cv, &y_cv, 3)?;
        let precision = |x: &[Vec<f64>], y: &[u32]| {
            let ok = x.iter().zip(y).filter(|(r, &y)| model.predict(r) == y).count();
            ok as f64 / y.len() as f64
        };
        println!(
            "{:<22} {:>10.3} {:>9.3}",
            algorithm.to_string(),
            precision(&x_train, &y_train),
            precision(&x_test, &y_test),
        );
    }
    Ok(())
}
