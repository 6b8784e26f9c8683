//! Tunes classifier hyper-parameters with differential evolution.
//!
//! Instead of a grid, the cross-validation error drives an evolutionary
//! search over the hyper-parameter space: hidden-layer width for neural
//! nets, kernel width and box constraint for support vector machines.

use nilmkit::events::{detect_events_with, extract_delta_with, DEFAULT_SETTLE_CYCLES};
use nilmkit::features::{featurize, FeatureSpace};
use nilmkit::learn::{split, train, Normalizer, DEFAULT_FRACTIONS};
use nilmkit::optimize::{model_select, DeConfig, SelectKind};
use nilmkit::simulate::{generate_scenario, sample_appliances, GridSpec, ScenarioConfig};

fn main() -> nilmkit::Result<()> {
    // A compact labeled event set from a low-noise synthetic household.
    let grid = GridSpec::default();
    let appliances = sample_appliances(&grid, 4, 5)?;
    // A compressed timeline (a switch every few seconds) keeps the demo fast.
    let config = ScenarioConfig {
        hours: 0.1,
        events_per_hour: 4000.0,
        snr_db: Some(40.0),
        dynamics: false,
        seed: 5,
    };
    let scenario = generate_scenario(&grid, &appliances, &config)?;
    let (v, i) = scenario.window_waveforms(0, scenario.duration_cycles as usize)?;

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
        if sig.p_delta < 0.0 {
            sig.cycle = sig.cycle.with_negated_current();
        }
        let truth = scenario.truth.iter().min_by_key(|t| t.cycle.abs_diff(ce as u64)).unwrap();
        rows.push(featurize(&sig, FeatureSpace::Ws)?.values);
        labels.push(truth.appliance as u32);
    }

    let parts = split(&labels, DEFAULT_FRACTIONS, 5)?;
    let gather = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<u32>) {
        (idx.iter().map(|&k| rows[k].clone()).collect(), idx.iter().map(|&k| labels[k]).collect())
    };
    let (x_train_raw, y_train) = gather(&parts.train);
    let (x_cv_raw, y_cv) = gather(&parts.cv);
    let norm = Normalizer::fit(&x_train_raw)?;
    let x_train = norm.apply_all(&x_train_raw);
    let x_cv = norm.apply_all(&x_cv_raw);
    println!("{} events, {} train / {} cv", rows.len(), x_train.len(), x_cv.len());

    // Small budgets keep the demo fast; real searches use the defaults.
    let de = DeConfig { pop_size: 8, generations: 10, seed: 5, ..DeConfig::default() };

    for kind in [SelectKind::Svm, SelectKind::Ann] {
        let (algorithm, result) = model_select(kind, &x_train, &y_train, &x_cv, &y_cv, &de)?;
        println!();
        println!("{kind:?} search:");
        println!("  chose           {algorithm:?}");
        println!("  cv error        {:.4}", result.best_of);
        println!("  evaluations     {}", result.evaluations);

        // Retrain with the winner to confirm the tuned settings hold up.
        let model = train(algorithm, &x_train, &y_train, &x_cv, &y_cv, 5)?;
        let ok = x_cv.iter().zip(&y_cv).filter(|(r, &y)| model.predict(r) == y).count();
        println!("  cv precision    {:.4}", ok as f64 / y_cv.len() as f64);
    }
    Ok(())
}
