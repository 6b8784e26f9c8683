//! Generates a synthetic household recording and writes it as a corpus.
//!
//! Each appliance carries a pool of magnitude-jittered spectra taken from
//! its clean current template; every switch-on draws one, so no two
//! activations are identical. The scenario schedules random non-colliding
//! switch times, sums the active loads per cycle, and adds white noise to
//! hit the requested SNR.

use nilmkit::ingest::{read_corpus_header, write_corpus, ChannelDef, CorpusHeader, SampleFormat};
use nilmkit::seed::rng_from_seed;
use nilmkit::simulate::{generate_scenario, reconstruct_cw, sample_appliances, GridSpec, ScenarioConfig};

fn main() -> nilmkit::Result<()> {
    let grid = GridSpec::default();
    let appliances = sample_appliances(&grid, 5, 11)?;
    // A compressed timeline (a switch every few seconds) keeps the demo fast.
    let config = ScenarioConfig {
        hours: 0.05,
        events_per_hour: 400.0,
        snr_db: Some(30.0),
        dynamics: false,
        seed: 11,
    };
    let scenario = generate_scenario(&grid, &appliances, &config)?;

    println!("scenario: {} cycles, noise sigma {:.4} A", scenario.duration_cycles, scenario.noise_sigma);
    println!("first switch events:");
    for t in scenario.truth.iter().take(6) {
        println!("  cycle {:>6}: {} {}", t.cycle, t.name, if t.on { "on" } else { "off" });
    }

    // A drawn snapshot differs from the template; a pool of one is exact.
    let fridge = &appliances[1];
    let mut rng = rng_from_seed(99);
    let drawn = reconstruct_cw(&fridge.snapshots, &mut rng)?;
    let max_dev = drawn
        .iter()
        .zip(&fridge.template)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!();
    println!("{}: drawn activation deviates from the template by up to {:.3} A", fridge.name, max_dev);

    // Persist the record in the exchange layout: a TOML header plus one
    // raw file per channel, and the switch log alongside.
    let dir = std::env::temp_dir().join("nilmkit_demo_corpus");
    let (v, i) = scenario.materialize()?;
    let header = CorpusHeader {
        sample_rate: grid.sample_rate(),
        mains_freq: grid.mains_freq,
        format: SampleFormat::F32,
        voltage_channel: 1,
        current_channel: 2,
        mains: vec![1, 2],
        channels: vec![
            ChannelDef { id: 1, name: "mains_voltage".into() },
            ChannelDef { id: 2, name: "mains_current".into() },
        ],
    };
    write_corpus(&dir, &header, &[(1, &v), (2, &i)])?;
    std::fs::write(dir.join("truth.csv"), scenario.truth_csv())?;

    let back = read_corpus_header(&dir)?;
    println!();
    println!("wrote corpus to {}", dir.display());
    println!("header round trip: {} Hz sampling, {} channels", back.sample_rate, back.channels.len());
    Ok(())
}
