//! Minimizes two classic test functions with differential evolution.
//!
//! Shows the population-based search on the smooth sphere bowl and the
//! highly multimodal Rastrigin function, plus a run with an early-stop
//! threshold and a mixed integer gene.

use nilmkit::optimize::{run_de, Acceptance, DeConfig, GeneSpec};

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn rastrigin(x: &[f64]) -> f64 {
    x.iter()
        .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos() + 10.0)
        .sum()
}

fn main() -> nilmkit::Result<()> {
    let genes: Vec<GeneSpec> = (0..5).map(|d| GeneSpec::real(&format!("x{d}"), -5.0, 5.0)).collect();

    // Adaptive acceptance: each trial gene survives with a probability
    // that depends on how the mutant's objective compares to the parent's.
    let config = DeConfig { pop_size: 30, generations: 400, seed: 42, ..DeConfig::default() };
    let result = run_de(&genes, &config, sphere)?;
    println!("sphere, 5 dims:");
    println!("  best objective  {:.3e}", result.best_of);
    println!("  best point      {:?}", result.best.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());
    println!("  evaluations     {}", result.evaluations);
    println!("  stopped         {:?}", result.stop);
    println!();

    let result = run_de(&genes, &config, rastrigin)?;
    println!("rastrigin, 5 dims (global minimum 0 at the origin):");
    println!("  best objective  {:.3e}", result.best_of);
    println!("  evaluations     {}", result.evaluations);
    println!();

    // A threshold stops the run as soon as the target quality is reached;
    // the history records the best and mean objective per generation.
    let config = DeConfig {
        pop_size: 30,
        generations: 400,
        acceptance: Acceptance::Classic { rate: 0.9 },
        of_threshold: Some(1e-8),
        seed: 42,
        ..DeConfig::default()
    };
    let result = run_de(&genes, &config, sphere)?;
    println!("sphere with a 1e-8 threshold and classic crossover:");
    println!("  stopped {:?} after {} generations", result.stop, result.history.len() - 1);
    for stat in result.history.iter().rev().take(3).rev() {
        println!("  gen {:>3}: best {:.3e}, population mean {:.3e}", stat.generation, stat.best_of, stat.mean_of);
    }
    println!();

    // Integer genes are rounded after every mutation, so the search walks
    // a lattice in that coordinate.
    let genes = vec![GeneSpec::integer("n", 1.0, 50.0), GeneSpec::real("x", -5.0, 5.0)];
    let objective = |g: &[f64]| (g[0] - 17.0).powi(2) + g[1] * g[1];
    let result = run_de(&genes, &DeConfig { seed: 9, ..DeConfig::default() }, objective)?;
    println!("mixed integer search for n = 17, x = 0:");
    println!("  found n = {}, x = {:.4}", result.best[0], result.best[1]);
    Ok(())
}
