//! Compares the three feature spaces on clean archetype loads.
//!
//! Builds one cycle of voltage and current for a resistive heater, an
//! induction motor and a switch-mode power supply, then prints the active
//! power features and the trajectory shape features side by side. The
//! shape features are what separate loads whose P and Q overlap.

use nilmkit::features::{extract_pq, extract_ws};
use nilmkit::signal::CyclePair;
use nilmkit::simulate::{Appliance, Archetype, GridSpec};

fn main() -> nilmkit::Result<()> {
    let grid = GridSpec::default();
    let loads = [
        ("heater", Archetype::Resistive, 1500.0),
        ("motor", Archetype::Inductive { phase: 0.6 }, 750.0),
        ("psu", Archetype::PowerElectronic, 300.0),
        ("mixed", Archetype::Composite, 900.0),
    ];

    println!("grid: {} V rms, {} Hz, {} samples per cycle", grid.v_rms, grid.mains_freq, grid.samples_per_cycle);
    println!();
    println!(
        "{:<8} {:>8} {:>8} {:>8} {:>8} | {:>5} {:>10} {:>10} {:>6} {:>9}",
        "load", "P [W]", "Q [var]", "thd_odd", "thd_even", "loop", "area", "nonlin", "cross", "span [A]"
    );

    for (name, archetype, power) in loads {
        let appliance = Appliance::new(name, archetype, power, &grid, 1)?;
        // The template is the clean steady-state current for one cycle.
        let cycle = CyclePair::new(grid.voltage_cycle(), appliance.template.clone(), grid.mains_freq)?;

        let pq = extract_pq(&cycle)?;
        let ws = extract_ws(&cycle)?;
        println!(
            "{:<8} {:>8.1} {:>8.1} {:>8.4} {:>8.4} | {:>5} {:>10.2} {:>10.2} {:>6} {:>9.3}",
            name,
            pq.p,
            pq.q,
            pq.thd_odd,
            pq.thd_even,
            ws.looping_direction,
            ws.area_enclosed,
            ws.curve_nonlinearity,
            ws.num_intersections,
            ws.span,
        );
    }

    println!();
    println!("The heater draws current in phase with voltage: no reactive power,");
    println!("no enclosed trajectory area, no harmonic distortion. The motor lags");
    println!("the voltage, which opens the loop (positive area, loop = +1). The");
    println!("power supply conducts only near the voltage peaks, which shows up");
    println!("as odd-harmonic distortion and a strongly nonlinear mean curve.");
    Ok(())
}
