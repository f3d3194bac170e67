//! Generates the default synthetic network and shows its daily and weekly
//! structure through the autocorrelation of one cell's load.
//!
//!     cargo run --example synthetic_data

use deepauto::dataprep::{autocorrelation, build_series, interpolate_missing};
use deepauto::synthgen::{generate, SynthConfig};

fn main() -> deepauto::Result<()> {
    let cfg = SynthConfig {
        n_cells: 4,
        ..SynthConfig::default()
    };
    let records = generate(&cfg)?;
    println!("{} records for {} cells over {} days", records.len(), cfg.n_cells, cfg.days);

    let series = build_series(&records, cfg.step_seconds, &["load".into()])?;
    let cell = interpolate_missing(&series[0])?;
    let missing = series[0].missing.iter().filter(|m| **m).count();
    println!("cell {}: {} steps, {missing} interpolated", cell.cell_id, cell.len());

    let day = (86_400 / cfg.step_seconds) as usize;
    let acf = autocorrelation(&cell.column(0), 8 * day)?;
    for (label, lag) in [("6 h", day / 4), ("12 h", day / 2), ("1 day", day), ("3.5 days", 7 * day / 2), ("7 days", 7 * day)] {
        println!("  ACF at {label:>8} (lag {lag:>3}): {:+.3}", acf[lag]);
    }
    Ok(())
}
