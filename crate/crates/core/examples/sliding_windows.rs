//! Turns raw records into recent, periodic and seasonal windows with
//! multi-horizon targets, split 4:1:1 in time order per cell.
//!
//!     cargo run --example sliding_windows

use deepauto::dataprep::{Dataset, OutputKind, WindowSpec};
use deepauto::model::DeepAutoConfig;
use deepauto::synthgen::{generate, SynthConfig};

fn main() -> deepauto::Result<()> {
    let records = generate(&SynthConfig {
        n_cells: 3,
        days: 15,
        ..SynthConfig::default()
    })?;
    let cfg = DeepAutoConfig {
        step_seconds: 900,
        window: WindowSpec::for_step(900, 8, 2, 1),
        output: OutputKind::ScalarHorizons(vec![1, 4, 8]),
        ..DeepAutoConfig::default()
    }
    .resolved()?;
    let w = &cfg.window;
    let t = w.first_anchor() + 10;
    println!("anchor {t}: recent {:?}", w.recent_indices(t));
    println!("           periodic {:?}, seasonal {:?}", w.periodic_indices(t), w.seasonal_indices(t));

    let ds = Dataset::prepare(&records, &cfg.data_spec())?;
    println!("{} train / {} val / {} test samples", ds.train.len(), ds.val.len(), ds.test.len());
    for c in &ds.cells {
        println!("  {}: {} / {} / {}", c.cell_id, c.train.len(), c.val.len(), c.test.len());
    }
    let s = &ds.train[0];
    println!(
        "first sample: x_recent {}x{}, external {} values, targets {:?}",
        s.x_recent.rows(),
        s.x_recent.cols(),
        s.external.len(),
        s.target
    );
    for d in &ds.diagnostics {
        println!("note: {d}");
    }
    Ok(())
}
