//! Builds the cell correlation graph on training load, picks each cell's
//! top-k neighbours and trains a model whose inputs include them.
//!
//!     cargo run --example spatial_neighbors

use deepauto::dataprep::{build_series, interpolate_missing, Dataset, OutputKind, WindowSpec};
use deepauto::model::{train_dataset, DeepAutoConfig};
use deepauto::spatial::{build_graph, topk_neighbors};
use deepauto::synthgen::{cluster_of, generate, SynthConfig};

fn main() -> deepauto::Result<()> {
    let synth = SynthConfig {
        n_cells: 8,
        days: 7,
        n_clusters: 2,
        ..SynthConfig::default()
    };
    let records = generate(&synth)?;
    let series = build_series(&records, synth.step_seconds, &["load".into()])?
        .iter()
        .map(interpolate_missing)
        .collect::<deepauto::Result<Vec<_>>>()?;
    let train_end = series[0].len() * 4 / 6;
    let graph = build_graph(&series, 0, 0..train_end)?;
    for (i, s) in series.iter().enumerate() {
        let nbs = topk_neighbors(&graph, &s.cell_id, 2)?;
        println!("{} (cluster {}) → {nbs:?}", s.cell_id, cluster_of(&synth, i));
    }

    let cfg = DeepAutoConfig {
        step_seconds: 900,
        window: WindowSpec::for_step(900, 8, 1, 0),
        neighbors: 2,
        hidden_r: 8,
        hidden_p: 8,
        hidden_s: 8,
        output: OutputKind::ScalarHorizons(vec![1, 4]),
        max_epochs: 3,
        batch_size: 256,
        ..DeepAutoConfig::default()
    }
    .resolved()?;
    let ds = Dataset::prepare(&records, &cfg.data_spec())?;
    println!("inputs per step with neighbours: {}", ds.cells[0].scaled.channels.join(", "));
    let (_, report) = train_dataset(&ds, &cfg)?;
    println!("best validation loss {:.6} after {} epochs", report.best_val_loss, report.epochs.len());
    Ok(())
}
