//! Saves a trained model in the versioned binary format, loads it back and
//! shows that a damaged file is refused.
//!
//!     cargo run --example model_persistence

use deepauto::dataprep::{Dataset, OutputKind, WindowSpec};
use deepauto::model::{train_dataset, DeepAutoConfig, Model, FORMAT_VERSION, MAGIC};
use deepauto::synthgen::{generate, SynthConfig};

fn main() -> deepauto::Result<()> {
    let records = generate(&SynthConfig {
        n_cells: 3,
        days: 3,
        ..SynthConfig::default()
    })?;
    let cfg = DeepAutoConfig {
        step_seconds: 900,
        window: WindowSpec::for_step(900, 8, 1, 0),
        output: OutputKind::ScalarHorizons(vec![1, 4]),
        hidden_r: 8,
        hidden_p: 8,
        hidden_s: 8,
        max_epochs: 2,
        ..DeepAutoConfig::default()
    }
    .resolved()?;
    let ds = Dataset::prepare(&records, &cfg.data_spec())?;
    let (params, _) = train_dataset(&ds, &cfg)?;
    let model = Model {
        config: cfg,
        params,
        scaler: ds.scaler,
    };

    let path = std::env::temp_dir().join("deepauto-example.daut");
    model.save(&path)?;
    let bytes = std::fs::read(&path)?;
    println!("{}: {} bytes, magic {:?}, format version {FORMAT_VERSION}", path.display(), bytes.len(), std::str::from_utf8(&MAGIC[..]).unwrap_or("?"));

    let loaded = Model::load(&path)?;
    println!("round trip identical: {}", loaded == model);

    let mut damaged = bytes.clone();
    let mid = damaged.len() / 2;
    damaged[mid] ^= 0x01;
    match Model::from_bytes(&damaged) {
        Ok(_) => println!("damaged file accepted (unexpected)"),
        Err(e) => println!("damaged file rejected: {e}"),
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
