//! Loads a tiny JSONL sweep and prints each cell's pooled-CDF score.
//!
//! ```text
//! cargo run --example ingest_normalize [path.jsonl|path.csv]
//! ```

use chs::dataset::{load_dataset, read_jsonl, CellId, Format};
use chs::normalize::{build_pools, PoolingPolicy};

const SWEEP: &str = r#"{"algorithm":"ppo","environment":"cartpole","hypers":{"lr":0.001},"run":0,"score":480}
{"algorithm":"ppo","environment":"cartpole","hypers":{"lr":0.001},"run":1,"score":500}
{"algorithm":"ppo","environment":"cartpole","hypers":{"lr":0.01},"run":0,"score":120}
{"algorithm":"ppo","environment":"cartpole","hypers":{"lr":0.01},"run":1,"score":310}
{"algorithm":"ppo","environment":"acrobot","hypers":{"lr":0.001},"run":0,"score":-95}
{"algorithm":"ppo","environment":"acrobot","hypers":{"lr":0.001},"run":1,"score":-88}
{"algorithm":"ppo","environment":"acrobot","hypers":{"lr":0.01},"run":0,"score":-80}
{"algorithm":"ppo","environment":"acrobot","hypers":{"lr":0.01},"run":1,"score":-500}
"#;

fn main() -> chs::Result<()> {
    let ds = match std::env::args_os().nth(1) {
        Some(p) => {
            let path = std::path::PathBuf::from(p);
            let format = Format::from_path(&path).unwrap_or(Format::Jsonl);
            load_dataset(&path, format)?
        }
        None => read_jsonl(SWEEP.as_bytes())?,
    };
    println!(
        "{} records: {} algorithms, {} environments, {} cells",
        ds.len(),
        ds.n_algorithms(),
        ds.n_environments(),
        ds.n_cells()
    );
    let view = build_pools(&ds, PoolingPolicy::FullDataset, None)?;
    for c in 0..ds.n_cells() {
        let id = CellId(c);
        let scores = ds.cell(id);
        let raw = scores.iter().sum::<f64>() / scores.len() as f64;
        println!(
            "{:<40} raw {:>9.3}  normalized {:.4}",
            ds.key(id).to_string(),
            raw,
            view.cell_mean(id, scores)
        );
    }
    Ok(())
}
