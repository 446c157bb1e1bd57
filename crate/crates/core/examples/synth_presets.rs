//! Lists the synthetic presets, writes one to JSONL and reads it back.

use chs::dataset::{read_jsonl, write_jsonl};
use chs::synthetic::{generate_dataset, preset, preset_instances, AnalyticOracle};

fn main() -> chs::Result<()> {
    for p in preset_instances() {
        println!("{:<16} {}", p.name, p.description);
    }
    let p = preset("dominance")?;
    let ds = generate_dataset(&p.spec)?;
    let mut buf = Vec::new();
    write_jsonl(&ds, &mut buf).expect("writing to memory");
    let back = read_jsonl(buf.as_slice())?;
    assert_eq!(back, ds);
    println!(
        "dominance: {} records, {} bytes of JSONL, round trip ok",
        ds.len(),
        buf.len()
    );
    let oracle = AnalyticOracle::new(&p.spec)?;
    for (procedure, truth) in &oracle.ground_truth {
        println!(
            "  analytic {procedure} ranking: {}",
            truth.ranking.join(" > ")
        );
    }
    Ok(())
}
