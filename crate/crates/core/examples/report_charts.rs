//! Writes a sensitivity curve, a bar chart and a density chart as SVG with
//! CSV sidecars.
//!
//! ```text
//! cargo run --example report_charts [out_dir]
//! ```

use chs::dataset::CellSamples;
use chs::normalize::{build_pools, PoolingPolicy};
use chs::report::{
    emit_bar_chart, emit_density_chart, emit_sensitivity_curve, sensitivity_series, BarGroup,
    OutputDir,
};
use chs::select::select_chs;
use chs::stats::{kde, Interval};
use chs::synthetic::{generate_dataset, preset};

fn main() -> chs::Result<()> {
    let out = OutputDir::new(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "chs-charts".into()),
    );
    let bimodal = generate_dataset(&preset("bimodal-overlap")?.spec)?;
    let view = build_pools(&bimodal, PoolingPolicy::FullDataset, None)?;
    let alg = &bimodal.algorithms()[0];
    let hp = bimodal.settings(0)[0].entries()[0].0.clone();
    let series = sensitivity_series(&view, alg, &hp, 0.95, 500, 1)?;
    let (svg, _) = emit_sensitivity_curve(
        &series,
        &format!("{alg} sensitivity"),
        &hp,
        "normalized score",
        &out.chart_path("sensitivity"),
    )?;
    println!("{}", svg.display());

    let ds = generate_dataset(&preset("heterogeneous")?.spec)?;
    let view = build_pools(&ds, PoolingPolicy::FullDataset, None)?;
    let all = CellSamples::full(&ds);
    let groups = ds
        .algorithms()
        .iter()
        .map(|a| {
            let r = select_chs(&view, a, &all)?;
            Ok(BarGroup {
                label: a.clone(),
                value: r.aggregate_score,
                interval: Interval::point(r.aggregate_score, 0.95),
            })
        })
        .collect::<chs::Result<Vec<_>>>()?;
    let (svg, _) = emit_bar_chart(
        &groups,
        "CHS score",
        "normalized score",
        &out.chart_path("chs"),
    )?;
    println!("{}", svg.display());

    let curves = vec![(
        "cell 0".to_string(),
        kde(bimodal.cell(chs::dataset::CellId(0)), None, 512)?,
    )];
    let (svg, _) = emit_density_chart(&curves, "score density", &out.chart_path("density"))?;
    println!("{}", svg.display());
    Ok(())
}
