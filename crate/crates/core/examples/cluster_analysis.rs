//! Cluster the per-group hidden vectors of a trained model and score how
//! well the clusters match the automaton transition of each visible span.
//! Writes a CSV and an SVG scatter next to the checkpoint.
//!
//! ```text
//! cargo run --release --example cluster_analysis -- runs/checkpoint.json 500
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regulargpt::analysis::{cluster_purity, collect_outputs, svg, Representation};
use regulargpt::automata::{make_task, sample};
use regulargpt::model::load_checkpoint;

fn main() -> regulargpt::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: cluster_analysis CHECKPOINT [T]");
        std::process::exit(1);
    };
    let len = args.get(1).map_or(Ok(500), |s| s.parse()).expect("length");
    let ck = load_checkpoint(path.as_ref())?;
    let task = make_task(&ck.meta.task)?;
    let tokens = sample(&task, len, &mut ChaCha8Rng::seed_from_u64(0), 0.5)?.tokens;
    for repr in [Representation::FfnOutput, Representation::Residual] {
        let dump = collect_outputs(&ck.model, &task, &tokens, repr)?;
        let report = cluster_purity(&dump, dump.num_labels(), 0)?;
        println!(
            "{repr:?}: {} vectors, {} span labels, purity {:.4}",
            dump.records.len(),
            dump.num_labels(),
            report.purity
        );
        if repr == Representation::FfnOutput {
            let base = std::path::Path::new(path).with_extension("");
            let mut csv = Vec::new();
            report.write_csv(&dump, &mut csv)?;
            std::fs::write(base.with_extension("cluster.csv"), csv)?;
            let labels: Vec<usize> = dump.records.iter().map(|r| r.label).collect();
            let plot = svg::scatter(&report.pca.projections, &labels, &format!("{} T = {len}", task.name()));
            std::fs::write(base.with_extension("cluster.svg"), plot)?;
        }
    }
    Ok(())
}
