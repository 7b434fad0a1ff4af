//! Train the model pools behind the extrapolation results and cache them
//! under `artifacts/<suite>/` (checkpoints plus `pool.json`). The acceptance
//! tests read these caches.
//!
//! ```text
//! cargo run --release --example reproduce -- parity
//! cargo run --release --example reproduce -- all
//! cargo run --release --example reproduce -- parity 1 1   # first lr, first seed
//! ```
//!
//! Suites: parity, cycle_navigation, tomita4, even_pairs,
//! modular_arithmetic, vanilla_parity. Appending `_bos` to a suite name
//! trains the same pool with a start token prepended to every input;
//! appending `_nostop` after that trains for the full step budget with
//! early stopping disabled.

use std::path::PathBuf;

use regulargpt::automata::make_task;
use regulargpt::model::ModelConfig;
use regulargpt::training::{run_pool, EvalConfig, LengthRange, PoolEvent, TrainConfig};

const LRS: [f64; 3] = [5e-4, 3e-4, 1e-4];
const SEEDS: [u64; 3] = [0, 1, 2];
const SUITES: [&str; 12] = [
    "parity",
    "parity_bos",
    "cycle_navigation",
    "cycle_navigation_bos",
    "tomita4",
    "tomita4_bos",
    "even_pairs",
    "even_pairs_bos",
    "modular_arithmetic",
    "modular_arithmetic_bos",
    "vanilla_parity",
    "vanilla_parity_bos",
];

struct Suite {
    train: TrainConfig,
    eval: EvalConfig,
    lrs: &'static [f64],
    seeds: &'static [u64],
    target: Option<f64>,
}

fn suite(name: &str) -> regulargpt::Result<Suite> {
    let (name, nostop) = match name.strip_suffix("_nostop") {
        Some(n) => (n, true),
        None => (name, false),
    };
    let (name, bos) = match name.strip_suffix("_bos") {
        Some(n) => (n, true),
        None => (name, false),
    };
    let (task, vanilla) = match name.strip_prefix("vanilla_") {
        Some(t) => (t, true),
        None => (name, false),
    };
    let mut train = TrainConfig::for_task(task)?;
    let long = matches!(task, "parity" | "cycle_navigation");
    train.train_max_len = if long { 40 } else { 50 };
    let lengths = if long {
        LengthRange::new(41, 500, 9)?
    } else {
        LengthRange::new(51, 100, 1)?
    };
    if vanilla {
        train.model = ModelConfig::vanilla(&make_task(task)?, 6);
    }
    train.model.bos = bos;
    if nostop {
        train.early_stop = 2.0;
    }
    train.resolve()?;
    let target = match task {
        "modular_arithmetic" => Some(0.80),
        _ if vanilla => None,
        _ => Some(0.99),
    };
    Ok(Suite {
        train,
        eval: EvalConfig {
            lengths,
            samples: 100,
            p1: 0.5,
            seed: 0,
        },
        lrs: if vanilla { &LRS[..1] } else { &LRS },
        seeds: if vanilla { &SEEDS[..1] } else { &SEEDS },
        target,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let which = args.first().cloned().unwrap_or_else(|| "parity".into());
    // Optional grid truncation: number of learning rates, then seeds.
    let limit = |i: usize| args.get(i).map(|a| a.parse::<usize>()).transpose();
    let (max_lrs, max_seeds) = (limit(1)?, limit(2)?);
    let names: Vec<&str> = if which == "all" { SUITES.to_vec() } else { vec![which.as_str()] };
    let root = PathBuf::from(std::env::var("REGULARGPT_ARTIFACTS").unwrap_or_else(|_| "artifacts".into()));
    for name in names {
        let s = suite(name)?;
        let lrs = &s.lrs[..max_lrs.map_or(s.lrs.len(), |n| n.min(s.lrs.len()))];
        let seeds = &s.seeds[..max_seeds.map_or(s.seeds.len(), |n| n.min(s.seeds.len()))];
        let report = run_pool(&s.train, lrs, seeds, &s.eval, s.target, &root.join(name), |event| match event {
            PoolEvent::Start { lr, seed, cached } => {
                println!("[{name}] lr {lr:e} seed {seed}{}", if cached { " (cached)" } else { "" })
            }
            PoolEvent::Log(log) if log.step % 1000 == 0 => {
                println!("  step {:>6}  loss {:.4}  train_acc {:.3}", log.step, log.loss, log.train_acc)
            }
            PoolEvent::Log(_) => {}
            PoolEvent::Done(m) => println!("  steps {}  avg_accuracy {:.4}", m.steps, m.average),
        })?;
        println!("[{name}] max-over-pool average {:.4}", report.max_average());
    }
    Ok(())
}
