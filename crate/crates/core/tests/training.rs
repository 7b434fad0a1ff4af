use regulargpt::training::{train, StopReason, TrainConfig};

fn tiny(task: &str, bos: bool) -> TrainConfig {
    let mut cfg = TrainConfig::for_task(task).unwrap();
    cfg.model.d_model = 16;
    cfg.model.n_heads = 2;
    cfg.model.d_ffn = 32;
    cfg.model.bos = bos;
    cfg.batch_size = 8;
    cfg.train_max_len = 12;
    cfg.max_steps = 100;
    cfg.log_every = 10;
    cfg.early_stop = 2.0;
    cfg.resolve().unwrap();
    cfg
}

#[test]
fn same_seed_gives_identical_runs() {
    for bos in [false, true] {
        let cfg = tiny("parity", bos);
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.stop, StopReason::MaxSteps);
        assert_eq!(a.curve.len(), 10);
        for (x, y) in a.curve.iter().zip(&b.curve) {
            assert_eq!(x.loss.to_bits(), y.loss.to_bits());
            assert_eq!(x.train_acc.to_bits(), y.train_acc.to_bits());
        }
        for (p, q) in a.model.params().iter().zip(b.model.params().iter()) {
            assert!(p.value.data().iter().zip(q.value.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }
}

#[test]
fn different_seeds_diverge() {
    let cfg = tiny("cycle_navigation", false);
    let a = train(&cfg).unwrap();
    let b = train(&TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.curve[0].loss.to_bits(), b.curve[0].loss.to_bits());
}
