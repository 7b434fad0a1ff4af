use regulargpt::automata::make_task;
use regulargpt::gradcheck::finite_difference_check;
use regulargpt::model::{AttentionRoute, Model, ModelConfig};

fn check(config: ModelConfig, inputs: &[&str], samples: usize) -> f64 {
    let task = make_task("parity").unwrap();
    let model = Model::<f64>::new(config.clone(), 5).unwrap();
    let seqs: Vec<Vec<usize>> = inputs.iter().map(|s| task.encode_str(s).unwrap()).collect();
    let targets: Vec<usize> = seqs.iter().map(|s| task.answer_token(task.oracle(s).unwrap())).collect();
    let report = finite_difference_check(
        model.params(),
        |store, tape| {
            let m = Model::from_params(config.clone(), store.clone())?;
            let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
            let trace = m.forward_tape(tape, &refs, AttentionRoute::Sparse)?;
            trace.loss(tape, &targets)
        },
        1e-5,
        samples,
        1,
    )
    .unwrap();
    assert!(report.coordinates >= samples.min(model.params().num_elements()));
    report.max_rel_error
}

fn parity_config() -> ModelConfig {
    let mut c = ModelConfig::for_task(&make_task("parity").unwrap());
    c.d_model = 16;
    c.n_heads = 2;
    c.d_ffn = 32;
    c
}

#[test]
fn two_group_model_on_length_four() {
    let err = check(parity_config(), &["1 0 1 1"], 400);
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn thick_model_on_mixed_batch() {
    let mut c = parity_config();
    c.thickness = 2;
    c.chunk_size = 3;
    let err = check(c, &["1", "1 0 1 1 0", "0 1 1 0 1 1 1 0 0 1"], 250);
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn vanilla_baseline() {
    let task = make_task("parity").unwrap();
    let mut c = ModelConfig::vanilla(&task, 2);
    c.d_model = 16;
    c.n_heads = 2;
    c.d_ffn = 32;
    let err = check(c, &["1 1 0", "0 1 1 1 0 1"], 250);
    assert!(err < 1e-4, "max relative error {err}");
}
