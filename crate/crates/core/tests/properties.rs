use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regulargpt::analysis::{attention_cost, routing_coverage};
use regulargpt::automata::{build, make_task, sample, TaskKind};
use regulargpt::model::{
    adaptive_depth, dilated_bias, load_checkpoint, pad_input, save_checkpoint, CheckpointMeta, Model, ModelConfig,
};

/// Mask by enumeration of the `C` keys each query is allowed to see.
fn brute_force_bias(group: usize, chunk: usize, len: usize, r: &[f64]) -> Vec<f64> {
    let mut bias = vec![f64::NEG_INFINITY; len * len];
    let step = chunk.pow(group as u32);
    for m in 0..len {
        for (j, &rj) in r.iter().enumerate() {
            if let Some(n) = m.checked_sub(j * step) {
                bias[m * len + n] = rj;
            }
        }
    }
    bias
}

#[test]
fn mask_matches_brute_force_exhaustively() {
    for chunk in 2..=4 {
        let r: Vec<f64> = (0..chunk).map(|i| 0.5 + i as f64).collect();
        for len in 1..=64 {
            for group in 0..adaptive_depth(len, chunk).max(1) + 1 {
                assert_eq!(
                    dilated_bias(group, chunk, len, &r),
                    brute_force_bias(group, chunk, len, &r),
                    "C={chunk} T={len} l={group}"
                );
            }
        }
    }
}

#[test]
fn mask_row_counts() {
    for chunk in 2..=4 {
        let r = vec![0.0; chunk];
        for len in [1, 7, 33, 64] {
            for group in 0..4 {
                let bias = dilated_bias(group, chunk, len, &r);
                for m in 0..len {
                    let finite = bias[m * len..(m + 1) * len].iter().filter(|b| b.is_finite()).count();
                    assert_eq!(finite, chunk.min(m / chunk.pow(group as u32) + 1));
                }
            }
        }
    }
}

#[test]
fn routing_covers_every_position() {
    for chunk in 2..=8 {
        for len in 1..=1024 {
            assert_eq!(routing_coverage(chunk, len), len, "C={chunk} T={len}");
        }
    }
}

#[test]
fn cost_examples() {
    // One group degenerates to the dense causal count.
    assert_eq!(attention_cost(16, 1, 16, 1), 16 * 17 / 2);
    assert!(attention_cost(2, 1, 8, 3) <= 48);
    // K thickens the count linearly.
    assert_eq!(attention_cost(2, 3, 100, 7), 3 * attention_cost(2, 1, 100, 7));
}

#[test]
fn homomorphism_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in TaskKind::ALL {
        let task = build(kind).unwrap();
        let a = &task.automaton;
        for i in 0..1000 {
            let x = sample(&task, 1 + i % 17, &mut rng, 0.5).unwrap().tokens;
            let y = sample(&task, 1 + i % 23, &mut rng, 0.5).unwrap().tokens;
            let joined: Vec<usize> = x.iter().chain(&y).copied().collect();
            let composed = a.transition_matrix(&x).unwrap().then(&a.transition_matrix(&y).unwrap()).unwrap();
            assert_eq!(composed, a.transition_matrix(&joined).unwrap(), "{}", task.name());
        }
    }
}

fn small_config(task: &str, chunk: usize, thickness: usize) -> ModelConfig {
    let mut c = ModelConfig::for_task(&make_task(task).unwrap());
    c.chunk_size = chunk;
    c.thickness = thickness;
    c.d_model = 16;
    c.n_heads = 2;
    c.d_ffn = 32;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn padding_is_neutral(
        bits in prop::collection::vec(0usize..2, 1..40),
        chunk in 2usize..5,
        thickness in 1usize..4,
        seed in 0u64..1000,
    ) {
        let config = small_config("parity", chunk, thickness);
        let model = Model::<f64>::new(config.clone(), seed).unwrap();
        let reference = model.logits(&bits).unwrap();
        // Any filler in the padded slots leaves the readout untouched.
        for filler in 0..config.vocab_size {
            let mut c = config.clone();
            c.pad_token = filler;
            let other = Model::from_params(c, model.params().clone()).unwrap();
            let got = other.logits(&bits).unwrap();
            prop_assert!(reference.iter().zip(&got).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        let (padded, readout) = pad_input(&bits, chunk, config.pad_token).unwrap();
        prop_assert_eq!(padded.len() % chunk, 0);
        prop_assert_eq!(readout, bits.len() - 1);
        prop_assert_eq!(adaptive_depth(padded.len(), chunk), adaptive_depth(bits.len(), chunk));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(
        seed in 0u64..1000,
        thickness in 1usize..4,
        probe in prop::collection::vec(0usize..3, 1..30),
    ) {
        let config = small_config("cycle_navigation", 2, thickness);
        let model = Model::<f32>::new(config, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let meta = CheckpointMeta { task: "cycle_navigation".into(), seed, step: 0 };
        save_checkpoint(&model, &meta, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        prop_assert_eq!(&loaded.meta, &meta);
        for (a, b) in model.params().iter().zip(loaded.model.params().iter()) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert!(a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let before = model.logits(&probe).unwrap();
        let after = loaded.model.logits(&probe).unwrap();
        prop_assert!(before.iter().zip(&after).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn shared_parameters_do_not_depend_on_length(len in 1usize..600, thickness in 1usize..4) {
        let config = small_config("parity", 2, thickness);
        let model = Model::<f32>::new(config, 0).unwrap();
        let (d, f, h, v) = (16, 32, 2, model.config().vocab_size);
        let per_sublayer = 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + h * 2 + 2 * d + (d * f + f) + (f * d + d);
        prop_assert_eq!(model.params().num_elements(), v * d + thickness * per_sublayer + 2 * d + d * v);
        let tokens = vec![1; len];
        prop_assert!(model.logits(&tokens).is_ok());
    }
}
