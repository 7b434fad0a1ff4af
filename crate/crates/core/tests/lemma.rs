use regulargpt::automata::{build, compose, cycle_shift, sample, TaskKind, TransitionMatrix};
use regulargpt::lemma::{
    build_w1, build_w2, compose_via_mlp, print_weights, verify_lemma, BinaryMatrix, LemmaNetwork, VerifyMode,
};

const W1_N2: &str = include_str!("fixtures/w1_n2.txt");
const W2_N2: &str = include_str!("fixtures/w2_n2.txt");
const PRINT_N2: &str = include_str!("fixtures/lemma_print_n2.txt");

#[test]
fn weights_match_fixtures() {
    assert_eq!(format!("{}\n", build_w1(2)), W1_N2);
    assert_eq!(format!("{}\n", build_w2(2)), W2_N2);
    assert_eq!(print_weights(2).unwrap(), PRINT_N2);
}

#[test]
fn weight_sums() {
    for n in 1..=5 {
        let w1 = build_w1(n);
        assert_eq!((w1.rows(), w1.cols()), (2 * n * n, n * n * n));
        assert!(w1.column_sums().iter().all(|&s| s == 2));
        let w2 = build_w2(n);
        assert_eq!((w2.rows(), w2.cols()), (n * n * n, n * n));
        assert!(w2.column_sums().iter().all(|&s| s == n as i64));
        assert!(w2.row_sums().iter().all(|&s| s == 1));
    }
    assert_eq!(build_w1(1).to_string(), "[[1]\n [1]]");
    assert_eq!(build_w2(1).to_string(), "[[1]]");
}

/// Matrix product written independently of the library.
fn naive_product(a: &[Vec<u8>], b: &[Vec<u8>]) -> Vec<i64> {
    let n = a.len();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push((0..n).map(|k| i64::from(a[i][k] * b[k][j])).sum());
        }
    }
    out
}

#[test]
fn exhaustive_n2_against_naive_product() {
    let net = LemmaNetwork::new(2).unwrap();
    for abits in 0u32..16 {
        for bbits in 0u32..16 {
            let rows = |bits: u32| -> Vec<Vec<u8>> {
                (0..2).map(|i| (0..2).map(|j| ((bits >> (i * 2 + j)) & 1) as u8).collect()).collect()
            };
            let (ra, rb) = (rows(abits), rows(bbits));
            let a = BinaryMatrix::from_rows(&ra).unwrap();
            let b = BinaryMatrix::from_rows(&rb).unwrap();
            assert_eq!(net.multiply(&a, &b).unwrap(), naive_product(&ra, &rb));
        }
    }
}

#[test]
fn verify_modes() {
    let r = verify_lemma(2, VerifyMode::Exhaustive).unwrap();
    assert_eq!(r.to_string(), "pass 256/256");
    let r = verify_lemma(3, VerifyMode::Exhaustive).unwrap();
    assert_eq!(r.to_string(), "pass 262144/262144");
    let r = verify_lemma(
        8,
        VerifyMode::Random {
            trials: 10_000,
            seed: 0,
        },
    )
    .unwrap();
    assert_eq!(r.to_string(), "pass 10000/10000");
    assert!(verify_lemma(4, VerifyMode::Exhaustive).is_err());
}

#[test]
fn identity_product() {
    for n in 1..=4 {
        let i = BinaryMatrix::identity(n);
        assert_eq!(LemmaNetwork::new(n).unwrap().multiply(&i, &i).unwrap(), i.flat());
    }
}

#[test]
fn network_composes_transitions() {
    let swap = TransitionMatrix::from_map(vec![1, 0]).unwrap();
    assert_eq!(compose_via_mlp(&swap, &swap).unwrap(), TransitionMatrix::identity(2));

    for a in 0..5 {
        for b in 0..5 {
            let (m1, m2) = (cycle_shift(a), cycle_shift(b));
            assert_eq!(compose_via_mlp(&m1, &m2).unwrap(), compose(&m1, &m2).unwrap());
        }
    }

    let tomita = build(TaskKind::Tomita(4)).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
    for _ in 0..200 {
        let x = sample(&tomita, 6, &mut rng, 0.5).unwrap().tokens;
        let y = sample(&tomita, 9, &mut rng, 0.5).unwrap().tokens;
        let m1 = tomita.automaton.transition_matrix(&x).unwrap();
        let m2 = tomita.automaton.transition_matrix(&y).unwrap();
        assert_eq!(compose_via_mlp(&m1, &m2).unwrap(), compose(&m1, &m2).unwrap());
    }
}
