//! A two-layer ReLU network that multiplies binary matrices exactly:
//! `ReLU([Flat(A), Flat(B)] W1 - 1) W2 = Flat(AB)` for `A, B ∈ {0,1}^{n×n}`.
//!
//! Hidden neuron `(i, j, k)` reads `A[i][k]` and `B[k][j]`, so after the
//! `-1` bias and ReLU it holds their product; `W2` sums over `k`.
//! All arithmetic is in integers.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::automata::TransitionMatrix;
use crate::error::{Error, Result};

/// Dense integer matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column_sums(&self) -> Vec<i64> {
        (0..self.cols).map(|c| (0..self.rows).map(|r| self.get(r, c)).sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<i64> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, x: &[i64]) -> Result<Vec<i64>> {
        if x.len() != self.rows {
            return Err(Error::shape("vec_mul", &[x.len()], &[self.rows, self.cols]));
        }
        let mut out = vec![0; self.cols];
        for (r, &xv) in x.iter().enumerate() {
            if xv != 0 {
                for (o, &w) in out.iter_mut().zip(self.row(r)) {
                    *o += xv * w;
                }
            }
        }
        Ok(out)
    }
}

/// numpy's layout: `[[a b]` then ` [c d]]`.
impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.data.iter().map(|v| v.to_string().len()).max().unwrap_or(1);
        for r in 0..self.rows {
            f.write_str(if r == 0 { "[[" } else { " [" })?;
            for (c, v) in self.row(r).iter().enumerate() {
                if c > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{v:>width$}")?;
            }
            f.write_str(if r + 1 == self.rows { "]]" } else { "]\n" })?;
        }
        Ok(())
    }
}

/// Square matrix with entries in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMatrix {
    n: usize,
    entries: Vec<u8>,
}

impl BinaryMatrix {
    pub fn new(n: usize, entries: Vec<u8>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::shape("BinaryMatrix", &[n, n], &[entries.len()]));
        }
        if let Some(&bad) = entries.iter().find(|&&e| e > 1) {
            return Err(Error::invalid("BinaryMatrix", format!("entry {bad} is not binary")));
        }
        Ok(BinaryMatrix { n, entries })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("BinaryMatrix", "rows must form a square"));
        }
        Self::new(n, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        BinaryMatrix { n, entries }
    }

    /// Bits of `bits` in row-major order, least significant first.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        let entries = (0..n * n).map(|i| ((bits >> i) & 1) as u8).collect();
        BinaryMatrix { n, entries }
    }

    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let entries = (0..n * n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        BinaryMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.n + j]
    }

    /// `Flat(X)[i·n + j] = X[i][j]`.
    pub fn flat(&self) -> Vec<i64> {
        self.entries.iter().map(|&e| i64::from(e)).collect()
    }

    /// Direct integer product (entries may exceed 1).
    pub fn product(&self, other: &BinaryMatrix) -> Result<Vec<i64>> {
        if self.n != other.n {
            return Err(Error::shape("product", &[self.n, self.n], &[other.n, other.n]));
        }
        let n = self.n;
        let mut out = vec![0; n * n];
        for i in 0..n {
            for k in 0..n {
                if self.get(i, k) == 1 {
                    for j in 0..n {
                        out[i * n + j] += i64::from(other.get(k, j));
                    }
                }
            }
        }
        Ok(out)
    }
}

impl From<&TransitionMatrix> for BinaryMatrix {
    fn from(m: &TransitionMatrix) -> Self {
        BinaryMatrix {
            n: m.n(),
            entries: m.flat(),
        }
    }
}

/// `W1 ∈ {0,1}^{2n² × n³}`. With 1-based indices, entry
/// `(z, (i-1)n² + (j-1)n + k)` is 1 iff `z = (i-1)n + k` (reads `A[i][k]`)
/// or `z = (n + k - 1)n + j` (reads `B[k][j]`).
pub fn build_w1(n: usize) -> IntMatrix {
    let n2 = n * n;
    let mut w = IntMatrix::zeros(2 * n2, n2 * n);
    for i in 1..=n {
        for j in 1..=n {
            for k in 1..=n {
                let col = (i - 1) * n2 + (j - 1) * n + k;
                w.set((i - 1) * n + k - 1, col - 1, 1);
                w.set((n + k - 1) * n + j - 1, col - 1, 1);
            }
        }
    }
    w
}

/// `W2 = I_{n²} ⊗ 1_n`, shape `n³ × n²`.
pub fn build_w2(n: usize) -> IntMatrix {
    let n2 = n * n;
    let mut w = IntMatrix::zeros(n2 * n, n2);
    for r in 0..n2 * n {
        w.set(r, r / n, 1);
    }
    w
}

/// The lemma network for one `n`.
#[derive(Debug, Clone)]
pub struct LemmaNetwork {
    n: usize,
    w1: IntMatrix,
    w2: IntMatrix,
}

impl LemmaNetwork {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("LemmaNetwork", "n must be at least 1"));
        }
        Ok(LemmaNetwork {
            n,
            w1: build_w1(n),
            w2: build_w2(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w1(&self) -> &IntMatrix {
        &self.w1
    }

    pub fn w2(&self) -> &IntMatrix {
        &self.w2
    }

    /// `x W1 - 1`; neuron `i·n² + j·n + k` equals `A[i][k] + B[k][j] - 1`.
    pub fn pre_activation(&self, x: &[i64]) -> Result<Vec<i64>> {
        Ok(self.w1.vec_mul(x)?.into_iter().map(|v| v - 1).collect())
    }

    pub fn hidden(&self, x: &[i64]) -> Result<Vec<i64>> {
        Ok(self.pre_activation(x)?.into_iter().map(|v| v.max(0)).collect())
    }

    /// `ReLU(x W1 - 1) W2` for `x = [Flat(A), Flat(B)]`. Rejects any
    /// non-binary input.
    pub fn forward(&self, x: &[i64]) -> Result<Vec<i64>> {
        if x.len() != 2 * self.n * self.n {
            return Err(Error::shape("mlp_binary_matmul", &[2 * self.n * self.n], &[x.len()]));
        }
        if let Some(&bad) = x.iter().find(|&&v| v != 0 && v != 1) {
            return Err(Error::invalid("mlp_binary_matmul", format!("input {bad} is not binary")));
        }
        self.w2.vec_mul(&self.hidden(x)?)
    }

    pub fn multiply(&self, a: &BinaryMatrix, b: &BinaryMatrix) -> Result<Vec<i64>> {
        if a.n() != self.n || b.n() != self.n {
            return Err(Error::shape("mlp_binary_matmul", &[self.n, self.n], &[a.n(), b.n()]));
        }
        let mut x = a.flat();
        x.extend(b.flat());
        self.forward(&x)
    }
}

/// `Flat(AB)` through the lemma network.
pub fn mlp_binary_matmul(a: &BinaryMatrix, b: &BinaryMatrix) -> Result<Vec<i64>> {
    if a.n() != b.n() {
        return Err(Error::shape("mlp_binary_matmul", &[a.n(), a.n()], &[b.n(), b.n()]));
    }
    LemmaNetwork::new(a.n())?.multiply(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    /// Every pair; only allowed for `n <= 3`.
    Exhaustive,
    Random { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaReport {
    pub n: usize,
    pub checked: usize,
    pub passed: usize,
    pub counterexample: Option<(BinaryMatrix, BinaryMatrix)>,
}

impl LemmaReport {
    pub fn ok(&self) -> bool {
        self.counterexample.is_none() && self.passed == self.checked
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.ok() { "pass" } else { "fail" };
        write!(f, "{verdict} {}/{}", self.passed, self.checked)
    }
}

/// Largest `n` for which exhaustive verification is allowed without an
/// explicit override (`2^{2n²}` pairs).
pub const MAX_EXHAUSTIVE_N: usize = 3;

/// Compares the network against the direct product, stopping at the first
/// counterexample.
pub fn verify_lemma(n: usize, mode: VerifyMode) -> Result<LemmaReport> {
    verify(n, mode, true)
}

/// `verify_lemma` without the exhaustive size limit.
pub fn verify_lemma_unbounded(n: usize, mode: VerifyMode) -> Result<LemmaReport> {
    if matches!(mode, VerifyMode::Exhaustive) && 2 * n * n >= 64 {
        return Err(Error::invalid("verify_lemma", format!("2^{} pairs do not fit a counter", 2 * n * n)));
    }
    verify(n, mode, false)
}

fn verify(n: usize, mode: VerifyMode, limit: bool) -> Result<LemmaReport> {
    let net = LemmaNetwork::new(n)?;
    let mut report = LemmaReport {
        n,
        checked: 0,
        passed: 0,
        counterexample: None,
    };
    let check = |a: BinaryMatrix, b: BinaryMatrix, report: &mut LemmaReport| -> Result<bool> {
        report.checked += 1;
        if net.multiply(&a, &b)? == a.product(&b)? {
            report.passed += 1;
            Ok(true)
        } else {
            report.counterexample = Some((a, b));
            Ok(false)
        }
    };
    match mode {
        VerifyMode::Exhaustive => {
            if limit && n > MAX_EXHAUSTIVE_N {
                return Err(Error::invalid(
                    "verify_lemma",
                    format!("exhaustive check needs 2^{} pairs at n = {n}", 2 * n * n),
                ));
            }
            let count = 1u64 << (n * n);
            'outer: for abits in 0..count {
                for bbits in 0..count {
                    if !check(BinaryMatrix::from_bits(n, abits), BinaryMatrix::from_bits(n, bbits), &mut report)? {
                        break 'outer;
                    }
                }
            }
        }
        VerifyMode::Random { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..trials {
                let a = BinaryMatrix::random(n, &mut rng);
                let b = BinaryMatrix::random(n, &mut rng);
                if !check(a, b, &mut report)? {
                    break;
                }
            }
        }
    }
    Ok(report)
}

/// Composition of two transition matrices (first `m1`, then `m2`) computed
/// by the lemma network.
pub fn compose_via_mlp(m1: &TransitionMatrix, m2: &TransitionMatrix) -> Result<TransitionMatrix> {
    if m1.n() != m2.n() {
        return Err(Error::shape("compose_via_mlp", &[m1.n(), m1.n()], &[m2.n(), m2.n()]));
    }
    let n = m1.n();
    let flat = mlp_binary_matmul(&BinaryMatrix::from(m1), &BinaryMatrix::from(m2))?;
    let rows: Vec<Vec<u8>> = flat
        .chunks(n)
        .map(|r| r.iter().map(|&v| u8::try_from(v).unwrap_or(u8::MAX)).collect())
        .collect();
    TransitionMatrix::from_dense(&rows)
}

/// `W1(n)` and `W2(n)` in numpy's print layout, separated by a blank line.
pub fn print_weights(n: usize) -> Result<String> {
    let net = LemmaNetwork::new(n)?;
    Ok(format!("{}\n\n{}\n", net.w1(), net.w2()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let a = BinaryMatrix::from_rows(&[vec![1, 0], vec![1, 0]]).unwrap();
        let b = BinaryMatrix::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap();
        let net = LemmaNetwork::new(2).unwrap();
        let mut x = a.flat();
        x.extend(b.flat());
        assert_eq!(x, vec![1, 0, 1, 0, 0, 1, 1, 0]);
        assert_eq!(net.w1().vec_mul(&x).unwrap(), vec![1, 1, 2, 0, 1, 1, 2, 0]);
        assert_eq!(net.hidden(&x).unwrap(), vec![0, 0, 1, 0, 0, 0, 1, 0]);
        assert_eq!(net.forward(&x).unwrap(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn small_cases() {
        let w1 = build_w1(1);
        assert_eq!((w1.rows(), w1.cols(), w1.get(0, 0), w1.get(1, 0)), (2, 1, 1, 1));
        let w2 = build_w2(1);
        assert_eq!((w2.rows(), w2.cols(), w2.get(0, 0)), (1, 1, 1));
        assert_eq!(verify_lemma(2, VerifyMode::Exhaustive).unwrap().to_string(), "pass 256/256");
        assert!(verify_lemma(4, VerifyMode::Exhaustive).is_err());
    }

    #[test]
    fn non_binary_rejected() {
        let net = LemmaNetwork::new(2).unwrap();
        assert!(net.forward(&[2, 0, 0, 0, 0, 0, 0, 0]).is_err());
        assert!(BinaryMatrix::new(2, vec![0, 1, 2, 0]).is_err());
    }
}
