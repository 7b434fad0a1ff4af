use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// `(Q, Σ, δ)`: a transition table without initial or accepting states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Semiautomaton {
    name: String,
    num_states: usize,
    alphabet: Vec<String>,
    /// Row-major `num_states × alphabet.len()`.
    delta: Vec<usize>,
}

impl Semiautomaton {
    pub fn new(name: impl Into<String>, num_states: usize, alphabet: Vec<String>, delta: Vec<usize>) -> Result<Self> {
        let name = name.into();
        if num_states == 0 {
            return Err(Error::invalid("semiautomaton", "needs at least one state"));
        }
        if alphabet.is_empty() {
            return Err(Error::invalid("semiautomaton", "needs a non-empty alphabet"));
        }
        let unique: BTreeSet<&String> = alphabet.iter().collect();
        if unique.len() != alphabet.len() {
            return Err(Error::invalid("semiautomaton", "alphabet symbols must be unique"));
        }
        if delta.len() != num_states * alphabet.len() {
            return Err(Error::shape("semiautomaton", &[num_states, alphabet.len()], &[delta.len()]));
        }
        if let Some(&bad) = delta.iter().find(|&&q| q >= num_states) {
            return Err(Error::invalid("semiautomaton", format!("transition to unknown state {bad}")));
        }
        Ok(Semiautomaton {
            name,
            num_states,
            alphabet,
            delta,
        })
    }

    /// Builds the table by evaluating `f(state, symbol)` everywhere.
    pub fn from_fn(
        name: impl Into<String>,
        num_states: usize,
        alphabet: &[&str],
        f: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        let delta = (0..num_states)
            .flat_map(|q| (0..alphabet.len()).map(move |s| (q, s)))
            .map(|(q, s)| f(q, s))
            .collect();
        Self::new(name, num_states, alphabet.iter().map(|s| s.to_string()).collect(), delta)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn symbol_index(&self, symbol: &str) -> Result<usize> {
        self.alphabet
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| self.unknown(symbol))
    }

    fn unknown(&self, symbol: impl fmt::Display) -> Error {
        Error::UnknownSymbol {
            task: self.name.clone(),
            symbol: symbol.to_string(),
        }
    }

    fn check(&self, q: usize, symbol: usize) -> Result<()> {
        if q >= self.num_states {
            return Err(Error::invalid("semiautomaton", format!("unknown state {q}")));
        }
        if symbol >= self.alphabet.len() {
            return Err(self.unknown(format!("#{symbol}")));
        }
        Ok(())
    }

    /// `δ(q, σ)` without validation; callers guarantee indices are in range.
    pub(crate) fn step_unchecked(&self, q: usize, symbol: usize) -> usize {
        self.delta[q * self.alphabet.len() + symbol]
    }

    pub fn step(&self, q: usize, symbol: usize) -> Result<usize> {
        self.check(q, symbol)?;
        Ok(self.step_unchecked(q, symbol))
    }

    /// State reached from `q` after reading `tokens` left to right.
    pub fn apply(&self, q: usize, tokens: &[usize]) -> Result<usize> {
        let mut state = q;
        if q >= self.num_states {
            return Err(Error::invalid("semiautomaton", format!("unknown state {q}")));
        }
        for &t in tokens {
            state = self.step(state, t)?;
        }
        Ok(state)
    }

    /// Transition matrix of `tokens`: row `q` is the one-hot of
    /// `apply(q, tokens)`. The empty sequence gives the identity.
    pub fn transition_matrix(&self, tokens: &[usize]) -> Result<TransitionMatrix> {
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.alphabet.len()) {
            return Err(self.unknown(format!("#{bad}")));
        }
        let map = (0..self.num_states)
            .map(|q| tokens.iter().fold(q, |s, &t| self.step_unchecked(s, t)))
            .collect();
        Ok(TransitionMatrix { map })
    }

    /// Every distinct transition matrix realized by some string, including
    /// the identity for the empty string.
    pub fn transition_monoid(&self) -> Vec<TransitionMatrix> {
        let mut seen = BTreeSet::new();
        let id = TransitionMatrix::identity(self.num_states);
        seen.insert(id.map.clone());
        let mut queue = VecDeque::from([id]);
        let generators: Vec<TransitionMatrix> = (0..self.alphabet.len())
            .map(|s| self.transition_matrix(&[s]).expect("symbol in range"))
            .collect();
        while let Some(m) = queue.pop_front() {
            for g in &generators {
                let next = m.then(g).expect("same size");
                if seen.insert(next.map.clone()) {
                    queue.push_back(next);
                }
            }
        }
        seen.into_iter().map(|map| TransitionMatrix { map }).collect()
    }
}

/// Binary `n × n` matrix with exactly one 1 per row, i.e. a function
/// `Q → Q`. Row `q` holds the one-hot of the state reached from `q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionMatrix {
    map: Vec<usize>,
}

impl TransitionMatrix {
    pub fn identity(n: usize) -> Self {
        TransitionMatrix { map: (0..n).collect() }
    }

    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if let Some(&bad) = map.iter().find(|&&q| q >= n) {
            return Err(Error::invalid("transition_matrix", format!("image {bad} outside {n} states")));
        }
        Ok(TransitionMatrix { map })
    }

    /// Validates that every row is one-hot.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut map = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::shape("transition_matrix", &[n, n], &[i, row.len()]));
            }
            let ones: Vec<usize> = row.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, _)| j).collect();
            if ones.len() != 1 || row[ones[0]] != 1 {
                return Err(Error::invalid("transition_matrix", format!("row {i} is not one-hot")));
            }
            map.push(ones[0]);
        }
        Ok(TransitionMatrix { map })
    }

    pub fn n(&self) -> usize {
        self.map.len()
    }

    pub fn image(&self, q: usize) -> usize {
        self.map[q]
    }

    pub fn as_map(&self) -> &[usize] {
        &self.map
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let n = self.n();
        self.map
            .iter()
            .map(|&j| (0..n).map(|c| u8::from(c == j)).collect())
            .collect()
    }

    /// Row-major flattening `Flat(M)_{i*n + j} = M[i][j]`.
    pub fn flat(&self) -> Vec<u8> {
        self.to_dense().concat()
    }

    /// The matrix of "apply `self` first, then `next`", equal to the matrix
    /// product `self · next`.
    pub fn then(&self, next: &TransitionMatrix) -> Result<TransitionMatrix> {
        if self.n() != next.n() {
            return Err(Error::shape("compose", &[self.n(), self.n()], &[next.n(), next.n()]));
        }
        Ok(TransitionMatrix {
            map: self.map.iter().map(|&q| next.map[q]).collect(),
        })
    }

    /// Exactly one 1 per row; always true for values of this type but kept as
    /// an explicit check for matrices reconstructed from dense form.
    pub fn is_function(&self) -> bool {
        self.to_dense().iter().all(|r| r.iter().map(|&v| v as usize).sum::<usize>() == 1)
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.to_dense().iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            write!(f, "[{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

/// `compose(M1, M2)`: `M1` applied first, then `M2`; the product `M1 · M2`.
pub fn compose(first: &TransitionMatrix, second: &TransitionMatrix) -> Result<TransitionMatrix> {
    first.then(second)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap2() -> Semiautomaton {
        Semiautomaton::from_fn("parity", 2, &["0", "1"], |q, s| q ^ s).unwrap()
    }

    #[test]
    fn validation() {
        assert!(Semiautomaton::new("x", 2, vec!["a".into()], vec![0, 2]).is_err());
        assert!(Semiautomaton::new("x", 2, vec!["a".into(), "a".into()], vec![0; 4]).is_err());
        assert!(Semiautomaton::new("x", 1, vec!["a".into()], vec![0]).is_ok());
    }

    #[test]
    fn dense_roundtrip_and_product() {
        let a = swap2();
        let m = a.transition_matrix(&[1]).unwrap();
        assert_eq!(m.to_dense(), vec![vec![0, 1], vec![1, 0]]);
        let back = TransitionMatrix::from_dense(&m.to_dense()).unwrap();
        assert_eq!(back, m);
        assert!(TransitionMatrix::from_dense(&[vec![1, 1], vec![0, 1]]).is_err());
        assert_eq!(compose(&m, &m).unwrap(), TransitionMatrix::identity(2));
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let a = TransitionMatrix::identity(2);
        let b = TransitionMatrix::identity(3);
        assert!(compose(&a, &b).is_err());
    }

    #[test]
    fn unknown_symbol_rejected() {
        let a = swap2();
        assert!(matches!(a.apply(0, &[2]), Err(Error::UnknownSymbol { .. })));
        assert!(a.symbol_index("x").is_err());
    }
}
