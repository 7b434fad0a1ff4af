//! Task registry. Every task is an explicit semiautomaton with an initial
//! state and a total answer map, so the oracle is exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::semiautomaton::Semiautomaton;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TaskKind {
    Parity,
    EvenPairs,
    ModularArithmetic,
    CycleNavigation,
    /// Balanced parentheses with nesting depth at most `n`.
    Dyck(usize),
    /// Tomita grammars 3 through 6.
    Tomita(u8),
}

impl TaskKind {
    pub const ALL: [TaskKind; 12] = [
        TaskKind::Parity,
        TaskKind::EvenPairs,
        TaskKind::ModularArithmetic,
        TaskKind::CycleNavigation,
        TaskKind::Dyck(2),
        TaskKind::Dyck(3),
        TaskKind::Dyck(4),
        TaskKind::Dyck(12),
        TaskKind::Tomita(3),
        TaskKind::Tomita(4),
        TaskKind::Tomita(5),
        TaskKind::Tomita(6),
    ];
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Parity => write!(f, "parity"),
            TaskKind::EvenPairs => write!(f, "even_pairs"),
            TaskKind::ModularArithmetic => write!(f, "modular_arithmetic"),
            TaskKind::CycleNavigation => write!(f, "cycle_navigation"),
            TaskKind::Dyck(n) => write!(f, "d{n}"),
            TaskKind::Tomita(n) => write!(f, "tomita{n}"),
        }
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let kind = match norm.as_str() {
            "parity" | "parity_check" => TaskKind::Parity,
            "even_pairs" => TaskKind::EvenPairs,
            "modular_arithmetic" | "mod_arith" => TaskKind::ModularArithmetic,
            "cycle_navigation" | "cycle_nav" => TaskKind::CycleNavigation,
            _ => {
                if let Some(n) = norm.strip_prefix("tomita").map(|r| r.trim_start_matches('_')) {
                    match n.parse::<u8>() {
                        Ok(n @ 3..=6) => TaskKind::Tomita(n),
                        _ => return Err(Error::UnknownTask(s.to_string())),
                    }
                } else if let Some(n) = norm.strip_prefix("d").map(|r| r.trim_start_matches('_')) {
                    match n.parse::<usize>() {
                        Ok(n) if n >= 1 => TaskKind::Dyck(n),
                        _ => return Err(Error::UnknownTask(s.to_string())),
                    }
                } else {
                    return Err(Error::UnknownTask(s.to_string()));
                }
            }
        };
        Ok(kind)
    }
}

impl From<TaskKind> for String {
    fn from(k: TaskKind) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for TaskKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// How `sample` draws strings for a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    /// i.i.d. bits with `P(1) = p1`.
    Bernoulli,
    /// Every position uniform over the alphabet.
    Uniform,
    /// Alternating digit/operator strings of odd length.
    Expression,
    /// Answer class uniform among those reachable at the requested length,
    /// then a uniformly random string of that class.
    ClassBalanced,
}

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub automaton: Semiautomaton,
    pub initial_state: usize,
    /// Answer index for every state.
    pub answer_map: Vec<usize>,
    pub answer_symbols: Vec<String>,
    pub sampler: Sampler,
}

pub const ACCEPT_REJECT: [&str; 2] = ["accept", "reject"];

impl TaskSpec {
    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    pub fn num_symbols(&self) -> usize {
        self.automaton.alphabet().len()
    }

    pub fn num_answers(&self) -> usize {
        self.answer_symbols.len()
    }

    /// Task symbols, then answer symbols, then the pad symbol.
    pub fn vocab_size(&self) -> usize {
        self.num_symbols() + self.num_answers() + 1
    }

    pub fn answer_token(&self, answer: usize) -> usize {
        self.num_symbols() + answer
    }

    pub fn pad_token(&self) -> usize {
        self.num_symbols() + self.num_answers()
    }

    /// Inverse of `answer_token`; `None` for non-answer vocabulary entries.
    pub fn answer_of_token(&self, token: usize) -> Option<usize> {
        token
            .checked_sub(self.num_symbols())
            .filter(|&a| a < self.num_answers())
    }

    pub fn vocabulary(&self) -> Vec<String> {
        let mut v: Vec<String> = self.automaton.alphabet().to_vec();
        v.extend(self.answer_symbols.iter().map(|a| format!("<{a}>")));
        v.push("<pad>".to_string());
        v
    }

    pub fn encode(&self, symbols: &[&str]) -> Result<Vec<usize>> {
        symbols.iter().map(|s| self.automaton.symbol_index(s)).collect()
    }

    /// Splits a string into symbols: whitespace-separated when it contains
    /// whitespace, otherwise one character per symbol.
    pub fn encode_str(&self, text: &str) -> Result<Vec<usize>> {
        if text.chars().any(char::is_whitespace) {
            text.split_whitespace().map(|s| self.automaton.symbol_index(s)).collect()
        } else {
            text.chars()
                .map(|c| self.automaton.symbol_index(&normalize_char(c)))
                .collect()
        }
    }

    pub fn decode(&self, tokens: &[usize]) -> Vec<&str> {
        tokens
            .iter()
            .map(|&t| self.automaton.alphabet().get(t).map_or("?", String::as_str))
            .collect()
    }

    /// Answer index of `tokens`: the answer map applied to the state reached
    /// from the initial state.
    pub fn oracle(&self, tokens: &[usize]) -> Result<usize> {
        let q = self.automaton.apply(self.initial_state, tokens)?;
        Ok(self.answer_map[q])
    }

    pub fn oracle_symbol(&self, tokens: &[usize]) -> Result<&str> {
        Ok(&self.answer_symbols[self.oracle(tokens)?])
    }
}

fn normalize_char(c: char) -> String {
    match c {
        '·' | '×' => "*".to_string(),
        '−' => "-".to_string(),
        c => c.to_string(),
    }
}

/// Builds a task by registry name.
pub fn make_task(name: &str) -> Result<TaskSpec> {
    build(name.parse()?)
}

pub fn build(kind: TaskKind) -> Result<TaskSpec> {
    let accept_reject = || ACCEPT_REJECT.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let spec = match kind {
        TaskKind::Parity => TaskSpec {
            kind,
            automaton: Semiautomaton::from_fn("parity", 2, &["0", "1"], |q, s| q ^ s)?,
            initial_state: 0,
            answer_map: vec![0, 1],
            answer_symbols: vec!["even".into(), "odd".into()],
            sampler: Sampler::Bernoulli,
        },
        TaskKind::EvenPairs => {
            // 0 = start; 1 + 2*first + current otherwise.
            let automaton = Semiautomaton::from_fn("even_pairs", 5, &["a", "b"], |q, s| {
                let first = if q == 0 { s } else { (q - 1) / 2 };
                1 + 2 * first + s
            })?;
            let answer_map = (0..5)
                .map(|q| if q == 0 || (q - 1) / 2 == (q - 1) % 2 { 0 } else { 1 })
                .collect();
            TaskSpec {
                kind,
                automaton,
                initial_state: 0,
                answer_map,
                answer_symbols: accept_reject(),
                sampler: Sampler::Uniform,
            }
        }
        TaskKind::ModularArithmetic => modular_arithmetic()?,
        TaskKind::CycleNavigation => TaskSpec {
            kind,
            automaton: Semiautomaton::from_fn("cycle_navigation", 5, &["STAY", "+1", "-1"], |q, s| match s {
                0 => q,
                1 => (q + 1) % 5,
                _ => (q + 4) % 5,
            })?,
            initial_state: 0,
            answer_map: (0..5).collect(),
            answer_symbols: (0..5).map(|i| i.to_string()).collect(),
            sampler: Sampler::Uniform,
        },
        TaskKind::Dyck(n) => {
            if n == 0 {
                return Err(Error::config("task", "D_n needs n >= 1"));
            }
            let sink = n + 1;
            let automaton = Semiautomaton::from_fn(kind.to_string(), n + 2, &["(", ")"], |q, s| {
                if q == sink {
                    sink
                } else if s == 0 {
                    if q == n {
                        sink
                    } else {
                        q + 1
                    }
                } else if q == 0 {
                    sink
                } else {
                    q - 1
                }
            })?;
            TaskSpec {
                kind,
                automaton,
                initial_state: 0,
                answer_map: (0..n + 2).map(|q| usize::from(q != 0)).collect(),
                answer_symbols: accept_reject(),
                sampler: Sampler::ClassBalanced,
            }
        }
        TaskKind::Tomita(n) => tomita(n)?,
    };
    Ok(spec)
}

fn tomita(n: u8) -> Result<TaskSpec> {
    let kind = TaskKind::Tomita(n);
    let name = kind.to_string();
    let accept_reject = ACCEPT_REJECT.iter().map(|s| s.to_string()).collect();
    let (automaton, answer_map) = match n {
        3 => {
            // 0 neutral, 1 odd run of 1s, 2 even run of 1s, 3 odd run of 0s
            // after an odd 1-run, 4 even (non-empty) run of 0s after an odd
            // 1-run, 5 dead.
            let table = [[0, 1], [3, 2], [0, 1], [4, 1], [3, 5], [5, 5]];
            let a = Semiautomaton::from_fn(name, 6, &["0", "1"], |q, s| table[q][s])?;
            (a, vec![0, 0, 0, 0, 1, 1])
        }
        4 => {
            // Trailing zeros 0..=2, then dead.
            let a = Semiautomaton::from_fn(name, 4, &["0", "1"], |q, s| match (q, s) {
                (3, _) => 3,
                (q, 0) => q + 1,
                _ => 0,
            })?;
            (a, vec![0, 0, 0, 1])
        }
        5 => {
            // Bit 0: parity of #0, bit 1: parity of #1.
            let a = Semiautomaton::from_fn(name, 4, &["0", "1"], |q, s| q ^ (1 << s))?;
            (a, vec![0, 1, 1, 1])
        }
        6 => {
            // (#0 - #1) mod 3.
            let a = Semiautomaton::from_fn(name, 3, &["0", "1"], |q, s| if s == 0 { (q + 1) % 3 } else { (q + 2) % 3 })?;
            (a, vec![0, 1, 1])
        }
        _ => return Err(Error::UnknownTask(format!("tomita{n}"))),
    };
    Ok(TaskSpec {
        kind,
        automaton,
        initial_state: 0,
        answer_map,
        answer_symbols: accept_reject,
        sampler: Sampler::ClassBalanced,
    })
}

pub(crate) const MOD: usize = 5;
const OPS: [&str; 3] = ["+", "-", "*"];

/// Left-to-right evaluation mod 5 over alternating digit/operator strings.
/// States: `acc` (0..5) after a digit; `5 + 3*acc + op` while an operator is
/// pending; `20` for malformed input. The initial state is "0 +" pending,
/// so the first digit loads the accumulator.
fn modular_arithmetic() -> Result<TaskSpec> {
    let ready = MOD;
    let sink = MOD + MOD * OPS.len();
    let mut alphabet: Vec<String> = (0..MOD).map(|d| d.to_string()).collect();
    alphabet.extend(OPS.iter().map(|s| s.to_string()));
    let symbols: Vec<&str> = alphabet.iter().map(String::as_str).collect();
    let automaton = Semiautomaton::from_fn("modular_arithmetic", sink + 1, &symbols, |q, s| {
        let is_digit = s < MOD;
        if q == sink {
            sink
        } else if q < ready {
            if is_digit {
                sink
            } else {
                ready + OPS.len() * q + (s - MOD)
            }
        } else if is_digit {
            let acc = (q - ready) / OPS.len();
            let op = (q - ready) % OPS.len();
            match op {
                0 => (acc + s) % MOD,
                1 => (acc + MOD - s) % MOD,
                _ => (acc * s) % MOD,
            }
        } else {
            sink
        }
    })?;
    let answer_map = (0..=sink)
        .map(|q| {
            if q < ready {
                q
            } else if q < sink {
                (q - ready) / OPS.len()
            } else {
                0
            }
        })
        .collect();
    Ok(TaskSpec {
        kind: TaskKind::ModularArithmetic,
        automaton,
        initial_state: ready,
        answer_map,
        answer_symbols: (0..MOD).map(|d| d.to_string()).collect(),
        sampler: Sampler::Expression,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answer(task: &str, text: &str) -> String {
        let t = make_task(task).unwrap();
        let tokens = t.encode_str(text).unwrap();
        t.oracle_symbol(&tokens).unwrap().to_string()
    }

    #[test]
    fn names_roundtrip() {
        for k in TaskKind::ALL {
            assert_eq!(k.to_string().parse::<TaskKind>().unwrap(), k);
        }
        assert!("tomita7".parse::<TaskKind>().is_err());
        assert!("bogus".parse::<TaskKind>().is_err());
        assert!("d0".parse::<TaskKind>().is_err());
    }

    #[test]
    fn parity_oracle() {
        assert_eq!(answer("parity", "1101"), "odd");
        assert_eq!(answer("parity", "11"), "even");
    }

    #[test]
    fn tomita_examples() {
        assert_eq!(answer("tomita4", "110011"), "accept");
        assert_eq!(answer("tomita4", "0001"), "reject");
        assert_eq!(answer("tomita5", "0101"), "accept");
        assert_eq!(answer("tomita5", "011"), "reject");
        assert_eq!(answer("tomita6", "0101"), "accept");
        assert_eq!(answer("tomita6", "001"), "reject");
        assert_eq!(answer("tomita3", "100"), "reject");
        assert_eq!(answer("tomita3", "1001"), "reject");
        assert_eq!(answer("tomita3", "1000"), "accept");
        assert_eq!(answer("tomita3", "11001"), "accept");
    }

    #[test]
    fn dyck_examples() {
        assert_eq!(answer("d2", "(())"), "accept");
        assert_eq!(answer("d2", "((()))"), "reject");
        assert_eq!(answer("d2", "())("), "reject");
        assert_eq!(answer("d2", "(()"), "reject");
    }

    #[test]
    fn modular_arithmetic_example() {
        assert_eq!(answer("modular_arithmetic", "2*3+4"), "0");
        assert_eq!(answer("modular_arithmetic", "2·3+4"), "0");
        assert_eq!(answer("modular_arithmetic", "1-3"), "3");
    }

    #[test]
    fn even_pairs_examples() {
        assert_eq!(answer("even_pairs", "ab"), "reject");
        assert_eq!(answer("even_pairs", "aba"), "accept");
        assert_eq!(answer("even_pairs", "b"), "accept");
    }

    #[test]
    fn vocabulary_layout() {
        let t = make_task("parity").unwrap();
        assert_eq!(t.vocab_size(), 5);
        assert_eq!(t.answer_token(1), 3);
        assert_eq!(t.pad_token(), 4);
        assert_eq!(t.answer_of_token(3), Some(1));
        assert_eq!(t.answer_of_token(4), None);
    }
}
