use rand::Rng;

use super::tasks::{Sampler, TaskSpec, MOD};
use crate::error::{Error, Result};

/// One oracle-labelled string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub tokens: Vec<usize>,
    /// Index into the task's answer symbols.
    pub answer: usize,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `tokens<TAB>answer`, tokens space-separated.
    pub fn to_line(&self, task: &TaskSpec) -> String {
        format!("{}\t{}", task.decode(&self.tokens).join(" "), task.answer_symbols[self.answer])
    }
}

/// Length actually produced for a requested length: modular arithmetic
/// rounds even lengths down to the previous odd length.
pub fn effective_length(task: &TaskSpec, len: usize) -> usize {
    match task.sampler {
        Sampler::Expression if len % 2 == 0 => len.saturating_sub(1),
        _ => len,
    }
}

/// Draws one string of (effective) length `len` and labels it with the
/// oracle. `p1` is only used by the Bernoulli sampler.
pub fn sample(task: &TaskSpec, len: usize, rng: &mut impl Rng, p1: f64) -> Result<Sample> {
    let len = effective_length(task, len);
    if len == 0 {
        return Err(Error::invalid("sample", format!("length {len} is not valid for {}", task.name())));
    }
    let sigma = task.num_symbols();
    let tokens: Vec<usize> = match task.sampler {
        Sampler::Bernoulli => {
            if !(0.0..=1.0).contains(&p1) {
                return Err(Error::config("p1", format!("{p1} is not a probability")));
            }
            (0..len).map(|_| usize::from(rng.random_bool(p1))).collect()
        }
        Sampler::Uniform => (0..len).map(|_| rng.random_range(0..sigma)).collect(),
        Sampler::Expression => (0..len)
            .map(|i| {
                if i % 2 == 0 {
                    rng.random_range(0..MOD)
                } else {
                    MOD + rng.random_range(0..sigma - MOD)
                }
            })
            .collect(),
        Sampler::ClassBalanced => class_balanced(task, len, rng)?,
    };
    let answer = task.oracle(&tokens)?;
    Ok(Sample { tokens, answer })
}

/// Picks an answer class uniformly among those reachable with exactly `len`
/// symbols, then draws a uniformly random string of that class.
fn class_balanced(task: &TaskSpec, len: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    let a = &task.automaton;
    let nq = a.num_states();
    let sigma = a.alphabet().len();

    // weights[t][q] ∝ number of strings of length len - t leading from q into
    // the target class; rescaled per step so long lengths do not overflow.
    let suffix_weights = |class: usize| -> Vec<Vec<f64>> {
        let mut w = vec![vec![0.0; nq]; len + 1];
        for q in 0..nq {
            w[len][q] = if task.answer_map[q] == class { 1.0 } else { 0.0 };
        }
        for t in (0..len).rev() {
            let (head, tail) = w.split_at_mut(t + 1);
            let next = &tail[0];
            for q in 0..nq {
                head[t][q] = (0..sigma).map(|s| next[a.step_unchecked(q, s)]).sum();
            }
            let max = head[t].iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                head[t].iter_mut().for_each(|x| *x /= max);
            }
        }
        w
    };

    let tables: Vec<Vec<Vec<f64>>> = (0..task.num_answers()).map(suffix_weights).collect();
    let reachable: Vec<usize> = (0..task.num_answers())
        .filter(|&c| tables[c][0][task.initial_state] > 0.0)
        .collect();
    if reachable.is_empty() {
        return Err(Error::invalid("sample", format!("no {} string has length {len}", task.name())));
    }
    let w = &tables[reachable[rng.random_range(0..reachable.len())]];

    let mut q = task.initial_state;
    let mut tokens = Vec::with_capacity(len);
    for t in 0..len {
        let weights: Vec<f64> = (0..sigma).map(|s| w[t + 1][a.step_unchecked(q, s)]).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = sigma - 1;
        for (s, &wt) in weights.iter().enumerate() {
            if wt > 0.0 && u < wt {
                pick = s;
                break;
            }
            u -= wt;
        }
        while weights[pick] == 0.0 {
            pick -= 1;
        }
        tokens.push(pick);
        q = a.step_unchecked(q, pick);
    }
    Ok(tokens)
}

/// Training lengths are drawn uniformly from `1..=max_len`.
pub fn training_length(rng: &mut impl Rng, max_len: usize) -> usize {
    rng.random_range(1..=max_len.max(1))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::automata::tasks::make_task;

    #[test]
    fn forced_parity() {
        let t = make_task("parity").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample(&t, 4, &mut rng, 1.0).unwrap();
        assert_eq!(s.tokens, vec![1, 1, 1, 1]);
        assert_eq!(t.answer_symbols[s.answer], "even");
    }

    #[test]
    fn modular_arithmetic_rounds_to_odd() {
        let t = make_task("modular_arithmetic").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(sample(&t, 10, &mut rng, 0.5).unwrap().len(), 9);
        assert_eq!(sample(&t, 11, &mut rng, 0.5).unwrap().len(), 11);
        assert!(sample(&t, 0, &mut rng, 0.5).is_err());
    }

    #[test]
    fn class_balanced_hits_both_classes() {
        let t = make_task("tomita4").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let answers: Vec<usize> = (0..200).map(|_| sample(&t, 100, &mut rng, 0.5).unwrap().answer).collect();
        let accepts = answers.iter().filter(|&&a| a == 0).count();
        assert!((60..=140).contains(&accepts), "{accepts}");
    }

    #[test]
    fn odd_dyck_strings_are_rejects() {
        let t = make_task("d2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            assert_eq!(sample(&t, 7, &mut rng, 0.5).unwrap().answer, 1);
        }
    }

    #[test]
    fn line_format() {
        let t = make_task("cycle_navigation").unwrap();
        let s = Sample {
            tokens: vec![1, 1, 2, 0],
            answer: 1,
        };
        assert_eq!(s.to_line(&t), "+1 +1 -1 STAY\t1");
    }
}
