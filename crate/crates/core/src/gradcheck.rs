//! Central finite-difference check of reverse-mode gradients (64-bit only).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// Parameter name and element index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// Compares the analytic gradient of `loss` against central differences on
/// a seeded sample of at least `samples` coordinates (all coordinates when
/// there are fewer). The error of one coordinate is
/// `|analytic - numeric| / max(1, |numeric|)`.
pub fn finite_difference_check<L>(
    store: &ParamStore<f64>,
    mut loss: L,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    L: FnMut(&ParamStore<f64>, &mut Tape<f64>) -> Result<Var>,
{
    if !(1e-6..=1e-4).contains(&epsilon) {
        return Err(Error::invalid("finite_difference_check", format!("epsilon {epsilon} outside [1e-6, 1e-4]")));
    }
    let mut work = store.clone();
    work.zero_grad();
    let mut tape = Tape::new();
    let l = loss(&work, &mut tape)?;
    let base = tape.value(l).item();
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss = {base}")));
    }
    tape.backward(l)?.accumulate_into(&mut work, 1.0);
    drop(tape);

    let coords: Vec<(ParamId, usize)> = work
        .ids()
        .flat_map(|id| (0..work.get(id).value.len()).map(move |i| (id, i)))
        .collect();
    let chosen: Vec<usize> = if coords.len() <= samples {
        (0..coords.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, coords.len(), samples).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let l = loss(store, &mut tape)?;
        let v = tape.value(l).item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("loss = {v}")))
        }
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coordinates: chosen.len(),
        worst: None,
    };
    for ci in chosen {
        let (id, i) = coords[ci];
        let analytic = work.get(id).grad.data()[i];
        let orig = work.get(id).value.data()[i];
        work.get_mut(id).value.data_mut()[i] = orig + epsilon;
        let plus = eval(&work)?;
        work.get_mut(id).value.data_mut()[i] = orig - epsilon;
        let minus = eval(&work)?;
        work.get_mut(id).value.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let err = (analytic - numeric).abs() / numeric.abs().max(1.0);
        if err >= report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((work.get(id).name.clone(), i));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut store = ParamStore::new();
        let w = store
            .add("w", Tensor::from_f64(&[4], &[0.3, -1.2, 2.0, 0.5]).unwrap())
            .unwrap();
        let report = finite_difference_check(
            &store,
            |s, tape| {
                let x = tape.param(s, w);
                let sq = tape.mul(x, x)?;
                Ok(tape.sum(sq))
            },
            1e-5,
            200,
            0,
        )
        .unwrap();
        assert_eq!(report.coordinates, 4);
        assert!(report.max_rel_error < 1e-8, "{report:?}");
    }

    #[test]
    fn epsilon_out_of_range_rejected() {
        let store = ParamStore::<f64>::new();
        let r = finite_difference_check(&store, |_, tape| Ok(tape.constant(Tensor::scalar(0.0))), 1e-2, 10, 0);
        assert!(r.is_err());
    }

    #[test]
    fn non_finite_loss_rejected() {
        let store = ParamStore::<f64>::new();
        let r = finite_difference_check(&store, |_, tape| Ok(tape.constant(Tensor::scalar(f64::NAN))), 1e-5, 10, 0);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
