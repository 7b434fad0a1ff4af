//! Top-two principal components by power iteration with deflation.

use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca2 {
    pub projections: Vec<[f64; 2]>,
    /// Unit principal axes, largest eigenvalue first.
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
    pub mean: Vec<f64>,
    /// Set when the cloud has (numerically) zero variance; projections are
    /// then all zero.
    pub degenerate: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Dominant eigenpair of the symmetric PSD matrix `cov` (`d × d`).
fn power_iteration(cov: &[f64], d: usize, start: usize) -> (Vec<f64>, f64) {
    // Deterministic, non-degenerate start vector.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + ((i + start) % 7) as f64 * 0.1).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let mut w = vec![0.0; d];
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = dot(&cov[i * d..(i + 1) * d], &v);
        }
        let norm = normalize(&mut w);
        if norm == 0.0 {
            return (v, 0.0);
        }
        let delta = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        lambda = norm;
        if delta < TOLERANCE {
            break;
        }
    }
    (v, lambda)
}

/// Flips `v` so its largest-magnitude coordinate is positive.
fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn pca_2d(vectors: &[Vec<f64>]) -> Result<Pca2> {
    if vectors.len() < 3 {
        return Err(Error::invalid("pca_2d", format!("need at least 3 vectors, got {}", vectors.len())));
    }
    let d = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::shape("pca_2d", &[d], &[v.len()]));
    }
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n;
        }
    }
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for v in vectors {
        for ((c, x), m) in centered.iter_mut().zip(v).zip(&mean) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci != 0.0 {
                for (dst, &cj) in cov[i * d..(i + 1) * d].iter_mut().zip(&centered) {
                    *dst += ci * cj / n;
                }
            }
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    if trace <= f64::EPSILON {
        return Ok(Pca2 {
            projections: vec![[0.0; 2]; vectors.len()],
            components: [vec![0.0; d], vec![0.0; d]],
            eigenvalues: [0.0; 2],
            mean,
            degenerate: true,
        });
    }

    let (mut c1, l1) = power_iteration(&cov, d, 0);
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] -= l1 * c1[i] * c1[j];
        }
    }
    let (mut c2, l2) = power_iteration(&cov, d, 3);
    // Re-orthogonalize against the first axis to clean up deflation error.
    let overlap = dot(&c2, &c1);
    c2.iter_mut().zip(&c1).for_each(|(x, y)| *x -= overlap * y);
    normalize(&mut c2);
    fix_sign(&mut c1);
    fix_sign(&mut c2);

    let projections = vectors
        .iter()
        .map(|v| {
            let centered: Vec<f64> = v.iter().zip(&mean).map(|(x, m)| x - m).collect();
            [dot(&centered, &c1), dot(&centered, &c2)]
        })
        .collect();
    Ok(Pca2 {
        projections,
        components: [c1, c2],
        eigenvalues: [l1, l2.max(0.0)],
        mean,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_in_high_dimension() {
        let vectors: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let mut v = vec![0.0; 16];
                v[3] = i as f64;
                v
            })
            .collect();
        let p = pca_2d(&vectors).unwrap();
        assert!((p.eigenvalues[0] - 8.25).abs() < 1e-6);
        assert!(p.eigenvalues[1].abs() < 1e-9);
        assert!((p.projections[9][0] - p.projections[0][0] - 9.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_and_errors() {
        let same = vec![vec![1.0, 2.0]; 4];
        assert!(pca_2d(&same).unwrap().degenerate);
        assert!(pca_2d(&same[..2]).is_err());
    }
}
