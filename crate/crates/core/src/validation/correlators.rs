//! Two-point click correlators `C_ij = ⟨Π_i Π_j⟩ - ⟨Π_i⟩⟨Π_j⟩` with
//! `Π = 1 - |0⟩⟨0|`.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::gaussian::{log_vacuum_prob, GaussianState};

fn vacuum(state: &GaussianState, modes: &[usize]) -> Result<f64> {
    Ok(log_vacuum_prob(&state.marginal(modes))?.exp())
}

/// Exact correlators from one- and two-mode vacuum probabilities.
pub fn correlators_exact(state: &GaussianState) -> Result<DMatrix<f64>> {
    let m = state.modes();
    let v1: Vec<f64> = (0..m).map(|i| vacuum(state, &[i])).collect::<Result<_>>()?;
    let mut c = DMatrix::zeros(m, m);
    for i in 0..m {
        c[(i, i)] = v1[i] * (1.0 - v1[i]);
        for j in i + 1..m {
            // P(click i, click j) - P(i) P(j) = P_vac(ij) - P_vac(i) P_vac(j)
            let cij = vacuum(state, &[i, j])? - v1[i] * v1[j];
            c[(i, j)] = cij;
            c[(j, i)] = cij;
        }
    }
    Ok(c)
}

/// Plug-in estimate from click samples.
pub fn correlators_empirical(samples: &[Vec<bool>]) -> Result<DMatrix<f64>> {
    let Some(first) = samples.first() else {
        return invalid("no samples");
    };
    let m = first.len();
    if samples.iter().any(|s| s.len() != m) {
        return invalid("samples differ in length");
    }
    let n = samples.len() as f64;
    let mut single = vec![0.0; m];
    let mut pair = DMatrix::<f64>::zeros(m, m);
    for s in samples {
        let on: Vec<usize> = (0..m).filter(|&i| s[i]).collect();
        for (a, &i) in on.iter().enumerate() {
            single[i] += 1.0;
            for &j in &on[a..] {
                pair[(i, j)] += 1.0;
            }
        }
    }
    Ok(DMatrix::from_fn(m, m, |i, j| {
        let (a, b) = (i.min(j), i.max(j));
        pair[(a, b)] / n - single[i] * single[j] / (n * n)
    }))
}

/// Entries strictly above the diagonal, row by row.
pub fn off_diagonal(c: &DMatrix<f64>) -> Vec<f64> {
    let m = c.nrows();
    (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).map(|(i, j)| c[(i, j)]).collect()
}
