use num_complex::Complex64 as C64;

use super::SymMatrix;
use crate::error::{invalid, Result};

/// Largest dimension accepted by [`lhaf_bruteforce`].
pub const BRUTEFORCE_MAX_DIM: usize = 14;

/// Sum over all single-pair matchings by recursive expansion on the first
/// unmatched index.
pub fn lhaf_bruteforce(a: &SymMatrix) -> Result<C64> {
    let n = a.dim();
    if n > BRUTEFORCE_MAX_DIM {
        return invalid(format!(
            "brute-force loop hafnian limited to N <= {BRUTEFORCE_MAX_DIM}, got {n}"
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    Ok(expand(a.matrix(), &mut idx))
}

fn expand(a: &nalgebra::DMatrix<C64>, idx: &mut Vec<usize>) -> C64 {
    let Some(&i) = idx.last() else {
        return C64::new(1.0, 0.0);
    };
    idx.pop();
    let mut total = a[(i, i)] * expand(a, idx);
    for k in 0..idx.len() {
        let j = idx.swap_remove(k);
        total += a[(i, j)] * expand(a, idx);
        idx.push(j);
        let last = idx.len() - 1;
        idx.swap(k, last);
    }
    idx.push(i);
    total
}
