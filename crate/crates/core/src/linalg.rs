//! Dense complex helpers used inside the exponential-time kernels.
//!
//! The kernels need the eigenvalues of many small non-Hermitian matrices, so
//! this module carries a flat row-major Hessenberg reduction followed by a
//! single-shift complex QR iteration. Eigenvectors are never formed; only the
//! active window is updated during the QR sweeps.

use num_complex::Complex64 as C64;

use crate::error::{GbsError, Result};

#[inline]
fn abs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Eigenvalues of the `n x n` row-major matrix `a`. The buffer is overwritten.
pub fn eigenvalues_in_place(a: &mut [C64], n: usize, out: &mut Vec<C64>) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    out.clear();
    match n {
        0 => return Ok(()),
        1 => {
            out.push(a[0]);
            return Ok(());
        }
        2 => {
            let (l1, l2) = eig2(a[0], a[1], a[2], a[3]);
            out.push(l1);
            out.push(l2);
            return Ok(());
        }
        _ => {}
    }
    hessenberg(a, n);
    hessenberg_qr(a, n, out)
}

/// Eigenvalues of a general 2x2 block `[[a, b], [c, d]]`.
#[inline]
fn eig2(a: C64, b: C64, c: C64, d: C64) -> (C64, C64) {
    let half_tr = (a + d) * 0.5;
    let diff = (a - d) * 0.5;
    let disc = (diff * diff + b * c).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// Householder reduction to upper Hessenberg form.
fn hessenberg(a: &mut [C64], n: usize) {
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut w = vec![C64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut norm2 = 0.0;
        for i in 0..len {
            let x = a[(k + 1 + i) * n + k];
            v[i] = x;
            norm2 += x.norm_sqr();
        }
        let tail2 = norm2 - v[0].norm_sqr();
        if tail2 <= f64::MIN_POSITIVE {
            continue;
        }
        let norm = norm2.sqrt();
        let x0 = v[0];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        v[0] = x0 - alpha;
        let vnorm2 = v[0].norm_sqr() + tail2;
        let tau = 2.0 / vnorm2;

        // left: rows k+1.., cols k..
        for j in k..n {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..len {
                s += v[i].conj() * a[(k + 1 + i) * n + j];
            }
            w[j] = s * tau;
        }
        for i in 0..len {
            let vi = v[i];
            let row = (k + 1 + i) * n;
            for j in k..n {
                a[row + j] -= vi * w[j];
            }
        }
        // right: all rows, cols k+1..
        for r in 0..n {
            let row = r * n + k + 1;
            let mut s = C64::new(0.0, 0.0);
            for i in 0..len {
                s += a[row + i] * v[i];
            }
            let s = s * tau;
            for i in 0..len {
                a[row + i] -= s * v[i].conj();
            }
        }
        a[(k + 1) * n + k] = alpha;
        for i in 1..len {
            a[(k + 1 + i) * n + k] = C64::new(0.0, 0.0);
        }
    }
}

/// Single-shift QR on an upper Hessenberg matrix, eigenvalues only.
fn hessenberg_qr(h: &mut [C64], n: usize, out: &mut Vec<C64>) -> Result<()> {
    out.resize(n, C64::new(0.0, 0.0));
    let eps = f64::EPSILON;
    let small = f64::MIN_POSITIVE * (n as f64) / eps;
    let max_iter = 30 * n.max(10);
    let idx = |i: usize, j: usize| i * n + j;

    let mut hi = n as isize - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi >= 0 {
        let hiu = hi as usize;
        // locate the start of the unreduced block ending at hi
        let mut l = hiu;
        while l > 0 {
            let sub = abs1(h[idx(l, l - 1)]);
            if sub <= small {
                break;
            }
            let mut tst = abs1(h[idx(l - 1, l - 1)]) + abs1(h[idx(l, l)]);
            if tst == 0.0 {
                if l >= 2 {
                    tst += h[idx(l - 1, l - 2)].re.abs();
                }
                if l + 1 < n {
                    tst += h[idx(l + 1, l)].re.abs();
                }
            }
            if sub <= eps * tst {
                break;
            }
            l -= 1;
        }
        if l > 0 {
            h[idx(l, l - 1)] = C64::new(0.0, 0.0);
        }
        if l == hiu {
            out[hiu] = h[idx(hiu, hiu)];
            hi -= 1;
            iter = 0;
            continue;
        }
        if l + 1 == hiu {
            let (e1, e2) = eig2(
                h[idx(l, l)],
                h[idx(l, hiu)],
                h[idx(hiu, l)],
                h[idx(hiu, hiu)],
            );
            out[l] = e1;
            out[hiu] = e2;
            hi -= 2;
            iter = 0;
            continue;
        }

        iter += 1;
        total += 1;
        if total > max_iter {
            return Err(GbsError::Numerical(format!(
                "QR eigenvalue iteration did not converge for a {n}x{n} matrix"
            )));
        }

        let shift = if iter % 10 == 0 {
            // exceptional shift
            let s = h[idx(hiu, hiu - 1)].re.abs() * 0.75;
            h[idx(hiu, hiu)] + C64::new(s, 0.0)
        } else {
            let a = h[idx(hiu - 1, hiu - 1)];
            let b = h[idx(hiu - 1, hiu)];
            let c = h[idx(hiu, hiu - 1)];
            let d = h[idx(hiu, hiu)];
            let (e1, e2) = eig2(a, b, c, d);
            if (e1 - d).norm_sqr() <= (e2 - d).norm_sqr() {
                e1
            } else {
                e2
            }
        };

        // implicit single-shift bulge chase over the window l..=hi
        let mut x = h[idx(l, l)] - shift;
        let mut y = h[idx(l + 1, l)];
        for k in l..hiu {
            if k > l {
                x = h[idx(k, k - 1)];
                y = h[idx(k + 1, k - 1)];
            }
            let (c, s) = givens(x, y);
            let sc = s.conj();
            let col0 = if k > l { k - 1 } else { l };
            for j in col0..=hiu {
                let t1 = h[idx(k, j)];
                let t2 = h[idx(k + 1, j)];
                h[idx(k, j)] = t1 * c + s * t2;
                h[idx(k + 1, j)] = t2 * c - sc * t1;
            }
            let rmax = (k + 2).min(hiu);
            for i in l..=rmax {
                let t1 = h[idx(i, k)];
                let t2 = h[idx(i, k + 1)];
                h[idx(i, k)] = t1 * c + sc * t2;
                h[idx(i, k + 1)] = t2 * c - s * t1;
            }
            if k > l {
                h[idx(k + 1, k - 1)] = C64::new(0.0, 0.0);
            }
        }
    }
    Ok(())
}

/// Rotation `[[c, s], [-conj(s), c]]` mapping `(x, y)` onto `(r, 0)`.
#[inline]
fn givens(x: C64, y: C64) -> (f64, C64) {
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    let ax = x.norm();
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let rho = ax.hypot(ay);
    let c = ax / rho;
    let s = (x / ax) * y.conj() / rho;
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n * n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    fn power_sums(e: &[C64], k: i32) -> C64 {
        e.iter().map(|z| z.powi(k)).sum()
    }

    #[test]
    fn matches_power_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3usize, 5, 8, 13, 24, 36] {
            let a = random(n, &mut rng);
            let m = DMatrix::from_row_slice(n, n, &a);
            let mut buf = a.clone();
            let mut e = Vec::new();
            eigenvalues_in_place(&mut buf, n, &mut e).unwrap();
            let mut p = m.clone();
            for k in 1..=6 {
                let tr = p.trace();
                let s = power_sums(&e, k);
                assert!((tr - s).norm() <= 1e-11 * (1.0 + tr.norm()), "n={n} k={k} {tr} {s}");
                p = &p * &m;
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let mut e = Vec::new();
        let mut z = vec![C64::new(0.0, 0.0); 16];
        eigenvalues_in_place(&mut z, 4, &mut e).unwrap();
        assert!(e.iter().all(|v| v.norm() == 0.0));

        // nilpotent shift matrix
        let mut s = vec![C64::new(0.0, 0.0); 25];
        for i in 0..4 {
            s[i * 5 + i + 1] = C64::new(1.0, 0.0);
        }
        eigenvalues_in_place(&mut s, 5, &mut e).unwrap();
        assert!(e.iter().all(|v| v.norm() < 1e-12));

        // diagonal with repeated entries
        let mut d = vec![C64::new(0.0, 0.0); 9];
        d[0] = C64::new(2.0, 0.0);
        d[4] = C64::new(2.0, 0.0);
        d[8] = C64::new(-1.0, 1.0);
        eigenvalues_in_place(&mut d, 3, &mut e).unwrap();
        let s1: C64 = e.iter().sum();
        assert!((s1 - C64::new(3.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    #[ignore]
    fn timing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [6usize, 12, 18, 24, 36] {
            let a = random(n, &mut rng);
            let reps = 500;
            let mut e = Vec::new();
            let t = std::time::Instant::now();
            for _ in 0..reps {
                let mut b = a.clone();
                eigenvalues_in_place(&mut b, n, &mut e).unwrap();
            }
            println!("n={n}: {:?}", t.elapsed() / reps);
        }
    }
}
