//! Dense symmetric kernels at working precision: shifted Cholesky with a
//! rounding-aware pivot test, and triangular solves.

use rug::Float;

use crate::arith::{err_up, Precision};

/// Result of factoring `s (A - sigma I)` where `s = +1` or `-1`.
#[derive(Debug)]
pub enum Definiteness {
    /// Every pivot cleared its rounding noise; carries the factor `L`.
    Positive(Vec<Vec<Float>>),
    /// A pivot was negative beyond its rounding noise.
    NotPositive { pivot: usize },
    /// A pivot fell inside its rounding noise band.
    Indeterminate { pivot: usize },
}

/// Which side of the spectrum a shift is tested against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `A - sigma I`, positive definite iff `sigma < lambda_min`.
    Below,
    /// `sigma I - A`, positive definite iff `sigma > lambda_max`.
    Above,
}

/// Cholesky factorisation of the shifted matrix at precision `prec`.
///
/// The pivot `d_k` is declared indeterminate when
/// `|d_k| <= 4 (k + 2) eps (|A_kk| + |sigma|)`, a first-order bound on the
/// accumulated rounding in the pivot.
pub fn shifted_cholesky(a: &[Vec<Float>], sigma: &Float, side: Side, prec: Precision) -> Definiteness {
    let n = a.len();
    let bits = prec.bits();
    let eps = prec.epsilon();
    let mut l: Vec<Vec<Float>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<Float> = Vec::with_capacity(i + 1);
        for j in 0..=i {
            let mut acc = Float::with_val(bits, &a[i][j]);
            if side == Side::Above {
                acc = -acc;
            }
            if i == j {
                match side {
                    Side::Below => acc -= sigma,
                    Side::Above => acc += sigma,
                }
            }
            if j > 0 {
                let other = if j == i { &row[..j] } else { &l[j][..j] };
                let d = Float::with_val(bits, Float::dot(row[..j].iter().zip(other.iter())));
                acc -= d;
            }
            if i == j {
                let mut noise = err_up(&a[i][i]);
                noise += err_up(sigma);
                noise *= &eps;
                noise *= 4 * (i as u32 + 2);
                if err_up(&acc) <= noise {
                    return Definiteness::Indeterminate { pivot: i };
                }
                if acc.is_sign_negative() {
                    return Definiteness::NotPositive { pivot: i };
                }
                row.push(acc.sqrt());
            } else {
                acc /= &l[j][j];
                row.push(acc);
            }
        }
        l.push(row);
    }
    Definiteness::Positive(l)
}

/// Converts every entry to `prec` (exact when widening).
pub fn widen(a: &[Vec<Float>], prec: Precision) -> Vec<Vec<Float>> {
    a.iter()
        .map(|r| r.iter().map(|x| Float::with_val(prec.bits(), x)).collect())
        .collect()
}

/// Solves `L y = b` for lower-triangular `L` stored by rows.
pub fn forward_solve(l: &[Vec<Float>], b: &[Float]) -> Vec<Float> {
    let n = l.len();
    let mut y: Vec<Float> = Vec::with_capacity(n);
    for i in 0..n {
        let p = l[i][i].prec();
        let d = Float::with_val(p, Float::dot(l[i][..i].iter().zip(y.iter())));
        let mut v = Float::with_val(p, &b[i] - &d);
        v /= &l[i][i];
        y.push(v);
    }
    y
}

/// Solves `L^T x = y`.
pub fn backward_solve_transposed(l: &[Vec<Float>], y: &[Float]) -> Vec<Float> {
    let n = l.len();
    let mut x: Vec<Float> = y.to_vec();
    for i in (0..n).rev() {
        let p = l[i][i].prec();
        let mut v = x[i].clone();
        for (k, xk) in x.iter().enumerate().skip(i + 1) {
            v -= Float::with_val(p, &l[k][i] * xk);
        }
        v /= &l[i][i];
        x[i] = v;
    }
    x
}

/// Inverse of a lower-triangular matrix with positive diagonal.
pub fn invert_lower(l: &[Vec<Float>]) -> Vec<Vec<Float>> {
    let n = l.len();
    let mut inv: Vec<Vec<Float>> = Vec::with_capacity(n);
    for k in 0..n {
        let p = l[k][k].prec();
        let mut row = vec![Float::new(p); k + 1];
        row[k] = Float::with_val(p, l[k][k].recip_ref());
        for j in (0..k).rev() {
            // sum_{m=j}^{k-1} L_km B_mj
            let mut s = Float::new(p);
            for m in j..k {
                s += Float::with_val(p, &l[k][m] * &inv[m][j]);
            }
            s /= &l[k][k];
            row[j] = -s;
        }
        inv.push(row);
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Vec<Vec<Float>> {
        rows.iter()
            .map(|r| r.iter().map(|&x| Float::with_val(128, x)).collect())
            .collect()
    }

    fn p() -> Precision {
        Precision::new(128).unwrap()
    }

    #[test]
    fn cholesky_shift_sides() {
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let z = Float::with_val(128, 0.5);
        assert!(matches!(shifted_cholesky(&a, &z, Side::Below, p()), Definiteness::Positive(_)));
        let s = Float::with_val(128, 1.5);
        assert!(matches!(shifted_cholesky(&a, &s, Side::Below, p()), Definiteness::NotPositive { pivot: 1 }));
        let one = Float::with_val(128, 1.0);
        assert!(matches!(shifted_cholesky(&a, &one, Side::Below, p()), Definiteness::Indeterminate { pivot: 1 }));
        let s = Float::with_val(128, 3.5);
        assert!(matches!(shifted_cholesky(&a, &s, Side::Above, p()), Definiteness::Positive(_)));
        let s = Float::with_val(128, 2.5);
        assert!(matches!(shifted_cholesky(&a, &s, Side::Above, p()), Definiteness::NotPositive { .. }));
    }

    #[test]
    fn solves_and_inverse() {
        let a = m(&[&[4.0, 2.0, 0.0], &[2.0, 5.0, 1.0], &[0.0, 1.0, 3.0]]);
        let l = match shifted_cholesky(&a, &Float::new(128), Side::Below, p()) {
            Definiteness::Positive(l) => l,
            other => panic!("{other:?}"),
        };
        let b: Vec<Float> = [1.0, 0.0, 0.0].iter().map(|&x| Float::with_val(128, x)).collect();
        let y = forward_solve(&l, &b);
        let x = backward_solve_transposed(&l, &y);
        // A x = e0
        for i in 0..3 {
            let mut r = Float::new(128);
            for j in 0..3 {
                r += Float::with_val(128, &a[i][j] * &x[j]);
            }
            let expect = if i == 0 { 1.0 } else { 0.0 };
            assert!((r.to_f64() - expect).abs() < 1e-30);
        }
        let inv = invert_lower(&l);
        for i in 0..3 {
            for j in 0..=i {
                let mut s = Float::new(128);
                for k in j..=i {
                    s += Float::with_val(128, &l[i][k] * &inv[k][j]);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s.to_f64() - expect).abs() < 1e-30);
            }
        }
    }
}
