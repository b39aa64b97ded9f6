//! Extremal eigenvalues of Hankel and kernel matrices, the coefficient
//! triangle of the orthonormal polynomials, and the Hamburger minima.
//!
//! Eigenvalues are enclosed by bisection on a shift `sigma`: the shifted
//! Cholesky factorisation of `H - sigma I` succeeds exactly when `sigma` lies
//! below the smallest eigenvalue. A probe whose deciding pivot is lost in
//! rounding noise is repeated at doubled precision, then at a nudged shift,
//! before the computation gives up with [`Error::PrecisionExhausted`].

use rug::Float;

use crate::arith::{Complex, Precision};
use crate::error::{Error, Result};
use crate::linalg::{self, Definiteness, Side};
use crate::moments::{hankel, shifted, HankelMatrix, MomentSource};
use crate::qseries::{qbinomial, qpoch_finite, QParam};

const MAX_BISECTIONS: usize = 20_000;
/// Doublings tried for an indeterminate probe.
const PROBE_DOUBLINGS: usize = 2;

/// A certified interval `[lo, hi]` around an extremal eigenvalue.
#[derive(Clone, Debug)]
pub struct EigenEnclosure {
    pub lo: Float,
    pub hi: Float,
    /// Definiteness tests performed.
    pub probes: usize,
    /// Working precision of the bisection.
    pub bits: u32,
}

impl EigenEnclosure {
    pub fn mid(&self) -> Float {
        let mut m = Float::with_val(self.bits, &self.lo + &self.hi);
        m /= 2;
        m
    }

    pub fn width(&self) -> Float {
        Float::with_val(self.bits, &self.hi - &self.lo)
    }

    pub fn contains(&self, x: &Float) -> bool {
        *x >= self.lo && *x <= self.hi
    }
}

/// Coefficients `beta(k, j)` of `p_k(x) = sum_j beta(k, j) x^j`.
#[derive(Clone, Debug)]
pub struct CoeffTriangle {
    rows: Vec<Vec<Float>>,
}

impl CoeffTriangle {
    pub fn from_rows(rows: Vec<Vec<Float>>) -> Result<Self> {
        for (k, r) in rows.iter().enumerate() {
            if r.len() != k + 1 {
                return Err(Error::invalid(format!("row {k} must have {} entries", k + 1)));
            }
            if r[k] <= 0 {
                return Err(Error::invalid(format!("leading coefficient of p_{k} must be positive")));
            }
        }
        Ok(CoeffTriangle { rows })
    }

    /// Largest degree `N`.
    pub fn degree(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn beta(&self, k: usize, j: usize) -> &Float {
        &self.rows[k][j]
    }

    pub fn row(&self, k: usize) -> &[Float] {
        &self.rows[k]
    }
}

/// `K(j, k) = sum_m beta(j, m) beta(k, m)`: the Gram matrix of the `p_k`
/// on the unit circle.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    data: Vec<Vec<Float>>,
    prec: Precision,
}

impl KernelMatrix {
    pub fn from_dense(data: Vec<Vec<Float>>, prec: Precision) -> Self {
        KernelMatrix { data, prec }
    }

    pub fn order(&self) -> usize {
        self.data.len()
    }

    pub fn entry(&self, j: usize, k: usize) -> &Float {
        &self.data[j][k]
    }
}

/// Everything the bound machinery reports for one Hankel order.
#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub lambda: EigenEnclosure,
    pub mu: Float,
    pub mu_shifted: Float,
    pub trace_bound: Float,
}

enum Probe {
    Positive,
    NotPositive(usize),
    Unknown(usize),
}

fn probe(a: &[Vec<Float>], sigma: &Float, side: Side, prec: Precision) -> Probe {
    let mut p = prec;
    let mut widened;
    let mut mat = a;
    let mut last = 0;
    for attempt in 0..=PROBE_DOUBLINGS {
        if attempt > 0 {
            p = p.doubled();
            widened = linalg::widen(a, p);
            mat = &widened;
        }
        let s = Float::with_val(p.bits(), sigma);
        match linalg::shifted_cholesky(mat, &s, side, p) {
            Definiteness::Positive(_) => return Probe::Positive,
            Definiteness::NotPositive { pivot } => return Probe::NotPositive(pivot),
            Definiteness::Indeterminate { pivot } => last = pivot,
        }
    }
    Probe::Unknown(last)
}

/// Bisection on `[lo, hi]`. For [`Side::Below`], a definite probe raises
/// `lo`; for [`Side::Above`] it lowers `hi`.
fn bisect(
    a: &[Vec<Float>],
    side: Side,
    mut lo: Float,
    mut hi: Float,
    tol: f64,
    prec: Precision,
) -> Result<EigenEnclosure> {
    let bits = prec.bits();
    let mut probes = 0usize;
    for _ in 0..MAX_BISECTIONS {
        let width = Float::with_val(bits, &hi - &lo);
        if width <= tol {
            return Ok(EigenEnclosure { lo, hi, probes, bits });
        }
        let mut mid = Float::with_val(bits, &lo + &hi);
        mid /= 2;
        if mid <= lo || mid >= hi {
            return Err(Error::exhausted(
                bits,
                format!("bisection stalled at width {}", width.to_string_radix(10, Some(4))),
            ));
        }
        let mut decided = None;
        let nudged = {
            let mut n = Float::with_val(bits, &width / 7u32);
            n += &mid;
            n
        };
        for sigma in [&mid, &nudged] {
            probes += 1;
            match probe(a, sigma, side, prec) {
                Probe::Positive => {
                    decided = Some((sigma.clone(), true));
                    break;
                }
                Probe::NotPositive(_) => {
                    decided = Some((sigma.clone(), false));
                    break;
                }
                Probe::Unknown(_) => {}
            }
        }
        let (sigma, definite) = decided.ok_or_else(|| {
            Error::exhausted(bits, "definiteness probes stayed inside rounding noise")
        })?;
        match (side, definite) {
            (Side::Below, true) | (Side::Above, false) => lo = sigma,
            (Side::Below, false) | (Side::Above, true) => hi = sigma,
        }
    }
    Err(Error::NonConvergence("eigenvalue bisection iteration cap".into()))
}

/// Smallest eigenvalue of a dense symmetric matrix; `upper` optionally
/// tightens the initial bracket `[0, min_k A_kk]`.
pub(crate) fn smallest_eig_dense(
    a: &[Vec<Float>],
    prec: Precision,
    tol: f64,
    upper: Option<&Float>,
) -> Result<EigenEnclosure> {
    let n = a.len();
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let bits = prec.bits();
    let zero = Float::new(bits);
    match probe(a, &zero, Side::Below, prec) {
        Probe::Positive => {}
        Probe::NotPositive(pivot) | Probe::Unknown(pivot) => {
            return Err(Error::NotPositiveDefinite { pivot, order: n })
        }
    }
    if n == 1 {
        let v = Float::with_val(bits, &a[0][0]);
        return Ok(EigenEnclosure { lo: v.clone(), hi: v, probes: 1, bits });
    }
    let mut hi = a
        .iter()
        .enumerate()
        .map(|(k, r)| Float::with_val(bits, &r[k]))
        .min_by(|x, y| x.partial_cmp(y).expect("finite diagonal"))
        .expect("nonempty");
    if let Some(u) = upper {
        if *u > 0 && *u < hi {
            hi = Float::with_val(bits, u);
        }
    }
    let mut probes = 1;
    let mut lo = zero;
    // A cheap estimate from inverse iteration, certified by two probes a
    // quarter-tolerance either side; bisection takes over if it misses.
    if let Some(est) = inverse_iteration(a, prec, tol) {
        let mut d = Float::with_val(bits, tol);
        d /= 4;
        let below = Float::with_val(bits, &est - &d);
        let above = Float::with_val(bits, &est + &d);
        if below > lo && below < hi {
            probes += 1;
            if let Probe::Positive = probe(a, &below, Side::Below, prec) {
                lo = below;
            }
        }
        if above > lo && above < hi {
            probes += 1;
            if let Probe::NotPositive(_) = probe(a, &above, Side::Below, prec) {
                hi = above;
            }
        }
    }
    let mut e = bisect(a, Side::Below, lo, hi, tol, prec)?;
    e.probes += probes;
    Ok(e)
}

const INVERSE_ITERATIONS: usize = 200;

/// Estimate of the smallest eigenvalue by inverse iteration with the
/// Cholesky factor; `None` if the factorisation or iteration misbehaves.
fn inverse_iteration(a: &[Vec<Float>], prec: Precision, tol: f64) -> Option<Float> {
    let bits = prec.bits();
    let zero = Float::new(bits);
    let l = match linalg::shifted_cholesky(a, &zero, Side::Below, prec) {
        Definiteness::Positive(l) => l,
        _ => return None,
    };
    let n = a.len();
    let mut x: Vec<Float> = (0..n).map(|_| Float::with_val(bits, 1)).collect();
    let mut prev: Option<Float> = None;
    let target = tol / 64.0;
    for _ in 0..INVERSE_ITERATIONS {
        let y = linalg::backward_solve_transposed(&l, &linalg::forward_solve(&l, &x));
        let xy = Float::with_val(bits, Float::dot(x.iter().zip(y.iter())));
        let yy = Float::with_val(bits, Float::dot(y.iter().zip(y.iter())));
        if !(yy > 0) || !xy.is_finite() {
            return None;
        }
        // Rayleigh quotient of H at y: (y^T H y)/(y^T y) = (x^T y)/(y^T y).
        let est = Float::with_val(bits, &xy / &yy);
        let norm = yy.sqrt();
        x = y.into_iter().map(|v| v / &norm).collect();
        if let Some(p) = &prev {
            if Float::with_val(bits, &est - p).abs() <= target {
                return Some(est);
            }
        }
        prev = Some(est);
    }
    None
}

/// Encloses `lambda_N`, the smallest eigenvalue of `H`.
pub fn smallest_eig(h: &HankelMatrix, tol: f64) -> Result<EigenEnclosure> {
    smallest_eig_dense(&h.to_dense(), h.precision(), tol, None)
}

/// As [`smallest_eig`], starting from a known upper bound (for instance
/// `lambda_{N-1}`, since `lambda_N` decreases with `N`).
pub fn smallest_eig_bounded(h: &HankelMatrix, tol: f64, upper: &Float) -> Result<EigenEnclosure> {
    smallest_eig_dense(&h.to_dense(), h.precision(), tol, Some(upper))
}

/// Encloses the largest eigenvalue of `K`, bracketed by the largest
/// diagonal entry and the trace.
pub fn largest_eig(k: &KernelMatrix, tol: f64) -> Result<EigenEnclosure> {
    let n = k.order();
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let bits = k.prec.bits();
    if n == 1 {
        let v = Float::with_val(bits, &k.data[0][0]);
        return Ok(EigenEnclosure { lo: v.clone(), hi: v, probes: 0, bits });
    }
    let lo = (0..n)
        .map(|i| Float::with_val(bits, &k.data[i][i]))
        .max_by(|x, y| x.partial_cmp(y).expect("finite diagonal"))
        .expect("nonempty");
    let hi = trace_bound(k);
    if lo <= 0 {
        return Err(Error::NotPositiveDefinite { pivot: 0, order: n });
    }
    bisect(&k.data, Side::Above, lo, hi, tol, k.prec)
}

fn cholesky_factor(h: &HankelMatrix) -> Result<Vec<Vec<Float>>> {
    let prec = h.precision();
    let zero = Float::new(prec.bits());
    match linalg::shifted_cholesky(&h.to_dense(), &zero, Side::Below, prec) {
        Definiteness::Positive(l) => Ok(l),
        Definiteness::NotPositive { pivot } | Definiteness::Indeterminate { pivot } => {
            Err(Error::NotPositiveDefinite { pivot, order: h.order() })
        }
    }
}

/// `B = L^{-1}` for the Cholesky factor `H = L L^T`; row `k` of `B` holds
/// the coefficients of the orthonormal polynomial `p_k`, and `B H B^T = I`.
pub fn beta_from_hankel(h: &HankelMatrix) -> Result<CoeffTriangle> {
    let l = cholesky_factor(h)?;
    Ok(CoeffTriangle { rows: linalg::invert_lower(&l) })
}

/// Closed-form coefficient `beta(n, k)` of the Stieltjes–Wigert
/// orthonormal polynomial,
/// `(-1)^{n+k} q^{n/2 + 1/4} (q;q)_n^{-1/2} [n k]_q q^{k^2 + k/2}`.
pub fn sw_beta(n: usize, k: usize, q: &QParam) -> Result<Float> {
    if k > n {
        return Err(Error::invalid(format!("sw_beta needs k <= n, got n={n}, k={k}")));
    }
    let bits = q.prec().bits();
    let mut v = qbinomial(n as u64, k as u64, q)?;
    v *= q.pow_ratio(2 * n as i64 + 1, 4);
    v /= qpoch_finite(q.q(), q, n as u64).sqrt();
    v *= q.pow_ratio((2 * k * k + k) as i64, 2);
    if (n + k) % 2 == 1 {
        v = -v;
    }
    Ok(Float::with_val(bits, v))
}

/// Closed-form triangle for degrees `0..=n`.
pub fn sw_triangle(n: usize, q: &QParam) -> Result<CoeffTriangle> {
    let rows = (0..=n)
        .map(|k| (0..=k).map(|j| sw_beta(k, j, q)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    CoeffTriangle::from_rows(rows)
}

/// `K(j, k) = sum_{m <= min(j,k)} beta(j, m) beta(k, m)`.
pub fn kernel_matrix(b: &CoeffTriangle) -> KernelMatrix {
    let n = b.degree() + 1;
    let bits = b.rows[0][0].prec();
    let mut data = vec![vec![Float::new(bits); n]; n];
    for j in 0..n {
        for k in 0..=j {
            let v = Float::with_val(bits, Float::dot(b.rows[j][..=k].iter().zip(b.rows[k].iter())));
            data[k][j] = v.clone();
            data[j][k] = v;
        }
    }
    KernelMatrix {
        data,
        prec: Precision::new(bits).unwrap_or(Precision::DEFAULT),
    }
}

/// `sum_k K(k, k)`, an upper bound for the largest eigenvalue of `K`.
pub fn trace_bound(k: &KernelMatrix) -> Float {
    let bits = k.prec.bits();
    let mut t = Float::new(bits);
    for i in 0..k.order() {
        t += &k.data[i][i];
    }
    t
}

/// `mu_N = 1 / (H^{-1})_{00}`, the minimum of the Hankel form on `v_0 = 1`.
pub fn hamburger_mu(h: &HankelMatrix) -> Result<Float> {
    let l = cholesky_factor(h)?;
    let bits = h.precision().bits();
    let mut e0 = vec![Float::new(bits); h.order()];
    e0[0] = Float::with_val(bits, 1);
    let y = linalg::forward_solve(&l, &e0);
    let w = linalg::backward_solve_transposed(&l, &y);
    Ok(Float::with_val(bits, w[0].recip_ref()))
}

/// `mu'_N`: [`hamburger_mu`] of the Hankel matrix of `s'_n = s_{n+2}`.
/// Precision is raised to what the shifted moments need.
pub fn hamburger_mu_shifted(src: &MomentSource, n: usize) -> Result<Float> {
    let sh = shifted(src);
    let need = sh.required_bits(n)?;
    let sh = sh.at_precision(sh.precision().at_least(need));
    hamburger_mu(&hankel(&sh, n)?)
}

/// `p_k(z)` for `k = 0..=upto` by Horner's rule.
pub fn pk_eval(b: &CoeffTriangle, z: &Complex, upto: usize) -> Result<Vec<Complex>> {
    if upto > b.degree() {
        return Err(Error::invalid(format!(
            "requested p_{upto} but the triangle stops at degree {}",
            b.degree()
        )));
    }
    Ok((0..=upto)
        .map(|k| {
            let row = &b.rows[k];
            let mut acc = Complex::from_real(row[k].clone());
            for c in row[..k].iter().rev() {
                acc = &acc * z;
                acc.re += c;
            }
            acc
        })
        .collect())
}

/// Three-term recurrence `x p_k = a_k p_{k+1} + b_k p_k + a_{k-1} p_{k-1}`
/// read off the coefficient triangle: returns `(b, a, s_0)` with
/// `a_k = beta(k,k)/beta(k+1,k+1)` and
/// `b_k = beta(k,k-1)/beta(k,k) - beta(k+1,k)/beta(k+1,k+1)`.
pub fn recurrence_from_beta(b: &CoeffTriangle) -> (Vec<Float>, Vec<Float>, Float) {
    let bits = b.rows[0][0].prec();
    let n = b.degree();
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n);
    for k in 0..n {
        let lead = &b.rows[k][k];
        let next = &b.rows[k + 1][k + 1];
        off.push(Float::with_val(bits, lead / next));
        let mut bk = Float::with_val(bits, &b.rows[k + 1][k] / next);
        bk = -bk;
        if k > 0 {
            bk += Float::with_val(bits, &b.rows[k][k - 1] / lead);
        }
        diag.push(bk);
    }
    let s0 = Float::with_val(bits, b.rows[0][0].square_ref()).recip();
    (diag, off, s0)
}

/// Spectral data for one order: `lambda_N`, `mu_N`, `mu'_N` and the trace
/// of the kernel matrix. Precision is raised as the moments require.
pub fn spectral_report(src: &MomentSource, n: usize, tol: f64) -> Result<SpectralReport> {
    let need = src.required_bits(n)?;
    let src = src.at_precision(src.precision().at_least(need));
    let h = hankel(&src, n)?;
    let lambda = smallest_eig(&h, tol)?;
    let mu = hamburger_mu(&h)?;
    let mu_shifted = hamburger_mu_shifted(&src, n)?;
    let trace_bound = trace_bound(&kernel_matrix(&beta_from_hankel(&h)?));
    Ok(SpectralReport { lambda, mu, mu_shifted, trace_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{sw_moment, MomentSource};

    fn prec(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    fn sw(qs: &str, bits: u32) -> MomentSource {
        MomentSource::stieltjes_wigert(QParam::parse(prec(bits), qs).unwrap())
    }

    fn dense(rows: &[&[f64]]) -> Vec<Vec<Float>> {
        rows.iter()
            .map(|r| r.iter().map(|&x| Float::with_val(128, x)).collect())
            .collect()
    }

    #[test]
    fn one_by_one_is_exact() {
        let src = sw("0.5", 256);
        let h = hankel(&src, 0).unwrap();
        let e = smallest_eig(&h, 1e-30).unwrap();
        assert_eq!(e.lo, e.hi);
        assert_eq!(e.lo, sw_moment(0, &QParam::parse(prec(256), "0.5").unwrap()).unwrap());
    }

    #[test]
    fn two_by_two_with_exact_tie() {
        let a = dense(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = smallest_eig_dense(&a, prec(128), 1e-20, None).unwrap();
        assert!(e.lo <= 1 && e.hi >= 1);
        assert!(e.width() <= 1e-20);
    }

    #[test]
    fn rejects_indefinite_input() {
        let a = dense(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            smallest_eig_dense(&a, prec(128), 1e-10, None),
            Err(Error::NotPositiveDefinite { pivot: 1, order: 2 })
        ));
    }

    #[test]
    fn largest_of_diagonal() {
        let k = KernelMatrix::from_dense(dense(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 3.0]]), prec(128));
        let e = largest_eig(&k, 1e-25).unwrap();
        assert!(e.lo <= 3 && e.hi >= 3);
        assert_eq!(trace_bound(&k), 6);
        let one = KernelMatrix::from_dense(dense(&[&[2.5]]), prec(128));
        assert_eq!(largest_eig(&one, 1e-10).unwrap().lo, 2.5);
    }

    #[test]
    fn tolerance_below_resolution_exhausts() {
        let src = sw("0.5", 64);
        let h = hankel(&src.at_precision(prec(200)), 4).unwrap();
        let h64 = crate::moments::HankelMatrix::from_moments(
            h.moments().iter().map(|x| Float::with_val(64, x)).collect(),
            prec(64),
        )
        .unwrap();
        assert!(matches!(smallest_eig(&h64, 1e-40), Err(Error::PrecisionExhausted { .. })));
    }

    #[test]
    fn beta_of_trivial_matrices() {
        let h = HankelMatrix::from_moments(vec![Float::with_val(128, 4)], prec(128)).unwrap();
        let b = beta_from_hankel(&h).unwrap();
        assert_eq!(*b.beta(0, 0), 0.5);

        // s = (1, 0, 1) gives the identity.
        let m: Vec<Float> = [1.0, 0.0, 1.0].iter().map(|&x| Float::with_val(128, x)).collect();
        let b = beta_from_hankel(&HankelMatrix::from_moments(m, prec(128)).unwrap()).unwrap();
        assert_eq!(*b.beta(0, 0), 1);
        assert_eq!(*b.beta(1, 0), 0);
        assert_eq!(*b.beta(1, 1), 1);
        let k = kernel_matrix(&b);
        assert_eq!(*k.entry(0, 0), 1);
        assert_eq!(*k.entry(0, 1), 0);
        assert_eq!(*k.entry(1, 1), 1);
    }

    #[test]
    fn beta_reports_lost_pivot() {
        let m: Vec<Float> = [1.0, 1.0, 1.0].iter().map(|&x| Float::with_val(128, x)).collect();
        let h = HankelMatrix::from_moments(m, prec(128)).unwrap();
        assert!(matches!(beta_from_hankel(&h), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
    }

    #[test]
    fn sw_beta_closed_form() {
        let q = QParam::parse(prec(256), "0.5").unwrap();
        let b00 = sw_beta(0, 0, &q).unwrap();
        let s0 = sw_moment(0, &q).unwrap();
        let expect = Float::with_val(256, s0.sqrt_ref()).recip();
        assert!(Float::with_val(256, &b00 - &expect).abs() < 1e-70);
        for n in 0..8 {
            for k in 0..=n {
                let v = sw_beta(n, k, &q).unwrap();
                assert_eq!(v.is_sign_negative(), (n + k) % 2 == 1, "n={n} k={k}");
            }
        }
        assert!(sw_beta(1, 2, &q).is_err());

        let h = hankel(&sw("0.5", 256), 2).unwrap();
        let b = beta_from_hankel(&h).unwrap();
        let d = Float::with_val(256, b.beta(2, 1) - sw_beta(2, 1, &q).unwrap()).abs();
        assert!(d < 1e-25);
    }

    #[test]
    fn beta_matches_closed_form_n8() {
        let q = QParam::parse(prec(256), "0.5").unwrap();
        let h = hankel(&sw("0.5", 256), 8).unwrap();
        let b = beta_from_hankel(&h).unwrap();
        for n in 0..=8 {
            for k in 0..=n {
                let d = Float::with_val(256, b.beta(n, k) - sw_beta(n, k, &q).unwrap()).abs();
                assert!(d < 1e-25, "n={n} k={k}: {d}");
            }
        }
    }

    #[test]
    fn kernel_diagonal_matches_outer_sum_terms() {
        // K(n, n) = sum_k beta(n, k)^2 is the n-th outer term
        // q^{n+1/2}/(q;q)_n sum_k q^{k(2k+1)} [n k]_q^2.
        let q = QParam::parse(prec(256), "0.5").unwrap();
        let h = hankel(&sw("0.5", 256), 6).unwrap();
        let k = kernel_matrix(&beta_from_hankel(&h).unwrap());
        for n in 0..=6usize {
            let mut inner = Float::new(256);
            for j in 0..=n {
                let mut t = qbinomial(n as u64, j as u64, &q).unwrap().square();
                t *= q.pow((j * (2 * j + 1)) as u32);
                inner += t;
            }
            inner *= q.pow_ratio(2 * n as i64 + 1, 2);
            inner /= qpoch_finite(q.q(), &q, n as u64);
            let d = Float::with_val(256, k.entry(n, n) - &inner).abs();
            assert!(d < 1e-30, "n={n}: {d}");
        }
        let s0 = sw_moment(0, &q).unwrap();
        let d = Float::with_val(256, Float::with_val(256, k.entry(0, 0) * &s0) - 1u32).abs();
        assert!(d < 1e-70);
    }

    #[test]
    fn trace_bound_equals_reciprocal_at_order_one() {
        let src = sw("0.5", 256);
        let h = hankel(&src, 0).unwrap();
        let k = kernel_matrix(&beta_from_hankel(&h).unwrap());
        let lam = smallest_eig(&h, 1e-30).unwrap();
        let d = Float::with_val(256, Float::with_val(256, &trace_bound(&k) * &lam.lo) - 1u32).abs();
        assert!(d < 1e-70);
    }

    #[test]
    fn hamburger_minima_small_cases() {
        let h = HankelMatrix::from_moments(vec![Float::with_val(128, 3)], prec(128)).unwrap();
        assert!((hamburger_mu(&h).unwrap().to_f64() - 3.0).abs() < 1e-30);
        let m: Vec<Float> = [1.0, 0.0, 1.0, 0.0, 2.0].iter().map(|&x| Float::with_val(128, x)).collect();
        let h = HankelMatrix::from_moments(m, prec(128)).unwrap();
        // The form is 1 + v1^2 + 2 v2 + 2 v2^2, minimised at v1 = 0, v2 = -1/2.
        assert!((hamburger_mu(&h).unwrap().to_f64() - 0.5).abs() < 1e-30);

        let src = sw("0.5", 256);
        let mu0 = hamburger_mu_shifted(&src, 0).unwrap();
        let s2 = src.moment(2).unwrap();
        let rel = Float::with_val(256, Float::with_val(256, &mu0 / &s2) - 1u32).abs();
        assert!(rel < 1e-70);
    }

    #[test]
    fn pk_eval_basics() {
        let src = sw("0.5", 256);
        let b = beta_from_hankel(&hankel(&src, 4).unwrap()).unwrap();
        let z = Complex::from_f64(prec(256), 0.3, -1.7);
        let p = pk_eval(&b, &z, 4).unwrap();
        assert_eq!(p[0].re, *b.beta(0, 0));
        assert!(p[0].im.is_zero());
        let zero = Complex::zero(prec(256));
        let p0 = pk_eval(&b, &zero, 4).unwrap();
        for k in 0..=4 {
            assert_eq!(p0[k].re, *b.beta(k, 0));
        }
        assert!(pk_eval(&b, &z, 5).is_err());
    }

    #[test]
    fn recurrence_round_trip_reproduces_moments() {
        let q = QParam::parse(prec(256), "0.5").unwrap();
        let h = hankel(&sw("0.5", 256), 8).unwrap();
        let (diag, off, s0) = recurrence_from_beta(&beta_from_hankel(&h).unwrap());
        for n in 0..=16 {
            let s = crate::moments::moments_from_jacobi(&diag, &off, &s0, n).unwrap();
            let expect = sw_moment(n, &q).unwrap();
            let rel = (Float::with_val(256, &s - &expect) / &expect).abs();
            assert!(rel < 1e-20, "n={n}: {rel}");
        }
    }

    #[test]
    fn report_invariants() {
        let src = sw("0.5", 256);
        let r = spectral_report(&src, 6, 1e-20).unwrap();
        assert!(r.mu >= r.lambda.lo);
        let inv = Float::with_val(256, r.lambda.hi.recip_ref());
        assert!(r.trace_bound >= inv);
    }
}
