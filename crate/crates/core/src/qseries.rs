//! q-Pochhammer symbols, Gaussian binomials, basic hypergeometric series
//! and the Jacobi triple product, each with a certified error bound.
//!
//! Conventions follow Gasper–Rahman: `(a;q)_n = prod_{j<n} (1 - a q^j)` and
//!
//! ```text
//! r+1phi_r(a_1..a_{r+1}; b_1..b_r; q, z) = sum_n (a_1..a_{r+1};q)_n / (q, b_1..b_r;q)_n z^n
//! ```
//!
//! Infinite products and series are cut where an explicit geometric (or
//! logarithmic) majorant of the remainder drops below half the requested
//! tolerance; the other half is reserved for rounding. An evaluation whose
//! rounding estimate alone exceeds that budget fails with
//! [`Error::PrecisionExhausted`].

use rug::float::Round;
use rug::ops::{AddAssignRound, DivAssignRound, MulAssignRound, Pow, SubAssignRound};
use rug::Float;

use crate::arith::{
    err_f64, err_mul, err_sum, err_up, err_zero, parse_real, Complex, Precision, SeriesValue,
    ERR_BITS,
};
use crate::error::{Error, Result};

const MAX_TERMS: usize = 1_000_000;
/// Terms tried before a |z| >= 1 series that has not terminated is rejected.
const MAX_DIVERGENT_PROBE: usize = 10_000;

#[derive(Clone, Debug)]
enum QSource {
    Decimal(String),
    KWeight(String),
    Value(Float),
}

/// The base `q` of a q-family, `0 < q < 1`, held at a working precision.
///
/// The value can be specified directly or through the log-normal weight
/// parameter `k` with `q = exp(-1/(2k^2))`. Either way the original input is
/// kept so that [`QParam::at_precision`] can re-derive `q` without inheriting
/// rounding from a lower precision.
#[derive(Clone, Debug)]
pub struct QParam {
    q: Float,
    k_weight: Option<Float>,
    source: QSource,
}

impl QParam {
    /// `q` from a decimal string such as `"0.5"`.
    pub fn parse(prec: Precision, q: &str) -> Result<Self> {
        let v = parse_real(prec, q)?;
        Self::checked(v, None, QSource::Decimal(q.trim().to_string()))
    }

    /// `q` from an `f64`, taken as the decimal it prints as.
    pub fn new(prec: Precision, q: f64) -> Result<Self> {
        Self::parse(prec, &format!("{q}"))
    }

    /// Uses `q` exactly as given.
    pub fn from_float(q: Float) -> Result<Self> {
        let src = QSource::Value(q.clone());
        Self::checked(q, None, src)
    }

    /// `q = exp(-1/(2k^2))` for the weight parameter `k > 0`.
    pub fn from_k_weight(prec: Precision, k: &str) -> Result<Self> {
        let kv = parse_real(prec, k)?;
        if kv <= 0 {
            return Err(Error::invalid(format!("k-weight must be positive, got {k}")));
        }
        let q = q_from_k(prec, &kv);
        Self::checked(q, Some(kv), QSource::KWeight(k.trim().to_string()))
    }

    fn checked(q: Float, k_weight: Option<Float>, source: QSource) -> Result<Self> {
        if !(q > 0 && q < 1) {
            return Err(Error::invalid(format!(
                "q must lie in (0, 1), got {}",
                q.to_string_radix(10, Some(12))
            )));
        }
        Ok(QParam { q, k_weight, source })
    }

    pub fn q(&self) -> &Float {
        &self.q
    }

    pub fn k_weight(&self) -> Option<&Float> {
        self.k_weight.as_ref()
    }

    pub fn prec(&self) -> Precision {
        Precision::new(self.q.prec()).unwrap_or(Precision::DEFAULT)
    }

    pub fn to_f64(&self) -> f64 {
        self.q.to_f64()
    }

    /// Re-derives `q` at another precision from the original input.
    pub fn at_precision(&self, prec: Precision) -> QParam {
        let b = prec.bits();
        let (q, k_weight) = match &self.source {
            QSource::Decimal(s) => (
                Float::with_val(b, Float::parse(s).expect("validated at construction")),
                None,
            ),
            QSource::KWeight(s) => {
                let k = Float::with_val(b, Float::parse(s).expect("validated at construction"));
                (q_from_k(prec, &k), Some(k))
            }
            QSource::Value(v) => (Float::with_val(b, v), None),
        };
        QParam {
            q,
            k_weight,
            source: self.source.clone(),
        }
    }

    /// `q^n` at working precision.
    pub fn pow(&self, n: u32) -> Float {
        Float::with_val(self.q.prec(), (&self.q).pow(n))
    }

    /// `q^x` for a real exponent.
    pub fn powf(&self, x: &Float) -> Float {
        Float::with_val(self.q.prec(), (&self.q).pow(x))
    }

    /// `q^(num/den)` for a rational exponent.
    pub fn pow_ratio(&self, num: i64, den: u32) -> Float {
        let mut e = Float::with_val(self.q.prec(), num);
        e /= den;
        self.powf(&e)
    }
}

fn q_from_k(prec: Precision, k: &Float) -> Float {
    let mut e = Float::with_val(prec.bits(), k.square_ref());
    e *= 2;
    e.recip_mut();
    (-e).exp()
}

/// Order `n` of a q-Pochhammer symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PochOrder {
    Finite(u64),
    Infinite,
}

/// Accumulates a first-order rounding estimate `eps * sum_i c_i |x_i|`.
pub(crate) struct RoundingTally {
    eps: Float,
    acc: Float,
}

impl RoundingTally {
    pub(crate) fn new(prec: Precision) -> Self {
        RoundingTally {
            eps: prec.epsilon(),
            acc: err_zero(),
        }
    }

    pub(crate) fn add(&mut self, count: f64, magnitude: &Float) {
        let mut m = err_up(magnitude);
        m *= count;
        self.acc.add_assign_round(m, Round::Up);
    }

    pub(crate) fn total(&self) -> Float {
        err_mul(&self.eps, &self.acc)
    }
}

pub(crate) fn half(tol: f64) -> Float {
    err_f64(tol / 2.0)
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

pub(crate) fn ensure_rounding(prec: Precision, rounding: &Float, tol: f64, what: &str) -> Result<()> {
    if *rounding > half(tol) {
        return Err(Error::PrecisionExhausted {
            bits: prec.bits(),
            required: None,
            reason: format!(
                "{what}: rounding error ~{} exceeds tolerance {tol:e}",
                rounding.to_string_radix(10, Some(4))
            ),
        });
    }
    Ok(())
}

/// `(e^t - 1)` for a nonnegative error-precision `t`, rounded up.
pub(crate) fn expm1_up(t: &Float) -> Float {
    let (e, _) = Float::with_val_round(ERR_BITS, t.exp_m1_ref(), Round::Up);
    e
}

/// Bound on `|log prod_{j>=m}(1 - a q^j)|` given `|a| q^m < 1`:
/// `|a| q^m / ((1 - q)(1 - |a| q^m))`.
fn log_tail(abs_a_qm: &Float, q: &Float) -> Option<Float> {
    let x = err_up(abs_a_qm);
    if x >= 1 {
        return None;
    }
    let mut den = Float::with_val(ERR_BITS, 1 - q.clone());
    den *= Float::with_val(ERR_BITS, 1 - x.clone());
    let (t, _) = Float::with_val_round(ERR_BITS, &x / &den, Round::Up);
    Some(t)
}

/// `(a;q)_n` for complex `a`.
pub fn qpochhammer(a: &Complex, q: &QParam, n: PochOrder, tol: f64) -> Result<SeriesValue<Complex>> {
    check_tol(tol)?;
    let prec = q.prec();
    let qv = q.q();
    let abs_a = a.abs();
    let mut prod = Complex::one(prec);
    let mut aqj = a.clone(); // a q^j
    let mut tally_count = 0.0f64;
    let limit = match n {
        PochOrder::Finite(m) => m as usize,
        PochOrder::Infinite => MAX_TERMS,
    };
    let mut tail = err_zero();
    let mut j = 0usize;
    while j < limit {
        if n == PochOrder::Infinite {
            let mag = Float::with_val(ERR_BITS, &abs_a * qv.clone().pow(j as u32));
            if let Some(t) = log_tail(&mag, qv) {
                let bound = err_mul(&prod.abs(), &expm1_up(&t));
                if bound <= half(tol) {
                    tail = bound;
                    break;
                }
            }
        }
        let mut factor = Complex::one(prec);
        factor.re -= &aqj.re;
        factor.im = Float::with_val(prec.bits(), -&aqj.im);
        if factor.is_zero() {
            if n == PochOrder::Infinite {
                return Err(Error::invalid(format!(
                    "(a;q)_inf vanishes: a = q^-{j} exactly"
                )));
            }
            return Ok(SeriesValue::exact(Complex::zero(prec)));
        }
        let fa = factor.abs();
        let ratio = Float::with_val(ERR_BITS, &(aqj.abs() + 1u32) / &fa);
        tally_count += 4.0 + 2.0 * ratio.to_f64().min(1e300);
        prod = &prod * &factor;
        j += 1;
        aqj = a.scale(&q.pow(j as u32));
    }
    if n == PochOrder::Infinite && j >= limit {
        return Err(Error::NonConvergence(
            "(a;q)_inf tail bound not reached within iteration cap".into(),
        ));
    }
    let mut tally = RoundingTally::new(prec);
    tally.add(tally_count, &prod.abs());
    let rounding = tally.total();
    ensure_rounding(prec, &rounding, tol, "q-Pochhammer")?;
    Ok(SeriesValue::new(prod, err_sum([&tail, &rounding])))
}

/// `(a;q)_n` for real `a`.
pub fn qpochhammer_real(a: &Float, q: &QParam, n: PochOrder, tol: f64) -> Result<SeriesValue<Float>> {
    check_tol(tol)?;
    let prec = q.prec();
    let qv = q.q();
    let abs_a = Float::with_val(prec.bits(), &*a.as_abs());
    let mut prod = Float::with_val(prec.bits(), 1);
    let mut aqj = Float::with_val(prec.bits(), a);
    let mut qj = Float::with_val(prec.bits(), 1);
    let mut count = 0.0f64;
    let limit = match n {
        PochOrder::Finite(m) => m as usize,
        PochOrder::Infinite => MAX_TERMS,
    };
    let mut tail = err_zero();
    let mut j = 0usize;
    while j < limit {
        if n == PochOrder::Infinite {
            let mag = Float::with_val(ERR_BITS, &abs_a * &qj);
            if let Some(t) = log_tail(&mag, qv) {
                let bound = err_mul(&prod, &expm1_up(&t));
                if bound <= half(tol) {
                    tail = bound;
                    break;
                }
            }
        }
        let factor = Float::with_val(prec.bits(), 1 - aqj.clone());
        if factor.is_zero() {
            if n == PochOrder::Infinite {
                return Err(Error::invalid(format!(
                    "(a;q)_inf vanishes: a = q^-{j} exactly"
                )));
            }
            return Ok(SeriesValue::exact_real(Float::new(prec.bits())));
        }
        let ratio = Float::with_val(ERR_BITS, &(Float::with_val(ERR_BITS, &*aqj.as_abs()) + 1u32) / &factor);
        count += 2.0 + 2.0 * ratio.to_f64().abs().min(1e300);
        prod *= &factor;
        j += 1;
        qj = q.pow(j as u32);
        aqj = Float::with_val(prec.bits(), a * &qj);
    }
    if n == PochOrder::Infinite && j >= limit {
        return Err(Error::NonConvergence(
            "(a;q)_inf tail bound not reached within iteration cap".into(),
        ));
    }
    let mut tally = RoundingTally::new(prec);
    tally.add(count, &prod);
    let rounding = tally.total();
    ensure_rounding(prec, &rounding, tol, "q-Pochhammer")?;
    Ok(SeriesValue::new(prod, err_sum([&tail, &rounding])))
}

/// Euler's function `(q;q)_inf`.
pub fn euler(q: &QParam, tol: f64) -> Result<SeriesValue<Float>> {
    qpochhammer_real(q.q(), q, PochOrder::Infinite, tol)
}

/// Finite `(a;q)_n` for real `a`; exact up to rounding.
pub fn qpoch_finite(a: &Float, q: &QParam, n: u64) -> Float {
    let mut prod = Float::with_val(q.prec().bits(), 1);
    let mut aqj = Float::with_val(q.prec().bits(), a);
    for _ in 0..n {
        prod *= Float::with_val(q.prec().bits(), 1 - aqj.clone());
        aqj *= q.q();
    }
    prod
}

/// Gaussian binomial `[n k]_q` as a product of positive ratios.
pub fn qbinomial(n: u64, k: u64, q: &QParam) -> Result<Float> {
    if k > n {
        return Err(Error::invalid(format!("q-binomial needs k <= n, got n={n}, k={k}")));
    }
    let k = k.min(n - k);
    let prec = q.prec().bits();
    let mut r = Float::with_val(prec, 1);
    for i in 1..=k {
        let num = Float::with_val(prec, 1 - q.pow((n - k + i) as u32));
        let den = Float::with_val(prec, 1 - q.pow(i as u32));
        r *= num;
        r /= den;
    }
    Ok(r)
}

/// Basic hypergeometric series `r+1 phi r(num; den; q, z)`.
///
/// The remainder after term `n` is bounded by `|t_n| r_n / (1 - r_n)` with
/// `r_n = |z| prod(1 + |a_i| q^n) / (prod(1 - |b_i| q^n) (1 - q^(n+1)))`,
/// which dominates every later term ratio. A term that is exactly zero means
/// a numerator parameter hit `q^-m` and the series has terminated.
pub fn phi_series(
    num: &[Complex],
    den: &[Complex],
    q: &QParam,
    z: &Complex,
    tol: f64,
) -> Result<SeriesValue<Complex>> {
    check_tol(tol)?;
    if num.len() != den.len() + 1 {
        return Err(Error::invalid(format!(
            "r+1phi_r needs one more numerator than denominator parameter, got {} and {}",
            num.len(),
            den.len()
        )));
    }
    let prec = q.prec();
    let qv = q.q();
    let abs_z = err_up(&z.abs());
    let convergent = abs_z < 1;
    let abs_num: Vec<Float> = num.iter().map(|a| err_up(&a.abs())).collect();
    let abs_den: Vec<Float> = den.iter().map(|b| err_up(&b.abs())).collect();

    let mut term = Complex::one(prec);
    let mut sum = Complex::one(prec);
    let mut tally = RoundingTally::new(prec);
    let mut term_count = 1.0f64;
    let cap = if convergent { MAX_TERMS } else { MAX_DIVERGENT_PROBE };
    let mut qn = Float::with_val(prec.bits(), 1);
    let mut tail = err_zero();
    let mut n = 0usize;
    loop {
        if n >= cap {
            return Err(if convergent {
                Error::NonConvergence("phi series tail majorant not established".into())
            } else {
                Error::invalid("phi series with |z| >= 1 does not terminate")
            });
        }
        // ratio t_{n+1}/t_n
        let mut ratio = z.clone();
        for a in num {
            let f = &Complex::one(prec) - &a.scale(&qn);
            ratio = &ratio * &f;
        }
        let mut denom = Complex::one(prec);
        for b in den {
            let f = &Complex::one(prec) - &b.scale(&qn);
            if f.is_zero() {
                return Err(Error::invalid(format!(
                    "denominator parameter makes (b;q)_{} vanish",
                    n + 1
                )));
            }
            denom = &denom * &f;
        }
        let qn1 = Float::with_val(prec.bits(), &qn * qv);
        denom = denom.scale(&Float::with_val(prec.bits(), 1 - qn1.clone()));
        if ratio.is_zero() {
            break;
        }
        if convergent {
            // Majorant for all ratios from index n on.
            let qn_e = Float::with_val(ERR_BITS, &qn);
            let mut r = abs_z.clone();
            for a in &abs_num {
                r *= Float::with_val(ERR_BITS, 1 + Float::with_val(ERR_BITS, a * &qn_e));
            }
            let mut dmin = Float::with_val(ERR_BITS, 1 - Float::with_val(ERR_BITS, &qn_e * qv));
            for b in &abs_den {
                dmin *= Float::with_val(ERR_BITS, 1 - Float::with_val(ERR_BITS, b * &qn_e));
            }
            if dmin > 0 {
                r /= dmin;
                if r < 1 {
                    let mut bound = err_up(&term.abs());
                    bound *= &r;
                    bound /= Float::with_val(ERR_BITS, 1 - r.clone());
                    if bound <= half(tol) {
                        tail = bound;
                        break;
                    }
                }
            }
        }
        term = &(&term * &ratio).div(&denom) * &Complex::one(prec);
        term_count += 4.0 * (num.len() + den.len()) as f64 + 6.0;
        tally.add(term_count, &term.abs());
        sum = &sum + &term;
        qn = qn1;
        n += 1;
    }
    tally.add(n as f64 + 1.0, &sum.abs());
    let rounding = tally.total();
    ensure_rounding(prec, &rounding, tol, "phi series")?;
    Ok(SeriesValue::new(sum, err_sum([&tail, &rounding])))
}

/// Laurent coefficient `c_k = (-1)^k [q^{k(k+1)/2} + q^{k(k-1)/2}]` of
/// `(q, z, 1/z; q)_inf`. Symmetric: `c_k = c_{-k}`.
pub fn theta_coefficient(k: i64, q: &QParam) -> Float {
    let a = k.unsigned_abs();
    let e1 = (a * (a + 1) / 2) as u32;
    let e2 = (a * a.saturating_sub(1) / 2) as u32;
    let mut c = q.pow(e1);
    c += q.pow(e2);
    if a % 2 == 1 {
        c = -c;
    }
    c
}

/// How [`triple_product`] evaluates `j(z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TripleProductMode {
    /// `(q;q)_inf (z;q)_inf (1/z;q)_inf`.
    Product,
    /// `sum_k c_k z^k`.
    Laurent,
}

/// `j(z) = (q, z, 1/z; q)_inf`. At `z = 1` the product has a zero factor
/// and the result is an exact zero.
pub fn triple_product(
    z: &Complex,
    q: &QParam,
    tol: f64,
    mode: TripleProductMode,
) -> Result<SeriesValue<Complex>> {
    check_tol(tol)?;
    if z.is_zero() {
        return Err(Error::invalid("triple product needs z != 0"));
    }
    let prec = q.prec();
    match mode {
        TripleProductMode::Product => {
            if z.re == 1 && z.im.is_zero() {
                return Ok(SeriesValue::exact(Complex::zero(prec)));
            }
            let zi = z.recip();
            let mut t = tol / 8.0;
            for _ in 0..8 {
                let e = euler(q, t)?;
                let a = qpochhammer(z, q, PochOrder::Infinite, t)?;
                let b = qpochhammer(&zi, q, PochOrder::Infinite, t)?;
                let val = (&a.value * &b.value).scale(&e.value);
                let err = product_err(&[
                    (e.value.clone(), e.err.clone()),
                    (a.value.abs(), a.err.clone()),
                    (b.value.abs(), b.err.clone()),
                ]);
                let round = err_mul(&prec.epsilon(), &Float::with_val(ERR_BITS, val.abs() * 8u32));
                let err = err_sum([&err, &round]);
                if err <= err_f64(tol) {
                    return Ok(SeriesValue::new(val, err));
                }
                t /= 1024.0;
            }
            Err(Error::exhausted(prec.bits(), "triple product error budget not met"))
        }
        TripleProductMode::Laurent => {
            let r = z.abs();
            let rmax = err_up(&if r >= 1 { r } else { r.recip() });
            let zi = z.recip();
            let mut sum = Complex::from_real(theta_coefficient(0, q));
            let mut zk = z.clone();
            let mut zik = zi.clone();
            let mut tally = RoundingTally::new(prec);
            let mut k: u32 = 1;
            let tail;
            loop {
                // Remaining |k'| >= k: |c_k'| (|z|^k' + |z|^-k') <= 4 q^{k'(k'-1)/2} rmax^k'
                // with bound ratio rmax q^k' <= rmax q^k.
                let qe = Float::with_val(ERR_BITS, q.q());
                let ratio = Float::with_val(ERR_BITS, &rmax * qe.clone().pow(k));
                if ratio < 1 {
                    let mut b = Float::with_val(ERR_BITS, qe.pow(k * (k - 1) / 2));
                    b *= Float::with_val(ERR_BITS, (&rmax).pow(k));
                    b *= 4u32;
                    b /= Float::with_val(ERR_BITS, 1 - ratio);
                    if b <= half(tol) {
                        tail = b;
                        break;
                    }
                }
                if k as usize > MAX_TERMS {
                    return Err(Error::NonConvergence("Laurent series of j(z)".into()));
                }
                let c = theta_coefficient(k as i64, q);
                let pair = (&zk + &zik).scale(&c);
                tally.add(4.0 * k as f64, &pair.abs());
                sum = &sum + &pair;
                zk = &zk * z;
                zik = &zik * &zi;
                k += 1;
            }
            tally.add(k as f64, &sum.abs());
            let rounding = tally.total();
            ensure_rounding(prec, &rounding, tol, "triple product Laurent sum")?;
            Ok(SeriesValue::new(sum, err_sum([&tail, &rounding])))
        }
    }
}

/// Error bound of a product of approximations `(|x_i|, e_i)`, from the
/// telescoped difference: `sum_i e_i prod_{j != i} (|x_j| + e_j)`.
pub fn product_err(factors: &[(Float, Float)]) -> Float {
    let mut total = err_zero();
    for (i, (_, ei)) in factors.iter().enumerate() {
        let mut t = ei.clone();
        for (j, (xj, ej)) in factors.iter().enumerate() {
            if i != j {
                let mut m = err_up(xj);
                m.add_assign_round(ej, Round::Up);
                t.mul_assign_round(&m, Round::Up);
            }
        }
        total.add_assign_round(&t, Round::Up);
    }
    total
}

/// Both sides of
///
/// ```text
/// sum_{n>=k} w^n/(q;q)_n [n k]_q^2
///     = 1/(w;q)_inf sum_{j=0}^k (w;q)_j w^{2k-j} / ((q;q)_j (q;q)_{k-j}^2)
/// ```
///
/// returned as `(lhs, rhs)`. The identity holds for `0 < w < 1`; callers
/// compare `|lhs - rhs|` against `lhs.err + rhs.err`.
pub fn identity_check_36(
    k: u64,
    q: &QParam,
    omega: &Float,
    tol: f64,
) -> Result<(SeriesValue<Float>, SeriesValue<Float>)> {
    check_tol(tol)?;
    if !(*omega > 0 && *omega < 1) {
        return Err(Error::invalid("omega must lie in (0, 1)"));
    }
    let prec = q.prec();
    let bits = prec.bits();
    let qv = q.q();
    let w = Float::with_val(bits, omega);

    // LHS, starting at n = k: t_k = w^k / (q;q)_k.
    let mut term = Float::with_val(bits, (&w).pow(k as u32));
    term /= qpoch_finite(qv, q, k);
    let mut sum = term.clone();
    let mut tally = RoundingTally::new(prec);
    tally.add(3.0 * k as f64 + 2.0, &term);
    let mut n = k;
    let tail;
    loop {
        // ratio t_{n+1}/t_n = w (1 - q^{n+1}) / (1 - q^{n+1-k})^2, majorised by
        // w / (1 - q^{n+1-k})^2 for every later index.
        let d = Float::with_val(bits, 1 - q.pow((n + 1 - k) as u32));
        let mut r = Float::with_val(ERR_BITS, &w);
        r /= Float::with_val(ERR_BITS, d.square_ref());
        r.mul_assign_round(1.000001f64, Round::Up);
        if r < 1 {
            let mut b = err_up(&term);
            b *= &r;
            b /= Float::with_val(ERR_BITS, 1 - r.clone());
            if b <= half(tol / 2.0) {
                tail = b;
                break;
            }
        }
        if (n - k) as usize > MAX_TERMS {
            return Err(Error::NonConvergence("identity LHS".into()));
        }
        let mut ratio = Float::with_val(bits, 1 - q.pow((n + 1) as u32));
        ratio *= &w;
        ratio /= d.square();
        term *= ratio;
        tally.add(6.0 * (n - k + 1) as f64 + 3.0 * k as f64, &term);
        sum += &term;
        n += 1;
    }
    tally.add((n - k + 1) as f64, &sum);
    let lhs_round = tally.total();
    ensure_rounding(prec, &lhs_round, tol / 2.0, "identity LHS")?;
    let lhs = SeriesValue::new(sum, err_sum([&tail, &lhs_round]));

    // RHS: finite sum over j times 1/(w;q)_inf.
    let mut fin = Float::new(bits);
    let mut tally = RoundingTally::new(prec);
    for j in 0..=k {
        let mut t = qpoch_finite(&w, q, j);
        t *= Float::with_val(bits, (&w).pow((2 * k - j) as u32));
        t /= qpoch_finite(qv, q, j);
        t /= qpoch_finite(qv, q, k - j).square();
        tally.add(4.0 * k as f64 + 8.0, &t);
        fin += t;
    }
    tally.add(k as f64 + 1.0, &fin);
    let mut inner_tol = tol / 4.0;
    let prod = loop {
        let p = qpochhammer_real(&w, q, PochOrder::Infinite, inner_tol)?;
        // 1/(P +- e) deviates from 1/P by at most e / (P (P - e)).
        let mut lower = Float::with_val(ERR_BITS, &p.value);
        lower.sub_assign_round(&p.err, Round::Down);
        if lower > 0 {
            let mut rel = p.err.clone();
            rel.div_assign_round(Float::with_val(ERR_BITS, &p.value * &lower), Round::Up);
            if err_mul(&rel, &fin) <= half(tol / 2.0) || inner_tol < 1e-300 {
                break (p, rel);
            }
        }
        inner_tol /= 1e6;
    };
    let (p, rel) = prod;
    let value = Float::with_val(bits, &fin / &p.value);
    let rhs_err = err_sum([
        &err_mul(&rel, &fin),
        &err_mul(&tally.total(), &Float::with_val(ERR_BITS, &fin / &p.value).abs()),
        &tally.total(),
    ]);
    ensure_rounding(prec, &tally.total(), tol / 2.0, "identity RHS")?;
    Ok((lhs, SeriesValue::new(value, rhs_err)))
}
