//! The circle constant `rho_0 = (1/2pi) int_0^{2pi} sum_k |p_k(e^{it})|^2 dt`
//! for four indeterminate families, each by two independent routes, and the
//! lower bound `1/rho_0` it yields for the smallest Hankel eigenvalues.
//!
//! | family | series route | second route |
//! |---|---|---|
//! | Stieltjes–Wigert | double sum with inner `2phi1` | single sum of `q^j/(q;q)_j^2` partial sums |
//! | Al-Salam–Carlitz | `sum_n I_n (aq;q)_n/(q;q)_n (q/a)^n` | quadrature of a `3phi2` kernel |
//! | quartic Freud | anti-diagonal double sum | quadrature of the closed-form kernel |
//! | q^{-1}-Hermite | expansion of a product in `cos^2 t` | quadrature of the product kernel |
//!
//! Circle integrals use the periodic trapezoid rule with grid doubling;
//! every integrand here is even in `t`, so only `[0, pi]` is sampled.

use rayon::prelude::*;
use rug::float::{Constant, Round};
use rug::ops::{AddAssignRound, DivAssignRound};
use rug::Float;

use crate::arith::{err_f64, err_mul, err_sum, err_up, err_zero, Complex, Precision, SeriesValue, ERR_BITS};
use crate::error::{Error, Result};
use crate::qseries::{
    check_tol, ensure_rounding, euler, expm1_up, phi_series, qpochhammer, qpochhammer_real, PochOrder,
    QParam, RoundingTally,
};

/// Series values `I_n` up to this index are taken from the theta-sum form;
/// larger indices come from quadrature.
pub const N_SWITCH: u32 = 8;
/// Ceiling on the automatically raised precision of the theta-sum form.
pub const ASC_MAX_BITS: u32 = 4096;
const MAX_TERMS: usize = 100_000;
const FIRST_GRID: usize = 16;
const MAX_GRID: usize = 1 << 15;

/// A value of `rho_0` with its error bound and the route that produced it.
#[derive(Clone, Debug)]
pub struct RhoValue {
    pub value: Float,
    pub err: Float,
    pub route: &'static str,
}

impl RhoValue {
    /// Whether two values agree within their summed error bounds.
    pub fn agrees_with(&self, other: &RhoValue) -> bool {
        let d = Float::with_val(self.value.prec().max(other.value.prec()), &self.value - &other.value);
        err_up(&d) <= err_sum([&self.err, &other.err])
    }
}

/// `sum_k |p_k(e^{it})|^2` at one angle.
#[derive(Clone, Debug)]
pub struct CircleDensitySample {
    pub theta: Float,
    pub value: Float,
    pub err: Float,
}

/// Al-Salam–Carlitz parameters, `0 < q < 1` and `q < a < 1/q`.
#[derive(Clone, Debug)]
pub struct ASCParam {
    q: QParam,
    a: Float,
}

impl ASCParam {
    pub fn new(q: QParam, a: Float) -> Result<Self> {
        let upper = Float::with_val(q.prec().bits(), q.q().recip_ref());
        if !(a > *q.q() && a < upper) {
            return Err(Error::invalid(format!(
                "Al-Salam–Carlitz parameter a = {} must lie in (q, 1/q)",
                a.to_f64()
            )));
        }
        Ok(ASCParam { q, a })
    }

    pub fn q(&self) -> &QParam {
        &self.q
    }

    pub fn a(&self) -> &Float {
        &self.a
    }
}

/// `K_0 = Gamma(1/4) Gamma(5/4) / sqrt(pi)` for the quartic Freud weight.
#[derive(Clone, Debug)]
pub struct FreudConstants {
    pub k0: Float,
}

impl FreudConstants {
    pub fn new(prec: Precision) -> Self {
        let bits = prec.bits() + 16;
        let g1 = Float::with_val(bits, 0.25).gamma();
        let g5 = Float::with_val(bits, 1.25).gamma();
        let mut k0 = g1 * g5;
        k0 /= Float::with_val(bits, Constant::Pi).sqrt();
        FreudConstants { k0: Float::with_val(prec.bits(), k0) }
    }
}

/// `l = 1/(rho + err)`, rounded down: a certified lower bound for
/// `lim lambda_N`.
pub fn lower_bound(rho: &RhoValue) -> Result<Float> {
    if rho.value <= 0 {
        return Err(Error::invalid("rho_0 must be positive"));
    }
    let bits = rho.value.prec();
    let mut den = rho.value.clone();
    den.add_assign_round(&rho.err, Round::Up);
    let mut l = Float::with_val(bits, 1);
    l.div_assign_round(&den, Round::Down);
    Ok(l)
}

fn f64_of(x: &Float) -> f64 {
    x.to_f64()
}

/// `(q;q)_inf` with relative error at most `rel`.
fn euler_rel(q: &QParam, rel: f64) -> Result<SeriesValue<Float>> {
    // (q;q)_inf can be tiny as q -> 1; tighten until its size is resolved.
    let mut tol = 1e-3;
    let lo = loop {
        let rough = euler(q, tol)?;
        let lo = f64_of(&rough.value) - tol;
        if lo >= f64_of(&rough.value) / 2.0 {
            break lo;
        }
        tol *= 1e-12;
        if tol < 1e-290 {
            return Err(Error::exhausted(q.prec().bits(), "Euler function too small to resolve"));
        }
    };
    euler(q, rel * lo)
}

/// `x / d` where `x` carries an absolute bound and `d` a relative one.
fn quotient(x: &SeriesValue<Float>, d: &SeriesValue<Float>) -> SeriesValue<Float> {
    let bits = x.value.prec();
    let value = Float::with_val(bits, &x.value / &d.value);
    let rel_d = {
        let mut r = err_up(&d.err);
        r /= err_up(&d.value);
        r
    };
    let d_lo = {
        let mut one_minus = Float::with_val(ERR_BITS, 1);
        one_minus -= &rel_d;
        one_minus
    };
    // |x/d - x'/d'| <= (e_x + |x| r_d) / (1 - r_d)
    let mut e = err_sum([&x.err, &err_mul(&x.value, &rel_d)]);
    e /= err_up(&d.value);
    e /= d_lo;
    let mut e = err_up(&e);
    let eps = Precision::new(bits).map(Precision::epsilon).unwrap_or_else(|_| err_f64(f64::EPSILON));
    e.add_assign_round(err_mul(&value, &eps), Round::Up);
    SeriesValue::new(value, e)
}

fn half_tol(tol: f64) -> Float {
    err_f64(tol / 2.0)
}

// --- periodic trapezoid rule -------------------------------------------------

/// `(1/pi) int_0^pi f(t) dt` for integrands that are even and 2pi-periodic,
/// i.e. the mean of `f` over the whole circle. Each evaluation returns
/// several components with their own error bounds; the grid is doubled
/// until every component moves by at most `tol/2`.
fn circle_mean<F>(f: F, tol: f64, prec: Precision) -> Result<Vec<SeriesValue<Float>>>
where
    F: Fn(&Float) -> Result<Vec<SeriesValue<Float>>> + Sync,
{
    check_tol(tol)?;
    let bits = prec.bits();
    let pi = Float::with_val(bits, Constant::Pi);
    let eval = |num: usize, den: usize| -> Result<Vec<SeriesValue<Float>>> {
        let mut t = Float::with_val(bits, &pi * num as u32);
        t /= den as u32;
        f(&t)
    };
    let ends = [eval(0, 1)?, eval(1, 1)?];
    let dim = ends[0].len();
    let mut max_err: Vec<Float> = (0..dim).map(|_| err_zero()).collect();
    let mut boundary: Vec<Float> = vec![Float::new(bits); dim];
    for e in &ends {
        for (i, c) in e.iter().enumerate() {
            boundary[i] += &c.value;
            max_err[i] = max_err[i].clone().max(&c.err);
        }
    }
    for b in &mut boundary {
        *b /= 2;
    }
    let mut interior: Vec<Float> = vec![Float::new(bits); dim];
    let absorb = |interior: &mut Vec<Float>, max_err: &mut Vec<Float>, vals: Vec<Vec<SeriesValue<Float>>>| {
        for v in vals {
            for (i, c) in v.into_iter().enumerate() {
                interior[i] += &c.value;
                if c.err > max_err[i] {
                    max_err[i] = c.err;
                }
            }
        }
    };
    let vals = (1..FIRST_GRID)
        .into_par_iter()
        .map(|j| eval(j, FIRST_GRID))
        .collect::<Result<Vec<_>>>()?;
    absorb(&mut interior, &mut max_err, vals);
    let mean = |n: usize, interior: &[Float]| -> Vec<Float> {
        interior
            .iter()
            .zip(&boundary)
            .map(|(s, b)| Float::with_val(bits, s + b) / n as u32)
            .collect()
    };
    let mut n = FIRST_GRID;
    let mut prev = mean(n, &interior);
    let mut levels = 0;
    loop {
        if n >= MAX_GRID {
            return Err(Error::NonConvergence(format!(
                "trapezoid rule not converged with {n} intervals"
            )));
        }
        let vals = (0..n)
            .into_par_iter()
            .map(|i| eval(2 * i + 1, 2 * n))
            .collect::<Result<Vec<_>>>()?;
        absorb(&mut interior, &mut max_err, vals);
        n *= 2;
        levels += 1;
        let cur = mean(n, &interior);
        let diffs: Vec<Float> = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| err_up(&Float::with_val(bits, a - b)))
            .collect();
        if levels >= 2 && diffs.iter().all(|d| *d <= half_tol(tol)) {
            let eps = prec.epsilon();
            return Ok(cur
                .into_iter()
                .zip(diffs)
                .zip(max_err)
                .map(|((v, d), e)| {
                    let rounding = err_mul(&eps, &err_mul(&v, &err_f64(4.0 * (levels as f64 + 8.0))));
                    let err = err_sum([&d, &e, &rounding]);
                    SeriesValue::new(v, err)
                })
                .collect());
        }
        prev = cur;
    }
}

// --- Stieltjes–Wigert ----------------------------------------------------------

/// `q^{2(k+1/2)^2}`.
fn gauss_weight(q: &QParam, k: u64) -> Float {
    q.pow_ratio((4 * k * k + 4 * k + 1) as i64, 2)
}

/// Bound on `sum_{k>=K} q^{2(k+1/2)^2}`; consecutive ratios are `q^{4k+4}`.
fn gauss_tail(q: &QParam, k: u64) -> Float {
    let mut t = err_up(&gauss_weight(q, k));
    t /= Float::with_val(ERR_BITS, 1 - q.pow((4 * k + 4) as u32));
    err_up(&t)
}

/// `rho_0 = sum_k q^{2(k+1/2)^2}/(q;q)_k * 2phi1(0, q^{k+1}; q; q, q)`.
pub fn rho0_sw_direct(q: &QParam, tol: f64) -> Result<RhoValue> {
    check_tol(tol)?;
    let prec = q.prec();
    let e = euler_rel(q, 1e-6)?;
    let e_lo = f64_of(&e.value) * (1.0 - 1e-6);
    let qf = q.to_f64();
    // Each inner series is at most sum_j q^j/(q;q)_j^2 <= 1/(E^2 (1-q)),
    // and 1/(q;q)_k <= 1/E.
    let inner_max = 1.0 / (e_lo * e_lo * (1.0 - qf));
    let weight_sum = gauss_tail(q, 0).to_f64() / e_lo;
    let inner_tol = tol / (4.0 * weight_sum.max(1.0));
    let zero = Complex::zero(prec);
    let den = [Complex::from_real(q.q().clone())];
    let z = Complex::from_real(q.q().clone());

    let mut sum = Float::new(prec.bits());
    let mut inner_err = err_zero();
    let mut tally = RoundingTally::new(prec);
    let mut poch = Float::with_val(prec.bits(), 1);
    let mut k = 0u64;
    let tail = loop {
        if k as usize > MAX_TERMS {
            return Err(Error::NonConvergence("outer Stieltjes–Wigert sum".into()));
        }
        let mut t = gauss_tail(q, k);
        t *= inner_max / e_lo;
        if t <= err_f64(tol / 4.0) {
            break t;
        }
        if k > 0 {
            poch *= Float::with_val(prec.bits(), 1 - q.pow(k as u32));
        }
        let num = [zero.clone(), Complex::from_real(q.pow(k as u32 + 1))];
        let phi = phi_series(&num, &den, q, &z, inner_tol)?;
        let mut w = gauss_weight(q, k);
        w /= &poch;
        inner_err = err_sum([&inner_err, &err_mul(&w, &phi.err)]);
        let term = Float::with_val(prec.bits(), &w * &phi.value.re);
        tally.add(k as f64 + 8.0, &term);
        sum += term;
        k += 1;
    };
    tally.add(k as f64 + 1.0, &sum);
    let rounding = tally.total();
    ensure_rounding(prec, &rounding, tol, "Stieltjes–Wigert direct sum")?;
    Ok(RhoValue {
        value: sum,
        err: err_sum([&tail, &inner_err, &rounding]),
        route: "sw-direct",
    })
}

/// `rho_0 = (1/(q;q)_inf) sum_k q^{2(k+1/2)^2} sum_{j<=k} q^j/(q;q)_j^2`.
pub fn rho0_sw_fast(q: &QParam, tol: f64) -> Result<RhoValue> {
    check_tol(tol)?;
    let prec = q.prec();
    let bits = prec.bits();
    let rough = euler_rel(q, 1e-6)?;
    let e_lo = f64_of(&rough.value) * (1.0 - 1e-6);
    let qf = q.to_f64();
    let inner_max = 1.0 / (e_lo * e_lo * (1.0 - qf));

    let mut sum = Float::new(bits);
    let mut partial = Float::new(bits);
    let mut poch = Float::with_val(bits, 1);
    let mut tally = RoundingTally::new(prec);
    let mut k = 0u64;
    let tail = loop {
        if k as usize > MAX_TERMS {
            return Err(Error::NonConvergence("Stieltjes–Wigert sum".into()));
        }
        let mut t = gauss_tail(q, k);
        t *= inner_max;
        if t <= err_f64(tol * e_lo / 4.0) {
            break t;
        }
        if k > 0 {
            poch *= Float::with_val(bits, 1 - q.pow(k as u32));
        }
        let mut inner = q.pow(k as u32);
        inner /= Float::with_val(bits, poch.square_ref());
        partial += inner;
        let term = Float::with_val(bits, &gauss_weight(q, k) * &partial);
        tally.add(2.0 * k as f64 + 8.0, &term);
        sum += term;
        k += 1;
    };
    tally.add(k as f64 + 1.0, &sum);
    let rough_rho = sum.to_f64() / e_lo;
    let e = euler_rel(q, tol / (8.0 * rough_rho.max(1.0)))?;
    let num = SeriesValue::new(sum, err_sum([&tail, &tally.total()]));
    let v = quotient(&num, &e);
    ensure_rounding(prec, &err_mul(&tally.total(), &err_f64(1.0 / e_lo)), tol, "Stieltjes–Wigert sum")?;
    Ok(RhoValue { value: v.value, err: v.err, route: "sw-fast" })
}

// --- Al-Salam–Carlitz ----------------------------------------------------------

/// Uniform bound `|I_n| <= 4 (-q;q)_inf^2 / (1-q)^2`, in f64.
fn asc_uniform_bound(qf: f64) -> f64 {
    let mut p = 1.0f64;
    let mut qn = qf;
    while qn > 1e-18 {
        p *= 1.0 + qn;
        qn *= qf;
    }
    4.0 * p * p * (1.0 + 1e-12) / ((1.0 - qf) * (1.0 - qf))
}

/// `I_n` from the alternating theta sum:
/// `I_0 = (1/(q;q)_inf) sum_k (-1)^k q^{k(k+1)/2}` and, for `n >= 1`,
/// `I_n = 2 sum_{k>=1} (-1)^k q^{k(k-1)/2} (q^{nk} - q^{-nk}) / ((1-q^{2n}) (q;q)_inf)`.
///
/// The terms grow to about `q^{-n^2/2}` before the sum settles at `O(1)`,
/// so the working precision is raised by `n^2 log2(1/q)/2` bits.
#[allow(non_snake_case)]
pub fn asc_In(n: u32, q: &QParam, tol: f64) -> Result<SeriesValue<Float>> {
    check_tol(tol)?;
    let qf = q.to_f64();
    let cancel = (n as f64).powi(2) * (-qf.log2()) / 2.0;
    let need = (cancel + (-tol.log2()).max(0.0) + 64.0).ceil() as u32;
    if need > ASC_MAX_BITS {
        return Err(Error::PrecisionExhausted {
            bits: q.prec().bits(),
            required: Some(need),
            reason: format!("theta-sum form of I_{n} needs {need} bits; use quadrature"),
        });
    }
    let wp = q.prec().at_least(need);
    let qw = q.at_precision(wp);
    let bits = wp.bits();
    let mut sum = Float::new(bits);
    let mut tally = RoundingTally::new(wp);
    let quarter = err_f64(tol / 4.0);
    let tail;
    if n == 0 {
        // Alternating with decreasing magnitudes: the remainder is below the next term.
        let mut k = 0u64;
        loop {
            let t = qw.pow((k * (k + 1) / 2) as u32);
            if err_up(&t) <= quarter {
                tail = err_up(&t);
                break;
            }
            tally.add(k as f64 + 2.0, &t);
            if k % 2 == 0 {
                sum += t;
            } else {
                sum -= t;
            }
            k += 1;
        }
    } else {
        let n64 = n as u64;
        let mut k = 1u64;
        loop {
            // For k >= 2n+2 successive magnitudes shrink by at least q, so the
            // remainder is below 4 q^{k(k-1)/2 - nk} / (1-q).
            if k >= 2 * n64 + 2 {
                let mut b = err_up(&qw.pow_ratio((k * (k - 1)) as i64 - 2 * (n64 * k) as i64, 2));
                b *= 4;
                b /= Float::with_val(ERR_BITS, 1.0 - qf);
                if b <= quarter {
                    tail = b;
                    break;
                }
            }
            let base = (k * (k - 1) / 2) as i64;
            let a = qw.pow_ratio(2 * (base + (n64 * k) as i64), 2);
            let b = qw.pow_ratio(2 * (base - (n64 * k) as i64), 2);
            let mut t = Float::with_val(bits, &a - &b);
            t *= 2;
            tally.add(k as f64 + 6.0, &b);
            if k % 2 == 1 {
                t = -t;
            }
            sum += t;
            k += 1;
        }
        sum /= Float::with_val(bits, 1 - qw.pow(2 * n));
    }
    tally.add(8.0, &sum);
    let rounding = tally.total();
    ensure_rounding(wp, &rounding, tol, "theta sum for I_n")?;
    let num = SeriesValue::new(sum, err_sum([&tail, &rounding]));
    let e = euler_rel(&qw, tol / (8.0 * asc_uniform_bound(qf)))?;
    let v = quotient(&num, &e);
    Ok(SeriesValue::new(Float::with_val(q.prec().bits(), &v.value), v.err))
}

/// `|(e^{it};q)_inf|^2` factored as `|1 - e^{it}|^2 |(q e^{it};q)_inf|^2`;
/// returns the second factor and `cos t`.
fn asc_base(theta: &Float, q: &QParam, tol: f64) -> Result<(SeriesValue<Float>, Float)> {
    let z = Complex::unit(theta);
    let qz = z.scale(q.q());
    let p = qpochhammer(&qz, q, PochOrder::Infinite, tol)?;
    let a = p.value.abs();
    let v = p.value.norm_sqr();
    // (|p| + e)^2 - |p|^2
    let mut e = err_mul(&a, &p.err);
    e *= 2;
    e.add_assign_round(err_mul(&p.err, &p.err), Round::Up);
    Ok((SeriesValue::new(v, e), z.re))
}

/// Circle means of `|(e^{it};q)_inf|^2 / |1 - q^n e^{it}|^2` for several
/// `n` on a shared grid; `None` stands for the limit `n -> inf`.
fn asc_quadrature_many(ns: &[Option<u32>], q: &QParam, tol: f64) -> Result<Vec<SeriesValue<Float>>> {
    let qf = q.to_f64();
    let mut pmax = 1.0f64;
    let mut qn = qf;
    while qn > 1e-18 {
        pmax *= 1.0 + qn;
        qn *= qf;
    }
    let inner_tol = tol * (1.0 - qf).powi(2) / (64.0 * pmax);
    let bits = q.prec().bits();
    let qpows: Vec<Option<Float>> = ns.iter().map(|n| n.map(|n| q.pow(n))).collect();
    circle_mean(
        |t| {
            let (p, c) = asc_base(t, q, inner_tol)?;
            // |1 - z|^2 = 2 - 2 cos t
            let mut one_minus = Float::with_val(bits, 1 - c.clone());
            one_minus *= 2;
            Ok(qpows
                .iter()
                .map(|qn| {
                    let ratio = match qn {
                        None => one_minus.clone(),
                        Some(qn) if *qn == 1 => Float::with_val(bits, 1),
                        Some(qn) => {
                            // |1 - q^n z|^2 = 1 - 2 q^n cos t + q^{2n}
                            let mut d = Float::with_val(bits, qn * &c);
                            d *= -2;
                            d += 1;
                            d += Float::with_val(bits, qn.square_ref());
                            Float::with_val(bits, &one_minus / &d)
                        }
                    };
                    let v = Float::with_val(bits, &p.value * &ratio);
                    let e = err_mul(&p.err, &ratio);
                    SeriesValue::new(v, e)
                })
                .collect())
        },
        tol,
        q.prec(),
    )
}

/// `I_n = (1/2pi) int (e^{it}, e^{-it}; q)_inf / |1 - q^n e^{it}|^2 dt` by
/// the periodic trapezoid rule.
#[allow(non_snake_case)]
pub fn asc_In_quadrature(n: u32, q: &QParam, tol: f64) -> Result<SeriesValue<Float>> {
    Ok(asc_quadrature_many(&[Some(n)], q, tol)?.remove(0))
}

/// `lim_{n->inf} I_n = (1/2pi) int (e^{it}, e^{-it}; q)_inf dt`.
#[allow(non_snake_case)]
pub fn asc_I_limit(q: &QParam, tol: f64) -> Result<SeriesValue<Float>> {
    Ok(asc_quadrature_many(&[None], q, tol)?.remove(0))
}

/// `rho_0 = (1/((aq;q)_inf (q;q)_inf^2)) sum_n I_n (aq;q)_n/(q;q)_n (q/a)^n`.
///
/// `I_n` comes from [`asc_In`] for `n <= N_SWITCH` and from one shared
/// quadrature grid above. Since `0 < (aq;q)_n <= 1`, the remainder after
/// `N` terms is at most `U (q/a)^N / ((q;q)_inf (1 - q/a))` with `U` the
/// uniform bound on `I_n`.
pub fn rho0_asc(p: &ASCParam, tol: f64) -> Result<RhoValue> {
    check_tol(tol)?;
    let q = &p.q;
    let prec = q.prec();
    let bits = prec.bits();
    let qf = q.to_f64();
    let r = Float::with_val(bits, q.q() / &p.a);
    let rf = r.to_f64();
    let e = euler_rel(q, tol * 1e-3)?;
    let aq = Float::with_val(bits, &p.a * q.q());
    let eaq = qpochhammer_real(&aq, q, PochOrder::Infinite, tol * 1e-3)?;
    let e_lo = f64_of(&e.value) * (1.0 - 1e-9);
    let pre = 1.0 / (f64_of(&eaq.value) * e_lo * e_lo);
    let u = asc_uniform_bound(qf);
    let scale = pre * u / e_lo / (1.0 - rf);

    // number of terms
    let mut count = 0u32;
    let mut geo = 1.0f64;
    while scale * geo > tol / 4.0 {
        geo *= rf;
        count += 1;
        if count as usize > MAX_TERMS {
            return Err(Error::NonConvergence("Al-Salam–Carlitz series".into()));
        }
    }
    let tail = err_f64(scale * geo);
    let term_tol = tol / (4.0 * pre / (e_lo * (1.0 - rf)));

    let mut ins: Vec<SeriesValue<Float>> = Vec::with_capacity(count as usize);
    let split = count.min(N_SWITCH + 1);
    for n in 0..split {
        ins.push(asc_In(n, q, term_tol)?);
    }
    if count > split {
        let rest: Vec<Option<u32>> = (split..count).map(Some).collect();
        ins.extend(asc_quadrature_many(&rest, q, term_tol)?);
    }

    let mut sum = Float::new(bits);
    let mut err = err_zero();
    let mut tally = RoundingTally::new(prec);
    let mut coeff = Float::with_val(bits, 1);
    for (n, i_n) in ins.iter().enumerate() {
        if n > 0 {
            let mut f = Float::with_val(bits, &aq * &q.pow(n as u32 - 1));
            f = Float::with_val(bits, 1 - f);
            f /= Float::with_val(bits, 1 - q.pow(n as u32));
            f *= &r;
            coeff *= f;
        }
        let t = Float::with_val(bits, &coeff * &i_n.value);
        err = err_sum([&err, &err_mul(&coeff, &i_n.err)]);
        tally.add(3.0 * n as f64 + 4.0, &t);
        sum += t;
    }
    tally.add(count as f64, &sum);
    let rounding = tally.total();
    ensure_rounding(prec, &err_mul(&rounding, &err_f64(pre)), tol, "Al-Salam–Carlitz series")?;
    let num = SeriesValue::new(sum, err_sum([&err, &rounding]));
    let mut den_v = Float::with_val(bits, &e.value * &e.value);
    den_v *= &eaq.value;
    let den_rel = {
        let mut r = err_up(&e.err);
        r /= err_up(&e.value);
        r *= 2;
        let mut r2 = err_up(&eaq.err);
        r2 /= err_up(&eaq.value);
        r.add_assign_round(r2, Round::Up);
        r *= 1.01;
        r
    };
    let den = SeriesValue::new(den_v.clone(), err_mul(&den_v, &den_rel));
    let v = quotient(&num, &den);
    let mut total = err_sum([&v.err, &tail]);
    total = err_up(&total);
    Ok(RhoValue { value: v.value, err: total, route: "asc-series" })
}

/// Circle mean of the kernel
/// `(qz, q/z; q)_inf / (aq, q, q; q)_inf * 3phi2(z, 1/z, aq; qz, q/z; q, q/a)`,
/// `z = e^{it}`, by the periodic trapezoid rule.
pub fn rho0_asc_quadrature(p: &ASCParam, tol: f64) -> Result<RhoValue> {
    check_tol(tol)?;
    let q = &p.q;
    let prec = q.prec();
    let bits = prec.bits();
    let qf = q.to_f64();
    let e = euler_rel(q, tol * 1e-3)?;
    let aq = Float::with_val(bits, &p.a * q.q());
    let eaq = qpochhammer_real(&aq, q, PochOrder::Infinite, tol * 1e-3)?;
    let mut pre = Float::with_val(bits, &e.value * &e.value);
    pre *= &eaq.value;
    pre.recip_mut();
    let pref = pre.to_f64();
    let r = Complex::from_real(Float::with_val(bits, q.q() / &p.a));
    let aqc = Complex::from_real(aq.clone());
    let mut pmax = 1.0f64;
    let mut qn = qf;
    while qn > 1e-18 {
        pmax *= 1.0 + qn;
        qn *= qf;
    }
    let rough = circle_mean(
        |t| Ok(vec![asc_kernel(t, q, &aqc, &r, &pre, 1e-8, 1e-8 / (pmax * pmax * pref))?]),
        1e-6,
        prec,
    )?;
    let scale = rough[0].value.to_f64().max(1.0);
    let phi_tol = tol / (8.0 * pmax * pmax * pref);
    let poch_tol = tol / (16.0 * scale * pmax.max(1.0) * 2.0 * pref.max(1.0));
    let v = circle_mean(|t| Ok(vec![asc_kernel(t, q, &aqc, &r, &pre, phi_tol, poch_tol)?]), tol / 2.0, prec)?
        .remove(0);
    let rel = {
        let mut r = err_up(&e.err);
        r /= err_up(&e.value);
        r *= 2;
        let mut r2 = err_up(&eaq.err);
        r2 /= err_up(&eaq.value);
        r.add_assign_round(r2, Round::Up);
        r *= 1.01;
        r
    };
    let err = err_sum([&v.err, &err_mul(&v.value, &rel)]);
    Ok(RhoValue { value: v.value, err, route: "asc-quadrature" })
}

fn asc_kernel(
    t: &Float,
    q: &QParam,
    aq: &Complex,
    r: &Complex,
    pre: &Float,
    phi_tol: f64,
    poch_tol: f64,
) -> Result<SeriesValue<Float>> {
    let z = Complex::unit(t);
    let zc = z.conj();
    let num = [z.clone(), zc.clone(), aq.clone()];
    let den = [z.scale(q.q()), zc.scale(q.q())];
    let phi = phi_series(&num, &den, q, r, phi_tol)?;
    let (p, _) = asc_base(t, q, poch_tol)?;
    let mut v = Float::with_val(p.value.prec(), &p.value * &phi.value.re);
    v *= pre;
    let e = err_mul(pre, &err_sum([&err_mul(&p.value, &phi.err), &err_mul(&p.err, &phi.value.abs()), &err_mul(&p.err, &phi.err)]));
    Ok(SeriesValue::new(v, e))
}

// --- quartic Freud ---------------------------------------------------------------

/// `delta_l(z) = sum_n (-1)^n z^{4n+l} / (4n+l)!` for `l` in `0..=3`.
pub fn freud_delta(l: u32, z: &Complex, tol: f64) -> Result<SeriesValue<Complex>> {
    check_tol(tol)?;
    if l > 3 {
        return Err(Error::invalid(format!("delta_l needs l in 0..=3, got {l}")));
    }
    let bits = z.prec();
    let prec = Precision::new(bits)?;
    let z4 = z.powu(4);
    let abs_z4 = err_up(&z4.abs());
    let mut term = z.powu(l);
    for j in 2..=l {
        term = term.scale(&Float::with_val(bits, Float::with_val(bits, j).recip_ref()));
    }
    let mut sum = term.clone();
    let mut tally = RoundingTally::new(prec);
    tally.add(l as f64 + 2.0, &term.abs());
    let mut m = l as u64;
    let mut count = 0usize;
    let tail = loop {
        let denom = ((m + 1) * (m + 2) * (m + 3) * (m + 4)) as f64;
        let mut r = abs_z4.clone();
        r /= denom;
        if r < 0.5 {
            let mut b = err_up(&term.abs());
            b *= &r;
            b /= Float::with_val(ERR_BITS, 1 - r.clone());
            if b <= half_tol(tol) {
                break b;
            }
        }
        count += 1;
        if count > MAX_TERMS {
            return Err(Error::NonConvergence("delta series".into()));
        }
        let d = Float::with_val(bits, (m + 1) * (m + 2)) * Float::with_val(bits, (m + 3) * (m + 4));
        term = (&term * &z4).scale(&Float::with_val(bits, d.recip_ref()));
        term = -&term;
        tally.add(6.0 + count as f64, &term.abs());
        sum = &sum + &term;
        m += 4;
    };
    tally.add(count as f64 + 1.0, &sum.abs());
    let rounding = tally.total();
    ensure_rounding(prec, &rounding, tol, "delta series")?;
    Ok(SeriesValue::new(sum, err_sum([&tail, &rounding])))
}

/// Nevanlinna entries `B(z) = -delta_0(K_0 sqrt(z/2))` and
/// `D(z) = (4/pi) delta_2(K_0 sqrt(z/2))`, principal square root.
#[allow(non_snake_case)]
pub fn freud_bd(z: &Complex, tol: f64) -> Result<(SeriesValue<Complex>, SeriesValue<Complex>)> {
    let prec = Precision::new(z.prec())?;
    let k0 = FreudConstants::new(prec).k0;
    let half = Float::with_val(prec.bits(), 0.5);
    let w = z.scale(&half).sqrt().scale(&k0);
    let d0 = freud_delta(0, &w, tol)?;
    let d2 = freud_delta(2, &w, tol / 2.0)?;
    let mut c = Float::with_val(prec.bits(), Constant::Pi);
    c.recip_mut();
    c *= 4;
    let b = SeriesValue::new(-&d0.value, d0.err);
    let d = SeriesValue::new(d2.value.scale(&c), err_mul(&d2.err, &err_f64(1.3)));
    Ok((b, d))
}

/// `sinh(x)/x` and `sin(x)/x`, with the two-term Taylor form near 0.
fn sinhc_sinc(x: &Float) -> (Float, Float) {
    let bits = x.prec();
    let cutoff = Float::with_val(bits, Float::u_exp(1, -(bits as i32) / 4));
    if *x.as_abs() < cutoff {
        let mut x2 = Float::with_val(bits, x.square_ref());
        x2 /= 6;
        (Float::with_val(bits, 1 + &x2), Float::with_val(bits, 1 - &x2))
    } else {
        (Float::with_val(bits, x.sinh_ref()) / x, Float::with_val(bits, x.sin_ref()) / x)
    }
}

/// Circle density of the quartic Freud family,
/// `[sinh(A) sinh(b) + sin(A) sin(b)] / (pi sin t)` with `A = K_0 cos(t/2)`,
/// `b = K_0 sin(t/2)`.
///
/// Using `sin t = 2 A b / K_0^2` this is
/// `K_0^2/(2 pi) [shc(A) shc(b) + sc(A) sc(b)]` with `shc(x) = sinh(x)/x`
/// and `sc(x) = sin(x)/x`, which has no removable singularity left at
/// `t = 0, pi`; near those points the Taylor form of `shc`/`sc` is used.
pub fn freud_kernel(theta: &Float, tol: f64) -> Result<CircleDensitySample> {
    check_tol(tol)?;
    let bits = theta.prec();
    let prec = Precision::new(bits)?;
    let k0 = FreudConstants::new(prec).k0;
    let half = Float::with_val(bits, theta / 2u32);
    let (s, c) = half.sin_cos(Float::new(bits));
    let a = Float::with_val(bits, &k0 * &c);
    let b = Float::with_val(bits, &k0 * &s);
    let (sha, sa) = sinhc_sinc(&a);
    let (shb, sb) = sinhc_sinc(&b);
    let mut v = Float::with_val(bits, &sha * &shb);
    v += Float::with_val(bits, &sa * &sb);
    v *= Float::with_val(bits, k0.square_ref());
    v /= Float::with_val(bits, Constant::Pi);
    v /= 2;
    // All terms are positive (|A|, |b| <= K_0 < pi); the Taylor form is
    // accurate to x^4/120 relative, below 2^-bits at the cutoff.
    let err = err_mul(&v, &err_mul(&prec.epsilon(), &err_f64(64.0)));
    let e = err_up(&err);
    if e > err_f64(tol) {
        return Err(Error::exhausted(bits, "Freud kernel rounding exceeds tolerance"));
    }
    Ok(CircleDensitySample { theta: theta.clone(), value: v, err: e })
}

/// `rho_0 = (K_0^2/pi) sum_{m+n even} (K_0/2)^{2m+2n} / ((2m+1)(2n+1) m! n! (m+n)!)`,
/// summed along anti-diagonals `m + n = 2t`.
///
/// Anti-diagonal `t` is at most `c^{4t} 4^t / ((2t)!)^2` with `c = K_0/2`,
/// because `sum_{m+n=2t} 1/(m! n!) = 4^t/(2t)!`.
pub fn rho0_freud(prec: Precision, tol: f64) -> Result<RhoValue> {
    check_tol(tol)?;
    let bits = prec.bits();
    let k0 = FreudConstants::new(prec).k0;
    let c2 = {
        let mut c = Float::with_val(bits, &k0 / 2u32);
        c.square_mut();
        c
    };
    let c4 = Float::with_val(bits, c2.square_ref());
    let mut fact = vec![Float::with_val(bits, 1)];
    let mut sum = Float::new(bits);
    let mut tally = RoundingTally::new(prec);
    let mut t = 0u64;
    let mut c4t = Float::with_val(bits, 1);
    let mut four_t = Float::with_val(bits, 1);
    let tail = loop {
        while fact.len() <= 2 * t as usize + 1 {
            let n = fact.len();
            let next = Float::with_val(bits, &fact[n - 1] * n as u32);
            fact.push(next);
        }
        let ft = &fact[2 * t as usize];
        // bound for anti-diagonal t and, via ratio <= 1/2, for all later ones
        let mut bound = err_up(&c4t);
        bound *= err_up(&four_t);
        bound /= err_up(&Float::with_val(bits, ft.square_ref()));
        let ratio_next = {
            let mut r = err_up(&c4);
            r *= 4;
            let a = (2 * t + 1) as f64;
            r /= (a * (a + 1.0)) * (a * (a + 1.0));
            r
        };
        if ratio_next <= 0.5 && t > 0 && {
            let mut b = bound.clone();
            b *= 2;
            b <= half_tol(tol)
        } {
            let mut b = bound;
            b *= 2;
            break b;
        }
        let mut diag = Float::new(bits);
        for m in 0..=(2 * t) {
            let n = 2 * t - m;
            let mut d = Float::with_val(bits, &fact[m as usize] * &fact[n as usize]);
            d *= (2 * m + 1) * (2 * n + 1);
            diag += d.recip();
        }
        diag /= ft;
        diag *= &c4t;
        tally.add(4.0 * t as f64 + 8.0, &diag);
        sum += diag;
        t += 1;
        c4t *= &c4;
        four_t *= 4;
        if t as usize > MAX_TERMS {
            return Err(Error::NonConvergence("Freud double sum".into()));
        }
    };
    let mut pre = Float::with_val(bits, k0.square_ref());
    pre /= Float::with_val(bits, Constant::Pi);
    sum *= &pre;
    tally.add(t as f64 + 4.0, &sum);
    let rounding = tally.total();
    ensure_rounding(prec, &rounding, tol, "Freud double sum")?;
    let tail = err_mul(&tail, &pre);
    Ok(RhoValue { value: sum, err: err_sum([&tail, &rounding]), route: "freud-double-sum" })
}

/// Circle mean of [`freud_kernel`].
pub fn rho0_freud_quadrature(prec: Precision, tol: f64) -> Result<RhoValue> {
    let v = circle_mean(
        |t| {
            let s = freud_kernel(t, tol / 4.0)?;
            Ok(vec![SeriesValue::new(s.value, s.err)])
        },
        tol,
        prec,
    )?
    .remove(0);
    Ok(RhoValue { value: v.value, err: v.err, route: "freud-quadrature" })
}

// --- q^{-1}-Hermite ---------------------------------------------------------------

/// Bound on `|log prod_{n>m}[(1+q^n)^4 - 16 q^{2n} c]|` for `c` in `[0, 1]`:
/// each factor lies in `[(1-q^n)^2 (1+6q^n+q^{2n}), (1+q^n)^4]`, so its log
/// is at most `4 q^n / (1 - q^n)` in magnitude.
fn qh_log_tail(q: &QParam, m: u32) -> Float {
    let qm = err_up(&q.pow(m + 1));
    let mut t = qm.clone();
    t *= 4;
    t /= Float::with_val(ERR_BITS, 1.0 - q.to_f64());
    t /= Float::with_val(ERR_BITS, 1 - qm);
    err_up(&t)
}

/// `exp(4q/(1-q)) / (q;q)_inf`, an upper bound for the kernel.
fn qh_kernel_bound(q: &QParam, e_lo: f64) -> f64 {
    let qf = q.to_f64();
    (4.0 * qf / (1.0 - qf)).exp() / e_lo
}

/// Circle density of the q^{-1}-Hermite family,
/// `(1/(q;q)_inf) prod_{n>=1} [(1+q^n)^4 - 16 q^{2n} cos^2 t]`.
pub fn qh_kernel(theta: &Float, q: &QParam, tol: f64) -> Result<CircleDensitySample> {
    check_tol(tol)?;
    let prec = q.prec();
    let bits = prec.bits();
    let e_rough = euler_rel(q, 1e-6)?;
    let e_lo = e_rough.value.to_f64() * (1.0 - 1e-6);
    let bound = qh_kernel_bound(q, e_lo);
    let c = {
        let mut c = Float::with_val(bits, theta.cos_ref());
        c.square_mut();
        c
    };
    let mut prod = Float::with_val(bits, 1);
    let mut tally = RoundingTally::new(prec);
    let mut m = 0u32;
    let tail_rel = loop {
        let t = qh_log_tail(q, m);
        let rel = expm1_up(&t);
        if rel.to_f64() * bound <= tol / 4.0 {
            break rel;
        }
        m += 1;
        if m as usize > MAX_TERMS {
            return Err(Error::NonConvergence("q^-1-Hermite product".into()));
        }
        let qn = q.pow(m);
        let mut f = Float::with_val(bits, 1 + &qn);
        f.square_mut();
        f.square_mut();
        let mut g = Float::with_val(bits, qn.square_ref());
        g *= 16;
        g *= &c;
        f -= g;
        prod *= f;
        tally.add(8.0 * m as f64, &prod);
    };
    let e = euler_rel(q, tol / (8.0 * bound * e_lo))?;
    let rounding = err_mul(&tally.total(), &err_f64(1.0 / e_lo));
    ensure_rounding(prec, &rounding, tol, "q^-1-Hermite product")?;
    let num = SeriesValue::new(prod, err_zero());
    let v = quotient(&num, &e);
    let trunc = err_mul(&v.value, &tail_rel);
    Ok(CircleDensitySample {
        theta: theta.clone(),
        value: v.value,
        err: err_sum([&v.err, &trunc, &rounding]),
    })
}

/// Expansion route with the first `m` factors: writing
/// `prod_{n<=m} [(1+q^n)^4 - 16 q^{2n} c] = P prod_n (1 - x_n c)` with
/// `x_n = 16 q^{2n}/(1+q^n)^4`, the circle mean is
/// `(P/(q;q)_inf) sum_k (-1)^k e_k(x) binom(2k,k)/4^k`, where `e_k` is the
/// elementary symmetric polynomial and `binom(2k,k)/4^k` the mean of `cos^{2k}`.
///
/// Returns the unnormalised mean (without the `1/(q;q)_inf` factor) and the
/// sum of absolute values of its terms.
pub fn qhermite_expansion(q: &QParam, m: u32) -> (Float, Float) {
    let bits = q.prec().bits();
    let mut p = Float::with_val(bits, 1);
    let mut e: Vec<Float> = vec![Float::with_val(bits, 1)];
    for n in 1..=m {
        let qn = q.pow(n);
        let mut w = Float::with_val(bits, 1 + &qn);
        w.square_mut();
        w.square_mut();
        let mut x = Float::with_val(bits, qn.square_ref());
        x *= 16;
        x /= &w;
        p *= &w;
        e.push(Float::new(bits));
        for k in (1..e.len()).rev() {
            let add = Float::with_val(bits, &e[k - 1] * &x);
            e[k] += add;
        }
    }
    let mut sum = Float::new(bits);
    let mut abs = Float::new(bits);
    let mut cmean = Float::with_val(bits, 1);
    for (k, ek) in e.iter().enumerate() {
        if k > 0 {
            // binom(2k,k)/4^k = prod_{i<=k} (2i-1)/(2i)
            cmean *= (2 * k - 1) as u32;
            cmean /= (2 * k) as u32;
        }
        let t = Float::with_val(bits, ek * &cmean);
        abs += &t;
        if k % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
    }
    sum *= &p;
    abs *= &p;
    (sum, abs)
}

/// `rho_0` for the q^{-1}-Hermite family by the product expansion.
///
/// The factor count `M` is chosen so that the dropped factors, which
/// multiply the kernel by `exp(+-T_M)`, change the result by at most `tol/4`.
/// The expansion alternates in sign: its `k = 0` term
/// `(-q;q)_inf^4/(q;q)_inf` overestimates `rho_0`.
pub fn rho0_qhermite(q: &QParam, tol: f64) -> Result<RhoValue> {
    check_tol(tol)?;
    let prec = q.prec();
    let e_rough = euler_rel(q, 1e-6)?;
    let e_lo = e_rough.value.to_f64() * (1.0 - 1e-6);
    let bound = qh_kernel_bound(q, e_lo);
    let mut m = 0u32;
    let tail_rel = loop {
        let rel = expm1_up(&qh_log_tail(q, m));
        if rel.to_f64() * bound <= tol / 4.0 {
            break rel;
        }
        m += 1;
        if m as usize > MAX_TERMS {
            return Err(Error::NonConvergence("q^-1-Hermite expansion".into()));
        }
    };
    let (sum, abs) = qhermite_expansion(q, m);
    let mut tally = RoundingTally::new(prec);
    tally.add(4.0 * m as f64 + 16.0, &abs);
    let rounding = err_mul(&tally.total(), &err_f64(1.0 / e_lo));
    ensure_rounding(prec, &rounding, tol, "q^-1-Hermite expansion")?;
    let e = euler_rel(q, tol / (8.0 * bound * e_lo))?;
    let v = quotient(&SeriesValue::new(sum, err_zero()), &e);
    let trunc = err_mul(&v.value, &tail_rel);
    Ok(RhoValue {
        value: v.value,
        err: err_sum([&v.err, &trunc, &rounding]),
        route: "qhermite-expansion",
    })
}

/// `rho_0` for the q^{-1}-Hermite family as the circle mean of [`qh_kernel`].
pub fn rho0_qhermite_quadrature(q: &QParam, tol: f64) -> Result<RhoValue> {
    let v = circle_mean(
        |t| {
            let s = qh_kernel(t, q, tol / 4.0)?;
            Ok(vec![SeriesValue::new(s.value, s.err)])
        },
        tol,
        q.prec(),
    )?
    .remove(0);
    Ok(RhoValue { value: v.value, err: v.err, route: "qhermite-quadrature" })
}
