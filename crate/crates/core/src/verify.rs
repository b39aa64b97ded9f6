//! Invariant suites run by `hankel-indet verify`. Each suite evaluates one
//! family of identities or bounds at the configured `q`, order and
//! tolerance and reports one [`Check`] per assertion.

use rug::float::Constant;
use rug::Float;

use crate::arith::{err_sum, err_up, Complex, Precision};
use crate::error::Result;
use crate::moments::{hankel, HankelMatrix, MomentSource};
use crate::qseries::{identity_check_36, qpochhammer_real, triple_product, PochOrder, QParam, TripleProductMode};
use crate::rho::{
    asc_In, asc_In_quadrature, freud_bd, freud_kernel, lower_bound, qh_kernel, rho0_asc,
    rho0_asc_quadrature, rho0_freud, rho0_freud_quadrature, rho0_qhermite, rho0_qhermite_quadrature,
    rho0_sw_direct, rho0_sw_fast, ASCParam, FreudConstants,
};
use crate::spectra::{
    beta_from_hankel, hamburger_mu, hamburger_mu_shifted, kernel_matrix, largest_eig, pk_eval,
    smallest_eig, sw_beta, trace_bound, EigenEnclosure,
};

/// Scale of a verification run.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub q: QParam,
    pub n_max: usize,
    /// Tolerance for series and quadrature evaluations.
    pub tol: f64,
    /// Width of eigenvalue enclosures.
    pub lambda_tol: f64,
}

/// Outcome of one assertion.
#[derive(Clone, Debug)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

type Suite = fn(&VerifyConfig) -> Result<Vec<Check>>;

/// All suites in run order.
pub const SUITES: &[(&str, Suite)] = &[
    ("triple-product", triple_product_suite),
    ("q-identities", q_identities_suite),
    ("sw-dual-route", sw_dual_route_suite),
    ("duality", duality_suite),
    ("trace-bound", trace_bound_suite),
    ("hamburger", hamburger_suite),
    ("beta-closed-form", beta_suite),
    ("asc", asc_suite),
    ("freud", freud_suite),
    ("q-hermite", qhermite_suite),
    ("theorem-bound", theorem_bound_suite),
    ("point-bound", point_bound_suite),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Runs the named suites (all when `only` is empty). The first evaluation
/// error aborts the run.
pub fn run_suites(cfg: &VerifyConfig, only: &[String]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (name, suite) in SUITES {
        if only.is_empty() || only.iter().any(|o| o == name) {
            out.extend(suite(cfg)?);
        }
    }
    Ok(out)
}

fn check(suite: &'static str, name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { suite, name: name.into(), pass, detail: detail.into() }
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn abs_diff(a: &Float, b: &Float) -> Float {
    let bits = a.prec().max(b.prec());
    Float::with_val(bits, a - b).abs()
}

/// Hankel matrix of order `n` at the precision its moments need.
pub fn sized_hankel(src: &MomentSource, n: usize) -> Result<HankelMatrix> {
    let need = src.required_bits(n)?;
    hankel(&src.at_precision(src.precision().at_least(need)), n)
}

fn sw(cfg: &VerifyConfig) -> MomentSource {
    MomentSource::stieltjes_wigert(cfg.q.clone())
}

fn lambdas(cfg: &VerifyConfig, upto: usize) -> Result<Vec<EigenEnclosure>> {
    let src = sw(cfg);
    (0..=upto).map(|n| smallest_eig(&sized_hankel(&src, n)?, cfg.lambda_tol)).collect()
}

fn triple_product_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let bits = cfg.q.prec().bits();
    let mut worst = 0.0f64;
    let mut pass = true;
    for j in 0..16 {
        let mut t = Float::with_val(bits, Constant::Pi);
        t *= (2 * j + 1) as u32;
        t /= 16u32;
        let z = Complex::unit(&t);
        let a = triple_product(&z, &cfg.q, cfg.tol, TripleProductMode::Product)?;
        let b = triple_product(&z, &cfg.q, cfg.tol, TripleProductMode::Laurent)?;
        let d = (&a.value - &b.value).abs();
        worst = worst.max(d.to_f64());
        pass &= err_up(&d) <= err_sum([&a.err, &b.err]);
    }
    Ok(vec![check(
        "triple-product",
        "product vs Laurent on 16 circle nodes",
        pass,
        format!("max diff {}", sci(worst)),
    )])
}

fn q_identities_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let bits = cfg.q.prec().bits();
    let omegas = [Float::with_val(bits, 0.25), cfg.q.q().clone(), Float::with_val(bits, 0.9)];
    let mut worst = 0.0f64;
    let mut pass = true;
    for k in 0..=8u64 {
        for w in &omegas {
            let (l, r) = identity_check_36(k, &cfg.q, w, cfg.tol)?;
            let d = abs_diff(&l.value, &r.value);
            worst = worst.max(d.to_f64());
            pass &= err_up(&d) <= err_sum([&l.err, &r.err]);
        }
    }
    Ok(vec![check(
        "q-identities",
        "transformation identity, k <= 8, three omegas",
        pass,
        format!("max diff {}", sci(worst)),
    )])
}

fn sw_dual_route_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let a = rho0_sw_direct(&cfg.q, cfg.tol)?;
    let b = rho0_sw_fast(&cfg.q, cfg.tol)?;
    let d = abs_diff(&a.value, &b.value);
    Ok(vec![check(
        "sw-dual-route",
        "direct vs single-sum rho_0",
        a.agrees_with(&b),
        format!("diff {} within {}", sci(d.to_f64()), sci(err_sum([&a.err, &b.err]).to_f64())),
    )])
}

fn duality_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let src = sw(cfg);
    let mut worst = 0.0f64;
    for n in 0..=cfg.n_max {
        let h = sized_hankel(&src, n)?;
        let lam = smallest_eig(&h, cfg.lambda_tol)?;
        let k = kernel_matrix(&beta_from_hankel(&h)?);
        let kappa = largest_eig(&k, cfg.lambda_tol)?;
        let prod = Float::with_val(lam.bits, &lam.mid() * &kappa.mid());
        worst = worst.max((prod.to_f64() - 1.0).abs());
    }
    Ok(vec![check(
        "duality",
        format!("lambda_N * max eig K_N = 1 for N <= {}", cfg.n_max),
        worst <= 1e-10,
        format!("max |product - 1| {}", sci(worst)),
    )])
}

fn trace_bound_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let src = sw(cfg);
    let mut pass = true;
    let mut eq0 = 0.0;
    for n in 0..=cfg.n_max {
        let h = sized_hankel(&src, n)?;
        let lam = smallest_eig(&h, cfg.lambda_tol)?;
        let tr = trace_bound(&kernel_matrix(&beta_from_hankel(&h)?));
        let inv = Float::with_val(lam.bits, lam.lo.recip_ref());
        // 1/lambda <= 1/lo; the trace is only rounded, so allow a relative hair.
        let slack = Float::with_val(lam.bits, &tr * 1e-40);
        if n == 0 {
            eq0 = (abs_diff(&inv, &tr) / &tr).to_f64();
        } else {
            pass &= Float::with_val(lam.bits, lam.hi.recip_ref()) <= Float::with_val(lam.bits, &tr + &slack);
        }
    }
    Ok(vec![
        check("trace-bound", "1/lambda_N <= trace K_N", pass, format!("N <= {}", cfg.n_max)),
        check("trace-bound", "equality at N = 0", eq0 <= 1e-40, format!("relative gap {}", sci(eq0))),
    ])
}

fn hamburger_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let src = sw(cfg);
    let lam = lambdas(cfg, cfg.n_max + 1)?;
    let mut first = true;
    let mut second = true;
    for n in 0..=cfg.n_max {
        let h = sized_hankel(&src, n)?;
        first &= hamburger_mu(&h)? >= lam[n].lo;
        second &= hamburger_mu_shifted(&src, n)? >= lam[n + 1].lo;
    }
    Ok(vec![
        check("hamburger", "mu_N >= lambda_N", first, format!("N <= {}", cfg.n_max)),
        check("hamburger", "mu'_N >= lambda_{N+1}", second, format!("N <= {}", cfg.n_max)),
    ])
}

fn beta_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let src = sw(cfg);
    let n = cfg.n_max.min(12);
    let b = beta_from_hankel(&sized_hankel(&src, n)?)?;
    let mut worst = 0.0f64;
    for k in 0..=n {
        for j in 0..=k {
            worst = worst.max(abs_diff(b.beta(k, j), &sw_beta(k, j, &cfg.q)?).to_f64());
        }
    }
    Ok(vec![check(
        "beta-closed-form",
        format!("closed-form coefficients vs Cholesky, N <= {n}"),
        worst <= 1e-25,
        format!("max diff {}", sci(worst)),
    )])
}

fn asc_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let q = &cfg.q;
    let mut worst = 0.0f64;
    for n in 0..=8 {
        let s = asc_In(n, q, cfg.tol)?;
        let i = asc_In_quadrature(n, q, cfg.tol.max(1e-20))?;
        worst = worst.max(abs_diff(&s.value, &i.value).to_f64());
    }
    let p = ASCParam::new(q.clone(), Float::with_val(q.prec().bits(), 1))?;
    let tol = cfg.tol.max(1e-20);
    let a = rho0_asc(&p, tol)?;
    let b = rho0_asc_quadrature(&p, tol)?;
    let rel = (abs_diff(&a.value, &b.value) / &a.value).to_f64();
    Ok(vec![
        check("asc", "I_n theta sum vs quadrature, n <= 8", worst <= 1e-12, format!("max diff {}", sci(worst))),
        check("asc", "rho_0 series vs quadrature, a = 1", rel <= 1e-10, format!("relative diff {}", sci(rel))),
    ])
}

fn freud_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let prec = cfg.q.prec();
    let bits = prec.bits();
    let k0 = FreudConstants::new(prec).k0;
    let s2 = Float::with_val(bits, 2).sqrt();
    let agm = Float::with_val(bits, Float::with_val(bits, 1).agm_ref(&s2));
    let k0_alt = Float::with_val(bits, Constant::Pi) / (s2 * agm);
    let k0_diff = abs_diff(&k0, &k0_alt).to_f64();
    let tol = cfg.tol.max(1e-20);
    let a = rho0_freud(prec, cfg.tol)?;
    let b = rho0_freud_quadrature(prec, tol)?;
    let route = abs_diff(&a.value, &b.value).to_f64();
    let mut worst = 0.0f64;
    for j in 0..32 {
        let mut t = Float::with_val(bits, Constant::Pi);
        t *= (2 * j + 1) as u32;
        t /= 32u32;
        let z = Complex::unit(&t);
        let zb = z.conj();
        let (b1, d1) = freud_bd(&z, cfg.tol)?;
        let (b2, d2) = freud_bd(&zb, cfg.tol)?;
        let v = (&(&b1.value * &d2.value) - &(&b2.value * &d1.value)).div(&(&z - &zb));
        let k = freud_kernel(&t, cfg.tol)?;
        worst = worst.max(abs_diff(&v.re, &k.value).to_f64());
    }
    Ok(vec![
        check("freud", "K_0 gamma form vs AGM form", k0_diff <= 1e-20, format!("diff {}", sci(k0_diff))),
        check("freud", "rho_0 double sum vs quadrature", route <= 1e-12, format!("diff {}", sci(route))),
        check("freud", "Nevanlinna entries vs closed-form kernel, 32 nodes", worst <= 1e-12, format!("max diff {}", sci(worst))),
    ])
}

fn qhermite_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let q = &cfg.q;
    let bits = q.prec().bits();
    let a = rho0_qhermite(q, cfg.tol)?;
    let b = rho0_qhermite_quadrature(q, cfg.tol.max(1e-20))?;
    let route = abs_diff(&a.value, &b.value).to_f64();
    let half_pi = Float::with_val(bits, Constant::Pi) / 2u32;
    let spot = qh_kernel(&half_pi, q, cfg.tol)?;
    let mq = Float::with_val(bits, -q.q());
    let num = qpochhammer_real(&mq, q, PochOrder::Infinite, cfg.tol)?.value;
    let den = crate::qseries::euler(q, cfg.tol)?.value;
    let oracle = Float::with_val(bits, num.square_ref()).square() / den;
    let spot_diff = abs_diff(&spot.value, &oracle).to_f64();
    Ok(vec![
        check("q-hermite", "product expansion vs quadrature", route <= 1e-12, format!("diff {}", sci(route))),
        check("q-hermite", "kernel at pi/2", spot_diff <= 1e-20, format!("diff {}", sci(spot_diff))),
    ])
}

fn theorem_bound_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let l = lower_bound(&rho0_sw_fast(&cfg.q, cfg.tol)?)?;
    let lam = lambdas(cfg, cfg.n_max)?;
    let violations = lam.iter().filter(|e| e.lo < l).count();
    Ok(vec![check(
        "theorem-bound",
        format!("lambda_N >= 1/rho_0 for N <= {}", cfg.n_max),
        violations == 0,
        format!("{violations} violations, l = {}", l.to_string_radix(10, Some(12))),
    )])
}

fn point_bound_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let src = sw(cfg);
    let prec = cfg.q.prec();
    let mut checks = Vec::new();
    for (label, z0) in [
        ("i/2", Complex::from_f64(prec, 0.0, 0.5)),
        ("(1+i)/4", Complex::from_f64(prec, 0.25, 0.25)),
    ] {
        let mut pass = true;
        for n in 0..=cfg.n_max {
            let h = sized_hankel(&src, n)?;
            let lam = smallest_eig(&h, cfg.lambda_tol)?;
            let b = beta_from_hankel(&h)?;
            let z = Complex::new(Float::with_val(lam.bits, &z0.re), Float::with_val(lam.bits, &z0.im));
            let vals = pk_eval(&b, &z, n)?;
            let mut sum = Float::new(lam.bits);
            for v in &vals {
                sum += v.norm_sqr();
            }
            let mut bound = Float::with_val(lam.bits, 1 - z.norm_sqr());
            bound *= &lam.lo;
            bound.recip_mut();
            pass &= sum <= bound;
        }
        checks.push(check(
            "point-bound",
            format!("sum |p_k(z0)|^2 <= 1/(lambda_N (1 - |z0|^2)) at z0 = {label}"),
            pass,
            format!("N <= {}", cfg.n_max),
        ));
    }
    Ok(checks)
}

/// Default verification scale.
pub fn default_config(prec: Precision) -> crate::Result<VerifyConfig> {
    Ok(VerifyConfig { q: QParam::parse(prec, "0.5")?, n_max: 16, tol: 1e-30, lambda_tol: 1e-25 })
}
