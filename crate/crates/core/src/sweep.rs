//! Sequences `lambda_0, ..., lambda_Nmax`, their extrapolation to the
//! infinite-matrix limit, and the percentage-error sweep over `q` that
//! compares that limit with the lower bound `1/rho_0`.

use std::fmt;

use rayon::prelude::*;
use rug::Float;

use crate::error::{Error, Result};
use crate::moments::{hankel, MomentSource};
use crate::qseries::QParam;
use crate::rho::{lower_bound, rho0_sw_fast};
use crate::spectra::{smallest_eig, EigenEnclosure};
use crate::Precision;

pub const DEFAULT_N_MAX: usize = 48;
pub const DEFAULT_LAMBDA_TOL: f64 = 1e-20;
pub const DEFAULT_RHO_TOL: f64 = 1e-30;
/// Plateau threshold on `lambda_Nmax / lambda_{Nmax/2}`.
pub const PLATEAU_RATIO: f64 = 0.9;
/// Decay threshold on `lambda_Nmax / lambda_0`.
pub const DECAY_RATIO: f64 = 0.01;

/// One enclosure per order `N = 0..=N_max`.
#[derive(Clone, Debug)]
pub struct LambdaSequence {
    pub source: MomentSource,
    pub entries: Vec<(usize, EigenEnclosure)>,
}

impl LambdaSequence {
    pub fn midpoints(&self) -> Vec<Float> {
        self.entries.iter().map(|(_, e)| e.mid()).collect()
    }

    pub fn last(&self) -> Option<&EigenEnclosure> {
        self.entries.last().map(|(_, e)| e)
    }

    /// Largest increase `mid_{N+1} - mid_N` beyond the enclosure widths;
    /// zero for a sequence that is non-increasing as it must be.
    pub fn monotonicity_defect(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| (w[1].1.lo.to_f64() - w[0].1.hi.to_f64()).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// `lambda_N` for `N = 0..=n_max`, each at the precision its moments need.
pub fn lambda_sequence(src: &MomentSource, n_max: usize, tol: f64) -> Result<LambdaSequence> {
    // Validate the whole range (moment availability, magnitudes) up front.
    src.required_bits(n_max)?;
    if let Some(avail) = src.available() {
        if 2 * n_max > avail {
            return Err(Error::MomentOutOfRange { index: 2 * n_max, available: avail });
        }
    }
    let entries = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let need = src.required_bits(n)?;
            let s = src.at_precision(src.precision().at_least(need));
            Ok((n, smallest_eig(&hankel(&s, n)?, tol)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LambdaSequence { source: src.clone(), entries })
}

/// Extrapolated limit of a sequence.
#[derive(Clone, Debug)]
pub struct Extrapolation {
    pub value: Float,
    pub err: f64,
    /// Aitken levels applied; zero means the fallback was used.
    pub levels: usize,
}

/// One Aitken step on the last entries of `x`; `None` when a denominator
/// is lost in noise.
fn aitken(x: &[Float], noise: &dyn Fn(&Float) -> Float) -> Option<Vec<Float>> {
    if x.len() < 3 {
        return None;
    }
    let bits = x[0].prec();
    let mut out = Vec::with_capacity(x.len() - 2);
    for w in x.windows(3) {
        let d1 = Float::with_val(bits, &w[1] - &w[0]);
        let d2 = Float::with_val(bits, &w[2] - &w[1]);
        let den = Float::with_val(bits, &d2 - &d1);
        if den.clone().abs() <= noise(&w[2]) {
            out.push(None);
            continue;
        }
        let corr = Float::with_val(bits, d1.square_ref()) / den;
        out.push(Some(Float::with_val(bits, &w[0] - corr)));
    }
    // Only a clean run at the end of the sequence is usable.
    let clean: Vec<Float> = out.into_iter().rev().map_while(|v| v).collect();
    if clean.is_empty() {
        return None;
    }
    Some(clean.into_iter().rev().collect())
}

/// Iterated Aitken Δ² on the midpoints.
///
/// A level is kept only while its last second difference stands above the
/// noise floor `max(4 w, 2^{8-p} |x|)`, `w` the widest enclosure, and its
/// last step is no larger than that of the level before. The error
/// estimate is the last step of the deepest level plus `w`. If not even one
/// level is available, the last midpoint is returned with the spread of
/// the final three as its error.
pub fn extrapolate(seq: &LambdaSequence) -> Result<Extrapolation> {
    if seq.entries.len() < 4 {
        return Err(Error::invalid(format!(
            "extrapolation needs at least 4 entries, got {}",
            seq.entries.len()
        )));
    }
    let x = seq.midpoints();
    let bits = x.iter().map(Float::prec).min().unwrap_or(64);
    let x: Vec<Float> = x.into_iter().map(|v| Float::with_val(bits, v)).collect();
    let width = seq.entries.iter().map(|(_, e)| e.width().to_f64()).fold(0.0, f64::max);
    let floor = Float::with_val(bits, 4.0 * width);
    let noise = move |v: &Float| -> Float {
        let rel = Float::with_val(bits, v.clone().abs() * Float::with_val(bits, Float::u_exp(1, 8 - bits as i32)));
        if rel > floor {
            rel
        } else {
            floor.clone()
        }
    };
    let last_step = |v: &[Float]| -> Option<f64> {
        let n = v.len();
        (n >= 2).then(|| Float::with_val(bits, &v[n - 1] - &v[n - 2]).abs().to_f64())
    };
    let mut level = x.clone();
    let mut depth = 0;
    while let Some(next) = aitken(&level, &noise) {
        if depth > 0 {
            // Go deeper only while the last step keeps shrinking.
            match (last_step(&next), last_step(&level)) {
                (Some(a), Some(b)) if a <= b => {}
                _ => break,
            }
        }
        level = next;
        depth += 1;
        if level.len() < 3 {
            break;
        }
    }
    if depth == 0 {
        let tail = &x[x.len() - 3..];
        let max = tail.iter().map(Float::to_f64).fold(f64::MIN, f64::max);
        let min = tail.iter().map(Float::to_f64).fold(f64::MAX, f64::min);
        return Ok(Extrapolation { value: x[x.len() - 1].clone(), err: max - min + width, levels: 0 });
    }
    let step = last_step(&level).unwrap_or(0.0);
    Ok(Extrapolation { value: level[level.len() - 1].clone(), err: step + width, levels: depth })
}

/// Successful Figure-1 data for one `q`.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub sequence: LambdaSequence,
    pub lambda_last: EigenEnclosure,
    pub s: Extrapolation,
    pub l: Float,
    pub pct_error: Float,
}

/// One row of the sweep; a failing `q` keeps its error and the sweep goes on.
#[derive(Debug)]
pub struct SweepRow {
    pub q: QParam,
    pub n_max: usize,
    pub outcome: Result<SweepPoint>,
}

/// `100 (s - l) / s`.
pub fn pct_error(s: &Float, l: &Float) -> Float {
    let bits = s.prec();
    let mut p = Float::with_val(bits, s - l);
    p /= s;
    p *= 100;
    p
}

/// Limit, bound and percentage error for Stieltjes–Wigert at one `q`.
pub fn sweep_point(q: &QParam, n_max: usize, lambda_tol: f64, rho_tol: f64) -> Result<SweepPoint> {
    let seq = lambda_sequence(&MomentSource::stieltjes_wigert(q.clone()), n_max, lambda_tol)?;
    let s = extrapolate(&seq)?;
    let l = lower_bound(&rho0_sw_fast(q, rho_tol)?)?;
    let lambda_last = seq.last().expect("nonempty").clone();
    let pct = pct_error(&s.value, &l);
    Ok(SweepPoint { sequence: seq, lambda_last, s, l, pct_error: pct })
}

/// The Figure-1 sweep: one row per `q`, in input order.
pub fn figure1_sweep(q_grid: &[QParam], n_max: usize, lambda_tol: f64, rho_tol: f64) -> Vec<SweepRow> {
    q_grid
        .par_iter()
        .map(|q| SweepRow {
            q: q.clone(),
            n_max,
            outcome: sweep_point(q, n_max, lambda_tol, rho_tol),
        })
        .collect()
}

/// `start, start+step, ..., stop` (inclusive up to rounding), parsed from
/// `"start:step:stop"`. Values are generated as decimal strings so that
/// `0.05 * 3` is exactly `"0.15"`.
pub fn parse_q_grid(spec: &str, prec: Precision) -> Result<Vec<QParam>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::invalid(format!("q-grid must be start:step:stop, got {spec:?}")));
    }
    let decimals = parts.iter().map(|p| p.split('.').nth(1).map_or(0, str::len)).max().unwrap_or(0);
    let scale = 10i64.pow(decimals as u32);
    let to_int = |s: &str| -> Result<i64> {
        let v: f64 = s.parse().map_err(|_| Error::invalid(format!("bad q-grid number {s:?}")))?;
        Ok((v * scale as f64).round() as i64)
    };
    let (start, step, stop) = (to_int(parts[0])?, to_int(parts[1])?, to_int(parts[2])?);
    if step <= 0 || start > stop {
        return Err(Error::invalid(format!("empty q-grid {spec:?}")));
    }
    let mut out = Vec::new();
    let mut k = start;
    while k <= stop {
        let s = format!("{}.{:0width$}", k / scale, k % scale, width = decimals);
        out.push(QParam::parse(prec, &s)?);
        k += step;
    }
    Ok(out)
}

/// Default Figure-1 grid `0.05, 0.10, ..., 0.90`.
pub fn default_q_grid(prec: Precision) -> Vec<QParam> {
    parse_q_grid("0.05:0.05:0.90", prec).expect("static grid")
}

/// Heuristic reading of a finite `lambda_N` sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    IndeterminateConsistent,
    DeterminateConsistent,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::IndeterminateConsistent => "indeterminate-consistent",
            Verdict::DeterminateConsistent => "determinate-consistent",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Outcome of [`determinacy_probe`]. This is a heuristic: no finite number
/// of eigenvalues decides whether `lambda_N` tends to zero.
#[derive(Clone, Debug)]
pub struct DeterminacyReport {
    /// `lambda_Nmax / lambda_{Nmax/2}`, when computed.
    pub trend: Option<f64>,
    /// `lambda_Nmax / lambda_0`, when computed.
    pub decay: Option<f64>,
    pub verdict: Verdict,
}

/// Classifies a moment sequence by whether `lambda_N` decays below
/// `DECAY_RATIO * lambda_0` (checked first) or plateaus with
/// `lambda_Nmax >= PLATEAU_RATIO * lambda_{Nmax/2}`.
pub fn determinacy_probe(src: &MomentSource, n_max: usize, tol: f64) -> Result<DeterminacyReport> {
    if n_max < 4 {
        return Ok(DeterminacyReport { trend: None, decay: None, verdict: Verdict::Inconclusive });
    }
    let seq = lambda_sequence(src, n_max, tol)?;
    let mid = seq.midpoints();
    let last = mid[n_max].to_f64();
    let trend = last / mid[n_max / 2].to_f64();
    let decay = last / mid[0].to_f64();
    let verdict = if decay <= DECAY_RATIO {
        Verdict::DeterminateConsistent
    } else if trend >= PLATEAU_RATIO {
        Verdict::IndeterminateConsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(DeterminacyReport { trend: Some(trend), decay: Some(decay), verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prec(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    fn sw(qs: &str) -> MomentSource {
        MomentSource::stieltjes_wigert(QParam::parse(prec(256), qs).unwrap())
    }

    fn synthetic(values: Vec<f64>) -> LambdaSequence {
        let entries = values
            .into_iter()
            .enumerate()
            .map(|(n, v)| {
                let x = Float::with_val(256, v);
                (n, EigenEnclosure { lo: x.clone(), hi: x, probes: 0, bits: 256 })
            })
            .collect();
        LambdaSequence { source: sw("0.5"), entries }
    }

    #[test]
    fn order_zero_is_first_moment() {
        let seq = lambda_sequence(&sw("0.5"), 0, 1e-20).unwrap();
        assert_eq!(seq.entries.len(), 1);
        assert_eq!(seq.entries[0].1.lo, sw("0.5").moment(0).unwrap());
    }

    #[test]
    fn sequence_decreases() {
        let seq = lambda_sequence(&sw("0.5"), 12, 1e-20).unwrap();
        assert!(seq.monotonicity_defect() == 0.0);
        assert!(seq.entries[1].1.hi < seq.entries[0].1.lo);
        // Dense symmetric eigensolver at 1600 bits.
        let oracle = crate::arith::parse_real(prec(256), "0.362278586691041863444906652601").unwrap();
        let d = Float::with_val(256, &seq.entries[8].1.mid() - &oracle).abs();
        assert!(d < 1e-19, "{d}");
    }

    #[test]
    fn extrapolate_constant_and_geometric() {
        let c = extrapolate(&synthetic(vec![0.25; 8])).unwrap();
        assert_eq!(c.value, 0.25);
        assert_eq!(c.err, 0.0);

        let g: Vec<f64> = (0..12).map(|n| 0.5 + 0.3 * 0.6f64.powi(n)).collect();
        let e = extrapolate(&synthetic(g)).unwrap();
        assert!((e.value.to_f64() - 0.5).abs() < 1e-14, "{}", e.value);
        assert!(e.levels >= 1);

        assert!(extrapolate(&synthetic(vec![1.0, 0.9, 0.8])).is_err());
    }

    #[test]
    fn q_grid_parsing() {
        let g = default_q_grid(prec(128));
        assert_eq!(g.len(), 18);
        assert!((g[2].to_f64() - 0.15).abs() < 1e-15);
        assert!((g[17].to_f64() - 0.9).abs() < 1e-15);
        assert_eq!(parse_q_grid("0.5:0.1:0.5", prec(128)).unwrap().len(), 1);
        assert!(parse_q_grid("0.5:0.1", prec(128)).is_err());
        assert!(parse_q_grid("0.5:-0.1:0.9", prec(128)).is_err());
        assert!(parse_q_grid("0.5:0.1:1.2", prec(128)).is_err());
    }

    #[test]
    fn probe_guard_and_verdicts() {
        assert_eq!(determinacy_probe(&sw("0.5"), 3, 1e-20).unwrap().verdict, Verdict::Inconclusive);
        let r = determinacy_probe(&sw("0.5"), 16, 1e-20).unwrap();
        assert_eq!(r.verdict, Verdict::IndeterminateConsistent);
        // Lebesgue measure on [0, 1]: s_n = 1/(n+1).
        let hilbert: Vec<Float> = (0..40).map(|n| Float::with_val(256, 1) / Float::with_val(256, n + 1)).collect();
        let src = MomentSource::from_values(hilbert, prec(256));
        let r = determinacy_probe(&src, 12, 1e-40).unwrap();
        assert_eq!(r.verdict, Verdict::DeterminateConsistent);
    }

    #[test]
    fn finite_source_needs_exactly_2n_plus_1_moments() {
        let vals: Vec<Float> = (0..5).map(|n| Float::with_val(128, 1) / Float::with_val(128, n + 1)).collect();
        let src = MomentSource::from_values(vals, prec(128));
        assert_eq!(lambda_sequence(&src, 2, 1e-20).unwrap().entries.len(), 3);
        assert!(matches!(lambda_sequence(&src, 3, 1e-20), Err(Error::MomentOutOfRange { .. })));
    }

    #[test]
    fn pct_error_formula() {
        let s = Float::with_val(128, 0.3605);
        let l = Float::with_val(128, 0.3435);
        assert!((pct_error(&s, &l).to_f64() - 4.7156726768377).abs() < 1e-9);
    }
}
