//! Moment sequences and the Hankel matrices built from them.
//!
//! Three sources are supported: the log-normal (Stieltjes–Wigert) weight in
//! closed form, a Jacobi recurrence supplied by the user, and a text file.
//! Any source can be shifted, `s'_n = s_{n+2}`, which is how the second
//! Hamburger minimum is formed.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rug::{Float, Integer};

use crate::arith::Precision;
use crate::error::{Error, Result};
use crate::qseries::QParam;

/// Guard bits added on top of the magnitude estimate of `s_N`.
pub const GUARD_BITS: u32 = 128;

/// Largest binary exponent a moment may have (MPFR's default exponent range
/// is about 2^30).
const MAX_EXPONENT: f64 = 1.0e9;

#[derive(Debug)]
pub enum MomentKind {
    StieltjesWigert(QParam),
    Jacobi {
        diagonal: Vec<Float>,
        off_diagonal: Vec<Float>,
        s0: Float,
    },
    File {
        path: PathBuf,
        values: Vec<Float>,
    },
}

/// Generator of moments `s_n` at a working precision.
#[derive(Clone, Debug)]
pub struct MomentSource {
    kind: Arc<MomentKind>,
    shift: usize,
    prec: Precision,
}

/// `s_n = q^{-(n+1)^2/2}`, the n-th moment of the weight
/// `(k/sqrt(pi)) exp(-k^2 log^2 x)` on `x > 0` with `q = exp(-1/(2k^2))`.
pub fn sw_moment(n: usize, q: &QParam) -> Result<Float> {
    let log2_mag = sw_log2_moment(n, q.to_f64());
    if log2_mag > MAX_EXPONENT {
        return Err(Error::PrecisionExhausted {
            bits: q.prec().bits(),
            required: None,
            reason: format!(
                "s_{n} = 2^{log2_mag:.0} exceeds the floating exponent range"
            ),
        });
    }
    let m = (n as i64 + 1).pow(2);
    Ok(q.pow_ratio(-m, 2))
}

fn sw_log2_moment(n: usize, q: f64) -> f64 {
    let m = (n as f64 + 1.0).powi(2);
    m * (-q.log2()) / 2.0
}

/// `s_n = s_0 (J^n)_{00}` for the symmetric tridiagonal `J` with the given
/// diagonal and positive off-diagonal.
pub fn moments_from_jacobi(
    diagonal: &[Float],
    off_diagonal: &[Float],
    s0: &Float,
    n: usize,
) -> Result<Float> {
    let all = jacobi_moments(diagonal, off_diagonal, s0, n + 1)?;
    Ok(all.into_iter().next_back().expect("count >= 1"))
}

/// `s_0 .. s_{count-1}` by repeated tridiagonal products on `e_0`, using
/// `s_n = s_0 <J^ceil(n/2) e_0, J^floor(n/2) e_0>`.
fn jacobi_moments(
    diagonal: &[Float],
    off_diagonal: &[Float],
    s0: &Float,
    count: usize,
) -> Result<Vec<Float>> {
    if let Some(i) = off_diagonal.iter().position(|a| *a <= 0) {
        return Err(Error::invalid(format!(
            "Jacobi off-diagonal entries must be positive (index {i})"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let prec = s0.prec();
    let steps = count / 2; // ceil((count-1)/2)
    let avail = diagonal.len().min(off_diagonal.len());
    if steps > avail {
        return Err(Error::MomentOutOfRange {
            index: count - 1,
            available: 2 * avail,
        });
    }
    let mut vecs: Vec<Vec<Float>> = vec![vec![Float::with_val(prec, 1)]];
    for m in 1..=steps {
        let prev = &vecs[m - 1];
        let mut next = vec![Float::new(prec); m + 1];
        for (i, v) in prev.iter().enumerate() {
            // (J v)_i += b_i v_i, (J v)_{i+1} += a_i v_i, (J v)_{i-1} += a_{i-1} v_i
            next[i] += Float::with_val(prec, &diagonal[i] * v);
            next[i + 1] += Float::with_val(prec, &off_diagonal[i] * v);
            if i > 0 {
                next[i - 1] += Float::with_val(prec, &off_diagonal[i - 1] * v);
            }
        }
        vecs.push(next);
    }
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let (hi, lo) = (vecs[n.div_ceil(2)].as_slice(), vecs[n / 2].as_slice());
        let mut dot = Float::new(prec);
        for (x, y) in hi.iter().zip(lo) {
            dot += Float::with_val(prec, x * y);
        }
        dot *= s0;
        out.push(dot);
    }
    Ok(out)
}

impl MomentSource {
    pub fn stieltjes_wigert(q: QParam) -> Self {
        let prec = q.prec();
        MomentSource {
            kind: Arc::new(MomentKind::StieltjesWigert(q)),
            shift: 0,
            prec,
        }
    }

    /// A Jacobi-recurrence source; `s0` defaults to 1.
    pub fn jacobi(
        diagonal: Vec<Float>,
        off_diagonal: Vec<Float>,
        s0: Option<Float>,
        prec: Precision,
    ) -> Result<Self> {
        if let Some(i) = off_diagonal.iter().position(|a| *a <= 0) {
            return Err(Error::invalid(format!(
                "Jacobi off-diagonal entries must be positive (index {i})"
            )));
        }
        let s0 = s0.unwrap_or_else(|| Float::with_val(prec.bits(), 1));
        if s0 <= 0 {
            return Err(Error::invalid("s_0 must be positive"));
        }
        Ok(MomentSource {
            kind: Arc::new(MomentKind::Jacobi {
                diagonal,
                off_diagonal,
                s0,
            }),
            shift: 0,
            prec,
        })
    }

    /// A source replaying explicit values `s_0, s_1, ...`.
    pub fn from_values(values: Vec<Float>, prec: Precision) -> Self {
        MomentSource {
            kind: Arc::new(MomentKind::File {
                path: PathBuf::from("<memory>"),
                values,
            }),
            shift: 0,
            prec,
        }
    }

    pub fn kind(&self) -> &MomentKind {
        &self.kind
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    /// Offset applied by [`shifted`] (twice the number of applications).
    pub fn shift(&self) -> usize {
        self.shift
    }

    /// The same source evaluated at another precision. Stieltjes–Wigert
    /// moments are regenerated; stored values are converted exactly.
    pub fn at_precision(&self, prec: Precision) -> MomentSource {
        let kind = match &*self.kind {
            MomentKind::StieltjesWigert(q) => {
                Arc::new(MomentKind::StieltjesWigert(q.at_precision(prec)))
            }
            _ => Arc::clone(&self.kind),
        };
        MomentSource {
            kind,
            shift: self.shift,
            prec,
        }
    }

    /// Largest index this source can produce, if bounded.
    pub fn available(&self) -> Option<usize> {
        match &*self.kind {
            MomentKind::StieltjesWigert(_) => None,
            MomentKind::Jacobi {
                diagonal,
                off_diagonal,
                ..
            } => (2 * diagonal.len().min(off_diagonal.len())).checked_sub(self.shift),
            MomentKind::File { values, .. } => {
                values.len().checked_sub(self.shift + 1)
            }
        }
    }

    pub fn moment(&self, n: usize) -> Result<Float> {
        Ok(self.moments(n + 1)?.pop().expect("count >= 1"))
    }

    /// `s_0 .. s_{count-1}` at this source's precision.
    pub fn moments(&self, count: usize) -> Result<Vec<Float>> {
        let b = self.prec.bits();
        let end = self.shift + count;
        let raw = match &*self.kind {
            MomentKind::StieltjesWigert(q) => {
                let q = if q.prec() == self.prec {
                    q.clone()
                } else {
                    q.at_precision(self.prec)
                };
                (self.shift..end)
                    .map(|n| sw_moment(n, &q))
                    .collect::<Result<Vec<_>>>()?
            }
            MomentKind::Jacobi {
                diagonal,
                off_diagonal,
                s0,
            } => {
                let conv = |v: &[Float]| -> Vec<Float> {
                    v.iter().map(|x| Float::with_val(b, x)).collect()
                };
                let all = jacobi_moments(
                    &conv(diagonal),
                    &conv(off_diagonal),
                    &Float::with_val(b, s0),
                    end,
                )
                .map_err(|e| match e {
                    Error::MomentOutOfRange { index, available } => Error::MomentOutOfRange {
                        index: index - self.shift,
                        available: available.saturating_sub(self.shift),
                    },
                    other => other,
                })?;
                all.into_iter().skip(self.shift).collect()
            }
            MomentKind::File { values, .. } => {
                if end > values.len() {
                    return Err(Error::MomentOutOfRange {
                        index: count.saturating_sub(1),
                        available: values.len().saturating_sub(self.shift + 1),
                    });
                }
                values[self.shift..end]
                    .iter()
                    .map(|v| Float::with_val(b, v))
                    .collect()
            }
        };
        Ok(raw)
    }

    /// Bits needed to build the Hankel matrix of order `n+1`: the binary
    /// magnitude of `s_N` plus [`GUARD_BITS`]. For the log-normal weight this
    /// is `(N+1)^2 log2(1/q) / 2 + 128`.
    pub fn required_bits(&self, n: usize) -> Result<u32> {
        let log2 = match &*self.kind {
            MomentKind::StieltjesWigert(q) => sw_log2_moment(n + self.shift, q.to_f64()),
            _ => {
                let s = self.moment(n)?;
                if s.is_zero() {
                    0.0
                } else {
                    f64::from(s.get_exp().unwrap_or(0))
                }
            }
        };
        Ok((log2.max(0.0).ceil() as u32).saturating_add(GUARD_BITS))
    }
}

/// `s'_n = s_{n+2}`.
pub fn shifted(src: &MomentSource) -> MomentSource {
    MomentSource {
        kind: Arc::clone(&src.kind),
        shift: src.shift + 2,
        prec: src.prec,
    }
}

/// The `(N+1) x (N+1)` Hankel matrix `H_jk = s_{j+k}`, stored by its
/// `2N+1` defining moments.
#[derive(Clone, Debug)]
pub struct HankelMatrix {
    moments: Vec<Float>,
    prec: Precision,
}

impl HankelMatrix {
    /// Builds directly from `2N+1` moments.
    pub fn from_moments(moments: Vec<Float>, prec: Precision) -> Result<Self> {
        if moments.len() % 2 == 0 {
            return Err(Error::invalid("a Hankel matrix needs an odd number of moments"));
        }
        Ok(HankelMatrix { moments, prec })
    }

    /// Matrix order `N+1`.
    pub fn order(&self) -> usize {
        self.moments.len().div_ceil(2)
    }

    /// Largest index `N`.
    pub fn degree(&self) -> usize {
        self.order() - 1
    }

    pub fn entry(&self, j: usize, k: usize) -> &Float {
        &self.moments[j + k]
    }

    pub fn moments(&self) -> &[Float] {
        &self.moments
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Vec<Float>> {
        let n = self.order();
        (0..n)
            .map(|j| (0..n).map(|k| self.entry(j, k).clone()).collect())
            .collect()
    }
}

/// Builds `H_N` after checking that the source's precision covers
/// [`MomentSource::required_bits`].
pub fn hankel(src: &MomentSource, n: usize) -> Result<HankelMatrix> {
    let need = src.required_bits(n)?;
    if src.precision().bits() < need {
        return Err(Error::PrecisionExhausted {
            bits: src.precision().bits(),
            required: Some(need),
            reason: format!("Hankel matrix of order {} needs {need} bits", n + 1),
        });
    }
    let moments = src.moments(2 * n + 1)?;
    HankelMatrix::from_moments(moments, src.precision())
}

/// Loads a moment file; values are parsed at the header precision or at
/// `default_prec` when the header is absent.
pub fn moments_from_file(path: impl AsRef<Path>, default_prec: Precision) -> Result<MomentSource> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    moments_from_reader(file, path, default_prec)
}

/// Parses the moment file format from any reader. `label` is used in
/// error messages.
pub fn moments_from_reader(
    reader: impl Read,
    label: impl AsRef<Path>,
    default_prec: Precision,
) -> Result<MomentSource> {
    let label = label.as_ref().to_path_buf();
    let perr = |line: usize, msg: String| Error::Parse {
        path: label.clone(),
        line,
        msg,
    };
    let mut prec = default_prec;
    let mut raw: Vec<(usize, String)> = Vec::new();
    let mut seen_content = false;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            if !seen_content {
                if let Some(v) = c.trim().strip_prefix("precision-bits:") {
                    let bits: u32 = v
                        .trim()
                        .parse()
                        .map_err(|_| perr(lineno, format!("bad precision header {v:?}")))?;
                    prec = Precision::new(bits).map_err(|e| perr(lineno, e.to_string()))?;
                }
            }
            seen_content = true;
            continue;
        }
        seen_content = true;
        raw.push((lineno, t.to_string()));
    }
    if raw.is_empty() {
        return Err(perr(0, "no moments in file".into()));
    }
    let mut values = Vec::with_capacity(raw.len());
    for (expected, (lineno, text)) in raw.iter().enumerate() {
        let mut it = text.split_whitespace();
        let (idx, val) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(perr(*lineno, format!("expected `n value`, got {text:?}"))),
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| perr(*lineno, format!("bad index {idx:?}")))?;
        if idx != expected {
            return Err(perr(
                *lineno,
                format!("index gap: expected {expected}, found {idx}"),
            ));
        }
        let v = parse_moment_value(val, prec).map_err(|m| perr(*lineno, m))?;
        values.push(v);
    }
    Ok(MomentSource {
        kind: Arc::new(MomentKind::File {
            path: label,
            values,
        }),
        shift: 0,
        prec,
    })
}

/// Loads recurrence coefficients for [`MomentSource::jacobi`]: lines
/// `k b_k a_k` (diagonal, then off-diagonal), indices from 0 without gaps,
/// with optional `# precision-bits: P` and `# s0: value` headers.
pub fn jacobi_from_file(path: impl AsRef<Path>, default_prec: Precision) -> Result<MomentSource> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    jacobi_from_reader(file, path, default_prec)
}

pub fn jacobi_from_reader(
    reader: impl Read,
    label: impl AsRef<Path>,
    default_prec: Precision,
) -> Result<MomentSource> {
    let label = label.as_ref().to_path_buf();
    let perr = |line: usize, msg: String| Error::Parse {
        path: label.clone(),
        line,
        msg,
    };
    let mut prec = default_prec;
    let mut s0_text: Option<(usize, String)> = None;
    let mut rows: Vec<(usize, String)> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            let c = c.trim();
            if let Some(v) = c.strip_prefix("precision-bits:") {
                let bits: u32 = v
                    .trim()
                    .parse()
                    .map_err(|_| perr(lineno, format!("bad precision header {v:?}")))?;
                prec = Precision::new(bits).map_err(|e| perr(lineno, e.to_string()))?;
            } else if let Some(v) = c.strip_prefix("s0:") {
                s0_text = Some((lineno, v.trim().to_string()));
            }
            continue;
        }
        rows.push((lineno, t.to_string()));
    }
    if rows.is_empty() {
        return Err(perr(0, "no recurrence coefficients in file".into()));
    }
    let mut diagonal = Vec::with_capacity(rows.len());
    let mut off = Vec::with_capacity(rows.len());
    for (expected, (lineno, text)) in rows.iter().enumerate() {
        let f: Vec<&str> = text.split_whitespace().collect();
        if f.len() != 3 {
            return Err(perr(*lineno, format!("expected `k b_k a_k`, got {text:?}")));
        }
        let idx: usize = f[0].parse().map_err(|_| perr(*lineno, format!("bad index {:?}", f[0])))?;
        if idx != expected {
            return Err(perr(*lineno, format!("index gap: expected {expected}, found {idx}")));
        }
        diagonal.push(parse_moment_value(f[1], prec).map_err(|m| perr(*lineno, m))?);
        off.push(parse_moment_value(f[2], prec).map_err(|m| perr(*lineno, m))?);
    }
    let s0 = match s0_text {
        Some((lineno, t)) => Some(parse_moment_value(&t, prec).map_err(|m| perr(lineno, m))?),
        None => None,
    };
    MomentSource::jacobi(diagonal, off, s0, prec)
}

fn parse_moment_value(s: &str, prec: Precision) -> std::result::Result<Float, String> {
    let v = if is_hex_literal(s) {
        parse_hex_float(s, prec)?
    } else {
        let p = Float::parse(s).map_err(|e| format!("bad value {s:?}: {e}"))?;
        Float::with_val(prec.bits(), p)
    };
    if !v.is_finite() {
        return Err(format!("non-finite value {s:?}"));
    }
    Ok(v)
}

fn is_hex_literal(s: &str) -> bool {
    let t = s.trim_start_matches(['+', '-']);
    t.starts_with("0x") || t.starts_with("0X")
}

/// Parses a C99 hexadecimal float literal such as `-0x1.8p+3`.
pub fn parse_hex_float(s: &str, prec: Precision) -> std::result::Result<Float, String> {
    let bad = || format!("bad hexadecimal float {s:?}");
    let (neg, rest) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let rest = rest
        .strip_prefix("0x")
        .or_else(|| rest.strip_prefix("0X"))
        .ok_or_else(bad)?;
    let (mant, exp) = match rest.find(['p', 'P']) {
        Some(i) => (&rest[..i], &rest[i + 1..]),
        None => (rest, "0"),
    };
    let exp: i64 = exp.parse().map_err(|_| bad())?;
    let (int_part, frac_part) = match mant.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mant, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(bad());
    }
    let m = Integer::from_str_radix(&digits, 16).map_err(|_| bad())?;
    let shift = exp - 4 * frac_part.len() as i64;
    let shift = i32::try_from(shift).map_err(|_| bad())?;
    let mut v = Float::with_val(prec.bits(), &m);
    v <<= shift;
    if neg {
        v = -v;
    }
    Ok(v)
}

/// Exact hexadecimal rendering `[-]0x<hex>p<exp>` of a finite float.
pub fn format_hex_float(x: &Float) -> String {
    match x.to_integer_exp() {
        Some((m, e)) if m != 0 => {
            let sign = if m < 0 { "-" } else { "" };
            let mag = Integer::from(m.abs_ref());
            format!("{sign}0x{}p{e}", mag.to_string_radix(16))
        }
        _ => "0x0p0".to_string(),
    }
}

/// Writes `values` in the moment file format with a precision header and
/// exact hexadecimal values.
pub fn write_moment_file(values: &[Float], prec: Precision) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# precision-bits: {}", prec.bits());
    for (n, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{n} {}", format_hex_float(v));
    }
    out
}
