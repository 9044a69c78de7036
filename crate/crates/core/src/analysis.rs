//! Asymptotic analysis of polygon series in double-double arithmetic.
//!
//! Model: `p_n ~ mu^n n^(-5/2) (a_0 + a_1/n + a_2/n^2 + ...)`, even `n` only.

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::{FromPrimitive, ToPrimitive};
use thiserror::Error;
use twofloat::TwoFloat;

use crate::series_io::ExactSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} even terms, found {found}")]
    InsufficientTerms { needed: usize, found: usize },
    #[error("no term at n = {0}")]
    MissingTerm(u32),
    #[error("singular system for the window ending at n = {0}")]
    Singular(u32),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Even-n terms as double-double reals.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSeries {
    terms: Vec<(u32, TwoFloat)>,
}

impl RealSeries {
    /// Terms must have even, strictly increasing `n`.
    pub fn new(mut terms: Vec<(u32, TwoFloat)>) -> Result<Self, AnalysisError> {
        terms.sort_by_key(|t| t.0);
        if terms.iter().any(|t| t.0 % 2 == 1) || terms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(AnalysisError::InvalidArgument(
                "terms must have distinct even n".into(),
            ));
        }
        Ok(RealSeries { terms })
    }

    pub fn from_exact(series: &ExactSeries) -> Self {
        RealSeries {
            terms: series.iter().map(|(n, v)| (n, big_to_real(v))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, n: u32) -> Option<TwoFloat> {
        self.terms
            .binary_search_by_key(&n, |t| t.0)
            .ok()
            .map(|i| self.terms[i].1)
    }

    pub fn max_n(&self) -> Option<u32> {
        self.terms.last().map(|t| t.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, TwoFloat)> + '_ {
        self.terms.iter().copied()
    }

    /// Every term multiplied by `factor`.
    pub fn scaled(&self, factor: TwoFloat) -> Self {
        RealSeries {
            terms: self.terms.iter().map(|&(n, v)| (n, v * factor)).collect(),
        }
    }
}

/// Nearest double-double to a big integer.
pub fn big_to_real(v: &BigUint) -> TwoFloat {
    let hi = v.to_f64().unwrap_or(f64::INFINITY);
    let Some(hi_exact) = BigUint::from_f64(hi) else {
        return TwoFloat::from(hi);
    };
    let lo = (BigInt::from(v.clone()) - BigInt::from(hi_exact))
        .to_f64()
        .unwrap_or(0.0);
    TwoFloat::new_add(hi, lo)
}

fn real(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

// The crate's own division and square root are only accurate to about one
// f64 ulp; a Newton step restores full double-double precision.
fn recip(x: TwoFloat) -> TwoFloat {
    let one = real(1.0);
    let mut r = real(1.0 / x.hi());
    for _ in 0..2 {
        r += r * (one - x * r);
    }
    r
}

fn div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    a * recip(b)
}

fn sqrt(x: TwoFloat) -> TwoFloat {
    let s = x.sqrt();
    s + div(x - s * s, s + s)
}

/// `n^(5/2)`.
fn n_pow_five_halves(n: u32) -> TwoFloat {
    let t = real(n as f64);
    t * t * sqrt(t)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<TwoFloat>>, mut b: Vec<TwoFloat>) -> Option<Vec<TwoFloat>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs().hi() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = div(a[row][col], a[col][col]);
            let (upper, lower) = a.split_at_mut(row);
            for (dst, &src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *dst -= f * src;
            }
            let d = f * b[col];
            b[row] -= d;
        }
    }
    let mut x = vec![real(0.0); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = div(s, a[row][row]);
    }
    Some(x)
}

/// Fits `y_n = sum_j c_j / n^{powers[j]}` exactly through the given points.
/// Columns are scaled by `(n_last / n)^p` to keep the system well conditioned.
fn inverse_power_fit(points: &[(u32, TwoFloat)], powers: &[u32]) -> Option<Vec<TwoFloat>> {
    let n_last = points.iter().map(|p| p.0).max()?;
    let scale = real(n_last as f64);
    let a = points
        .iter()
        .map(|&(n, _)| {
            let t = div(scale, real(n as f64));
            powers.iter().map(|&p| t.powi(p as i32)).collect()
        })
        .collect();
    let b = points.iter().map(|p| p.1).collect();
    let x = solve(a, b)?;
    Some(
        x.into_iter()
            .zip(powers)
            .map(|(c, &p)| c * scale.powi(p as i32))
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticFit {
    pub mu: TwoFloat,
    /// `a_0 ..= a_k`; `a[0]` is the amplitude `B`.
    pub a: Vec<TwoFloat>,
    pub k: usize,
    pub window: Vec<u32>,
    /// Largest relative deviation of the fitted form from the input on the window.
    pub max_relative_residual: f64,
}

impl AsymptoticFit {
    pub fn amplitude(&self) -> f64 {
        self.a[0].hi() + self.a[0].lo()
    }
}

/// Solves for `a_0..a_k` using the `k + 1` largest even `n <= n_last`.
pub fn fit_amplitudes(
    series: &RealSeries,
    mu: TwoFloat,
    k: usize,
    n_last: u32,
) -> Result<AsymptoticFit, AnalysisError> {
    if mu.hi() <= 0.0 {
        return Err(AnalysisError::InvalidArgument("mu must be positive".into()));
    }
    if n_last % 2 == 1 {
        return Err(AnalysisError::InvalidArgument(format!(
            "n_last = {n_last} is odd"
        )));
    }
    let first = n_last as i64 - 2 * k as i64;
    if first < 2 {
        return Err(AnalysisError::InsufficientTerms {
            needed: k + 1,
            found: (n_last / 2) as usize,
        });
    }
    let window: Vec<u32> = (first as u32..=n_last).step_by(2).collect();
    let inv_mu = recip(mu);
    let mut points = Vec::with_capacity(window.len());
    for &n in &window {
        let p = series.get(n).ok_or(AnalysisError::MissingTerm(n))?;
        points.push((n, p * inv_mu.powi(n as i32) * n_pow_five_halves(n)));
    }
    let powers: Vec<u32> = (0..=k as u32).collect();
    let a = inverse_power_fit(&points, &powers).ok_or(AnalysisError::Singular(n_last))?;
    let mut max_rel = 0.0f64;
    for &(n, y) in &points {
        let mut model = real(0.0);
        let inv_n = recip(real(n as f64));
        for (i, c) in a.iter().enumerate() {
            model += *c * inv_n.powi(i as i32);
        }
        let rel = div(model - y, y).abs().hi();
        max_rel = max_rel.max(rel);
    }
    Ok(AsymptoticFit {
        mu,
        a,
        k,
        window,
        max_relative_residual: max_rel,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeRow {
    pub n_last: u32,
    pub k: usize,
    pub a0: TwoFloat,
}

/// `a_0` for every `k` in `k_range` and every usable window end.
pub fn estimate_b_sequence(
    series: &RealSeries,
    mu: TwoFloat,
    k_range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<AmplitudeRow>, AnalysisError> {
    let Some(n_max) = series.max_n() else {
        return Err(AnalysisError::InsufficientTerms { needed: 1, found: 0 });
    };
    let mut rows = Vec::new();
    for k in k_range {
        let mut n_last = (2 * k as u32 + 4).max(4);
        if n_last % 2 == 1 {
            n_last += 1;
        }
        if n_last > n_max {
            return Err(AnalysisError::InsufficientTerms {
                needed: k + 1,
                found: series.len(),
            });
        }
        while n_last <= n_max {
            if (n_last - 2 * k as u32..=n_last)
                .step_by(2)
                .all(|n| series.get(n).is_some())
            {
                let fit = fit_amplitudes(series, mu, k, n_last)?;
                rows.push(AmplitudeRow {
                    n_last,
                    k,
                    a0: fit.a[0],
                });
            }
            n_last += 2;
        }
    }
    Ok(rows)
}

/// Tab-separated table with a header row.
pub fn amplitude_table_tsv(rows: &[AmplitudeRow]) -> String {
    let mut out = String::from("n_last\tinv_n\tk\ta0\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{:.12e}\t{}\t{:.15}",
            r.n_last,
            1.0 / r.n_last as f64,
            r.k,
            r.a0.hi() + r.a0.lo()
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct XcEstimate {
    pub order: usize,
    pub n_last: u32,
    pub xc2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct XcDiagnostics {
    /// Estimates across correction orders and window ends.
    pub estimates: Vec<XcEstimate>,
    /// Largest minus smallest estimate.
    pub spread: f64,
    pub converged: bool,
}

/// Orders of `1/n` corrections tried in the ratio fit.
const XC_ORDERS: std::ops::RangeInclusive<usize> = 3..=6;
/// Window ends tried, counted back from the last term.
const XC_WINDOW_SHIFTS: u32 = 4;
const XC_MIN_TERMS: usize = 12;
const XC_SPREAD_LIMIT: f64 = 1e-4;

/// Biased ratio extrapolation with the exponent fixed.
///
/// `t_n = (p_n / p_{n-2}) (n / (n-2))^(5/2)` removes the power-law factor, so
/// `t_n = x_c^(-2) (1 + c_2/n^2 + c_3/n^3 + ...)` with no `1/n` term. The fit
/// through the last `order + 1` values gives `x_c^2 = 1 / b_0`. The reported
/// estimate uses the highest order and the last window.
pub fn estimate_xc2(series: &RealSeries) -> Result<(f64, XcDiagnostics), AnalysisError> {
    let terms: Vec<(u32, TwoFloat)> = series.iter().filter(|t| t.0 >= 4).collect();
    if terms.len() < XC_MIN_TERMS {
        return Err(AnalysisError::InsufficientTerms {
            needed: XC_MIN_TERMS,
            found: terms.len(),
        });
    }
    let mut ratios = Vec::new();
    for w in terms.windows(2) {
        let ((n0, p0), (n, p)) = (w[0], w[1]);
        if n != n0 + 2 || p0.hi() == 0.0 {
            continue;
        }
        let bias = div(n_pow_five_halves(n), n_pow_five_halves(n - 2));
        ratios.push((n, div(p, p0) * bias));
    }
    let mut estimates = Vec::new();
    let mut best = None;
    for order in XC_ORDERS {
        for shift in (0..XC_WINDOW_SHIFTS).rev() {
            let end = ratios.len() as i64 - 1 - shift as i64;
            let start = end - order as i64;
            if start < 0 {
                continue;
            }
            let window = &ratios[start as usize..=end as usize];
            let powers: Vec<u32> = std::iter::once(0).chain(2..=order as u32 + 1).collect();
            let Some(c) = inverse_power_fit(window, &powers) else {
                continue;
            };
            let xc2 = recip(c[0]);
            let e = XcEstimate {
                order,
                n_last: window.last().unwrap().0,
                xc2: xc2.hi() + xc2.lo(),
            };
            if shift == 0 {
                best = Some(e.xc2);
            }
            estimates.push(e);
        }
    }
    let Some(xc2) = best else {
        return Err(AnalysisError::InsufficientTerms {
            needed: XC_MIN_TERMS,
            found: terms.len(),
        });
    };
    let lo = estimates.iter().map(|e| e.xc2).fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().map(|e| e.xc2).fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let converged = spread.is_finite() && spread < XC_SPREAD_LIMIT && xc2 > 0.0 && xc2 < 1.0 && lo > 0.0;
    Ok((
        xc2,
        XcDiagnostics {
            estimates,
            spread,
            converged,
        },
    ))
}

/// Positive root of `581 y^2 + 7 y - 13`, written to avoid cancellation.
pub fn conjectured_xc2() -> f64 {
    26.0 / (7.0 + 30261f64.sqrt())
}

/// The same root by bisection on `[0, 1]`.
pub fn conjectured_xc2_bisection() -> f64 {
    let f = |y: f64| (581.0 * y + 7.0) * y - 13.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// `mu = 1 / sqrt(x_c^2)` at the conjectured critical point, in double-double.
pub fn conjectured_mu() -> TwoFloat {
    let y = div(real(26.0), real(7.0) + sqrt(real(30261.0)));
    recip(sqrt(y))
}
