//! Exact and residue series with their text file formats.
//!
//! Exact series: `n p_n` per line. Residue series: `n residue modulus` per
//! line. Both allow `#` comment lines and blank lines, require even `n`
//! strictly ascending in steps of two, and reject duplicates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigUint;
use thiserror::Error;

use crate::modular::{crt_reconstruct, ModularError, Modulus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse {field:?}")]
    BadNumber { line: usize, field: String },
    #[error("line {line}: odd n = {n}")]
    OddDegree { line: usize, n: u32 },
    #[error("line {line}: duplicate entry for n = {n}")]
    Duplicate { line: usize, n: u32 },
    #[error("line {line}: n = {n} out of order (previous {previous})")]
    OutOfOrder { line: usize, n: u32, previous: u32 },
    #[error("line {line}: missing entries between n = {previous} and n = {n}")]
    Missing { line: usize, n: u32, previous: u32 },
    #[error("line {line}: modulus {found} differs from {expected}")]
    MixedModuli { line: usize, expected: u64, found: u64 },
    #[error("line {line}: {source}")]
    Modulus { line: usize, source: ModularError },
}

/// Exact counts `p_n`, even `n` only.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExactSeries {
    terms: BTreeMap<u32, BigUint>,
}

impl ExactSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on odd `n`; odd terms are structurally zero.
    pub fn insert(&mut self, n: u32, value: BigUint) {
        assert!(n.is_multiple_of(2), "odd n = {n} in polygon series");
        self.terms.insert(n, value);
    }

    pub fn get(&self, n: u32) -> Option<&BigUint> {
        self.terms.get(&n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &BigUint)> {
        self.terms.iter().map(|(&n, v)| (n, v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_n(&self) -> Option<u32> {
        self.terms.keys().next_back().copied()
    }

    /// Keeps terms with `n <= n_max`.
    pub fn truncated(&self, n_max: u32) -> Self {
        ExactSeries {
            terms: self.terms.range(..=n_max).map(|(&n, v)| (n, v.clone())).collect(),
        }
    }

    /// First `n` where the two series differ over their common range, plus
    /// any `n` present in only one of them.
    pub fn first_mismatch(&self, other: &ExactSeries) -> Option<u32> {
        let keys: std::collections::BTreeSet<u32> =
            self.terms.keys().chain(other.terms.keys()).copied().collect();
        keys.into_iter().find(|n| self.terms.get(n) != other.terms.get(n))
    }

    pub fn to_text(&self, comments: &[&str]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        for (n, v) in &self.terms {
            let _ = writeln!(out, "{n} {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut series = ExactSeries::new();
        let mut order = OrderCheck::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let Some(fields) = data_fields(raw) else { continue };
            if fields.len() != 2 {
                return Err(ParseError::FieldCount {
                    line,
                    expected: 2,
                    found: fields.len(),
                });
            }
            let n = parse_n(fields[0], line)?;
            order.accept(n, line)?;
            let value: BigUint = fields[1].parse().map_err(|_| ParseError::BadNumber {
                line,
                field: fields[1].to_string(),
            })?;
            series.terms.insert(n, value);
        }
        Ok(series)
    }
}

/// Residues of a series modulo a single modulus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueSeries {
    pub modulus: Modulus,
    terms: BTreeMap<u32, u64>,
}

impl ResidueSeries {
    pub fn new(modulus: Modulus) -> Self {
        ResidueSeries {
            modulus,
            terms: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, n: u32, residue: u64) {
        assert!(n.is_multiple_of(2));
        debug_assert!(residue < self.modulus.get());
        self.terms.insert(n, residue);
    }

    pub fn get(&self, n: u32) -> Option<u64> {
        self.terms.get(&n).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.terms.iter().map(|(&n, &r)| (n, r))
    }

    pub fn to_text(&self, comments: &[&str]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        for (n, r) in &self.terms {
            let _ = writeln!(out, "{n} {r} {}", self.modulus.get());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut modulus: Option<Modulus> = None;
        let mut terms = BTreeMap::new();
        let mut order = OrderCheck::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let Some(fields) = data_fields(raw) else { continue };
            if fields.len() != 3 {
                return Err(ParseError::FieldCount {
                    line,
                    expected: 3,
                    found: fields.len(),
                });
            }
            let n = parse_n(fields[0], line)?;
            order.accept(n, line)?;
            let residue: u64 = parse_u64(fields[1], line)?;
            let m_raw = parse_u64(fields[2], line)?;
            let m = Modulus::new(m_raw).map_err(|source| ParseError::Modulus { line, source })?;
            match modulus {
                None => modulus = Some(m),
                Some(prev) if prev != m => {
                    return Err(ParseError::MixedModuli {
                        line,
                        expected: prev.get(),
                        found: m_raw,
                    });
                }
                _ => {}
            }
            if residue >= m_raw {
                return Err(ParseError::Modulus {
                    line,
                    source: ModularError::Unreduced {
                        residue,
                        modulus: m_raw,
                    },
                });
            }
            terms.insert(n, residue);
        }
        let modulus = modulus.unwrap_or(Modulus::M0);
        Ok(ResidueSeries { modulus, terms })
    }
}

#[derive(Debug, Error)]
pub enum CombineError {
    #[error("residue files disagree on the set of n (first difference at n = {0})")]
    Coverage(u32),
    #[error(transparent)]
    Modular(#[from] ModularError),
}

/// CRT-combines residue series over a common index set.
pub fn combine_residues(series: &[ResidueSeries]) -> Result<ExactSeries, CombineError> {
    let Some(first) = series.first() else {
        return Err(CombineError::Modular(ModularError::Empty));
    };
    let keys: Vec<u32> = first.terms.keys().copied().collect();
    for s in &series[1..] {
        let other: Vec<u32> = s.terms.keys().copied().collect();
        if other != keys {
            let n = keys
                .iter()
                .zip(&other)
                .find(|(a, b)| a != b)
                .map(|(a, _)| *a)
                .unwrap_or_else(|| *keys.get(other.len()).or(other.get(keys.len())).unwrap());
            return Err(CombineError::Coverage(n));
        }
    }
    let mut out = ExactSeries::new();
    for n in keys {
        let residues: Vec<(u64, Modulus)> = series.iter().map(|s| (s.terms[&n], s.modulus)).collect();
        out.insert(n, crt_reconstruct(&residues)?);
    }
    Ok(out)
}

fn data_fields(raw: &str) -> Option<Vec<&str>> {
    let t = raw.trim();
    if t.is_empty() || t.starts_with('#') {
        None
    } else {
        Some(t.split_whitespace().collect())
    }
}

fn parse_u64(field: &str, line: usize) -> Result<u64, ParseError> {
    field.parse().map_err(|_| ParseError::BadNumber {
        line,
        field: field.to_string(),
    })
}

fn parse_n(field: &str, line: usize) -> Result<u32, ParseError> {
    let n: u32 = field.parse().map_err(|_| ParseError::BadNumber {
        line,
        field: field.to_string(),
    })?;
    if !n.is_multiple_of(2) {
        return Err(ParseError::OddDegree { line, n });
    }
    Ok(n)
}

#[derive(Default)]
struct OrderCheck {
    previous: Option<u32>,
}

impl OrderCheck {
    fn accept(&mut self, n: u32, line: usize) -> Result<(), ParseError> {
        if let Some(previous) = self.previous {
            if n == previous {
                return Err(ParseError::Duplicate { line, n });
            }
            if n < previous {
                return Err(ParseError::OutOfOrder { line, n, previous });
            }
            if n != previous + 2 {
                return Err(ParseError::Missing { line, n, previous });
            }
        }
        self.previous = Some(n);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_reports_line_numbers() {
        let err = ExactSeries::parse("# header\n4 1\n5 2\n").unwrap_err();
        assert_eq!(err, ParseError::OddDegree { line: 3, n: 5 });
        let err = ExactSeries::parse("4 1\n4 1\n").unwrap_err();
        assert_eq!(err, ParseError::Duplicate { line: 2, n: 4 });
        let err = ExactSeries::parse("4 1\n8 7\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::Missing {
                line: 2,
                n: 8,
                previous: 4
            }
        );
        let err = ExactSeries::parse("6 2\n4 1\n").unwrap_err();
        assert!(matches!(err, ParseError::OutOfOrder { line: 2, .. }));
        let err = ExactSeries::parse("4\n").unwrap_err();
        assert!(matches!(err, ParseError::FieldCount { line: 1, .. }));
        let err = ExactSeries::parse("4 x\n").unwrap_err();
        assert!(matches!(err, ParseError::BadNumber { line: 1, .. }));
    }

    #[test]
    fn residue_file_checks_modulus() {
        let ok = ResidueSeries::parse("4 1 7\n6 2 7\n").unwrap();
        assert_eq!(ok.modulus.get(), 7);
        assert!(matches!(
            ResidueSeries::parse("4 1 7\n6 2 11\n"),
            Err(ParseError::MixedModuli { line: 2, .. })
        ));
        assert!(matches!(
            ResidueSeries::parse("4 9 7\n"),
            Err(ParseError::Modulus { line: 1, .. })
        ));
    }

    #[test]
    fn combine_two_moduli() {
        let a = ResidueSeries::parse("4 1 2\n6 0 2\n").unwrap();
        let b = ResidueSeries::parse("4 2 3\n6 1 3\n").unwrap();
        let s = combine_residues(&[a, b]).unwrap();
        assert_eq!(s.get(4), Some(&BigUint::from(5u32)));
        assert_eq!(s.get(6), Some(&BigUint::from(4u32)));
    }

    #[test]
    fn combine_detects_coverage_gap() {
        let a = ResidueSeries::parse("4 1 2\n6 0 2\n").unwrap();
        let b = ResidueSeries::parse("4 2 3\n").unwrap();
        assert!(matches!(
            combine_residues(&[a, b]),
            Err(CombineError::Coverage(6))
        ));
    }

    proptest! {
        #[test]
        fn exact_text_round_trip(start in 0u32..10, values in prop::collection::vec(any::<u128>(), 0..20)) {
            let mut s = ExactSeries::new();
            for (i, v) in values.iter().enumerate() {
                s.insert(2 * start + 2 * i as u32, BigUint::from(*v));
            }
            let text = s.to_text(&["generated"]);
            prop_assert_eq!(ExactSeries::parse(&text).unwrap(), s);
        }
    }
}
