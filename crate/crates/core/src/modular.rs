//! Residue arithmetic, truncated polynomials over residue rings, and
//! Chinese-remainder reconstruction.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModularError {
    #[error("modulus {0} is outside [2, 2^62]")]
    BadModulus(u64),
    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(u64, u64),
    #[error("residue {residue} is not reduced modulo {modulus}")]
    Unreduced { residue: u64, modulus: u64 },
    #[error("expected {expected} residue lanes, found {found}")]
    LaneMismatch { expected: usize, found: usize },
    #[error("no residues given")]
    Empty,
}

pub const MODULUS_CAP: u64 = 1 << 62;

/// A word-size modulus `2 <= m <= 2^62`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Modulus(u64);

impl Modulus {
    pub const M0: Modulus = Modulus(1 << 62);
    pub const M1: Modulus = Modulus((1 << 62) - 1);
    pub const M2: Modulus = Modulus((1 << 62) - 3);

    pub fn new(m: u64) -> Result<Self, ModularError> {
        if (2..=MODULUS_CAP).contains(&m) {
            Ok(Modulus(m))
        } else {
            Err(ModularError::BadModulus(m))
        }
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        mod_add(a, b, self)
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        mod_mul(a, b, self)
    }

    pub fn reduce_big(self, v: &BigUint) -> u64 {
        let r = v % BigUint::from(self.0);
        r.iter_u64_digits().next().unwrap_or(0)
    }
}

/// `(a + b) mod m` for reduced inputs. `a + b < 2^63` so the sum never wraps.
#[inline]
pub fn mod_add(a: u64, b: u64, m: Modulus) -> u64 {
    debug_assert!(a < m.0 && b < m.0);
    let s = a + b;
    if m.0.is_power_of_two() {
        s & (m.0 - 1)
    } else if s >= m.0 {
        s - m.0
    } else {
        s
    }
}

#[inline]
pub fn mod_mul(a: u64, b: u64, m: Modulus) -> u64 {
    debug_assert!(a < m.0 && b < m.0);
    if m.0.is_power_of_two() {
        a.wrapping_mul(b) & (m.0 - 1)
    } else {
        ((a as u128 * b as u128) % m.0 as u128) as u64
    }
}

/// An ordered list of pairwise coprime moduli; one residue lane per modulus.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Moduli(Vec<Modulus>);

impl Moduli {
    pub fn new(list: Vec<Modulus>) -> Result<Self, ModularError> {
        if list.is_empty() {
            return Err(ModularError::Empty);
        }
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if a.0.gcd(&b.0) != 1 {
                    return Err(ModularError::NotCoprime(a.0, b.0));
                }
            }
        }
        Ok(Moduli(list))
    }

    /// `2^62, 2^62 - 1, 2^62 - 3`.
    pub fn standard() -> Self {
        Moduli(vec![Modulus::M0, Modulus::M1, Modulus::M2])
    }

    /// The first `count` standard moduli.
    pub fn standard_prefix(count: usize) -> Self {
        Moduli(Self::standard().0[..count.clamp(1, 3)].to_vec())
    }

    pub fn as_slice(&self) -> &[Modulus] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn product(&self) -> BigUint {
        self.0.iter().fold(BigUint::one(), |acc, m| acc * m.0)
    }
}

/// Reconstructs the unique `x` in `[0, prod m_i)` with `x = r_i mod m_i`.
pub fn crt_reconstruct(residues: &[(u64, Modulus)]) -> Result<BigUint, ModularError> {
    if residues.is_empty() {
        return Err(ModularError::Empty);
    }
    for &(r, m) in residues {
        if r >= m.0 {
            return Err(ModularError::Unreduced {
                residue: r,
                modulus: m.0,
            });
        }
    }
    Moduli::new(residues.iter().map(|&(_, m)| m).collect())?;

    // Garner-style incremental combination.
    let mut x = BigInt::from(residues[0].0);
    let mut prod = BigInt::from(residues[0].1 .0);
    for &(r, m) in &residues[1..] {
        let m_big = BigInt::from(m.0);
        let inv = mod_inverse(&(&prod % &m_big), &m_big).expect("coprime moduli");
        let diff = (BigInt::from(r) - &x).mod_floor(&m_big);
        let t = (diff * inv).mod_floor(&m_big);
        x += &prod * t;
        prod *= m_big;
    }
    Ok(x.to_biguint().expect("non-negative by construction"))
}

/// Same as [`crt_reconstruct`] with residues given as a parallel slice.
pub fn crt_lanes(residues: &[u64], moduli: &Moduli) -> Result<BigUint, ModularError> {
    if residues.len() != moduli.len() {
        return Err(ModularError::LaneMismatch {
            expected: moduli.len(),
            found: residues.len(),
        });
    }
    let pairs: Vec<(u64, Modulus)> = residues.iter().copied().zip(moduli.0.iter().copied()).collect();
    crt_reconstruct(&pairs)
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

/// Degree-capped polynomial with one residue lane per modulus.
///
/// Coefficients are stored densely from `min_degree` upward, degree-major:
/// `coeffs[(d - min_degree) * lanes + lane]`. `min_degree` is structural: it
/// is the smallest degree that ever received a contribution, never read back
/// from the residues, so it stays exact even if a residue happens to vanish.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TruncatedPoly {
    min_degree: u32,
    lanes: u32,
    coeffs: Vec<u64>,
}

impl TruncatedPoly {
    pub fn zero(lanes: usize) -> Self {
        TruncatedPoly {
            min_degree: 0,
            lanes: lanes as u32,
            coeffs: Vec::new(),
        }
    }

    /// `x^degree` with coefficient 1 in every lane.
    pub fn monomial(degree: u32, lanes: usize) -> Self {
        TruncatedPoly {
            min_degree: degree,
            lanes: lanes as u32,
            coeffs: vec![1; lanes],
        }
    }

    /// Builds from explicit `(degree, residues)` terms; degrees must ascend
    /// contiguously from the first.
    pub fn from_dense(min_degree: u32, lanes: usize, coeffs: Vec<u64>) -> Self {
        assert_eq!(coeffs.len() % lanes.max(1), 0);
        TruncatedPoly {
            min_degree,
            lanes: lanes as u32,
            coeffs,
        }
    }

    #[inline]
    pub fn lanes(&self) -> usize {
        self.lanes as usize
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Smallest degree with a contribution, `None` for the zero polynomial.
    #[inline]
    pub fn min_degree(&self) -> Option<u32> {
        (!self.is_zero()).then_some(self.min_degree)
    }

    #[inline]
    pub fn max_degree(&self) -> Option<u32> {
        (!self.is_zero()).then(|| self.min_degree + self.stored_degrees() as u32 - 1)
    }

    /// Number of stored degrees.
    #[inline]
    pub fn stored_degrees(&self) -> usize {
        if self.lanes == 0 {
            0
        } else {
            self.coeffs.len() / self.lanes as usize
        }
    }

    pub fn coeff(&self, degree: u32, lane: usize) -> u64 {
        if self.is_zero() || degree < self.min_degree {
            return 0;
        }
        let idx = (degree - self.min_degree) as usize * self.lanes as usize + lane;
        self.coeffs.get(idx).copied().unwrap_or(0)
    }

    pub fn raw(&self) -> &[u64] {
        &self.coeffs
    }

    /// Iterates `(degree, residues)`.
    pub fn terms(&self) -> impl Iterator<Item = (u32, &[u64])> {
        let base = self.min_degree;
        self.coeffs
            .chunks(self.lanes.max(1) as usize)
            .enumerate()
            .map(move |(i, c)| (base + i as u32, c))
    }

    /// Drops every degree above `max_degree`.
    pub fn truncate_above(&mut self, max_degree: u32) {
        if self.is_zero() {
            return;
        }
        if max_degree < self.min_degree {
            self.coeffs.clear();
            return;
        }
        let keep = (max_degree - self.min_degree + 1) as usize * self.lanes as usize;
        self.coeffs.truncate(keep);
    }

    /// Checked form of [`TruncatedPoly::add_shifted_unchecked`].
    pub fn add_shifted(
        &mut self,
        source: &TruncatedPoly,
        k: u32,
        max_degree: u32,
        moduli: &Moduli,
    ) -> Result<(), ModularError> {
        for lanes in [self.lanes(), source.lanes()] {
            if lanes != moduli.len() {
                return Err(ModularError::LaneMismatch {
                    expected: moduli.len(),
                    found: lanes,
                });
            }
        }
        self.add_shifted_unchecked(source, k, max_degree, moduli.as_slice());
        Ok(())
    }

    /// `self += x^k * source`, keeping degrees `<= max_degree`.
    #[inline]
    pub fn add_shifted_unchecked(
        &mut self,
        source: &TruncatedPoly,
        k: u32,
        max_degree: u32,
        moduli: &[Modulus],
    ) {
        let Some(src_lo) = source.min_degree() else { return };
        let lanes = self.lanes as usize;
        debug_assert_eq!(lanes, source.lanes as usize);
        let lo = src_lo + k;
        if lo > max_degree {
            return;
        }
        let src_hi = (source.max_degree().unwrap() + k).min(max_degree);
        let take = (src_hi - lo + 1) as usize * lanes;
        let src = &source.coeffs[..take];

        if self.is_zero() {
            self.min_degree = lo;
            self.coeffs.clear();
            self.coeffs.extend_from_slice(src);
            return;
        }
        if lo < self.min_degree {
            let pad = (self.min_degree - lo) as usize * lanes;
            self.coeffs.splice(0..0, std::iter::repeat_n(0, pad));
            self.min_degree = lo;
        }
        let offset = (lo - self.min_degree) as usize * lanes;
        let needed = offset + take;
        if needed > self.coeffs.len() {
            self.coeffs.resize(needed, 0);
        }
        let dst = &mut self.coeffs[offset..needed];
        for (chunk_d, chunk_s) in dst.chunks_mut(lanes).zip(src.chunks(lanes)) {
            for ((d, &s), &m) in chunk_d.iter_mut().zip(chunk_s).zip(moduli) {
                *d = mod_add(*d, s, m);
            }
        }
    }
}

/// Polynomial with exact big-integer coefficients, used for cross-checks.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExactPoly {
    pub coeffs: Vec<BigUint>,
}

impl ExactPoly {
    pub fn add_shifted(&mut self, source: &ExactPoly, k: usize, max_degree: usize) {
        for (d, c) in source.coeffs.iter().enumerate() {
            let t = d + k;
            if t > max_degree || c.is_zero() {
                continue;
            }
            if self.coeffs.len() <= t {
                self.coeffs.resize(t + 1, BigUint::zero());
            }
            self.coeffs[t] += c;
        }
    }
}
