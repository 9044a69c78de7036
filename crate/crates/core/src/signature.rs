//! Boundary signatures.
//!
//! A signature is the sequence of edge states cut by the transfer-matrix
//! boundary, read bottom to top, together with two flags recording whether
//! the partial polygon has already touched the bottom and top rows of the
//! rectangle. Under the future-connectivity convention a `Lower` edge must be
//! joined (to the right of the boundary) with the `Upper` edge it matches in
//! the non-crossing pairing.
//!
//! Packed layout: bit 0 is `touched_bottom`, bit 1 is `touched_top`, and edge
//! `i` occupies bits `2 + 2i ..= 3 + 2i`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest number of boundary edges that fits a packed key.
pub const MAX_EDGES: usize = 31;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("signature has {0} edges, at most {MAX_EDGES} are supported")]
    TooWide(usize),
    #[error("unmatched upper loop-end at position {0}")]
    UnmatchedUpper(usize),
    #[error("unmatched lower loop-end at position {0}")]
    UnmatchedLower(usize),
    #[error("invalid edge code {code} at position {position}")]
    BadCode { position: usize, code: u8 },
    #[error("packed key has bits set beyond {edges} edges")]
    TrailingBits { edges: usize },
    #[error("insertion positions {0} and {1} must both be empty and inside the signature")]
    InsertionBlocked(usize, usize),
    #[error("cannot parse signature character {0:?}")]
    BadChar(char),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum EdgeState {
    Empty = 0,
    Lower = 1,
    Upper = 2,
}

impl EdgeState {
    #[inline]
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EdgeState::Empty),
            1 => Some(EdgeState::Lower),
            2 => Some(EdgeState::Upper),
            _ => None,
        }
    }

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn is_occupied(self) -> bool {
        self != EdgeState::Empty
    }
}

/// Boundary configuration as a value object.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    edges: Vec<EdgeState>,
    pub touched_bottom: bool,
    pub touched_top: bool,
}

impl Signature {
    /// Validates and builds a signature.
    pub fn new(
        edges: Vec<EdgeState>,
        touched_bottom: bool,
        touched_top: bool,
    ) -> Result<Self, SignatureError> {
        if edges.len() > MAX_EDGES {
            return Err(SignatureError::TooWide(edges.len()));
        }
        let codes: Vec<u8> = edges.iter().map(|e| e.code()).collect();
        validate_codes(&codes)?;
        Ok(Signature {
            edges,
            touched_bottom,
            touched_top,
        })
    }

    /// All-empty signature with `len` edges and both flags unset.
    pub fn empty(len: usize) -> Self {
        Signature {
            edges: vec![EdgeState::Empty; len],
            touched_bottom: false,
            touched_top: false,
        }
    }

    pub fn edges(&self) -> &[EdgeState] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// True when no edge is occupied.
    pub fn is_vacant(&self) -> bool {
        self.edges.iter().all(|e| !e.is_occupied())
    }

    pub fn occupied_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_occupied()).count()
    }

    pub fn with_flags(mut self, touched_bottom: bool, touched_top: bool) -> Self {
        self.touched_bottom = touched_bottom;
        self.touched_top = touched_top;
        self
    }

    pub(crate) fn codes(&self) -> Vec<u8> {
        self.edges.iter().map(|e| e.code()).collect()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.edges {
            write!(f, "{}", e.code())?;
        }
        Ok(())
    }
}

impl FromStr for Signature {
    type Err = SignatureError;

    /// Parses a digit string such as `1122`; flags are left unset.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let edges = s
            .chars()
            .map(|c| match c {
                '0' => Ok(EdgeState::Empty),
                '1' => Ok(EdgeState::Lower),
                '2' => Ok(EdgeState::Upper),
                other => Err(SignatureError::BadChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Signature::new(edges, false, false)
    }
}

/// Compact signature key. Keys compare as plain integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PackedSignature(pub u64);

pub const FLAG_BOTTOM: u64 = 1;
pub const FLAG_TOP: u64 = 2;

impl PackedSignature {
    #[inline]
    pub fn edge(self, i: usize) -> u8 {
        ((self.0 >> (2 + 2 * i)) & 3) as u8
    }

    #[inline]
    pub fn set_edge(&mut self, i: usize, code: u8) {
        let shift = 2 + 2 * i;
        self.0 = (self.0 & !(3u64 << shift)) | ((code as u64) << shift);
    }

    #[inline]
    pub fn touched_bottom(self) -> bool {
        self.0 & FLAG_BOTTOM != 0
    }

    #[inline]
    pub fn touched_top(self) -> bool {
        self.0 & FLAG_TOP != 0
    }

    #[inline]
    pub fn with_flag_bits(self, bits: u64) -> Self {
        PackedSignature(self.0 | bits)
    }

    /// True when every edge is empty (flags ignored).
    #[inline]
    pub fn has_no_edges(self) -> bool {
        self.0 >> 2 == 0
    }

    /// One bit per occupied edge.
    #[inline]
    pub fn occupancy(self, len: usize) -> u64 {
        let mut mask = 0u64;
        let edges = self.0 >> 2;
        for i in 0..len {
            if (edges >> (2 * i)) & 3 != 0 {
                mask |= 1 << i;
            }
        }
        mask
    }

    /// Copies edge codes into `buf`, returning the filled prefix.
    #[inline]
    pub fn decode_into(self, len: usize, buf: &mut [u8; MAX_EDGES]) {
        let mut edges = self.0 >> 2;
        for slot in buf.iter_mut().take(len) {
            *slot = (edges & 3) as u8;
            edges >>= 2;
        }
    }

    #[inline]
    pub fn encode(codes: &[u8], flag_bits: u64) -> Self {
        let mut key = 0u64;
        for (i, &c) in codes.iter().enumerate() {
            key |= (c as u64) << (2 + 2 * i);
        }
        PackedSignature(key | flag_bits)
    }

    #[inline]
    pub fn flag_bits(self) -> u64 {
        self.0 & 3
    }
}

/// Packs a signature into its compact key.
pub fn pack(sig: &Signature) -> PackedSignature {
    let mut flags = 0;
    if sig.touched_bottom {
        flags |= FLAG_BOTTOM;
    }
    if sig.touched_top {
        flags |= FLAG_TOP;
    }
    PackedSignature::encode(&sig.codes(), flags)
}

/// Decodes a key into a signature with `len` edges, validating it.
pub fn unpack(key: PackedSignature, len: usize) -> Result<Signature, SignatureError> {
    if len > MAX_EDGES {
        return Err(SignatureError::TooWide(len));
    }
    if len < MAX_EDGES && key.0 >> (2 + 2 * len) != 0 {
        return Err(SignatureError::TrailingBits { edges: len });
    }
    let mut buf = [0u8; MAX_EDGES];
    key.decode_into(len, &mut buf);
    let mut edges = Vec::with_capacity(len);
    for (position, &code) in buf[..len].iter().enumerate() {
        edges.push(EdgeState::from_code(code).ok_or(SignatureError::BadCode { position, code })?);
    }
    Signature::new(edges, key.touched_bottom(), key.touched_top())
}

pub(crate) fn validate_codes(codes: &[u8]) -> Result<(), SignatureError> {
    let mut open: Vec<usize> = Vec::new();
    for (position, &code) in codes.iter().enumerate() {
        match code {
            0 => {}
            1 => open.push(position),
            2 => {
                if open.pop().is_none() {
                    return Err(SignatureError::UnmatchedUpper(position));
                }
            }
            code => return Err(SignatureError::BadCode { position, code }),
        }
    }
    match open.first() {
        Some(&p) => Err(SignatureError::UnmatchedLower(p)),
        None => Ok(()),
    }
}

/// Hot-path partner table: `partner[i]` is the matching position of an
/// occupied edge `i`. Empty positions are left untouched. Codes must be valid.
#[inline]
pub(crate) fn fill_partners(codes: &[u8], partner: &mut [u8; MAX_EDGES]) {
    let mut stack = [0u8; MAX_EDGES];
    let mut top = 0usize;
    for (i, &c) in codes.iter().enumerate() {
        if c == 1 {
            stack[top] = i as u8;
            top += 1;
        } else if c == 2 {
            debug_assert!(top > 0);
            top -= 1;
            let j = stack[top];
            partner[i] = j;
            partner[j as usize] = i as u8;
        }
    }
    debug_assert_eq!(top, 0);
}

/// A matched loop: `lower < upper` are edge positions (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LoopPair {
    pub lower: usize,
    pub upper: usize,
    /// Number of pairs strictly enclosing this one.
    pub level: usize,
    /// Height of the nesting tree below this pair (0 when nothing is nested inside).
    pub inner_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LoopPairing {
    /// Sorted by lower position.
    pub pairs: Vec<LoopPair>,
}

impl LoopPairing {
    pub fn partner(&self, position: usize) -> Option<usize> {
        self.pairs.iter().find_map(|p| {
            if p.lower == position {
                Some(p.upper)
            } else if p.upper == position {
                Some(p.lower)
            } else {
                None
            }
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Matches every loop-end with its partner and records nesting.
pub fn match_pairs(sig: &Signature) -> Result<LoopPairing, SignatureError> {
    let codes = sig.codes();
    validate_codes(&codes)?;
    Ok(pairing_of_codes(&codes))
}

pub(crate) fn pairing_of_codes(codes: &[u8]) -> LoopPairing {
    // (lower position, deepest child inner_depth + 1 so far)
    let mut open: Vec<(usize, usize)> = Vec::new();
    let mut pairs = Vec::new();
    for (i, &c) in codes.iter().enumerate() {
        match c {
            1 => open.push((i, 0)),
            2 => {
                let (lower, inner_depth) = open.pop().expect("validated signature");
                let level = open.len();
                if let Some(parent) = open.last_mut() {
                    parent.1 = parent.1.max(inner_depth + 1);
                }
                pairs.push(LoopPair {
                    lower,
                    upper: i,
                    level,
                    inner_depth,
                });
            }
            _ => {}
        }
    }
    pairs.sort();
    LoopPairing { pairs }
}

/// Loops a new loop inserted at `insert_pos, insert_pos + 1` may attach to:
/// the innermost pair enclosing the insertion point (if any) and the pairs
/// directly inside it. Returned in ascending lower position.
pub fn reachable_loops(sig: &Signature, insert_pos: usize) -> Result<Vec<LoopPair>, SignatureError> {
    let codes = sig.codes();
    validate_codes(&codes)?;
    if insert_pos + 1 >= codes.len() || codes[insert_pos] != 0 || codes[insert_pos + 1] != 0 {
        return Err(SignatureError::InsertionBlocked(insert_pos, insert_pos + 1));
    }
    let pairing = pairing_of_codes(&codes);
    let mut partner = [0u8; MAX_EDGES];
    fill_partners(&codes, &mut partner);
    let mut found = Vec::new();
    reachable_into(&codes, &partner, insert_pos, |lower, upper| {
        found.push((lower, upper))
    });
    let mut out: Vec<LoopPair> = found
        .into_iter()
        .map(|(lo, _)| *pairing.pairs.iter().find(|p| p.lower == lo).expect("pair exists"))
        .collect();
    out.sort();
    Ok(out)
}

/// Calls `visit(lower, upper)` for each reachable pair; enclosing pair first.
#[inline]
pub(crate) fn reachable_into(
    codes: &[u8],
    partner: &[u8; MAX_EDGES],
    insert_pos: usize,
    mut visit: impl FnMut(usize, usize),
) {
    // Innermost enclosing lower end: scan downward, skipping complete pairs.
    let mut enclosing = None;
    let mut i = insert_pos;
    while i > 0 {
        i -= 1;
        match codes[i] {
            1 => {
                enclosing = Some(i);
                break;
            }
            2 => i = partner[i] as usize,
            _ => {}
        }
    }
    let (start, end) = match enclosing {
        Some(lo) => {
            let hi = partner[lo] as usize;
            visit(lo, hi);
            (lo + 1, hi)
        }
        None => (0, codes.len()),
    };
    let mut i = start;
    while i < end {
        if codes[i] == 1 {
            let hi = partner[i] as usize;
            visit(i, hi);
            i = hi + 1;
        } else {
            i += 1;
        }
    }
}
