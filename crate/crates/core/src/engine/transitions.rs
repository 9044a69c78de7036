//! Update rules for moving the boundary kink past one vertex.
//!
//! Before processing the vertex at `(row, column)` the kink edges sit at
//! positions `row - 1` (vertical edge arriving from below) and `row`
//! (horizontal edge arriving from the left). Afterwards the same positions
//! hold the outgoing horizontal edge and the outgoing vertical edge.

use crate::signature::{fill_partners, reachable_into, PackedSignature, FLAG_BOTTOM, FLAG_TOP, MAX_EDGES};

#[derive(Clone, Copy, Debug)]
pub(crate) struct SiteRules {
    /// 1-based row of the vertex being processed.
    pub row: usize,
    pub width: usize,
    /// A new loop may be placed into the vacant boundary.
    pub seeding: bool,
    /// Closed polygons at this column are harvested.
    pub harvest: bool,
    pub simplify: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Step {
    Target(PackedSignature, u32),
    Harvest(u32),
}

impl SiteRules {
    #[inline]
    fn touch_bits(&self) -> u64 {
        let mut bits = 0;
        if self.row == 1 {
            bits |= FLAG_BOTTOM;
        }
        if self.row == self.width {
            bits |= FLAG_TOP;
        }
        bits
    }

    /// Folds a lone occupied vertical kink edge onto the horizontal edge
    /// above it (both lead into the same vertex), and drops kink states that
    /// could never be joined.
    #[inline]
    fn finish(&self, mut key: PackedSignature) -> Option<PackedSignature> {
        if self.simplify && self.row < self.width {
            let v = self.row;
            let h = self.row + 1;
            let (vs, hs) = (key.edge(v), key.edge(h));
            if vs != 0 {
                if hs == 0 {
                    key.set_edge(h, vs);
                    key.set_edge(v, 0);
                } else if !(vs == 1 && hs == 2) {
                    return None;
                }
            }
        }
        Some(key)
    }
}

/// Calls `emit` once per outcome of processing the site for `key`.
#[inline]
pub(crate) fn for_each_step(key: PackedSignature, rules: &SiteRules, mut emit: impl FnMut(Step)) {
    let n_edges = rules.width + 1;
    let p = rules.row - 1;
    let q = rules.row;
    let a = key.edge(p);
    let b = key.edge(q);
    let top_row = rules.row == rules.width;
    let touched = key.with_flag_bits(rules.touch_bits());

    match (a != 0, b != 0) {
        (false, false) => {
            emit(Step::Target(key, 0));
            if top_row {
                return;
            }
            if key.has_no_edges() {
                if rules.seeding {
                    let mut t = touched;
                    t.set_edge(p, 1);
                    t.set_edge(q, 2);
                    if let Some(t) = rules.finish(t) {
                        emit(Step::Target(t, 2));
                    }
                }
                return;
            }
            let mut codes = [0u8; MAX_EDGES];
            key.decode_into(n_edges, &mut codes);
            let mut partner = [0u8; MAX_EDGES];
            fill_partners(&codes[..n_edges], &mut partner);
            reachable_into(&codes[..n_edges], &partner, p, |lo, hi| {
                let mut t = touched;
                if lo < p && hi > q {
                    // inside the pair: 1002 -> 1212
                    t.set_edge(p, 2);
                    t.set_edge(q, 1);
                } else if hi < p {
                    // beside, above an existing loop: 1200 -> 1122
                    t.set_edge(hi, 1);
                    t.set_edge(p, 2);
                    t.set_edge(q, 2);
                } else {
                    // beside, below an existing loop: 0012 -> 1122
                    t.set_edge(p, 1);
                    t.set_edge(q, 1);
                    t.set_edge(lo, 2);
                }
                if let Some(t) = rules.finish(t) {
                    emit(Step::Target(t, 2));
                }
            });
        }
        (true, false) | (false, true) => {
            let s = a | b;
            let mut t = touched;
            t.set_edge(p, s);
            t.set_edge(q, 0);
            if let Some(t) = rules.finish(t) {
                emit(Step::Target(t, 1));
            }
            if !top_row {
                let mut t = touched;
                t.set_edge(p, 0);
                t.set_edge(q, s);
                if let Some(t) = rules.finish(t) {
                    emit(Step::Target(t, 1));
                }
            }
        }
        (true, true) => {
            // only a loop's own two ends may meet at the kink
            if a != 1 || b != 2 {
                return;
            }
            let mut t = touched;
            t.set_edge(p, 0);
            t.set_edge(q, 0);
            if !t.has_no_edges() {
                emit(Step::Target(t, 0));
            } else if t.touched_bottom() && t.touched_top() && rules.harvest {
                emit(Step::Harvest(0));
            }
        }
    }
}

/// Re-indexes a boundary from the end of one column to the start of the
/// next: every edge moves up one position and position 0 becomes the empty
/// vertical edge below row 1. The top edge must be empty.
#[inline]
pub(crate) fn shift_to_next_column(key: PackedSignature, width: usize) -> PackedSignature {
    debug_assert_eq!(key.edge(width), 0);
    PackedSignature(((key.0 & !3) << 2) | key.flag_bits())
}
