//! Lower bounds on the number of steps still needed to complete a partial
//! polygon, and the discard rule built on them.
//!
//! Every occupied boundary edge has an endpoint vertex on the unprocessed side
//! of the boundary. Under future connectivity the pairing of those endpoints
//! is fixed, so each matched pair must be joined by its own path. A pair at
//! rows `a`, `b` needs at least `|a - b|` vertical steps; a pair with loops
//! nested inside it must pass to the right of all of them, one extra column
//! per nesting level, paid once going out and once coming back. Touching the
//! bottom (top) row costs a vertical detour of twice the distance from the
//! lowest (highest) endpoint. Reaching column `W` costs a horizontal detour
//! beyond the furthest column already forced. Vertical and horizontal
//! contributions are counted separately, so their sum is a lower bound.

use crate::signature::{validate_codes, Signature, SignatureError, MAX_EDGES};

/// Position of the boundary within a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryShape {
    /// Straight cut after a full column: edge `i` is the horizontal edge at
    /// row `i + 1`.
    Flat,
    /// Boundary just after processing the vertex in `row` (1-based): edges
    /// below the kink lead into column `c + 1`, edge `row` is the vertical kink
    /// edge above that vertex, and higher edges lead into column `c`.
    AfterRow(usize),
}

impl BoundaryShape {
    /// `(row, column)` of the unprocessed endpoint of edge `index` when the
    /// sweep is in `column`.
    #[inline]
    pub fn endpoint(self, index: usize, column: u32) -> (u32, u32) {
        let i = index as u32;
        match self {
            BoundaryShape::Flat => (i + 1, column + 1),
            BoundaryShape::AfterRow(r) => {
                let r = r as u32;
                if i < r {
                    (i + 1, column + 1)
                } else if i == r {
                    (r + 1, column)
                } else {
                    (i, column)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PruneBound {
    pub closure: u32,
    pub bottom: u32,
    pub top: u32,
    pub lengthwise: u32,
    pub total: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruneDecision {
    Discard,
    /// Keep the entry; coefficients above `cutoff` cannot contribute.
    Keep {
        cutoff: u32,
    },
}

/// Shape of the occupied part of a boundary, gathered in one pass.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Profile {
    pub closure: u32,
    pub lowest_row: u32,
    pub highest_row: u32,
    /// Furthest column some pair is already forced to reach; 0 if vacant.
    pub reach: u32,
    pub occupied: bool,
}

#[inline]
pub(crate) fn profile(codes: &[u8], shape: BoundaryShape, column: u32) -> Profile {
    // stack of (lower index, furthest column forced by children)
    let mut stack = [(0u8, 0u32); MAX_EDGES];
    let mut top = 0usize;
    let mut p = Profile {
        lowest_row: u32::MAX,
        ..Profile::default()
    };
    for (i, &c) in codes.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (row, _) = shape.endpoint(i, column);
        p.lowest_row = p.lowest_row.min(row);
        p.highest_row = p.highest_row.max(row);
        p.occupied = true;
        if c == 1 {
            stack[top] = (i as u8, 0);
            top += 1;
        } else {
            top -= 1;
            let (lo, child_reach) = stack[top];
            let (row_a, col_a) = shape.endpoint(lo as usize, column);
            let (row_b, col_b) = (row, shape.endpoint(i, column).1);
            let reach = col_a.max(col_b).max(child_reach);
            p.closure += row_a.abs_diff(row_b) + (reach - col_a) + (reach - col_b);
            if top > 0 {
                let parent = &mut stack[top - 1].1;
                *parent = (*parent).max(reach + 1);
            } else {
                p.reach = p.reach.max(reach);
            }
        }
    }
    p
}

/// Steps needed to join every matched pair, ignoring border and length
/// requirements.
pub fn closure_cost(sig: &Signature, shape: BoundaryShape) -> u32 {
    profile(&sig.codes(), shape, 1).closure
}

/// Vertical detours still needed to touch the bottom and top rows of a
/// `width`-row rectangle. Zero for a vacant signature.
pub fn boundary_cost(sig: &Signature, width: usize, shape: BoundaryShape) -> (u32, u32) {
    let p = profile(&sig.codes(), shape, 1);
    border_costs(&p, sig.touched_bottom, sig.touched_top, width as u32)
}

#[inline]
fn border_costs(p: &Profile, touched_bottom: bool, touched_top: bool, width: u32) -> (u32, u32) {
    if !p.occupied {
        return (0, 0);
    }
    let bottom = if touched_bottom { 0 } else { 2 * (p.lowest_row - 1) };
    let top = if touched_top {
        0
    } else {
        2 * (width - p.highest_row)
    };
    (bottom, top)
}

/// Horizontal detour needed to extend from column `reach` to column `width`.
#[inline]
pub fn lengthwise_cost(reach: u32, width: u32) -> u32 {
    2 * width.saturating_sub(reach)
}

/// Full bound for a boundary `sig` in `column` of a `width`-row rectangle.
pub fn prune_bound(
    sig: &Signature,
    shape: BoundaryShape,
    column: u32,
    width: usize,
) -> Result<PruneBound, SignatureError> {
    let codes = sig.codes();
    validate_codes(&codes)?;
    Ok(bound_of_codes(
        &codes,
        sig.touched_bottom,
        sig.touched_top,
        shape,
        column,
        width as u32,
    ))
}

#[inline]
pub(crate) fn bound_of_codes(
    codes: &[u8],
    touched_bottom: bool,
    touched_top: bool,
    shape: BoundaryShape,
    column: u32,
    width: u32,
) -> PruneBound {
    let p = profile(codes, shape, column);
    let (bottom, top) = border_costs(&p, touched_bottom, touched_top, width);
    let lengthwise = if p.occupied {
        lengthwise_cost(p.reach, width)
    } else {
        0
    };
    PruneBound {
        closure: p.closure,
        bottom,
        top,
        lengthwise,
        total: p.closure + bottom + top + lengthwise,
    }
}

/// Discard when even the cheapest completion exceeds `max_degree`.
#[inline]
pub fn should_prune(min_degree: u32, bound: &PruneBound, max_degree: u32) -> PruneDecision {
    if min_degree + bound.total > max_degree {
        PruneDecision::Discard
    } else {
        PruneDecision::Keep {
            cutoff: max_degree - bound.total,
        }
    }
}
