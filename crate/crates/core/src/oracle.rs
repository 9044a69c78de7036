//! Brute-force polygon counts by backtracking.
//!
//! Each polygon is rooted at its least vertex in `(x, y)` order. Both
//! polygon edges at that vertex point East and North, so walks start with an
//! East step from the origin, never visit `x < 0` or `(0, y <= 0)`, and
//! close when they reach `(0, 1)`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rayon::prelude::*;
use thiserror::Error;

use crate::series_io::ExactSeries;

/// Largest perimeter accepted without raising the budget.
pub const DEFAULT_BUDGET: u32 = 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(
        "n_max = {n_max} exceeds the oracle budget of {budget}; \
         roughly {estimated_nodes:.1e} search nodes would be visited"
    )]
    BudgetExceeded {
        n_max: u32,
        budget: u32,
        estimated_nodes: f64,
    },
}

/// Rough number of search nodes, growing like `mu^n`.
pub fn estimated_cost(n_max: u32) -> f64 {
    // fitted to measured node counts for n <= 24
    0.05 * 2.638_f64.powi(n_max as i32)
}

fn check_budget(n_max: u32, budget: u32) -> Result<(), OracleError> {
    if n_max > budget {
        return Err(OracleError::BudgetExceeded {
            n_max,
            budget,
            estimated_nodes: estimated_cost(n_max),
        });
    }
    Ok(())
}

/// Lattice walk as a vertex sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Walk {
    pub vertices: Vec<(i32, i32)>,
}

impl Walk {
    /// Closed, nearest-neighbour, and distinct apart from the endpoints.
    pub fn is_polygon(&self) -> bool {
        let v = &self.vertices;
        if v.len() < 5 || v.first() != v.last() {
            return false;
        }
        let steps_ok = v
            .windows(2)
            .all(|w| w[0].0.abs_diff(w[1].0) + w[0].1.abs_diff(w[1].1) == 1);
        let mut inner = v[..v.len() - 1].to_vec();
        inner.sort_unstable();
        inner.dedup();
        steps_ok && inner.len() == v.len() - 1
    }
}

/// Per-polygon statistics reported to a counting callback.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Closed {
    n: u32,
    /// Vertex rows spanned.
    height: u32,
    /// Vertex columns spanned.
    length: u32,
}

struct Search {
    n_max: u32,
    half: i32,
    stride: i32,
    visited: Vec<bool>,
    x_max: i32,
    y_min: i32,
    y_max: i32,
}

const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

impl Search {
    fn new(n_max: u32) -> Self {
        let half = (n_max / 2 + 2) as i32;
        let stride = 2 * half + 1;
        Search {
            n_max,
            half,
            stride,
            visited: vec![false; (stride * stride) as usize],
            x_max: 0,
            y_min: 0,
            y_max: 0,
        }
    }

    #[inline]
    fn idx(&self, x: i32, y: i32) -> usize {
        ((x + self.half) * self.stride + (y + self.half)) as usize
    }

    #[inline]
    fn allowed(&self, x: i32, y: i32) -> bool {
        (x > 0 || (x == 0 && y > 0)) && !self.visited[self.idx(x, y)]
    }

    /// Extends a walk of `steps` steps ending at `(x, y)`.
    fn extend(&mut self, x: i32, y: i32, steps: u32, found: &mut impl FnMut(Closed)) {
        for (dx, dy) in DIRS {
            let (nx, ny) = (x + dx, y + dy);
            if !self.allowed(nx, ny) {
                continue;
            }
            let s = steps + 1;
            if nx == 0 && ny == 1 {
                found(Closed {
                    n: s + 1,
                    height: (self.y_max.max(1) - self.y_min + 1) as u32,
                    length: (self.x_max + 1) as u32,
                });
                continue;
            }
            // one more step to (0, 1), then one to close
            let to_target = nx.unsigned_abs() + (ny - 1).unsigned_abs();
            if s + to_target + 1 > self.n_max {
                continue;
            }
            let saved = (self.x_max, self.y_min, self.y_max);
            self.x_max = self.x_max.max(nx);
            self.y_min = self.y_min.min(ny);
            self.y_max = self.y_max.max(ny);
            let i = self.idx(nx, ny);
            self.visited[i] = true;
            self.extend(nx, ny, s, found);
            self.visited[i] = false;
            (self.x_max, self.y_min, self.y_max) = saved;
        }
    }

    fn visit_prefix(&mut self, prefix: &[(i32, i32)], found: &mut impl FnMut(Closed)) {
        self.visited.iter_mut().for_each(|v| *v = false);
        self.x_max = 0;
        self.y_min = 0;
        self.y_max = 0;
        for &(x, y) in prefix {
            let i = self.idx(x, y);
            self.visited[i] = true;
            self.x_max = self.x_max.max(x);
            self.y_min = self.y_min.min(y);
            self.y_max = self.y_max.max(y);
        }
        let (x, y) = *prefix.last().unwrap();
        self.extend(x, y, prefix.len() as u32 - 1, found);
    }
}

/// Open walks of `depth` steps from the origin that can still close within
/// `n_max`, plus polygons of perimeter `<= depth + 1` closed on the way.
fn prefixes(n_max: u32, depth: u32) -> (Vec<Vec<(i32, i32)>>, Vec<Closed>) {
    let mut out = Vec::new();
    let mut closed = Vec::new();
    let mut path = vec![(0, 0), (1, 0)];
    fn rec(
        path: &mut Vec<(i32, i32)>,
        n_max: u32,
        depth: u32,
        out: &mut Vec<Vec<(i32, i32)>>,
        closed: &mut Vec<Closed>,
    ) {
        let steps = path.len() as u32 - 1;
        if steps == depth {
            out.push(path.clone());
            return;
        }
        let (x, y) = *path.last().unwrap();
        for (dx, dy) in DIRS {
            let (nx, ny) = (x + dx, y + dy);
            if !(nx > 0 || (nx == 0 && ny > 0)) || path.contains(&(nx, ny)) {
                continue;
            }
            if (nx, ny) == (0, 1) {
                let (x_max, y_min, y_max) = path.iter().fold((0, 0, 1), |(a, b, c), &(px, py)| {
                    (a.max(px), b.min(py), c.max(py))
                });
                closed.push(Closed {
                    n: steps + 2,
                    height: (y_max - y_min + 1) as u32,
                    length: (x_max + 1) as u32,
                });
                continue;
            }
            if steps + 1 + nx.unsigned_abs() + (ny - 1).unsigned_abs() + 1 > n_max {
                continue;
            }
            path.push((nx, ny));
            rec(path, n_max, depth, out, closed);
            path.pop();
        }
    }
    if n_max >= 4 {
        rec(&mut path, n_max, depth, &mut out, &mut closed);
    }
    (out, closed)
}

/// Runs the search and folds every polygon into a per-worker accumulator.
fn search<A: Send + Default>(
    n_max: u32,
    record: impl Fn(&mut A, Closed) + Sync,
    merge: impl Fn(A, A) -> A + Sync,
) -> A {
    let depth = (n_max / 2).clamp(1, 10);
    let (starts, early) = prefixes(n_max, depth);
    let mut acc = starts
        .par_iter()
        .fold(
            || (Search::new(n_max), A::default()),
            |(mut s, mut acc), prefix| {
                s.visit_prefix(prefix, &mut |c| record(&mut acc, c));
                (s, acc)
            },
        )
        .map(|(_, acc)| acc)
        .reduce(A::default, &merge);
    for c in early {
        record(&mut acc, c);
    }
    acc
}

/// `p_n` for even `4 <= n <= n_max`, with the default budget.
pub fn brute_force_series(n_max: u32) -> Result<ExactSeries, OracleError> {
    brute_force_series_with_budget(n_max, DEFAULT_BUDGET)
}

pub fn brute_force_series_with_budget(n_max: u32, budget: u32) -> Result<ExactSeries, OracleError> {
    check_budget(n_max, budget)?;
    let counts: Vec<u64> = search(
        n_max,
        |acc: &mut Vec<u64>, c| {
            if acc.is_empty() {
                acc.resize(n_max as usize + 1, 0);
            }
            acc[c.n as usize] += 1;
        },
        add_vectors,
    );
    let mut series = ExactSeries::new();
    for n in (4..=n_max).step_by(2) {
        series.insert(n, BigUint::from(counts.get(n as usize).copied().unwrap_or(0)));
    }
    Ok(series)
}

fn add_vectors(a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    let (mut long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    for (x, y) in long.iter_mut().zip(short) {
        *x += y;
    }
    long
}

/// Counts of polygons with perimeter `<= n_max` whose bounding box spans
/// exactly `width` vertex rows, keyed by vertex columns spanned and then `n`.
pub fn brute_force_series_bbox(
    n_max: u32,
    width: u32,
) -> Result<BTreeMap<u32, BTreeMap<u32, u64>>, OracleError> {
    check_budget(n_max, DEFAULT_BUDGET)?;
    type Table = BTreeMap<(u32, u32), u64>;
    let table: Table = search(
        n_max,
        |acc: &mut Table, c| {
            if c.height == width {
                *acc.entry((c.length, c.n)).or_default() += 1;
            }
        },
        |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        },
    );
    let mut out: BTreeMap<u32, BTreeMap<u32, u64>> = BTreeMap::new();
    for ((length, n), count) in table {
        out.entry(length).or_default().insert(n, count);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_counts() {
        let s = brute_force_series(12).unwrap();
        let got: Vec<u64> = s.iter().map(|(_, v)| v.try_into().unwrap()).collect();
        assert_eq!(got, vec![1, 2, 7, 28, 124]);
    }

    #[test]
    fn budget_refusal() {
        let err = brute_force_series(28).unwrap_err();
        let OracleError::BudgetExceeded {
            n_max,
            budget,
            estimated_nodes,
        } = err;
        assert_eq!((n_max, budget), (28, 26));
        assert!(estimated_nodes > 1e9);
    }

    #[test]
    fn bbox_small_cases() {
        let t = brute_force_series_bbox(8, 2).unwrap();
        assert_eq!(t[&2][&4], 1);
        assert_eq!(t[&3][&6], 1);
        // 2 x 4 vertex box: the 1 x 3 strip only
        assert_eq!(t[&4][&8], 1);
        let t = brute_force_series_bbox(8, 3).unwrap();
        // 3 x 3 vertex box at perimeter 8: the full square and four L-tromino shapes
        assert_eq!(t[&3][&8], 5);
    }

    #[test]
    fn bbox_sums_to_series() {
        let series = brute_force_series(14).unwrap();
        for n in (4..=14).step_by(2) {
            let mut total = 0u64;
            for w in 2..=8 {
                let t = brute_force_series_bbox(14, w).unwrap();
                total += t.values().filter_map(|m| m.get(&n)).sum::<u64>();
            }
            assert_eq!(BigUint::from(total), *series.get(n).unwrap(), "n = {n}");
        }
    }

    #[test]
    fn walk_polygon_check() {
        let square = Walk {
            vertices: vec![(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)],
        };
        assert!(square.is_polygon());
        let bad = Walk {
            vertices: vec![(0, 0), (1, 0), (0, 0), (1, 0), (0, 0)],
        };
        assert!(!bad.is_polygon());
    }
}
