//! Exact minimal completion costs, used to check the pruning bound.
//!
//! For a boundary configuration at a given position, the minimal completion
//! is the fewest further edges over all ways to finish the sweep with a
//! harvested polygon. It is computed by memoised recursion over the same
//! update rules as the enumeration.

use rustc_hash::FxHashMap;

use super::transitions::{for_each_step, shift_to_next_column, Step};
use super::{site_rules, Site, SweepConfig};
use crate::signature::PackedSignature;

pub struct CompletionOracle<'a> {
    config: &'a SweepConfig,
    memo: FxHashMap<(PackedSignature, Site), Option<u32>>,
}

impl<'a> CompletionOracle<'a> {
    pub fn new(config: &'a SweepConfig) -> Self {
        CompletionOracle {
            config,
            memo: FxHashMap::default(),
        }
    }

    /// Fewest edges that still have to be added to `key`, which sits after
    /// the vertex at `position`. `None` if no completion exists.
    pub fn minimal_completion(&mut self, key: PackedSignature, position: Site) -> Option<u32> {
        if let Some(&v) = self.memo.get(&(key, position)) {
            return v;
        }
        let config = self.config;
        let next = position.next(config.width);
        let dead = next.row == 1 && next.column > 1 && key.has_no_edges();
        let result = if next.column > config.max_length || dead {
            None
        } else {
            let source = if next.row == 1 {
                shift_to_next_column(key, config.width)
            } else {
                key
            };
            let rules = site_rules(config, next);
            let mut steps = Vec::new();
            for_each_step(source, &rules, |s| steps.push(s));
            let mut best: Option<u32> = None;
            for step in steps {
                let cost = match step {
                    Step::Harvest(k) => Some(k),
                    Step::Target(t, k) => self.minimal_completion(t, next).map(|c| c + k),
                };
                best = match (best, cost) {
                    (Some(b), Some(c)) => Some(b.min(c)),
                    (b, c) => b.or(c),
                };
            }
            best
        };
        self.memo.insert((key, position), result);
        result
    }
}

/// Unpruned forward sweep keeping only the smallest degree per
/// configuration. Calls `visit(site, key, min_degree)` for every live
/// configuration after every site.
pub fn shadow_sweep(config: &SweepConfig, mut visit: impl FnMut(Site, PackedSignature, u32)) {
    let mut state: FxHashMap<PackedSignature, u32> = FxHashMap::default();
    state.insert(PackedSignature(0), 0);
    for column in 1..=config.max_length {
        for row in 1..=config.width {
            let site = Site { row, column };
            if row == 1 {
                state = state
                    .into_iter()
                    .filter(|(k, _)| column == 1 || !k.has_no_edges())
                    .map(|(k, d)| (shift_to_next_column(k, config.width), d))
                    .collect();
            }
            let rules = site_rules(config, site);
            let mut next: FxHashMap<PackedSignature, u32> = FxHashMap::default();
            for (&key, &d) in &state {
                for_each_step(key, &rules, |s| {
                    if let Step::Target(t, k) = s {
                        let e = next.entry(t).or_insert(u32::MAX);
                        *e = (*e).min(d + k);
                    }
                });
            }
            state = next;
            for (&k, &d) in &state {
                visit(site, k, d);
            }
        }
    }
}
