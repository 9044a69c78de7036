//! Transfer-matrix sweep over `W x L` rectangles and the finite-lattice sum.
//!
//! A sweep for width `W` moves the boundary column by column (1..=L_max) and,
//! within a column, row by row from the bottom. New polygons may only be
//! seeded in column 1, so every polygon touches the left border, and a
//! polygon that closes in column `c` has length exactly `c`.

mod checkpoint;
pub mod completion;
mod transitions;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_bigint::BigUint;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHasher};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use checkpoint::{checkpoint_load, checkpoint_save, CheckpointError, SweepSnapshot, CHECKPOINT_VERSION};

use crate::modular::{crt_lanes, ModularError, Moduli, TruncatedPoly};
use crate::pruning::{bound_of_codes, should_prune, BoundaryShape, PruneDecision};
use crate::series_io::{ExactSeries, ResidueSeries};
use crate::signature::{pack, unpack, PackedSignature, Signature, SignatureError, MAX_EDGES};
use transitions::{for_each_step, shift_to_next_column, SiteRules, Step};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "moduli product ({product_bits} bits) cannot hold counts up to 3^{max_degree}; \
         add moduli or force the run"
    )]
    InsufficientModuli { max_degree: u32, product_bits: u64 },
    #[error("site ({row}, {column}) does not follow the current boundary position")]
    OutOfOrder { row: usize, column: usize },
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error(transparent)]
    Modular(#[from] ModularError),
}

/// Parameters of one width's sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepConfig {
    pub width: usize,
    pub max_width: usize,
    pub max_length: usize,
    pub max_degree: u32,
    pub moduli: Moduli,
    pub pruning: bool,
    pub kink_simplification: bool,
}

impl SweepConfig {
    /// Width `width` within an enumeration up to `max_width`.
    pub fn new(width: usize, max_width: usize, moduli: Moduli) -> Result<Self, EngineError> {
        if width < 2 || width > max_width {
            return Err(EngineError::InvalidConfig(format!(
                "width {width} must lie in [2, {max_width}]"
            )));
        }
        if width + 1 > MAX_EDGES {
            return Err(EngineError::InvalidConfig(format!(
                "width {width} exceeds the packed-signature limit of {}",
                MAX_EDGES - 1
            )));
        }
        Ok(SweepConfig {
            width,
            max_width,
            max_length: 2 * max_width - width + 1,
            max_degree: (4 * max_width - 2) as u32,
            moduli,
            pruning: true,
            kink_simplification: false,
        })
    }

    pub fn edges(&self) -> usize {
        self.width + 1
    }

    /// Stable fingerprint of everything that affects the sweep's output.
    pub fn config_hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(b"sapenum-sweep-config-v1");
        for v in [
            self.width as u64,
            self.max_width as u64,
            self.max_length as u64,
            self.max_degree as u64,
        ] {
            h.update(v.to_le_bytes());
        }
        h.update((self.moduli.len() as u64).to_le_bytes());
        for m in self.moduli.as_slice() {
            h.update(m.get().to_le_bytes());
        }
        h.update([self.pruning as u8, self.kink_simplification as u8]);
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// A vertex position; rows and columns are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site {
    pub row: usize,
    pub column: usize,
}

impl Site {
    fn next(self, width: usize) -> Site {
        if self.row == width {
            Site {
                row: 1,
                column: self.column + 1,
            }
        } else {
            Site {
                row: self.row + 1,
                column: self.column,
            }
        }
    }
}

pub(crate) type EntryMap = FxHashMap<PackedSignature, TruncatedPoly>;

/// Generating functions of all live boundary configurations at one
/// boundary position.
#[derive(Clone, Debug)]
pub struct BoundaryStateMap {
    width: usize,
    lanes: usize,
    /// Last processed site; column 0 means the sweep has not started.
    position: Site,
    entries: EntryMap,
}

impl BoundaryStateMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn position(&self) -> Site {
        self.position
    }

    /// Stored coefficients per modulus, summed over entries.
    pub fn terms(&self) -> usize {
        self.entries.values().map(|p| p.stored_degrees()).sum()
    }

    pub fn get(&self, sig: &Signature) -> Option<&TruncatedPoly> {
        self.entries.get(&pack(sig))
    }

    pub fn get_packed(&self, key: PackedSignature) -> Option<&TruncatedPoly> {
        self.entries.get(&key)
    }

    pub fn keys(&self) -> impl Iterator<Item = PackedSignature> + '_ {
        self.entries.keys().copied()
    }

    /// Entries ordered by key.
    pub fn sorted_entries(&self) -> Vec<(PackedSignature, &TruncatedPoly)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, p)| (*k, p)).collect();
        v.sort_by_key(|(k, _)| *k);
        v
    }

    /// Decodes every key, failing on the first invalid one.
    pub fn validate(&self) -> Result<(), SignatureError> {
        for k in self.entries.keys() {
            unpack(*k, self.width + 1)?;
        }
        Ok(())
    }
}

/// Polygons harvested from one width, keyed by rectangle length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RectangleResult {
    pub width: usize,
    pub per_length: BTreeMap<usize, TruncatedPoly>,
}

impl RectangleResult {
    fn new(width: usize) -> Self {
        RectangleResult {
            width,
            per_length: BTreeMap::new(),
        }
    }

    fn absorb(&mut self, length: usize, poly: &TruncatedPoly, max_degree: u32, moduli: &Moduli) {
        if poly.is_zero() {
            return;
        }
        self.per_length
            .entry(length)
            .or_insert_with(|| TruncatedPoly::zero(moduli.len()))
            .add_shifted_unchecked(poly, 0, max_degree, moduli.as_slice());
    }
}

/// The single seed configuration: vacant boundary, no flags, weight 1.
pub fn initial_state(config: &SweepConfig) -> BoundaryStateMap {
    let mut entries = EntryMap::default();
    entries.insert(
        PackedSignature(0),
        TruncatedPoly::monomial(0, config.moduli.len()),
    );
    BoundaryStateMap {
        width: config.width,
        lanes: config.moduli.len(),
        position: Site {
            row: config.width,
            column: 0,
        },
        entries,
    }
}

fn site_rules(config: &SweepConfig, site: Site) -> SiteRules {
    SiteRules {
        row: site.row,
        width: config.width,
        seeding: site.column == 1,
        harvest: site.column >= config.width && site.column <= config.max_length,
        simplify: config.kink_simplification,
    }
}

/// Processes every entry of `source` at `site`, depositing targets into
/// `dest` and closed polygons into `harvest`.
fn advance_entries(
    source: impl IntoIterator<Item = (PackedSignature, TruncatedPoly)>,
    site: Site,
    config: &SweepConfig,
    dest: &mut EntryMap,
    harvest: &mut TruncatedPoly,
) {
    let rules = site_rules(config, site);
    let moduli = config.moduli.as_slice();
    let lanes = moduli.len();
    let n_edges = config.edges();
    let shape = BoundaryShape::AfterRow(site.row);
    let column = site.column as u32;
    let width = config.width as u32;
    let max_degree = config.max_degree;

    for (key, poly) in source {
        let Some(min_degree) = poly.min_degree() else {
            continue;
        };
        for_each_step(key, &rules, |step| match step {
            Step::Target(target, k) => {
                let cutoff = if config.pruning {
                    let mut codes = [0u8; MAX_EDGES];
                    target.decode_into(n_edges, &mut codes);
                    let bound = bound_of_codes(
                        &codes[..n_edges],
                        target.touched_bottom(),
                        target.touched_top(),
                        shape,
                        column,
                        width,
                    );
                    match should_prune(min_degree + k, &bound, max_degree) {
                        PruneDecision::Discard => return,
                        PruneDecision::Keep { cutoff } => cutoff,
                    }
                } else if min_degree + k > max_degree {
                    return;
                } else {
                    max_degree
                };
                dest.entry(target)
                    .or_insert_with(|| TruncatedPoly::zero(lanes))
                    .add_shifted_unchecked(&poly, k, cutoff, moduli);
            }
            Step::Harvest(k) => harvest.add_shifted_unchecked(&poly, k, max_degree, moduli),
        });
    }
}

/// Moves the boundary from the end of one column to the start of the next.
/// The vacant configuration is dropped once seeding is over.
fn begin_column(entries: EntryMap, config: &SweepConfig, column: usize) -> EntryMap {
    let mut out = EntryMap::with_capacity_and_hasher(entries.len(), Default::default());
    for (key, poly) in entries {
        if column > 1 && key.has_no_edges() {
            continue;
        }
        out.insert(shift_to_next_column(key, config.width), poly);
    }
    out
}

/// Outcome of a single site update.
#[derive(Clone, Debug)]
pub struct SiteUpdate {
    pub state: BoundaryStateMap,
    /// Polygons closed at this site, if the column is a valid length.
    pub harvest: TruncatedPoly,
}

/// Processes the vertex at `site`, which must be the successor of the
/// state's current position.
pub fn update_site(
    state: &BoundaryStateMap,
    site: Site,
    config: &SweepConfig,
) -> Result<SiteUpdate, EngineError> {
    if state.width != config.width || state.lanes != config.moduli.len() {
        return Err(EngineError::InvalidConfig(
            "state does not belong to this configuration".into(),
        ));
    }
    if state.position.next(config.width) != site || site.column > config.max_length {
        return Err(EngineError::OutOfOrder {
            row: site.row,
            column: site.column,
        });
    }
    let source = if site.row == 1 {
        begin_column(state.entries.clone(), config, site.column)
    } else {
        state.entries.clone()
    };
    let mut dest = EntryMap::default();
    let mut harvest = TruncatedPoly::zero(config.moduli.len());
    advance_entries(source, site, config, &mut dest, &mut harvest);
    Ok(SiteUpdate {
        state: BoundaryStateMap {
            width: state.width,
            lanes: state.lanes,
            position: site,
            entries: dest,
        },
        harvest,
    })
}

/// Resource counters for one width.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WidthStats {
    pub width: usize,
    pub max_length: usize,
    /// Largest number of live configurations after any site.
    pub peak_entries: usize,
    /// Largest number of stored coefficients per modulus, sampled at column ends.
    pub peak_terms: usize,
    pub millis: u64,
    pub resumed_from_column: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    pub threads: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// Invoked after every completed column with the column index.
    pub stop_after_column: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub result: RectangleResult,
    pub stats: WidthStats,
    /// False when the sweep stopped early at `stop_after_column`.
    pub complete: bool,
}

/// Entries split into shards whose successors never collide: shards are
/// keyed by the occupancy of edges no site in the current half-column can
/// touch, which the update rules leave unchanged.
struct ShardedState {
    shards: Vec<EntryMap>,
}

impl ShardedState {
    fn len(&self) -> usize {
        self.shards.iter().map(|s| s.len()).sum()
    }

    fn terms(&self) -> usize {
        self.shards
            .iter()
            .flat_map(|s| s.values())
            .map(|p| p.stored_degrees())
            .sum()
    }

    fn into_merged(self) -> EntryMap {
        let mut shards = self.shards.into_iter();
        let mut out = shards.next().unwrap_or_default();
        for s in shards {
            out.extend(s);
        }
        out
    }

    fn from_merged(entries: EntryMap, n_shards: usize) -> Self {
        let mut shards = vec![EntryMap::default(); n_shards];
        shards[0] = entries;
        ShardedState { shards }
    }

    /// Re-buckets every entry by `invariant_mask` occupancy.
    fn redistribute(&mut self, invariant_mask: u64, n_edges: usize) {
        let n = self.shards.len();
        if n == 1 {
            return;
        }
        let old = std::mem::take(&mut self.shards);
        let parts: Vec<Vec<EntryMap>> = old
            .into_par_iter()
            .map(|shard| {
                let mut parts = vec![EntryMap::default(); n];
                for (k, p) in shard {
                    parts[shard_of(k, invariant_mask, n_edges, n)].insert(k, p);
                }
                parts
            })
            .collect();
        let mut columns: Vec<Vec<EntryMap>> = (0..n).map(|_| Vec::with_capacity(parts.len())).collect();
        for row in parts {
            for (i, part) in row.into_iter().enumerate() {
                columns[i].push(part);
            }
        }
        self.shards = columns
            .into_par_iter()
            .map(|group| {
                let total = group.iter().map(|g| g.len()).sum();
                let mut m = EntryMap::with_capacity_and_hasher(total, Default::default());
                for g in group {
                    m.extend(g);
                }
                m
            })
            .collect();
    }
}

#[inline]
fn shard_of(key: PackedSignature, invariant_mask: u64, n_edges: usize, n: usize) -> usize {
    use std::hash::Hasher;
    let mut h = FxHasher::default();
    h.write_u64(key.occupancy(n_edges) & invariant_mask);
    (h.finish() % n as u64) as usize
}

/// Rows `1..=split` form the first half of a column, the rest the second.
fn half_split(width: usize) -> usize {
    (width / 2).max(1)
}

/// Occupancy bits untouched by every site of the half-column starting at `row`.
fn invariant_mask(width: usize, first_half: bool) -> u64 {
    let h = half_split(width);
    let n_edges = width + 1;
    let all = (1u64 << n_edges) - 1;
    if first_half {
        // sites 1..=h touch positions 0..=h+1
        let touched = (1u64 << (h + 2).min(n_edges)) - 1;
        all & !touched
    } else {
        // sites h+1..=W touch positions h..=W
        (1u64 << h) - 1
    }
}

fn checkpoint_path(dir: &Path, width: usize) -> PathBuf {
    dir.join(format!("width-{width:02}.ckpt"))
}

/// Runs the full transfer-matrix sweep for one width.
pub fn sweep_width(config: &SweepConfig, options: &SweepOptions) -> Result<SweepOutcome, EngineError> {
    let threads = options.threads.max(1);
    if threads == 1 {
        return sweep_width_in(config, options, 1);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EngineError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| sweep_width_in(config, options, threads * 4))
}

fn sweep_width_in(
    config: &SweepConfig,
    options: &SweepOptions,
    n_shards: usize,
) -> Result<SweepOutcome, EngineError> {
    let started = Instant::now();
    let hash = config.config_hash();
    let width = config.width;
    let n_edges = config.edges();
    let lanes = config.moduli.len();

    let mut result = RectangleResult::new(width);
    let mut start_column = 1;
    let mut stats = WidthStats {
        width,
        max_length: config.max_length,
        ..WidthStats::default()
    };
    let mut entries = initial_state(config).entries;

    if let Some(dir) = &options.checkpoint_dir {
        let path = checkpoint_path(dir, width);
        if path.exists() {
            let snap = checkpoint_load(&path)?;
            snap.check_matches(config, hash)?;
            entries = snap.entries.into_iter().collect();
            result.per_length = snap.harvested;
            start_column = snap.column + 1;
            stats.resumed_from_column = Some(snap.column);
            stats.peak_entries = entries.len();
        }
    }

    let mut state = ShardedState::from_merged(entries, n_shards);
    stats.peak_entries = stats.peak_entries.max(state.len());
    let split = half_split(width);

    for column in start_column..=config.max_length {
        let merged = state.into_merged();
        state = ShardedState::from_merged(begin_column(merged, config, column), n_shards);
        for row in 1..=width {
            if row == 1 || row == split + 1 {
                state.redistribute(invariant_mask(width, row == 1), n_edges);
            }
            let site = Site { row, column };
            let harvests: Vec<TruncatedPoly> = if n_shards == 1 {
                let src = std::mem::take(&mut state.shards[0]);
                let mut dest = EntryMap::with_capacity_and_hasher(src.len(), Default::default());
                let mut harvest = TruncatedPoly::zero(lanes);
                advance_entries(src, site, config, &mut dest, &mut harvest);
                state.shards[0] = dest;
                vec![harvest]
            } else {
                state
                    .shards
                    .par_iter_mut()
                    .map(|shard| {
                        let src = std::mem::take(shard);
                        let mut dest = EntryMap::with_capacity_and_hasher(src.len(), Default::default());
                        let mut harvest = TruncatedPoly::zero(lanes);
                        advance_entries(src, site, config, &mut dest, &mut harvest);
                        *shard = dest;
                        harvest
                    })
                    .collect()
            };
            for h in &harvests {
                result.absorb(column, h, config.max_degree, &config.moduli);
            }
            stats.peak_entries = stats.peak_entries.max(state.len());
        }
        stats.peak_terms = stats.peak_terms.max(state.terms());

        if let Some(dir) = &options.checkpoint_dir {
            let merged = state.into_merged();
            let snap = SweepSnapshot::capture(config, hash, column, &merged, &result);
            checkpoint_save(&snap, &checkpoint_path(dir, width))?;
            state = ShardedState::from_merged(merged, n_shards);
        }
        if options.stop_after_column == Some(column) && column < config.max_length {
            stats.millis = started.elapsed().as_millis() as u64;
            return Ok(SweepOutcome {
                result,
                stats,
                complete: false,
            });
        }
    }
    stats.millis = started.elapsed().as_millis() as u64;
    Ok(SweepOutcome {
        result,
        stats,
        complete: true,
    })
}

/// Fewest standard moduli whose product exceeds `3^max_degree`.
pub fn auto_moduli(max_degree: u32) -> Moduli {
    let bound = BigUint::from(3u32).pow(max_degree);
    for count in 1..=3 {
        let m = Moduli::standard_prefix(count);
        if m.product() > bound {
            return m;
        }
    }
    Moduli::standard()
}

/// True when every count up to `max_degree` fits below the moduli product.
pub fn moduli_suffice(moduli: &Moduli, max_degree: u32) -> bool {
    moduli.product() > BigUint::from(3u32).pow(max_degree)
}

#[derive(Clone, Debug)]
pub struct EnumerateOptions {
    pub max_width: usize,
    pub moduli: Moduli,
    pub threads: usize,
    pub pruning: bool,
    pub kink_simplification: bool,
    pub checkpoint_dir: Option<PathBuf>,
    /// Proceed even if the moduli may not hold `p_N`.
    pub force: bool,
}

impl EnumerateOptions {
    pub fn new(max_width: usize) -> Self {
        EnumerateOptions {
            max_width,
            moduli: auto_moduli((4 * max_width).saturating_sub(2) as u32),
            threads: 1,
            pruning: true,
            kink_simplification: false,
            checkpoint_dir: None,
            force: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub max_width: usize,
    pub max_degree: u32,
    pub moduli: Moduli,
    pub residues: Vec<ResidueSeries>,
    pub exact: ExactSeries,
    pub widths: Vec<WidthStats>,
    pub warnings: Vec<String>,
}

/// Polygons per lattice site up to perimeter `4 W_max - 2`.
pub fn enumerate(options: &EnumerateOptions) -> Result<Enumeration, EngineError> {
    let max_width = options.max_width;
    if max_width < 2 {
        return Err(EngineError::InvalidConfig("max width must be at least 2".into()));
    }
    let max_degree = (4 * max_width - 2) as u32;
    let moduli = options.moduli.clone();
    let mut warnings = Vec::new();
    let capacity_ok = moduli_suffice(&moduli, max_degree);
    if !capacity_ok {
        if !options.force {
            return Err(EngineError::InsufficientModuli {
                max_degree,
                product_bits: moduli.product().bits(),
            });
        }
        warnings.push(format!(
            "moduli product has {} bits; counts near n = {max_degree} may wrap",
            moduli.product().bits()
        ));
    }
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|source| CheckpointError::Io {
            path: dir.clone(),
            source,
        })?;
    }

    let lanes = moduli.len();
    let mut total = TruncatedPoly::zero(lanes);
    let mut widths = Vec::new();
    for width in 2..=max_width {
        let mut config = SweepConfig::new(width, max_width, moduli.clone())?;
        config.pruning = options.pruning;
        config.kink_simplification = options.kink_simplification;
        let outcome = sweep_width(
            &config,
            &SweepOptions {
                threads: options.threads,
                checkpoint_dir: options.checkpoint_dir.clone(),
                stop_after_column: None,
            },
        )?;
        for (&length, poly) in &outcome.result.per_length {
            total.add_shifted_unchecked(poly, 0, max_degree, moduli.as_slice());
            if length > width {
                total.add_shifted_unchecked(poly, 0, max_degree, moduli.as_slice());
            }
        }
        widths.push(outcome.stats);
    }

    let mut residues: Vec<ResidueSeries> = moduli.as_slice().iter().map(|&m| ResidueSeries::new(m)).collect();
    let mut exact = ExactSeries::new();
    let three = BigUint::from(3u32);
    for n in 1..=max_degree {
        let lane_values: Vec<u64> = (0..lanes).map(|l| total.coeff(n, l)).collect();
        if n % 2 == 1 {
            if lane_values.iter().any(|&r| r != 0) {
                return Err(EngineError::Inconsistent(format!(
                    "nonzero residue at odd n = {n}"
                )));
            }
            continue;
        }
        if n < 4 {
            continue;
        }
        for (series, &r) in residues.iter_mut().zip(&lane_values) {
            series.insert(n, r);
        }
        let value = crt_lanes(&lane_values, &moduli)?;
        if capacity_ok && value >= three.pow(n) {
            return Err(EngineError::Inconsistent(format!(
                "reconstructed p_{n} exceeds the a priori bound 3^{n}"
            )));
        }
        exact.insert(n, value);
    }
    Ok(Enumeration {
        max_width,
        max_degree,
        moduli,
        residues,
        exact,
        widths,
        warnings,
    })
}

#[cfg(test)]
mod tests;
