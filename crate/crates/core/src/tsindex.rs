//! Hierarchical timestamp buckets.
//!
//! Level `i` of an `L`-level structure with step multiplier `m` partitions
//! the timeline into buckets of width `r_i = m^(L-1-i)`, aligned to zero.
//! Level 0 is the coarsest; level `L-1` has width 1 and is served by the
//! `Timestamp` stream itself. Every record is indexed under its bucket at
//! each level, so an inclusive range `[start, end]` can be answered with one
//! lookup per bucket in a cover of the range instead of one per timestamp.

use thiserror::Error;

use crate::codec::LogRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TsIndexError {
    #[error("invalid range: start {start} > end {end}")]
    InvalidRange { start: u64, end: u64 },
    #[error("invalid index parameters: {0}")]
    InvalidParams(String),
    #[error("empty input")]
    EmptyInput,
}

pub const DEFAULT_LEVELS: u32 = 3;
pub const DEFAULT_MULTIPLIER: u64 = 100;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TsIndexParams {
    levels: u32,
    multiplier: u64,
    ranges: Vec<u64>,
}

impl TsIndexParams {
    pub fn new(levels: u32, multiplier: u64) -> Result<Self, TsIndexError> {
        if levels < 1 {
            return Err(TsIndexError::InvalidParams("levels must be >= 1".into()));
        }
        if multiplier < 2 {
            return Err(TsIndexError::InvalidParams("multiplier must be >= 2".into()));
        }
        let mut ranges = vec![1u64];
        for _ in 1..levels {
            let next = ranges[0].checked_mul(multiplier).ok_or_else(|| {
                TsIndexError::InvalidParams(format!(
                    "{multiplier}^{} overflows a 64-bit timestamp",
                    levels - 1
                ))
            })?;
            ranges.insert(0, next);
        }
        Ok(Self {
            levels,
            multiplier,
            ranges,
        })
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn multiplier(&self) -> u64 {
        self.multiplier
    }

    /// Bucket widths, coarsest first; the last entry is always 1.
    pub fn elemental_ranges(&self) -> &[u64] {
        &self.ranges
    }

    pub fn elemental_range(&self, level: usize) -> u64 {
        self.ranges[level]
    }

    pub fn finest_level(&self) -> usize {
        self.ranges.len() - 1
    }
}

impl Default for TsIndexParams {
    fn default() -> Self {
        Self::new(DEFAULT_LEVELS, DEFAULT_MULTIPLIER).expect("default params are valid")
    }
}

/// One bucket of a decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangePart {
    pub level: usize,
    pub start: u64,
    pub width: u64,
}

impl RangePart {
    /// Last timestamp covered (inclusive).
    pub fn end(&self) -> u64 {
        self.start + (self.width - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub start: u64,
    pub end: u64,
    pub parts: Vec<RangePart>,
}

/// Bucket start of `t` at every level, coarsest first.
pub fn bucket_keys(t: u64, params: &TsIndexParams) -> Vec<(usize, u64)> {
    params
        .elemental_ranges()
        .iter()
        .enumerate()
        .map(|(level, &r)| (level, t - t % r))
        .collect()
}

/// A maximal run of consecutive same-level buckets emitted by the greedy cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Run {
    level: usize,
    start: u128,
    count: u128,
}

/// Greedy left-to-right cover: at each position emit the coarsest bucket that
/// starts there and fits in the remainder. Consecutive buckets of one level
/// are grouped into runs so counting is O(levels) rather than O(parts).
struct Runs<'a> {
    params: &'a TsIndexParams,
    cur: u128,
    end_excl: u128,
}

impl Iterator for Runs<'_> {
    type Item = Run;

    fn next(&mut self) -> Option<Run> {
        if self.cur >= self.end_excl {
            return None;
        }
        let ranges = self.params.elemental_ranges();
        let remaining = self.end_excl - self.cur;
        let level = ranges
            .iter()
            .position(|&r| {
                let r = r as u128;
                self.cur % r == 0 && r <= remaining
            })
            .expect("finest level always fits");
        let width = ranges[level] as u128;
        let mut count = remaining / width;
        if level > 0 {
            let coarser = ranges[level - 1] as u128;
            // Stop at the next coarser boundary, where a larger bucket may fit.
            if self.cur % coarser != 0 {
                let boundary = (self.cur / coarser + 1) * coarser;
                count = count.min((boundary - self.cur) / width);
            }
        }
        let run = Run {
            level,
            start: self.cur,
            count,
        };
        self.cur += count * width;
        Some(run)
    }
}

fn runs(start: u64, end: u64, params: &TsIndexParams) -> Result<Runs<'_>, TsIndexError> {
    if start > end {
        return Err(TsIndexError::InvalidRange { start, end });
    }
    Ok(Runs {
        params,
        cur: start as u128,
        end_excl: end as u128 + 1,
    })
}

/// Minimal cover of the inclusive interval `[start, end]` by aligned buckets,
/// ordered by start.
pub fn decompose(start: u64, end: u64, params: &TsIndexParams) -> Result<Decomposition, TsIndexError> {
    let mut parts = Vec::new();
    for run in runs(start, end, params)? {
        let width = params.elemental_range(run.level);
        for k in 0..run.count {
            parts.push(RangePart {
                level: run.level,
                start: (run.start + k * width as u128) as u64,
                width,
            });
        }
    }
    Ok(Decomposition { start, end, parts })
}

/// Number of buckets in [`decompose`]'s cover, computed without
/// materializing it. Saturates at `u64::MAX`.
pub fn query_count(start: u64, end: u64, params: &TsIndexParams) -> Result<u64, TsIndexError> {
    let total: u128 = runs(start, end, params)?.map(|r| r.count).sum();
    Ok(u64::try_from(total).unwrap_or(u64::MAX))
}

/// Closed-form count for an interval of `len` timestamps that starts on a
/// level-0 boundary: `sum R_i / r_i` with `R_0 = len`, `R_{i+1} = R_i mod r_i`.
pub fn aligned_query_count(len: u64, params: &TsIndexParams) -> u64 {
    let mut rem = len;
    let mut total = 0;
    for &r in params.elemental_ranges() {
        total += rem / r;
        rem %= r;
    }
    total
}

/// Weight of one extra index item per record in the tuning objective.
pub const INSERT_WEIGHT_PER_LEVEL: u64 = 1;

/// Total tuning cost of `params`: lookups over the workload plus one index
/// item per extra level per sampled record.
pub fn tuning_cost(sample_len: usize, workload: &[(u64, u64)], params: &TsIndexParams) -> Result<u128, TsIndexError> {
    let mut cost: u128 = 0;
    for &(s, e) in workload {
        cost += query_count(s, e, params)? as u128;
    }
    cost += INSERT_WEIGHT_PER_LEVEL as u128 * (params.levels() as u128 - 1) * sample_len as u128;
    Ok(cost)
}

/// Exhaustive search over `levels x multipliers` for the cheapest parameters
/// under [`tuning_cost`]. Ties go to fewer levels, then to the smaller
/// multiplier. Combinations whose coarsest bucket overflows are skipped.
pub fn tune_params(
    sample: &[LogRecord],
    workload: &[(u64, u64)],
    level_candidates: &[u32],
    multiplier_candidates: &[u64],
) -> Result<TsIndexParams, TsIndexError> {
    if sample.is_empty() || workload.is_empty() {
        return Err(TsIndexError::EmptyInput);
    }
    let mut best: Option<(u128, TsIndexParams)> = None;
    for &levels in level_candidates {
        for &m in multiplier_candidates {
            let Ok(params) = TsIndexParams::new(levels, m) else {
                continue;
            };
            let cost = tuning_cost(sample.len(), workload, &params)?;
            let better = match &best {
                None => true,
                Some((bc, bp)) => (cost, levels, m) < (*bc, bp.levels(), bp.multiplier()),
            };
            if better {
                best = Some((cost, params));
            }
        }
    }
    best.map(|(_, p)| p).ok_or(TsIndexError::EmptyInput)
}
