//! Pattern-adapted random projections.
//!
//! For a missingness pattern `m`, admissible projections are index sets `A`
//! that pick up at least one missing coordinate (`A` intersects `O_m^c`) and
//! at least one observed one (`A \ O_m^c` nonempty), so that projected
//! imputed rows can be discriminated from projected complete rows. Sampling
//! follows a two-stage draw of subset sizes, with replacement across the
//! requested number of projections.

use crate::data::{Pattern, Projection};
use crate::seed::{self, stream};
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("pattern {0} has no missing or no observed coordinate")]
    PatternNotMixed(Pattern),
    #[error("invalid blocks: {0}")]
    InvalidBlocks(String),
    #[error("block constraints admit no valid projection for pattern {0}")]
    ModeUnsatisfiable(Pattern),
}

/// How the projection support is restricted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProjectionMode {
    /// Any admissible subset (the default sampler).
    Unrestricted,
    /// Always project onto all variables; keeps the score valid under MAR.
    FullOnly,
    /// Projections are unions of whole variable blocks (for jointly-MAR
    /// blocks).
    BlockConstrained(Vec<Vec<usize>>),
}

/// Number of projections per pattern group, adaptive to dimension:
/// 50 for d <= 6, 100 for 7 <= d <= 14, 200 for d >= 15.
pub fn default_num_proj(d: usize) -> usize {
    if d <= 6 {
        50
    } else if d <= 14 {
        100
    } else {
        200
    }
}

fn sample_subset(pool: &[usize], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    debug_assert!(k <= pool.len());
    let mut scratch: Vec<usize> = pool.to_vec();
    scratch.partial_shuffle(rng, k);
    scratch.truncate(k);
    scratch
}

/// Sample `num_proj` admissible projections for pattern `m` (duplicates
/// allowed).
///
/// Each draw picks `r1` uniform in `{1..|O_m^c|}` missing coordinates and
/// `r2` uniform in `{1..min(d - r1, |O_m|)}` observed ones; the projected
/// pattern is `m` restricted to the union.
pub fn sample_projections(
    m: &Pattern,
    num_proj: usize,
    mode: &ProjectionMode,
    seed_value: u64,
) -> Result<Vec<Projection>, ProjectionError> {
    if !m.is_mixed() {
        return Err(ProjectionError::PatternNotMixed(m.clone()));
    }
    let d = m.len();
    let missing = m.missing_indices();
    let observed = m.observed_indices();
    let mut rng = seed::rng(seed_value, &[stream::PROJECTION]);

    match mode {
        ProjectionMode::FullOnly => Ok(vec![Projection::full(d, m); num_proj]),
        ProjectionMode::Unrestricted => {
            let mut out = Vec::with_capacity(num_proj);
            for _ in 0..num_proj {
                let r1 = rng.gen_range(1..=missing.len());
                let r2_max = (d - r1).min(observed.len());
                let r2 = rng.gen_range(1..=r2_max);
                let mut indices = sample_subset(&missing, r1, &mut rng);
                indices.extend(sample_subset(&observed, r2, &mut rng));
                indices.sort_unstable();
                out.push(Projection::new(indices, m));
            }
            Ok(out)
        }
        ProjectionMode::BlockConstrained(blocks) => {
            validate_blocks(blocks, d)?;
            let hits_missing: Vec<usize> = (0..blocks.len())
                .filter(|&b| blocks[b].iter().any(|&j| m.is_missing(j)))
                .collect();
            let rest: Vec<usize> = (0..blocks.len())
                .filter(|b| !hits_missing.contains(b))
                .collect();
            let any_observed_anywhere = blocks
                .iter()
                .any(|blk| blk.iter().any(|&j| !m.is_missing(j)));
            if hits_missing.is_empty() || !any_observed_anywhere {
                return Err(ProjectionError::ModeUnsatisfiable(m.clone()));
            }
            let mut out = Vec::with_capacity(num_proj);
            for _ in 0..num_proj {
                let mut chosen = 'draw: {
                    for _ in 0..10_000 {
                        let s1 = rng.gen_range(1..=hits_missing.len());
                        let mut chosen = sample_subset(&hits_missing, s1, &mut rng);
                        let has_observed = chosen
                            .iter()
                            .any(|&b| blocks[b].iter().any(|&j| !m.is_missing(j)));
                        let s2 = if rest.is_empty() {
                            0
                        } else if has_observed {
                            rng.gen_range(0..=rest.len())
                        } else {
                            rng.gen_range(1..=rest.len())
                        };
                        chosen.extend(sample_subset(&rest, s2, &mut rng));
                        let has_observed = chosen
                            .iter()
                            .any(|&b| blocks[b].iter().any(|&j| !m.is_missing(j)));
                        if has_observed {
                            break 'draw chosen;
                        }
                    }
                    return Err(ProjectionError::ModeUnsatisfiable(m.clone()));
                };
                chosen.sort_unstable();
                let mut indices: Vec<usize> =
                    chosen.iter().flat_map(|&b| blocks[b].iter().copied()).collect();
                indices.sort_unstable();
                out.push(Projection::new(indices, m));
            }
            Ok(out)
        }
    }
}

fn validate_blocks(blocks: &[Vec<usize>], d: usize) -> Result<(), ProjectionError> {
    if blocks.is_empty() {
        return Err(ProjectionError::InvalidBlocks("no blocks given".into()));
    }
    let mut seen = vec![false; d];
    for (i, blk) in blocks.iter().enumerate() {
        if blk.is_empty() {
            return Err(ProjectionError::InvalidBlocks(format!("block {i} is empty")));
        }
        for &j in blk {
            if j >= d {
                return Err(ProjectionError::InvalidBlocks(format!(
                    "block {i} references column {j} outside 0..{d}"
                )));
            }
            if seen[j] {
                return Err(ProjectionError::InvalidBlocks(format!(
                    "column {j} appears in more than one block"
                )));
            }
            seen[j] = true;
        }
    }
    Ok(())
}
