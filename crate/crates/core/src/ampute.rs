//! Amputation: generating missing values in complete data under controlled
//! mechanisms, for the validation harness.
//!
//! Three mechanisms are provided: cell-wise MCAR, a logistic-weight MAR
//! scheme driven by a [`MarSpec`], and the two-dimensional spiral rule where
//! the second coordinate goes missing depending on the first and vice versa.
//! The module also bundles the synthetic generators used by the demo and the
//! validation pipeline.

use crate::data::{Cell, ColumnKind, CompleteMatrix, IncompleteMatrix, Pattern};
use crate::seed::{self, stream};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AmputeError {
    #[error("p_miss must lie in [0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("spiral amputation needs exactly 2 columns, got {0}")]
    SpiralNeedsTwoColumns(usize),
    #[error("invalid MAR spec: {0}")]
    InvalidSpec(String),
    #[error(
        "intercept calibration cannot reach missing fraction {target:.4} \
         (achievable maximum {achievable:.4}); try a smaller p_miss"
    )]
    CalibrationFailed { target: f64, achievable: f64 },
}

/// MAR mechanism: candidate patterns with frequencies and per-pattern weight
/// vectors over the observed coordinates.
#[derive(Debug, Clone)]
pub struct MarSpec {
    pub patterns: Vec<Pattern>,
    pub frequencies: Vec<f64>,
    /// One weight vector of length `d` per pattern, zero exactly at the
    /// pattern's missing coordinates (missingness may depend only on
    /// observed parts).
    pub weight_vectors: Vec<Vec<f64>>,
    pub overall_p_miss: f64,
}

impl MarSpec {
    pub fn validate(&self, d: usize) -> Result<(), AmputeError> {
        let k = self.patterns.len();
        if k == 0 || self.frequencies.len() != k || self.weight_vectors.len() != k {
            return Err(AmputeError::InvalidSpec(
                "patterns, frequencies and weight_vectors must have equal nonzero length".into(),
            ));
        }
        let sum: f64 = self.frequencies.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.frequencies.iter().any(|&f| f < 0.0) {
            return Err(AmputeError::InvalidSpec(format!(
                "frequencies must be a probability vector (sum = {sum})"
            )));
        }
        if !(0.0..1.0).contains(&self.overall_p_miss) {
            return Err(AmputeError::InvalidProbability(self.overall_p_miss));
        }
        for (p, w) in self.patterns.iter().zip(&self.weight_vectors) {
            if p.len() != d || w.len() != d {
                return Err(AmputeError::InvalidSpec(
                    "pattern or weight length does not match data dimension".into(),
                ));
            }
            if !p.is_mixed() {
                return Err(AmputeError::InvalidSpec(format!(
                    "pattern {p} must have at least one missing and one observed coordinate"
                )));
            }
            for j in 0..d {
                if p.is_missing(j) && w[j] != 0.0 {
                    return Err(AmputeError::InvalidSpec(format!(
                        "weight on missing coordinate {j} of pattern {p} must be zero"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Result of cell-wise MCAR amputation with the redraw diagnostic.
#[derive(Debug)]
pub struct McarOutcome {
    pub matrix: IncompleteMatrix,
    /// Number of mask redraws caused by rows coming out fully missing.
    pub rows_redrawn: usize,
}

/// Set each cell missing independently with probability `p_miss`; masks that
/// leave a row with no observed cell are resampled.
pub fn ampute_mcar(
    x: &CompleteMatrix,
    p_miss: f64,
    seed_value: u64,
) -> Result<McarOutcome, AmputeError> {
    if !(0.0..1.0).contains(&p_miss) {
        return Err(AmputeError::InvalidProbability(p_miss));
    }
    let d = x.n_cols();
    let mut rng = seed::rng(seed_value, &[stream::AMPUTE, 0]);
    let mut cells = Vec::with_capacity(x.n_rows() * d);
    let mut rows_redrawn = 0usize;
    for r in 0..x.n_rows() {
        let mask = loop {
            let mask: Vec<bool> = (0..d).map(|_| rng.gen::<f64>() < p_miss).collect();
            if mask.iter().any(|&m| !m) {
                break mask;
            }
            rows_redrawn += 1;
        };
        for (c, &missing) in mask.iter().enumerate() {
            cells.push(if missing {
                Cell::Missing
            } else {
                Cell::Present(x.value(r, c))
            });
        }
    }
    let matrix = IncompleteMatrix::new(x.column_names().to_vec(), x.columns().to_vec(), cells)
        .expect("mask keeps one observed cell per row");
    Ok(McarOutcome {
        matrix,
        rows_redrawn,
    })
}

/// Number of candidate patterns used by default for dimension `d`.
pub fn default_n_patterns(d: usize) -> usize {
    d.div_ceil(2)
}

/// Draw a random MAR mechanism: `n_patterns` masks sampled uniformly among
/// patterns with at least one missing and one observed coordinate, equal
/// frequencies, and standard-normal weights on the observed coordinates.
pub fn random_mar_spec(d: usize, n_patterns: usize, overall_p_miss: f64, seed_value: u64) -> MarSpec {
    assert!(d >= 2, "MAR spec needs d >= 2");
    assert!(n_patterns >= 1);
    let mut rng = seed::rng(seed_value, &[stream::AMPUTE, 1]);
    let mut patterns = Vec::with_capacity(n_patterns);
    let mut weight_vectors = Vec::with_capacity(n_patterns);
    for _ in 0..n_patterns {
        let bits: Vec<bool> = loop {
            let bits: Vec<bool> = (0..d).map(|_| rng.gen::<bool>()).collect();
            let ones = bits.iter().filter(|&&b| b).count();
            if ones >= 1 && ones < d {
                break bits;
            }
        };
        let weights: Vec<f64> = bits
            .iter()
            .map(|&missing| {
                // Draw for every coordinate to keep the stream layout fixed.
                let w: f64 = StandardNormal.sample(&mut rng);
                if missing {
                    0.0
                } else {
                    w
                }
            })
            .collect();
        patterns.push(Pattern::new(bits));
        weight_vectors.push(weights);
    }
    MarSpec {
        frequencies: vec![1.0 / n_patterns as f64; n_patterns],
        patterns,
        weight_vectors,
        overall_p_miss,
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Apply the MAR mechanism: each row is assigned a candidate pattern by the
/// spec frequencies and receives it with probability
/// `sigmoid(w . z_obs + b)`, where `z_obs` are the standardized observed
/// coordinates and the shared intercept `b` is calibrated by bisection so the
/// realized missing-cell fraction matches `overall_p_miss` within 0.01.
pub fn ampute_mar(
    x: &CompleteMatrix,
    spec: &MarSpec,
    seed_value: u64,
) -> Result<IncompleteMatrix, AmputeError> {
    let d = x.n_cols();
    let n = x.n_rows();
    spec.validate(d)?;

    if spec.overall_p_miss == 0.0 {
        let matrix = IncompleteMatrix::new(x.column_names().to_vec(), x.columns().to_vec(), x.cells())
            .expect("complete input");
        return Ok(matrix);
    }

    // Column standardization; constant columns contribute zero.
    let mut means = vec![0.0; d];
    let mut sds = vec![0.0; d];
    for c in 0..d {
        let mean = (0..n).map(|r| x.value(r, c)).sum::<f64>() / n as f64;
        let var = (0..n).map(|r| (x.value(r, c) - mean).powi(2)).sum::<f64>()
            / (n as f64 - 1.0).max(1.0);
        means[c] = mean;
        sds[c] = var.sqrt();
    }

    // Per-row randomness is drawn in row order so the mask depends on the
    // data only through the observed coordinates entering the scores.
    let mut rng = seed::rng(seed_value, &[stream::AMPUTE, 2]);
    let mut assigned = Vec::with_capacity(n);
    let mut uniforms = Vec::with_capacity(n);
    for _ in 0..n {
        let u_pat: f64 = rng.gen();
        let mut acc = 0.0;
        let mut k = spec.patterns.len() - 1;
        for (i, &f) in spec.frequencies.iter().enumerate() {
            acc += f;
            if u_pat < acc {
                k = i;
                break;
            }
        }
        assigned.push(k);
        uniforms.push(rng.gen::<f64>());
    }

    let scores: Vec<f64> = (0..n)
        .map(|r| {
            let w = &spec.weight_vectors[assigned[r]];
            (0..d)
                .map(|c| {
                    if w[c] == 0.0 || sds[c] == 0.0 {
                        0.0
                    } else {
                        w[c] * (x.value(r, c) - means[c]) / sds[c]
                    }
                })
                .sum()
        })
        .collect();

    let cell_weight: Vec<f64> = assigned
        .iter()
        .map(|&k| spec.patterns[k].weight() as f64 / d as f64)
        .collect();
    let realized = |b: f64| -> f64 {
        (0..n)
            .map(|r| {
                if uniforms[r] <= sigmoid(scores[r] + b) {
                    cell_weight[r]
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            / n as f64
    };

    let target = spec.overall_p_miss;
    let (mut lo, mut hi) = (-60.0, 60.0);
    let achievable = realized(hi);
    if achievable + 1e-12 < target {
        return Err(AmputeError::CalibrationFailed { target, achievable });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if realized(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = hi;
    if (realized(b) - target).abs() > 0.01 {
        return Err(AmputeError::CalibrationFailed {
            target,
            achievable: realized(b),
        });
    }

    let mut cells = Vec::with_capacity(n * d);
    for r in 0..n {
        let hit = uniforms[r] <= sigmoid(scores[r] + b);
        let pattern = &spec.patterns[assigned[r]];
        for c in 0..d {
            cells.push(if hit && pattern.is_missing(c) {
                Cell::Missing
            } else {
                Cell::Present(x.value(r, c))
            });
        }
    }
    Ok(
        IncompleteMatrix::new(x.column_names().to_vec(), x.columns().to_vec(), cells)
            .expect("patterns keep one observed cell per row"),
    )
}

/// The spiral rule: X2 goes missing with probability `p_miss` when
/// |X1| > 0.3, X1 goes missing with probability `p_miss` when X2 lies in
/// [-0.3, 0.3]. When both fire on one row, X1 is kept observed.
pub fn ampute_spiral(
    x: &CompleteMatrix,
    p_miss: f64,
    seed_value: u64,
) -> Result<IncompleteMatrix, AmputeError> {
    if x.n_cols() != 2 {
        return Err(AmputeError::SpiralNeedsTwoColumns(x.n_cols()));
    }
    if !(0.0..1.0).contains(&p_miss) {
        return Err(AmputeError::InvalidProbability(p_miss));
    }
    let mut rng = seed::rng(seed_value, &[stream::AMPUTE, 3]);
    let mut cells = Vec::with_capacity(x.n_rows() * 2);
    for r in 0..x.n_rows() {
        let (x1, x2) = (x.value(r, 0), x.value(r, 1));
        let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
        let fire_x2 = x1.abs() > 0.3 && u1 < p_miss;
        let fire_x1 = (-0.3..=0.3).contains(&x2) && u2 < p_miss;
        let x1_missing = fire_x1 && !fire_x2;
        cells.push(if x1_missing { Cell::Missing } else { Cell::Present(x1) });
        cells.push(if fire_x2 { Cell::Missing } else { Cell::Present(x2) });
    }
    Ok(
        IncompleteMatrix::new(x.column_names().to_vec(), x.columns().to_vec(), cells)
            .expect("one coordinate always observed"),
    )
}

/// Two interleaved noisy Archimedean spirals (three turns per arm, unit
/// radius growth), coordinates scaled to [-1, 1] before adding centered
/// Gaussian noise with standard deviation `noise_sd`.
pub fn gen_spiral(n: usize, noise_sd: f64, seed_value: u64) -> CompleteMatrix {
    assert!(n >= 1);
    let mut rng = seed::rng(seed_value, &[stream::GENERATE, 0]);
    let n_first = n / 2;
    let mut values = Vec::with_capacity(2 * n);
    for arm in 0..2 {
        let arm_n = if arm == 0 { n_first } else { n - n_first };
        for i in 0..arm_n {
            let t = (i as f64 + 0.5) / arm_n as f64;
            let theta = t * std::f64::consts::TAU;
            let r = t;
            let (mut px, mut py) = (r * theta.cos(), r * theta.sin());
            if arm == 1 {
                px = -px;
                py = -py;
            }
            let nx: f64 = StandardNormal.sample(&mut rng);
            let ny: f64 = StandardNormal.sample(&mut rng);
            values.push(px + noise_sd * nx);
            values.push(py + noise_sd * ny);
        }
    }
    CompleteMatrix::new(
        vec!["x1".into(), "x2".into()],
        vec![ColumnKind::Numeric, ColumnKind::Numeric],
        values,
    )
    .expect("finite spiral coordinates")
}

/// Equicorrelated Gaussian sample: every pair of columns has correlation
/// `rho`, each margin is standard normal.
pub fn gen_gaussian(n: usize, d: usize, rho: f64, seed_value: u64) -> CompleteMatrix {
    assert!(n >= 1 && d >= 1);
    assert!((0.0..1.0).contains(&rho));
    let mut rng = seed::rng(seed_value, &[stream::GENERATE, 1]);
    let shared = rho.sqrt();
    let own = (1.0 - rho).sqrt();
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        let g0: f64 = StandardNormal.sample(&mut rng);
        for _ in 0..d {
            let g: f64 = StandardNormal.sample(&mut rng);
            values.push(shared * g0 + own * g);
        }
    }
    CompleteMatrix::new(
        (0..d).map(|j| format!("x{}", j + 1)).collect(),
        vec![ColumnKind::Numeric; d],
        values,
    )
    .expect("finite gaussian values")
}
