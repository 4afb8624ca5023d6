//! Divergence-based similarity and cost-matrix construction.
//!
//! The pairwise comparison `D` is a SIMILARITY in [0, 1]: one minus the
//! Jensen-Shannon divergence measured in bits. Reading `D` as a probability
//! of sameness is what makes the distinguishability product formula and the
//! harmonic-mean limit behavior (pair similarity vanishes when any
//! characteristic is fully dissimilar) well defined; a raw divergence would
//! invert both.

use crate::oracles;
use crate::sensing::{GaussianObservation, ObservedEntry};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cost assigned to impossible pairings and padded rows. Large but finite so
/// solver arithmetic stays finite; strictly larger than any finite entry
/// times the matrix size.
pub const SENTINEL: f64 = 1e18;

/// Pair similarities at or below this are treated as zero.
pub const EPSILON_SIMILARITY: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("observation variance must be positive, got {0}")]
    NonPositiveVariance(f64),
}

/// How the mixture midpoint of the Jensen-Shannon construction is evaluated.
/// The mixture of two Gaussians is not Gaussian; the production path moment-
/// matches it so the closed-form divergence applies, while `ExactMixture`
/// integrates the true mixture numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureMode {
    #[default]
    MomentMatched,
    ExactMixture,
}

/// Similarity in [0, 1]; 1 iff the observation distributions are identical.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    fn new(value: f64) -> Self {
        SimilarityScore(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Closed-form KL divergence between two Gaussian observation densities.
pub fn kl_gaussian(
    a: &GaussianObservation,
    b: &GaussianObservation,
) -> Result<f64, SimilarityError> {
    if a.variance <= 0.0 {
        return Err(SimilarityError::NonPositiveVariance(a.variance));
    }
    if b.variance <= 0.0 {
        return Err(SimilarityError::NonPositiveVariance(b.variance));
    }
    let mean_diff = a.mean - b.mean;
    Ok(0.5 * (b.variance / a.variance).ln()
        + (a.variance + mean_diff * mean_diff) / (2.0 * b.variance)
        - 0.5)
}

/// Jensen-Shannon divergence in nats under the chosen mixture handling.
pub fn jsd_nats(
    a: &GaussianObservation,
    b: &GaussianObservation,
    mode: MixtureMode,
) -> Result<f64, SimilarityError> {
    match mode {
        MixtureMode::MomentMatched => {
            let mean_diff = a.mean - b.mean;
            let mid = GaussianObservation::new(
                0.5 * (a.mean + b.mean),
                0.5 * (a.variance + b.variance) + 0.25 * mean_diff * mean_diff,
            );
            Ok(0.5 * kl_gaussian(a, &mid)? + 0.5 * kl_gaussian(b, &mid)?)
        }
        MixtureMode::ExactMixture => {
            if a.variance <= 0.0 || b.variance <= 0.0 {
                return Err(SimilarityError::NonPositiveVariance(
                    a.variance.min(b.variance),
                ));
            }
            Ok(oracles::jsd_exact_mixture_quadrature(
                a.mean, a.variance, b.mean, b.variance,
            ))
        }
    }
}

/// Jensen-Shannon similarity: `1 - min(JSD_bits, 1)`. Symmetric; 1 iff the
/// parameters are identical.
pub fn js_similarity_with(
    a: &GaussianObservation,
    b: &GaussianObservation,
    mode: MixtureMode,
) -> Result<SimilarityScore, SimilarityError> {
    let bits = jsd_nats(a, b, mode)? / std::f64::consts::LN_2;
    Ok(SimilarityScore::new(1.0 - bits.min(1.0)))
}

pub fn js_similarity(
    a: &GaussianObservation,
    b: &GaussianObservation,
) -> Result<SimilarityScore, SimilarityError> {
    js_similarity_with(a, b, MixtureMode::MomentMatched)
}

fn similarity(a: &GaussianObservation, b: &GaussianObservation, mode: MixtureMode) -> f64 {
    js_similarity_with(a, b, mode)
        .expect("observation variances are positive by construction")
        .value()
}

/// Distinguishability of the AD neighbor `j`'s `k`-th characteristic: the
/// probability that it matches exactly one other neighbor's characteristic
/// and differs from all the rest. A lone neighbor is trivially
/// distinguishable (1).
pub fn distinguishability(
    j: usize,
    k: usize,
    ad_table: &[ObservedEntry<'_>],
    mode: MixtureMode,
) -> f64 {
    let k_a = ad_table.len();
    if k_a < 2 {
        return 1.0;
    }
    let own = ad_table[j].characteristics[k];
    // Pairwise similarities to every other neighbor.
    let sims: Vec<f64> = ad_table
        .iter()
        .enumerate()
        .filter(|(p, _)| *p != j)
        .map(|(_, e)| similarity(&own, &e.characteristics[k], mode))
        .collect();

    // p_{j,k} = sum_p D_p * prod_{q != p} (1 - D_q), computed in O(K_a) via
    // a shared product with zero-factor bookkeeping.
    const TINY: f64 = 1e-300;
    let mut zero_count = 0usize;
    let mut nonzero_product = 1.0f64;
    for &d in &sims {
        let factor = 1.0 - d;
        if factor < TINY {
            zero_count += 1;
        } else {
            nonzero_product *= factor;
        }
    }
    let mut total = 0.0;
    for &d in &sims {
        let factor = 1.0 - d;
        let rest = if factor < TINY {
            if zero_count == 1 {
                nonzero_product
            } else {
                0.0
            }
        } else if zero_count > 0 {
            0.0
        } else {
            nonzero_product / factor
        };
        total += d * rest;
    }
    total.clamp(0.0, 1.0)
}

/// Per-characteristic weights: raw in [0, 1], normalized summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl WeightVector {
    /// Builds from raw weights; an all-zero raw vector falls back to uniform.
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let sum: f64 = raw.iter().sum();
        let k_f = raw.len();
        let normalized = if sum < 1e-12 {
            vec![1.0 / k_f as f64; k_f]
        } else {
            raw.iter().map(|w| w / sum).collect()
        };
        WeightVector { raw, normalized }
    }

    /// Indicator weights selecting a single characteristic.
    pub fn indicator(k_f: usize, selected: usize) -> Self {
        let mut raw = vec![0.0; k_f];
        raw[selected] = 1.0;
        WeightVector::from_raw(raw)
    }
}

/// Dynamic weights: the raw weight of characteristic `k` is the mean
/// distinguishability over the AD table.
pub fn dynamic_weights(ad_table: &[ObservedEntry<'_>], k_f: usize, mode: MixtureMode) -> WeightVector {
    let k_a = ad_table.len();
    if k_a == 0 {
        return WeightVector::from_raw(vec![0.0; k_f]);
    }
    let raw = (0..k_f)
        .map(|k| {
            (0..k_a)
                .map(|j| distinguishability(j, k, ad_table, mode))
                .sum::<f64>()
                / k_a as f64
        })
        .collect();
    WeightVector::from_raw(raw)
}

/// Weighted harmonic mean of per-characteristic similarities. Tends to zero
/// whenever any individual similarity does.
pub fn pair_similarity(
    vf: &[GaussianObservation],
    af: &[GaussianObservation],
    weights: &WeightVector,
    mode: MixtureMode,
) -> SimilarityScore {
    debug_assert_eq!(vf.len(), af.len());
    debug_assert_eq!(vf.len(), weights.normalized.len());
    let mut inv_sum = 0.0;
    let mut weight_sum = 0.0;
    for k in 0..vf.len() {
        // Zero-weight characteristics are excluded entirely (this is what
        // makes single-characteristic ablations genuinely single): they
        // neither contribute to the mean nor veto the pair.
        let w = weights.normalized[k];
        if w <= 0.0 {
            continue;
        }
        let d = similarity(&vf[k], &af[k], mode);
        if d <= EPSILON_SIMILARITY {
            return SimilarityScore::new(0.0);
        }
        inv_sum += w / d;
        weight_sum += w;
    }
    if inv_sum <= 0.0 {
        return SimilarityScore::new(0.0);
    }
    SimilarityScore::new(weight_sum / inv_sum)
}

/// Padded square matching-cost matrix. Rows `0..k_v` are real VD neighbors,
/// rows `k_v..n` are padding; columns index AD neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub n: usize,
    pub k_v: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(k_v: usize, n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        CostMatrix { n, k_v, data }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn is_padded_row(&self, row: usize) -> bool {
        row >= self.k_v
    }
}

/// Builds the padded cost matrix `c = 1/s` from the two tables using the
/// given (already normalized) weights.
pub fn build_cost_matrix(
    vd_table: &[ObservedEntry<'_>],
    ad_table: &[ObservedEntry<'_>],
    weights: &WeightVector,
    mode: MixtureMode,
) -> CostMatrix {
    let k_v = vd_table.len();
    let k_a = ad_table.len();
    debug_assert!(k_a >= k_v);
    let mut data = vec![SENTINEL; k_a * k_a];
    for (i, vd) in vd_table.iter().enumerate() {
        for (j, ad) in ad_table.iter().enumerate() {
            let s = pair_similarity(vd.characteristics, ad.characteristics, weights, mode).value();
            data[i * k_a + j] = if s <= EPSILON_SIMILARITY {
                SENTINEL
            } else {
                1.0 / s
            };
        }
    }
    CostMatrix::from_rows(k_v, k_a, data)
}
