//! Conditional sampling of the free dimensions given fixed generator values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DetError, Result};
use crate::geometry::HyperRect;
use crate::integrate::{check_query, walk, SliceIntegralQuery};
use crate::tree::DensityTree;

/// How leaves crossed by the slice are weighted for selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeafWeighting {
    /// `density · V(leaf ∩ slice)`: reproduces the conditional density.
    #[default]
    DensityVolume,
    /// `V(leaf ∩ slice)` alone, ignoring leaf densities.
    VolumeOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerEntry {
    /// Leaf box clipped to the free box; only free extents matter.
    pub region: HyperRect,
    pub weight: f64,
    pub cumulative: f64,
}

/// Inverse-CDF sampler over the leaves crossed by one slice.
#[derive(Debug, Clone)]
pub struct ConditionalSampler {
    free_dims: Vec<usize>,
    entries: Vec<SamplerEntry>,
    total: f64,
    rng: ChaCha8Rng,
}

/// Builds the cumulative leaf table for `query` with density-volume weights.
pub fn build_sampler(tree: &DensityTree, query: &SliceIntegralQuery, seed: u64) -> Result<ConditionalSampler> {
    build_sampler_with(tree, query, seed, LeafWeighting::DensityVolume)
}

pub fn build_sampler_with(
    tree: &DensityTree,
    query: &SliceIntegralQuery,
    seed: u64,
    weighting: LeafWeighting,
) -> Result<ConditionalSampler> {
    check_query(tree, query)?;
    let dims = tree.dim_count();
    let fixed = query.slice.as_dense(dims);
    let mut entries = Vec::new();
    let mut populated = false;
    let mut total = 0.0;
    walk(tree, &fixed, query.free_box.as_ref(), |cell| {
        if cell.density > 0.0 {
            populated = true;
        }
        let weight = match weighting {
            LeafWeighting::DensityVolume => cell.density * cell.free_volume,
            LeafWeighting::VolumeOnly => cell.free_volume,
        };
        if weight > 0.0 {
            total += weight;
            entries.push(SamplerEntry {
                region: cell.clipped.clone(),
                weight,
                cumulative: total,
            });
        }
    });
    if !populated || entries.is_empty() {
        return Err(DetError::NoSupport(
            "no populated leaf contains the fixed values".into(),
        ));
    }
    Ok(ConditionalSampler {
        free_dims: query.slice.free_dims(dims),
        entries,
        total,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl ConditionalSampler {
    pub fn entries(&self) -> &[SamplerEntry] {
        &self.entries
    }

    /// Sum of the selection weights; equals the slice integral in density-volume mode.
    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn free_dims(&self) -> &[usize] {
        &self.free_dims
    }

    /// Selection probabilities of the table entries.
    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight / self.total).collect()
    }

    /// An independent sampler over the same table, on its own generator stream.
    pub fn fork(&self, stream: u64) -> ConditionalSampler {
        let mut rng = self.rng.clone();
        rng.set_stream(stream.wrapping_add(1));
        rng.set_word_pos(0);
        ConditionalSampler {
            free_dims: self.free_dims.clone(),
            entries: self.entries.clone(),
            total: self.total,
            rng,
        }
    }

    /// Index of the entry selected by `u ∈ [0, total)`.
    fn pick(&self, u: f64) -> usize {
        let i = self.entries.partition_point(|e| e.cumulative <= u);
        i.min(self.entries.len() - 1)
    }

    /// Draws one row of free-dimension values, ordered as [`ConditionalSampler::free_dims`].
    pub fn draw(&mut self) -> Vec<f64> {
        self.draw_with_leaf().1
    }

    /// Like [`ConditionalSampler::draw`], also returning the selected entry index.
    pub fn draw_with_leaf(&mut self) -> (usize, Vec<f64>) {
        let u = self.rng.gen::<f64>() * self.total;
        let i = self.pick(u);
        let region = &self.entries[i].region;
        let row = self
            .free_dims
            .iter()
            .map(|&d| self.rng.gen_range(region.lo()[d]..region.hi()[d]))
            .collect();
        (i, row)
    }

    pub fn sample(&mut self, count: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.draw()).collect()
    }
}
