//! Block partitioning of the decision vector and the primal-dual point.

use std::ops::Range;

use nalgebra::{DVector, DVectorView, DVectorViewMut};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes `n_1..n_P` of the variable blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument("a layout needs at least one block".into()));
        }
        if let Some(i) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!("block {i} has size zero")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for n in &sizes {
            offsets.push(offsets.last().unwrap() + n);
        }
        Ok(Self { sizes, offsets })
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn check_block(&self, i: usize) -> Result<()> {
        if i < self.num_blocks() {
            Ok(())
        } else {
            Err(Error::InvalidBlock {
                index: i,
                blocks: self.num_blocks(),
            })
        }
    }
}

impl TryFrom<Vec<usize>> for BlockLayout {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        BlockLayout::new(sizes)
    }
}

impl From<BlockLayout> for Vec<usize> {
    fn from(layout: BlockLayout) -> Self {
        layout.sizes
    }
}

/// A decision vector together with its block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    layout: BlockLayout,
    data: DVector<f64>,
}

impl BlockVector {
    pub fn new(layout: BlockLayout, data: DVector<f64>) -> Result<Self> {
        if data.len() != layout.total() {
            return Err(Error::dim("block vector", layout.total(), data.len()));
        }
        Ok(Self { layout, data })
    }

    pub fn zeros(layout: BlockLayout) -> Self {
        let data = DVector::zeros(layout.total());
        Self { layout, data }
    }

    pub fn from_blocks(blocks: &[DVector<f64>]) -> Result<Self> {
        let layout = BlockLayout::new(blocks.iter().map(|b| b.len()).collect())?;
        let mut data = DVector::zeros(layout.total());
        for (i, b) in blocks.iter().enumerate() {
            data.rows_mut(layout.offset(i), b.len()).copy_from(b);
        }
        Ok(Self { layout, data })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut DVector<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> DVector<f64> {
        self.data
    }

    pub fn block(&self, i: usize) -> DVectorView<'_, f64> {
        self.data.rows(self.layout.offset(i), self.layout.size(i))
    }

    pub fn block_mut(&mut self, i: usize) -> DVectorViewMut<'_, f64> {
        let (off, n) = (self.layout.offset(i), self.layout.size(i));
        self.data.rows_mut(off, n)
    }

    pub fn set_block(&mut self, i: usize, value: &DVector<f64>) {
        self.block_mut(i).copy_from(value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `w = (z, mu)`: primal blocks plus equality multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPoint {
    pub z: BlockVector,
    pub mu: DVector<f64>,
}

impl PrimalDualPoint {
    pub fn new(z: BlockVector, mu: DVector<f64>) -> Self {
        Self { z, mu }
    }

    /// Stacked `(z, mu)` as one vector.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.z.data().len();
        let mut out = DVector::zeros(n + self.mu.len());
        out.rows_mut(0, n).copy_from(self.z.data());
        out.rows_mut(n, self.mu.len()).copy_from(&self.mu);
        out
    }

    /// Euclidean distance between the stacked primal-dual vectors.
    pub fn distance(&self, other: &PrimalDualPoint) -> f64 {
        let dz = (self.z.data() - other.z.data()).norm_squared();
        let dm = (&self.mu - &other.mu).norm_squared();
        (dz + dm).sqrt()
    }

    /// Both parts multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut z = self.z.clone();
        *z.data_mut() *= factor;
        Self {
            z,
            mu: &self.mu * factor,
        }
    }
}
