//! Uniform tensor grids with an interior/boundary classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Domain, Region};

/// Uniform grid `origin + index * spacing`, row-major node order (last axis fastest).
///
/// `interior` flags nodes strictly inside the set; `boundary` flags the
/// non-interior nodes touched by the 3^n stencil of some interior node, i.e.
/// where homogeneous Dirichlet data is imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    counts: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    strides: Vec<usize>,
    interior: Vec<bool>,
    boundary: Vec<bool>,
    interior_nodes: Vec<usize>,
    interior_slot: Vec<usize>,
}

/// Serializable description of a grid, mask included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMeta {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
    /// One character per node, `1` for interior.
    pub interior: String,
}

const NOT_INTERIOR: usize = usize::MAX;

fn row_major_strides(counts: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; counts.len()];
    for a in (0..counts.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * counts[a + 1];
    }
    strides
}

impl Grid {
    pub fn new(
        origin: Vec<f64>,
        spacing: Vec<f64>,
        counts: Vec<usize>,
        interior: Vec<bool>,
    ) -> Result<Self> {
        let n = origin.len();
        if n == 0 || spacing.len() != n || counts.len() != n {
            return Err(Error::InvalidArgument(
                "grid axis descriptions disagree".into(),
            ));
        }
        if spacing.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidArgument(
                "grid spacing must be positive".into(),
            ));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidArgument(
                "grid needs at least one node per axis".into(),
            ));
        }
        let total: usize = counts.iter().product();
        if interior.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                actual: interior.len(),
            });
        }
        let strides = row_major_strides(&counts);
        let mut interior_slot = vec![NOT_INTERIOR; total];
        let mut interior_nodes = Vec::new();
        for (p, &inside) in interior.iter().enumerate() {
            if inside {
                interior_slot[p] = interior_nodes.len();
                interior_nodes.push(p);
            }
        }
        if interior_nodes.is_empty() {
            return Err(Error::EmptyInterior);
        }
        let mut grid = Grid {
            counts,
            spacing,
            origin,
            strides,
            interior,
            boundary: vec![false; total],
            interior_nodes,
            interior_slot,
        };
        grid.mark_boundary();
        Ok(grid)
    }

    /// Grid over the bounding box of `domain` with `cells[a]` cells per axis.
    pub fn for_domain(domain: &Domain, cells: &[usize]) -> Result<Self> {
        let bb = domain.bounding_box();
        if cells.len() != bb.dim() {
            return Err(Error::DimensionMismatch {
                expected: bb.dim(),
                actual: cells.len(),
            });
        }
        if cells.iter().any(|&c| c < 2) {
            return Err(Error::InvalidArgument(
                "need at least two cells per axis".into(),
            ));
        }
        let spacing: Vec<f64> = (0..bb.dim())
            .map(|a| (bb.upper[a] - bb.lower[a]) / cells[a] as f64)
            .collect();
        let counts: Vec<usize> = cells.iter().map(|c| c + 1).collect();
        let tol = domain.default_tolerance();
        let strides = row_major_strides(&counts);
        let total: usize = counts.iter().product();
        let mut x = vec![0.0; bb.dim()];
        let interior = (0..total)
            .map(|p| {
                let mut rest = p;
                for a in 0..x.len() {
                    x[a] = bb.lower[a] + (rest / strides[a]) as f64 * spacing[a];
                    rest %= strides[a];
                }
                domain.classify_unchecked(&x, tol) == Region::Interior
            })
            .collect();
        Grid::new(bb.lower, spacing, counts, interior)
    }

    pub fn from_meta(meta: &GridMeta) -> Result<Self> {
        let mask: Vec<bool> = meta
            .interior
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::Format(format!("bad mask character `{other}`"))),
            })
            .collect::<Result<_>>()?;
        Grid::new(
            meta.origin.clone(),
            meta.spacing.clone(),
            meta.counts.clone(),
            mask,
        )
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            origin: self.origin.clone(),
            spacing: self.spacing.clone(),
            counts: self.counts.clone(),
            interior: self
                .interior
                .iter()
                .map(|&b| if b { '1' } else { '0' })
                .collect(),
        }
    }

    fn mark_boundary(&mut self) {
        let n = self.dim();
        let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
            .map(|mut k| {
                (0..n)
                    .map(|_| {
                        let d = (k % 3) as i64 - 1;
                        k /= 3;
                        d
                    })
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; n];
        for &p in &self.interior_nodes {
            self.multi_index_into(p, &mut idx);
            for off in &offsets {
                if let Some(q) = self.offset_node(&idx, off) {
                    if !self.interior[q] {
                        self.boundary[q] = true;
                    }
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn node_count(&self) -> usize {
        self.interior.len()
    }

    pub fn interior_count(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Flat node indices of interior nodes, ascending.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.interior[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    /// Position of `node` among the interior nodes.
    pub fn interior_slot(&self, node: usize) -> Option<usize> {
        match self.interior_slot[node] {
            NOT_INTERIOR => None,
            s => Some(s),
        }
    }

    pub fn multi_index_into(&self, mut node: usize, out: &mut [usize]) {
        for a in 0..self.dim() {
            out[a] = node / self.strides[a];
            node %= self.strides[a];
        }
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        self.multi_index_into(node, &mut out);
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Neighbour of the node at `idx` shifted by `off`, if it lies on the grid.
    pub fn offset_node(&self, idx: &[usize], off: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for a in 0..self.dim() {
            let k = idx[a] as i64 + off[a];
            if k < 0 || k >= self.counts[a] as i64 {
                return None;
            }
            flat += k as usize * self.strides[a];
        }
        Some(flat)
    }

    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        let mut rest = node;
        for a in 0..self.dim() {
            let i = rest / self.strides[a];
            rest %= self.strides[a];
            out[a] = self.origin[a] + i as f64 * self.spacing[a];
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coords_into(node, &mut out);
        out
    }

    /// Number of cells between `node` and the nearest non-interior node along
    /// the grid axes (1 for nodes adjacent to the Dirichlet layer).
    pub fn cells_from_boundary(&self, node: usize) -> usize {
        let idx = self.multi_index(node);
        let mut best = usize::MAX;
        for a in 0..self.dim() {
            for dir in [-1i64, 1] {
                let mut k = 1usize;
                let mut off = vec![0i64; self.dim()];
                loop {
                    off[a] = dir * k as i64;
                    match self.offset_node(&idx, &off) {
                        Some(q) if self.interior[q] => k += 1,
                        _ => break,
                    }
                }
                best = best.min(k);
            }
        }
        best
    }
}
