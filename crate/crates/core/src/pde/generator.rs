//! Finite-difference generator `L = <f, grad> + 1/2 <Sigma, Hess>` restricted
//! to interior nodes with homogeneous Dirichlet data.

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::problem::DynamicsField;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists; duplicate columns are summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows.into_iter() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < n_cols);
                if last == Some(c) {
                    *vals.last_mut().expect("entry") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n_rows: row_ptr.len() - 1,
            n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(j, a)| a * x[j]).sum())
            .collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n_rows)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }
}

/// `L_h` on interior nodes. Row/column `k` is interior node `node_map[k]`.
/// Entries coupling to Dirichlet nodes are kept separately so that fields with
/// nonzero boundary values can still be differentiated.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub matrix: CsrMatrix,
    pub node_map: Vec<usize>,
    /// `(row, grid node, coefficient)` for stencil entries on non-interior nodes.
    pub boundary_coupling: Vec<(usize, usize, f64)>,
}

impl GeneratorMatrix {
    pub fn size(&self) -> usize {
        self.matrix.n_rows()
    }
}

/// Central-difference discretization of the generator at time `t`.
///
/// Drift terms use `(phi_{+} - phi_{-}) / 2h`, diagonal diffusion terms the
/// three-point second difference, and mixed terms the four-point cross
/// stencil. Neighbours that are not interior nodes carry zero Dirichlet data.
pub fn discretize_generator(
    grid: &Grid,
    dynamics: &DynamicsField,
    t: f64,
) -> Result<GeneratorMatrix> {
    let n = grid.dim();
    if dynamics.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: dynamics.dim(),
        });
    }
    let h = grid.spacing();
    let mut x = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut idx = vec![0usize; n];
    let mut off = vec![0i64; n];
    let mut rows = Vec::with_capacity(grid.interior_count());
    let mut boundary_coupling = Vec::new();

    for (row, &p) in grid.interior_nodes().iter().enumerate() {
        grid.coords_into(p, &mut x);
        grid.multi_index_into(p, &mut idx);
        dynamics.drift_into(t, &x, &mut f);
        let sigma = dynamics.diffusion_tensor(t, &x);
        let mut entries: Vec<(isize, f64)> = Vec::with_capacity(1 + 2 * n + 2 * n * n);

        let push = |off: &[i64], coef: f64, entries: &mut Vec<(isize, f64)>| {
            if coef == 0.0 {
                return;
            }
            if let Some(q) = grid.offset_node(&idx, off) {
                entries.push((q as isize, coef));
            }
        };

        let mut diag = 0.0;
        for a in 0..n {
            let s_aa = sigma[(a, a)];
            let second = 0.5 * s_aa / (h[a] * h[a]);
            let first = f[a] / (2.0 * h[a]);
            diag -= 2.0 * second;
            off.iter_mut().for_each(|o| *o = 0);
            off[a] = 1;
            push(&off, second + first, &mut entries);
            off[a] = -1;
            push(&off, second - first, &mut entries);
            for b in (a + 1)..n {
                let s_ab = 0.5 * (sigma[(a, b)] + sigma[(b, a)]);
                if s_ab == 0.0 {
                    continue;
                }
                let c = s_ab / (4.0 * h[a] * h[b]);
                for (da, db, sign) in [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)] {
                    off.iter_mut().for_each(|o| *o = 0);
                    off[a] = da;
                    off[b] = db;
                    push(&off, sign * c, &mut entries);
                }
            }
        }
        entries.push((p as isize, diag));

        let mut row_entries = Vec::with_capacity(entries.len());
        for (q, coef) in entries {
            if !coef.is_finite() {
                return Err(Error::NonFinite {
                    what: "generator coefficient",
                    t,
                });
            }
            let q = q as usize;
            match grid.interior_slot(q) {
                Some(col) => row_entries.push((col, coef)),
                None => boundary_coupling.push((row, q, coef)),
            }
        }
        rows.push(row_entries);
    }

    Ok(GeneratorMatrix {
        matrix: CsrMatrix::from_rows(grid.interior_count(), rows),
        node_map: grid.interior_nodes().to_vec(),
        boundary_coupling,
    })
}

/// `L_h v` for a vector of interior values (homogeneous Dirichlet data).
pub fn apply_generator(gen: &GeneratorMatrix, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != gen.size() {
        return Err(Error::DimensionMismatch {
            expected: gen.size(),
            actual: values.len(),
        });
    }
    Ok(gen.matrix.mul_vec(values))
}

/// `L_h` applied to a full-grid field, including whatever values it carries on
/// the Dirichlet nodes. Returns one value per interior node.
pub fn apply_generator_full(gen: &GeneratorMatrix, node_values: &[f64]) -> Vec<f64> {
    let interior: Vec<f64> = gen.node_map.iter().map(|&p| node_values[p]).collect();
    let mut out = gen.matrix.mul_vec(&interior);
    for &(row, node, coef) in &gen.boundary_coupling {
        out[row] += coef * node_values[node];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Domain, Drift, MatrixSpec};
    use std::f64::consts::PI;

    fn line(cells: usize) -> Grid {
        Grid::for_domain(&Domain::rect(vec![0.0], vec![1.0]).unwrap(), &[cells]).unwrap()
    }

    #[test]
    fn one_dimensional_laplacian_stencil() {
        let g = line(10);
        let h = 0.1;
        let gen = discretize_generator(&g, &DynamicsField::brownian(1), 0.0).unwrap();
        assert_eq!(gen.size(), 9);
        let c = 1.0 / (2.0 * h * h);
        for i in 0..9 {
            assert!((gen.matrix.get(i, i) + 2.0 * c).abs() < 1e-9);
            if i > 0 {
                assert!((gen.matrix.get(i, i - 1) - c).abs() < 1e-9);
            }
            if i < 8 {
                assert!((gen.matrix.get(i, i + 1) - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_drift_adds_first_difference() {
        let g = line(10);
        let h = 0.1;
        let cst = 0.7;
        let d = DynamicsField::new(
            1,
            Drift::Affine {
                matrix: vec![vec![0.0]],
                offset: vec![cst],
            },
            MatrixSpec::identity(),
            MatrixSpec::identity(),
        )
        .unwrap();
        let gen = discretize_generator(&g, &d, 0.0).unwrap();
        let base = discretize_generator(&g, &DynamicsField::brownian(1), 0.0).unwrap();
        for i in 1..8 {
            assert!(
                (gen.matrix.get(i, i + 1) - base.matrix.get(i, i + 1) - cst / (2.0 * h)).abs()
                    < 1e-9
            );
            assert!(
                (gen.matrix.get(i, i - 1) - base.matrix.get(i, i - 1) + cst / (2.0 * h)).abs()
                    < 1e-9
            );
            assert_eq!(gen.matrix.get(i, i), base.matrix.get(i, i));
        }
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let g = line(8);
        let gen = discretize_generator(&g, &DynamicsField::brownian(1), 0.0).unwrap();
        assert!(apply_generator(&gen, &vec![0.0; 7])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(apply_generator(&gen, &[0.0; 3]).is_err());
    }

    #[test]
    fn constant_field_only_feels_the_boundary() {
        let g = line(8);
        let gen = discretize_generator(&g, &DynamicsField::brownian(1), 0.0).unwrap();
        let out = apply_generator(&gen, &vec![1.0; 7]).unwrap();
        assert!(out[0] < 0.0 && out[6] < 0.0);
        assert!(out[1..6].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn mixed_derivative_stencil_is_exact_on_bilinear() {
        let d = DynamicsField::new(
            2,
            Drift::Zero,
            MatrixSpec::identity(),
            MatrixSpec::Rows(vec![vec![1.0, 0.0], vec![1.0, 1.0]]),
        )
        .unwrap();
        // Sigma = [[1, 1], [1, 2]]; L[x y] = Sigma_12 = 1
        let g = Grid::for_domain(
            &Domain::rect(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            &[8, 8],
        )
        .unwrap();
        let gen = discretize_generator(&g, &d, 0.0).unwrap();
        let vals: Vec<f64> = (0..g.node_count())
            .map(|p| {
                let x = g.coords(p);
                x[0] * x[1]
            })
            .collect();
        let out = apply_generator_full(&gen, &vals);
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn shear_drift_on_first_coordinate() {
        let g = Grid::for_domain(
            &Domain::rect(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap(),
            &[20, 20],
        )
        .unwrap();
        let gen = discretize_generator(&g, &DynamicsField::shear_drift(), 0.0).unwrap();
        let vals: Vec<f64> = (0..g.node_count()).map(|p| g.coords(p)[0]).collect();
        let out = apply_generator_full(&gen, &vals);
        for (row, &p) in gen.node_map.iter().enumerate() {
            assert!((out[row] - (0.01 - g.coords(p)[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_is_an_approximate_eigenfunction() {
        let l = 2.0;
        for cells in [50, 100] {
            let g = Grid::for_domain(&Domain::rect(vec![0.0], vec![l]).unwrap(), &[cells]).unwrap();
            let gen = discretize_generator(&g, &DynamicsField::brownian(1), 0.0).unwrap();
            let phi: Vec<f64> = gen
                .node_map
                .iter()
                .map(|&p| (PI * g.coords(p)[0] / l).sin())
                .collect();
            let out = apply_generator(&gen, &phi).unwrap();
            let k = PI * PI / (2.0 * l * l);
            let h = l / cells as f64;
            for (a, b) in out.iter().zip(&phi) {
                assert!((a + k * b).abs() <= 1.01 * k * (PI * h / l).powi(2) / 12.0);
            }
        }
    }
}
