//! Invariance and target sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-way membership of a point relative to a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Boundary,
    Exterior,
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }
}

fn default_weyl_half_width() -> f64 {
    5.0
}

/// Bounded sets used as the invariance set or as a terminal target.
///
/// Open sets throughout: `HyperRectangle` is `{lower < x < upper}`, `Disk` is
/// `{|x - c| < r}` and so on. The boundary is whatever lies within the
/// classification tolerance of the geometric boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    HyperRectangle {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    /// Origin-centred annulus `{inner < |x| < outer}`; only used as a target set.
    Annulus {
        inner: f64,
        outer: f64,
    },
    /// `{x_1 < x_2 < ... < x_n}`. Unbounded; `half_width` fixes the box used
    /// wherever a bounding box is needed.
    WeylChamber {
        dim: usize,
        #[serde(default = "default_weyl_half_width")]
        half_width: f64,
    },
    /// Union of the cells `node ± spacing/2` over the flagged nodes of a
    /// uniform grid spanning `[lower, upper]` with `cells[a]` cells per axis.
    /// Node order is row-major (last axis fastest).
    GridMask {
        lower: Vec<f64>,
        upper: Vec<f64>,
        cells: Vec<usize>,
        mask: Vec<bool>,
    },
}

impl Domain {
    pub fn rect(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Domain::HyperRectangle { lower, upper };
        d.check()?;
        Ok(d)
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        let d = Domain::Disk { center, radius };
        d.check()?;
        Ok(d)
    }

    pub fn annulus(inner: f64, outer: f64) -> Result<Self> {
        let d = Domain::Annulus { inner, outer };
        d.check()?;
        Ok(d)
    }

    pub fn weyl(dim: usize) -> Result<Self> {
        let d = Domain::WeylChamber {
            dim,
            half_width: default_weyl_half_width(),
        };
        d.check()?;
        Ok(d)
    }

    /// Structural invariants of each variant.
    pub fn check(&self) -> Result<()> {
        match self {
            Domain::HyperRectangle { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::InvalidDomain(format!(
                        "rectangle bounds have lengths {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if !(l.is_finite() && u.is_finite() && l < u) {
                        return Err(Error::InvalidDomain(format!(
                            "rectangle axis {i}: need lower < upper, got [{l}, {u}]"
                        )));
                    }
                }
            }
            Domain::Disk { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidDomain(format!(
                        "disk radius {radius} must be positive"
                    )));
                }
            }
            Domain::Annulus { inner, outer } => {
                if !(*inner > 0.0 && inner < outer && outer.is_finite()) {
                    return Err(Error::InvalidDomain(format!(
                        "annulus needs 0 < inner < outer, got ({inner}, {outer})"
                    )));
                }
            }
            Domain::WeylChamber { dim, half_width } => {
                if *dim < 2 {
                    return Err(Error::InvalidDomain(format!(
                        "Weyl chamber needs dim >= 2, got {dim}"
                    )));
                }
                if !(*half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::InvalidDomain(
                        "Weyl chamber half width must be positive".into(),
                    ));
                }
            }
            Domain::GridMask {
                lower,
                upper,
                cells,
                mask,
            } => {
                Domain::HyperRectangle {
                    lower: lower.clone(),
                    upper: upper.clone(),
                }
                .check()?;
                if cells.len() != lower.len() || cells.iter().any(|&c| c == 0) {
                    return Err(Error::InvalidDomain("grid mask cell counts invalid".into()));
                }
                let nodes: usize = cells.iter().map(|c| c + 1).product();
                if mask.len() != nodes {
                    return Err(Error::InvalidDomain(format!(
                        "grid mask has {} entries for {nodes} nodes",
                        mask.len()
                    )));
                }
                if !mask.iter().any(|&m| m) {
                    return Err(Error::InvalidDomain("grid mask is empty".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::HyperRectangle { lower, .. } | Domain::GridMask { lower, .. } => lower.len(),
            Domain::Disk { .. } | Domain::Annulus { .. } => 2,
            Domain::WeylChamber { dim, .. } => *dim,
        }
    }

    pub fn bounding_box(&self) -> BoundingBox {
        match self {
            Domain::HyperRectangle { lower, upper } | Domain::GridMask { lower, upper, .. } => {
                BoundingBox {
                    lower: lower.clone(),
                    upper: upper.clone(),
                }
            }
            Domain::Disk { center, radius } => BoundingBox {
                lower: vec![center[0] - radius, center[1] - radius],
                upper: vec![center[0] + radius, center[1] + radius],
            },
            Domain::Annulus { outer, .. } => BoundingBox {
                lower: vec![-outer, -outer],
                upper: vec![*outer, *outer],
            },
            Domain::WeylChamber { dim, half_width } => BoundingBox {
                lower: vec![-half_width; *dim],
                upper: vec![*half_width; *dim],
            },
        }
    }

    /// Default classification tolerance: `1e-9` times the bounding-box diameter.
    pub fn default_tolerance(&self) -> f64 {
        1e-9 * self.bounding_box().diameter()
    }

    /// Approximate signed distance to the boundary: positive inside, negative
    /// outside. Exact for rectangles, disks and annuli; for the Weyl chamber it
    /// is the distance to the nearest wall `x_i = x_{i+1}`.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::HyperRectangle { lower, upper } => rect_signed_distance(lower, upper, x),
            Domain::Disk { center, radius } => {
                let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                radius - r
            }
            Domain::Annulus { inner, outer } => {
                let r = x[0].hypot(x[1]);
                (r - inner).min(outer - r)
            }
            Domain::WeylChamber { .. } => x
                .windows(2)
                .map(|w| (w[1] - w[0]) * std::f64::consts::FRAC_1_SQRT_2)
                .fold(f64::INFINITY, f64::min),
            Domain::GridMask {
                lower,
                upper,
                cells,
                mask,
            } => grid_mask_signed_distance(lower, upper, cells, mask, x),
        }
    }

    /// Classify `x` as interior, boundary (within `tol` of the boundary) or exterior.
    pub fn classify(&self, x: &[f64], tol: f64) -> Result<Region> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self.classify_unchecked(x, tol))
    }

    /// Hot-path classification without the dimension check.
    #[inline]
    pub fn classify_unchecked(&self, x: &[f64], tol: f64) -> Region {
        let d = self.signed_distance(x);
        if d.is_nan() {
            Region::Exterior
        } else if d > tol {
            Region::Interior
        } else if d >= -tol {
            Region::Boundary
        } else {
            Region::Exterior
        }
    }
}

/// Three-way membership with the domain's default tolerance unless one is given.
pub fn domain_contains(domain: &Domain, x: &[f64], tol: Option<f64>) -> Result<Region> {
    domain.classify(x, tol.unwrap_or_else(|| domain.default_tolerance()))
}

fn rect_signed_distance(lower: &[f64], upper: &[f64], x: &[f64]) -> f64 {
    let mut inside = f64::INFINITY;
    let mut outside_sq = 0.0;
    for ((&l, &u), &xi) in lower.iter().zip(upper).zip(x) {
        inside = inside.min(xi - l).min(u - xi);
        let excess = if xi < l {
            l - xi
        } else if xi > u {
            xi - u
        } else {
            0.0
        };
        outside_sq += excess * excess;
    }
    if inside >= 0.0 {
        inside
    } else {
        -outside_sq.sqrt().max(-inside)
    }
}

fn grid_mask_signed_distance(
    lower: &[f64],
    upper: &[f64],
    cells: &[usize],
    mask: &[bool],
    x: &[f64],
) -> f64 {
    let n = lower.len();
    let mut idx = vec![0usize; n];
    let mut offset = vec![0.0; n];
    let mut spacing = vec![0.0; n];
    for a in 0..n {
        spacing[a] = (upper[a] - lower[a]) / cells[a] as f64;
        let s = (x[a] - lower[a]) / spacing[a];
        let k = s.round();
        if k < 0.0 || k > cells[a] as f64 {
            return -(rect_signed_distance(lower, upper, x).abs()).max(f64::MIN_POSITIVE);
        }
        idx[a] = k as usize;
        offset[a] = x[a] - (lower[a] + k * spacing[a]);
    }
    let flat = |id: &[usize]| -> usize {
        let mut f = 0;
        for a in 0..n {
            f = f * (cells[a] + 1) + id[a];
        }
        f
    };
    let masked = |id: &[usize]| mask[flat(id)];
    let here = masked(&idx);
    let mut best = f64::INFINITY;
    for a in 0..n {
        for dir in [-1i64, 1] {
            let k = idx[a] as i64 + dir;
            let neighbour = if k < 0 || k > cells[a] as i64 {
                false
            } else {
                let mut id = idx.clone();
                id[a] = k as usize;
                masked(&id)
            };
            if neighbour != here {
                let face = 0.5 * spacing[a] - dir as f64 * offset[a];
                best = best.min(face);
            }
        }
    }
    if !best.is_finite() {
        best = 0.5 * spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    }
    if here {
        best
    } else {
        -best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_center_is_interior() {
        let d = Domain::disk([0.0, 0.0], 2.0).unwrap();
        assert_eq!(
            domain_contains(&d, &[0.0, 0.0], None).unwrap(),
            Region::Interior
        );
        assert_eq!(
            domain_contains(&d, &[2.0, 0.0], None).unwrap(),
            Region::Boundary
        );
        assert_eq!(
            domain_contains(&d, &[2.1, 0.0], None).unwrap(),
            Region::Exterior
        );
    }

    #[test]
    fn rectangle_face_is_boundary() {
        let d = Domain::rect(vec![0.0], vec![PI]).unwrap();
        assert_eq!(domain_contains(&d, &[0.0], None).unwrap(), Region::Boundary);
        assert_eq!(domain_contains(&d, &[PI], None).unwrap(), Region::Boundary);
        assert_eq!(domain_contains(&d, &[1.0], None).unwrap(), Region::Interior);
        assert_eq!(
            domain_contains(&d, &[-0.5], None).unwrap(),
            Region::Exterior
        );
    }

    #[test]
    fn weyl_ordering() {
        let d = Domain::weyl(3).unwrap();
        assert_eq!(
            domain_contains(&d, &[1.0, 2.0, 3.0], None).unwrap(),
            Region::Interior
        );
        assert_eq!(
            domain_contains(&d, &[1.0, 1.0, 3.0], None).unwrap(),
            Region::Boundary
        );
        assert_eq!(
            domain_contains(&d, &[2.0, 1.0, 3.0], None).unwrap(),
            Region::Exterior
        );
    }

    #[test]
    fn annulus_membership() {
        let d = Domain::annulus(1.0, 2.0).unwrap();
        assert_eq!(d.classify(&[1.5, 0.0], 1e-9).unwrap(), Region::Interior);
        assert_eq!(d.classify(&[0.5, 0.0], 1e-9).unwrap(), Region::Exterior);
        assert_eq!(d.classify(&[0.0, 1.0], 1e-9).unwrap(), Region::Boundary);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            d.classify(&[0.0], 1e-9),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 1
            })
        ));
    }

    #[test]
    fn invalid_variants_rejected() {
        assert!(Domain::rect(vec![1.0], vec![0.0]).is_err());
        assert!(Domain::annulus(2.0, 1.0).is_err());
        assert!(Domain::annulus(0.0, 1.0).is_err());
        assert!(Domain::weyl(1).is_err());
        assert!(Domain::disk([0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn grid_mask_follows_flags() {
        // 1D, 4 cells on [0, 4]: nodes 0..=4, flag nodes 1..=3 => region (0.5, 3.5)
        let d = Domain::GridMask {
            lower: vec![0.0],
            upper: vec![4.0],
            cells: vec![4],
            mask: vec![false, true, true, true, false],
        };
        d.check().unwrap();
        assert_eq!(d.classify(&[2.0], 1e-9).unwrap(), Region::Interior);
        assert_eq!(d.classify(&[0.5], 1e-9).unwrap(), Region::Boundary);
        assert_eq!(d.classify(&[0.2], 1e-9).unwrap(), Region::Exterior);
        assert!((d.signed_distance(&[1.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn serde_rejects_unknown_keys() {
        let ok: Domain =
            serde_json::from_str(r#"{"kind":"disk","center":[0,0],"radius":1}"#).unwrap();
        assert_eq!(ok, Domain::disk([0.0, 0.0], 1.0).unwrap());
        assert!(serde_json::from_str::<Domain>(
            r#"{"kind":"disk","center":[0,0],"radius":1,"x":2}"#
        )
        .is_err());
    }
}
