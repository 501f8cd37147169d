//! Built-in drift, input and noise fields.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drift vector fields available by tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    Zero,
    /// `f(x) = A x + c`.
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// `f(x) = (x2, -alpha x1^3 - beta x2)`: spring-mass-damper with cubic spring.
    CubicSpringDamper {
        alpha: f64,
        beta: f64,
    },
    /// Radial part of a Brownian motion in `ambient_dim` dimensions,
    /// `f(r) = (ambient_dim - 1) / (2 r)`. One-dimensional.
    RadialBessel {
        ambient_dim: usize,
    },
}

/// A constant matrix given either by name (`"identity"`) or as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn identity() -> Self {
        MatrixSpec::Named("identity".into())
    }

    fn build(&self, dim: usize, what: &str) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Named(name) if name == "identity" => Ok(DMatrix::identity(dim, dim)),
            MatrixSpec::Named(name) => Err(Error::Format(format!(
                "unknown {what} matrix name `{name}`"
            ))),
            MatrixSpec::Rows(rows) => {
                if rows.len() != dim {
                    return Err(Error::Format(format!(
                        "{what} matrix has {} rows, state dim is {dim}",
                        rows.len()
                    )));
                }
                let cols = rows.first().map_or(0, |r| r.len());
                if cols == 0 || rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::Format(format!(
                        "{what} matrix rows are ragged or empty"
                    )));
                }
                if rows.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::Format(format!(
                        "{what} matrix has non-finite entries"
                    )));
                }
                Ok(DMatrix::from_fn(dim, cols, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsDoc {
    dim: usize,
    drift: Drift,
    input: MatrixSpec,
    noise: MatrixSpec,
}

/// Drift `f`, input matrix `G` and noise coefficient `sigma` of
/// `dx = (f + G u) dt + sigma dw`. All built-ins are autonomous and `G`,
/// `sigma` are constant; the `(t, x)` arguments keep the general signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DynamicsDoc", into = "DynamicsDoc")]
pub struct DynamicsField {
    doc: DynamicsDoc,
    input: DMatrix<f64>,
    noise: DMatrix<f64>,
    tensor: DMatrix<f64>,
    noise_is_identity: bool,
}

impl TryFrom<DynamicsDoc> for DynamicsField {
    type Error = Error;

    fn try_from(doc: DynamicsDoc) -> Result<Self> {
        DynamicsField::new(doc.dim, doc.drift, doc.input, doc.noise)
    }
}

impl From<DynamicsField> for DynamicsDoc {
    fn from(d: DynamicsField) -> Self {
        d.doc
    }
}

impl DynamicsField {
    pub fn new(dim: usize, drift: Drift, input: MatrixSpec, noise: MatrixSpec) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("state dimension must be positive".into()));
        }
        match &drift {
            Drift::Zero => {}
            Drift::Affine { matrix, offset } => {
                if matrix.len() != dim
                    || matrix.iter().any(|r| r.len() != dim)
                    || offset.len() != dim
                {
                    return Err(Error::Format(format!(
                        "affine drift must be {dim}x{dim} plus offset"
                    )));
                }
                if matrix
                    .iter()
                    .flatten()
                    .chain(offset)
                    .any(|v| !v.is_finite())
                {
                    return Err(Error::Format("affine drift has non-finite entries".into()));
                }
            }
            Drift::CubicSpringDamper { alpha, beta } => {
                if dim != 2 {
                    return Err(Error::Format(
                        "spring-damper drift is two-dimensional".into(),
                    ));
                }
                if !(alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::Format(
                        "spring-damper parameters must be finite".into(),
                    ));
                }
            }
            Drift::RadialBessel { ambient_dim } => {
                if dim != 1 || *ambient_dim < 1 {
                    return Err(Error::Format(
                        "radial drift is one-dimensional with ambient_dim >= 1".into(),
                    ));
                }
            }
        }
        let g = input.build(dim, "input")?;
        let s = noise.build(dim, "noise")?;
        let tensor = &s * s.transpose();
        let noise_is_identity = s.is_square() && s == DMatrix::identity(dim, dim);
        Ok(DynamicsField {
            doc: DynamicsDoc {
                dim,
                drift,
                input,
                noise,
            },
            input: g,
            noise: s,
            tensor,
            noise_is_identity,
        })
    }

    /// Standard Brownian motion with full actuation: `f = 0`, `G = sigma = I_n`.
    pub fn brownian(dim: usize) -> Self {
        DynamicsField::new(
            dim,
            Drift::Zero,
            MatrixSpec::identity(),
            MatrixSpec::identity(),
        )
        .expect("identity dynamics are valid")
    }

    /// Brownian prior with a constant input matrix.
    pub fn brownian_with_input(input_rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = input_rows.len();
        DynamicsField::new(
            dim,
            Drift::Zero,
            MatrixSpec::Rows(input_rows),
            MatrixSpec::identity(),
        )
    }

    /// `f = (0.01 - x2, 0)`, `G = sigma = I_2`.
    pub fn shear_drift() -> Self {
        DynamicsField::new(
            2,
            Drift::Affine {
                matrix: vec![vec![0.0, -1.0], vec![0.0, 0.0]],
                offset: vec![0.01, 0.0],
            },
            MatrixSpec::identity(),
            MatrixSpec::identity(),
        )
        .expect("valid")
    }

    /// Cubic spring-mass-damper actuated and perturbed through the velocity channel.
    pub fn spring_damper(alpha: f64, beta: f64) -> Result<Self> {
        let channel = MatrixSpec::Rows(vec![vec![0.0], vec![1.0]]);
        DynamicsField::new(
            2,
            Drift::CubicSpringDamper { alpha, beta },
            channel.clone(),
            channel,
        )
    }

    pub fn dim(&self) -> usize {
        self.doc.dim
    }

    pub fn drift_kind(&self) -> &Drift {
        &self.doc.drift
    }

    pub fn input_dim(&self) -> usize {
        self.input.ncols()
    }

    pub fn noise_dim(&self) -> usize {
        self.noise.ncols()
    }

    pub fn is_drift_free(&self) -> bool {
        matches!(self.doc.drift, Drift::Zero)
    }

    pub fn noise_is_identity(&self) -> bool {
        self.noise_is_identity
    }

    /// Writes `f(t, x)` into `out`.
    #[inline]
    pub fn drift_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        match &self.doc.drift {
            Drift::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Drift::Affine { matrix, offset } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = offset[i] + matrix[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            Drift::CubicSpringDamper { alpha, beta } => {
                out[0] = x[1];
                out[1] = -alpha * x[0] * x[0] * x[0] - beta * x[1];
            }
            Drift::RadialBessel { ambient_dim } => {
                out[0] = (*ambient_dim as f64 - 1.0) / (2.0 * x[0]);
            }
        }
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.drift_into(t, x, &mut out);
        out
    }

    pub fn input_matrix(&self, _t: f64, _x: &[f64]) -> &DMatrix<f64> {
        &self.input
    }

    pub fn noise_matrix(&self, _t: f64, _x: &[f64]) -> &DMatrix<f64> {
        &self.noise
    }

    /// `Sigma = sigma sigma^T` (cached; the noise matrix is constant).
    pub fn diffusion_tensor(&self, _t: f64, _x: &[f64]) -> &DMatrix<f64> {
        &self.tensor
    }

    /// Adds `sigma * xi * scale` to `out`, where `xi` has `noise_dim` entries.
    #[inline]
    pub fn add_noise(&self, xi: &[f64], scale: f64, out: &mut [f64]) {
        if self.noise_is_identity {
            for (o, z) in out.iter_mut().zip(xi) {
                *o += scale * z;
            }
        } else {
            let p = self.noise.ncols();
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += self.noise[(i, k)] * xi[k];
                }
                *o += scale * acc;
            }
        }
    }
}

/// `Sigma(t, x) = sigma(t, x) sigma(t, x)^T`, computed fresh from the noise field.
pub fn sigma_to_sigma_tensor(dynamics: &DynamicsField, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
    if x.len() != dynamics.dim() {
        return Err(Error::DimensionMismatch {
            expected: dynamics.dim(),
            actual: x.len(),
        });
    }
    let s = dynamics.noise_matrix(t, x);
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "noise matrix",
            t,
        });
    }
    Ok(s * s.transpose())
}
