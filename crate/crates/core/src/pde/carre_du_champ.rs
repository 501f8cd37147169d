//! Polynomial check of `Gamma(phi, psi) = 1/2 <Sigma grad phi, grad psi>`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Multivariate polynomial in `n` variables, keyed by exponent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Polynomial::zero(n);
        p.add_term(vec![0; n], c);
        p
    }

    /// The coordinate `x_i`.
    pub fn variable(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Polynomial::zero(n);
        p.add_term(e, 1.0);
        p
    }

    /// `c + <b, x> + x^T Q x` (`Q` need not be symmetric).
    pub fn quadratic(c: f64, b: &[f64], q: &DMatrix<f64>) -> Result<Self> {
        let n = b.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: q.nrows(),
            });
        }
        let mut p = Polynomial::constant(n, c);
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 1;
            p.add_term(e, b[i]);
            for j in 0..n {
                let mut e = vec![0; n];
                e[i] += 1;
                e[j] += 1;
                p.add_term(e, q[(i, j)]);
            }
        }
        Ok(p)
    }

    pub fn add_term(&mut self, exponents: Vec<u32>, coeff: f64) {
        assert_eq!(exponents.len(), self.n);
        if coeff == 0.0 {
            return;
        }
        let e = self.terms.entry(exponents).or_insert(0.0);
        *e += coeff;
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Polynomial::zero(self.n);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), s * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Polynomial::zero(self.n);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                let e = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Polynomial::zero(self.n);
        for (e, &c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                out.add_term(d, c * e[i] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

/// `L phi = <A x + c, grad phi> + 1/2 <Sigma, Hess phi>` for constant `Sigma`.
pub fn generator_polynomial(
    sigma: &DMatrix<f64>,
    drift_matrix: &DMatrix<f64>,
    drift_offset: &[f64],
    phi: &Polynomial,
) -> Polynomial {
    let n = phi.n;
    let mut out = Polynomial::zero(n);
    for i in 0..n {
        let mut f_i = Polynomial::constant(n, drift_offset[i]);
        for j in 0..n {
            f_i = f_i.add(&Polynomial::variable(n, j).scale(drift_matrix[(i, j)]));
        }
        let d_i = phi.derivative(i);
        out = out.add(&f_i.mul(&d_i));
        for j in 0..n {
            out = out.add(&d_i.derivative(j).scale(0.5 * sigma[(i, j)]));
        }
    }
    out
}

/// Returns `(1/2 (L[phi psi] - phi L[psi] - psi L[phi]), 1/2 <Sigma grad phi, grad psi>)` at `x`.
pub fn carre_du_champ_check(
    sigma: &DMatrix<f64>,
    drift_matrix: &DMatrix<f64>,
    drift_offset: &[f64],
    phi: &Polynomial,
    psi: &Polynomial,
    x: &[f64],
) -> Result<(f64, f64)> {
    let n = x.len();
    for (m, what) in [(sigma, "Sigma"), (drift_matrix, "drift matrix")] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::InvalidArgument(format!("{what} is not {n}x{n}")));
        }
    }
    if drift_offset.len() != n || phi.n != n || psi.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: drift_offset.len(),
        });
    }
    if phi.degree() > 2 || psi.degree() > 2 {
        return Err(Error::InvalidArgument(
            "carre du champ check takes quadratic polynomials".into(),
        ));
    }
    let l = |p: &Polynomial| generator_polynomial(sigma, drift_matrix, drift_offset, p);
    let lhs = l(&phi.mul(psi))
        .add(&phi.mul(&l(psi)).scale(-1.0))
        .add(&psi.mul(&l(phi)).scale(-1.0))
        .scale(0.5);
    let mut rhs = 0.0;
    for i in 0..n {
        for j in 0..n {
            rhs += 0.5 * sigma[(i, j)] * phi.derivative(i).eval(x) * psi.derivative(j).eval(x);
        }
    }
    Ok((lhs.eval(x), rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_with_itself() {
        let x1 = Polynomial::variable(2, 0);
        let (l, r) = carre_du_champ_check(
            &DMatrix::identity(2, 2),
            &DMatrix::zeros(2, 2),
            &[0.0, 0.0],
            &x1,
            &x1,
            &[0.3, -0.2],
        )
        .unwrap();
        assert!((l - 0.5).abs() < 1e-15 && (r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_squares_under_diagonal_sigma() {
        let a = Polynomial::variable(2, 0).mul(&Polynomial::variable(2, 0));
        let b = Polynomial::variable(2, 1).mul(&Polynomial::variable(2, 1));
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let drift = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.1]);
        let (l, r) =
            carre_du_champ_check(&sigma, &drift, &[1.0, 2.0], &a, &b, &[0.7, -1.3]).unwrap();
        assert!(l.abs() < 1e-14 && r.abs() < 1e-14);
    }

    #[test]
    fn rejects_cubics() {
        let x = Polynomial::variable(1, 0);
        let c = x.mul(&x).mul(&x);
        assert!(carre_du_champ_check(
            &DMatrix::identity(1, 1),
            &DMatrix::zeros(1, 1),
            &[0.0],
            &c,
            &x,
            &[0.0]
        )
        .is_err());
    }

    #[test]
    fn polynomial_calculus() {
        let x = Polynomial::variable(2, 0);
        let y = Polynomial::variable(2, 1);
        let p = x.mul(&x).mul(&y).add(&Polynomial::constant(2, 3.0));
        assert_eq!(p.degree(), 3);
        assert_eq!(p.eval(&[2.0, 5.0]), 23.0);
        assert_eq!(p.derivative(0).eval(&[2.0, 5.0]), 20.0);
        assert_eq!(p.derivative(1).derivative(1), Polynomial::zero(2));
    }
}
