use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadFlags;
use crate::random_fields::FieldModel;

/// Outcome of one estimation. Matrices are stored as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub model: FieldModel,
    pub fisher: Vec<Vec<f64>>,
    /// `A⁻¹`, the covariance as stated for a unit exponent prefactor.
    pub fisher_inverse: Vec<Vec<f64>>,
    /// `A⁻¹` for Wiener, `σ²/(αβ)·A⁻¹` for the Ornstein–Uhlenbeck models.
    pub covariance: Vec<Vec<f64>>,
    pub zeta: Vec<f64>,
    pub m_hat: Vec<f64>,
    pub condition_number: f64,
    pub diagnostics: QuadFlags,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> DMatrix<f64> {
    let p = r.len();
    DMatrix::from_fn(p, p, |i, j| r[i][j])
}

impl EstimationResult {
    pub fn fisher_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.fisher)
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.covariance)
    }

    /// Log Radon–Nikodym exponent at `m`:
    /// `−(αβ/2σ²)(mᵀAm − 2ζᵀm)`, with a prefactor of one half for Wiener.
    pub fn log_rn_at(&self, m: &[f64]) -> Result<f64> {
        if m.len() != self.m_hat.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.m_hat.len(),
                m.len()
            )));
        }
        let a = self.fisher_matrix();
        let m = DVector::from_column_slice(m);
        let zeta = DVector::from_column_slice(&self.zeta);
        let quad = m.dot(&(&a * &m)) - 2.0 * zeta.dot(&m);
        Ok(-0.5 * quad / self.model.scale())
    }
}

/// Solves `A m̂ = ζ` by Cholesky factorisation.
///
/// Fails with [`Error::SingularMatrix`] when `A` is not numerically positive
/// definite, which happens when the regressors are linearly dependent on
/// the domain.
pub fn mle(a: &DMatrix<f64>, zeta: &DVector<f64>, model: &FieldModel) -> Result<EstimationResult> {
    model.validate()?;
    let p = a.nrows();
    if p == 0 || a.ncols() != p || zeta.len() != p {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: A is {}x{}, zeta has {} entries",
            a.nrows(),
            a.ncols(),
            zeta.len()
        )));
    }
    if !a.iter().chain(zeta.iter()).all(|x| x.is_finite()) {
        return Err(Error::InvalidArgument("A and zeta must be finite".into()));
    }
    let asym = (a - a.transpose()).amax();
    if asym > 1e-8 * a.amax() {
        return Err(Error::InvalidArgument(format!("A is not symmetric (defect {asym:e})")));
    }
    let chol = a.clone().cholesky().ok_or(Error::SingularMatrix)?;
    let l = chol.l_dirty();
    for i in 0..p {
        if l[(i, i)] * l[(i, i)] <= 1e-10 * a[(i, i)] {
            return Err(Error::SingularMatrix);
        }
    }
    let m_hat = chol.solve(zeta);
    let inverse = chol.inverse();
    let eig = a.clone().symmetric_eigenvalues();
    let condition_number = eig.amax() / eig.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    Ok(EstimationResult {
        model: *model,
        fisher: rows(a),
        covariance: rows(&(&inverse * model.scale())),
        fisher_inverse: rows(&inverse),
        zeta: zeta.iter().copied().collect(),
        m_hat: m_hat.iter().copied().collect(),
        condition_number,
        diagnostics: QuadFlags::default(),
    })
}
