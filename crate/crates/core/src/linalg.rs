use nalgebra::{DMatrix, SymmetricEigen};

/// Square-root factor `L` with `L L^T = cov` for a symmetric PSD matrix.
///
/// Works for rank-deficient input, unlike Cholesky. Eigenvalues below zero
/// (round-off) are clipped.
pub fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(cov.clone());
    let mut l = eig.eigenvectors;
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    l
}

pub fn min_eigenvalue(cov: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(cov.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol
}

/// Ratio of extreme absolute eigenvalues; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    let max = abs.iter().copied().fold(0.0, f64::max);
    let min = abs.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
