//! Spectra of reversible chains through the symmetrization D^{1/2} P D^{-1/2}.

use serde::Serialize;

use crate::chain::{
    classify, detailed_balance_residual, same_space, ProbabilityVector, TransitionMatrix,
    STRUCTURAL_TOL,
};
use crate::dense::identity;
use crate::error::{MdkError, Result};

pub const JACOBI_MAX_SWEEPS: usize = 64;
pub const JACOBI_OFF_TOL: f64 = 1e-12;
const UNIT_EIGEN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralSummary {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub gamma_star: f64,
    pub lambda_star: f64,
    pub reversible_certified: bool,
}

fn off_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    Ok(jacobi(a, n, false)?.into_iter().map(|(v, _)| v).collect())
}

/// Eigenpairs of a symmetric matrix, descending by eigenvalue.
pub(crate) fn symmetric_eigenpairs(a: &[f64], n: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    jacobi(a, n, true)
}

fn jacobi(a: &[f64], n: usize, vectors: bool) -> Result<Vec<(f64, Vec<f64>)>> {
    if a.len() != n * n {
        return Err(MdkError::Dimension(format!("expected {} entries", n * n)));
    }
    let mut a = a.to_vec();
    // columns of v are the eigenvectors
    let mut v = if vectors { identity(n) } else { Vec::new() };
    let mut sweeps = 0;
    while off_norm(&a, n) >= JACOBI_OFF_TOL {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(MdkError::Numerical(format!(
                "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps (off-norm {:e})",
                off_norm(&a, n)
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                if vectors {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| {
            let vec = if vectors {
                (0..n).map(|k| v[k * n + i]).collect()
            } else {
                Vec::new()
            };
            (a[i * n + i], vec)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    Ok(pairs)
}

/// Full spectrum and absolute spectral gap of a pi-reversible chain.
pub fn spectrum_reversible(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
) -> Result<SpectralSummary> {
    same_space(p.space(), pi.space(), "spectrum")?;
    pi.require_strictly_positive()?;
    let residual = detailed_balance_residual(p, pi);
    if residual > STRUCTURAL_TOL {
        return Err(MdkError::Reversibility(format!(
            "detailed-balance residual {residual:e}"
        )));
    }
    let n = p.n();
    let root: Vec<f64> = pi.weights().iter().map(|w| w.sqrt()).collect();
    let mut s = vec![0.0; n * n];
    for x in 0..n {
        for y in x..n {
            let v = root[x] * p.get(x, y) / root[y];
            let w = root[y] * p.get(y, x) / root[x];
            let sym = 0.5 * (v + w);
            s[x * n + y] = sym;
            s[y * n + x] = sym;
        }
    }
    let eigenvalues = symmetric_eigenvalues(&s, n)?;
    let units = eigenvalues
        .iter()
        .filter(|&&l| (l - 1.0).abs() <= UNIT_EIGEN_TOL)
        .count();
    if units == 0 {
        return Err(MdkError::Numerical(format!(
            "no eigenvalue near 1 (top {})",
            eigenvalues[0]
        )));
    }
    if units > 1 && classify(p, pi, STRUCTURAL_TOL)?.irreducible {
        return Err(MdkError::Numerical(format!(
            "{units} eigenvalues near 1 for an irreducible chain"
        )));
    }
    // drop the top eigenvalue once; everything else counts toward lambda*
    let lambda_star = eigenvalues[1..]
        .iter()
        .map(|l| l.abs())
        .fold(0.0, f64::max)
        .min(1.0);
    Ok(SpectralSummary {
        eigenvalues,
        gamma_star: 1.0 - lambda_star,
        lambda_star,
        reversible_certified: true,
    })
}
