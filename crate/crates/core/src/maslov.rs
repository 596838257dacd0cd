//! Maslov indices of ray branches: the free-case eigenvalue count, the
//! caustic-crossing count along a trajectory, and the commuting-block
//! determinant identity used to relate them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ray_map::{CausticCrossing, RayMap};

/// `|1 + t lambda|` below this is treated as lying on the caustic.
pub const EIGEN_CAUSTIC_MARGIN: f64 = 1e-10;
/// Off-diagonal convergence tolerance of the Jacobi sweeps.
pub const JACOBI_TOL: f64 = 1e-12;
/// Admissible `max |AB - BA|` for the block determinant identity.
pub const COMMUTATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaslovMethod {
    FreeEigenvalue,
    CrossingCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaslovReport {
    pub index: u32,
    pub crossings: Vec<CausticCrossing>,
    pub method: MaslovMethod,
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, in
/// descending order.
pub fn symmetric_eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if !matrix.is_square() {
        return Err(Error::InvalidInput("eigenvalues need a square matrix".into()));
    }
    let scale = matrix.amax().max(f64::MIN_POSITIVE);
    if (matrix - matrix.transpose()).amax() > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidInput(
            "Jacobi eigensolver needs a symmetric matrix".into(),
        ));
    }
    let mut a = matrix.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

/// Number of negative eigenvalues of `I + t * hess S_in(y_j)`.
pub fn maslov_free(sin_hessian: &DMatrix<f64>, t: f64) -> Result<u32> {
    let eig = symmetric_eigenvalues(sin_hessian)?;
    let mut count = 0;
    for lambda in eig {
        let v = 1.0 + t * lambda;
        if v.abs() < EIGEN_CAUSTIC_MARGIN {
            return Err(Error::OnCaustic { margin: v.abs() });
        }
        if v < 0.0 {
            count += 1;
        }
    }
    Ok(count)
}

/// Maslov index of the ray launched at `y`, counted as the number of
/// transversal zeros of `s -> det DF_s(y)` on `(0, t)`.
///
/// Every crossing counts `+1`: for `H = |xi|^2 / 2 + V` the path of tangent
/// planes always crosses the Maslov cycle in the positive direction.
pub fn maslov_crossings(rays: &RayMap<'_>, y: &[f64], t: f64) -> Result<MaslovReport> {
    let end = rays.ray_map(y, t)?;
    if end.jacobian <= rays.caustic_threshold {
        return Err(Error::OnCaustic { margin: end.jacobian });
    }
    let crossings = rays.caustic_times(y, t, rays.dt)?;
    if let Some(bad) = crossings.iter().find(|c| !c.transversal) {
        return Err(Error::NonTransversalCrossing { s: bad.s });
    }
    Ok(MaslovReport {
        index: crossings.len() as u32,
        crossings,
        method: MaslovMethod::CrossingCount,
    })
}

/// `det(DA - CB)`, which equals the determinant of the block matrix
/// `[[A, B], [C, D]]` whenever `A` and `B` commute.
pub fn det_block_commuting(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    for m in [a, b, c, d] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::InvalidInput("blocks must all be N x N".into()));
        }
    }
    let defect = (a * b - b * a).amax();
    if !(defect <= COMMUTATOR_TOL) {
        return Err(Error::NotCommuting { defect });
    }
    Ok((d * a - c * b).determinant())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::PotentialModel;
    use crate::ray_map::InitialPhase;

    #[test]
    fn jacobi_matches_closed_form_2x2() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigenvalues(&m).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_agrees_with_nalgebra() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, -1.0, 0.5, -1.0, 0.3, 2.0, 0.5, 2.0, -3.0]);
        let mut reference: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        let e = symmetric_eigenvalues(&m).unwrap();
        for (a, b) in e.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-11, "{e:?} vs {reference:?}");
        }
    }

    #[test]
    fn free_index_examples() {
        let h = DMatrix::from_element(1, 1, -1.0);
        assert_eq!(maslov_free(&h, 2.0).unwrap(), 1);
        assert_eq!(maslov_free(&h, 0.0).unwrap(), 0);
        let h = DMatrix::from_element(1, 1, 0.3198);
        assert_eq!(maslov_free(&h, 2.0).unwrap(), 0);
        let h = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0]);
        assert_eq!(maslov_free(&h, 2.0).unwrap(), 2);
        assert_eq!(maslov_free(&h, 0.5).unwrap(), 1);
    }

    #[test]
    fn free_index_on_caustic() {
        let h = DMatrix::from_element(1, 1, -1.0);
        assert!(matches!(maslov_free(&h, 1.0), Err(Error::OnCaustic { .. })));
    }

    #[test]
    fn crossing_examples() {
        let v = PotentialModel::zero(1);
        let s = InitialPhase::isotropic_quadratic(1, -1.0);
        let rays = RayMap::new(&v, &s).unwrap();
        let r = maslov_crossings(&rays, &[0.7], 2.0).unwrap();
        assert_eq!(r.index, 1);
        assert!((r.crossings[0].s - 1.0).abs() < 1e-9);
        assert_eq!(maslov_crossings(&rays, &[0.7], 0.5).unwrap().index, 0);
        assert!(matches!(
            maslov_crossings(&rays, &[0.7], 1.0),
            Err(Error::OnCaustic { .. })
        ));

        let v = PotentialModel::harmonic(1, 1.0);
        let s = InitialPhase::isotropic_quadratic(1, 0.0);
        let rays = RayMap::new(&v, &s).unwrap();
        let r = maslov_crossings(&rays, &[1.0], 2.0).unwrap();
        assert_eq!(r.index, 1);
        assert!((r.crossings[0].s - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn degenerate_touch_invalidates_count() {
        let v = PotentialModel::zero(2);
        let s = InitialPhase::isotropic_quadratic(2, -1.0);
        let rays = RayMap::new(&v, &s).unwrap();
        assert!(matches!(
            maslov_crossings(&rays, &[0.3, 0.2], 2.0),
            Err(Error::NonTransversalCrossing { .. })
        ));
    }

    #[test]
    fn block_determinant_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let z = DMatrix::<f64>::zeros(2, 2);
        let c = DMatrix::from_row_slice(2, 2, &[3.0, -7.0, 2.5, 1.0]);
        assert!((det_block_commuting(&i2, &z, &c, &i2).unwrap() - 1.0).abs() < 1e-15);

        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let d = &i2 * 2.0;
        assert!((det_block_commuting(&i2, &i2, &swap, &d).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn block_determinant_rejects_non_commuting() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let c = DMatrix::identity(2, 2);
        assert!(matches!(
            det_block_commuting(&a, &b, &c, &c),
            Err(Error::NotCommuting { .. })
        ));
    }
}
