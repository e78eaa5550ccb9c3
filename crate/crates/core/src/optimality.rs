//! First-order optimality checks, written directly from the subdifferential
//! of each penalty. The solvers never call into this module, so it can be
//! used to certify their output.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::l2_norm;
use crate::regularizers::{RegularizerKind, RegularizerSpec};
use crate::solvers::LambdaSide;

/// Distance from `q` to `∂R(x)`.
///
/// The distance is measured in the ∞-norm coordinatewise. For a group whose
/// block of `x` is zero the set `(1−μ)·B∞ + μ·B₂` is not a box, and the
/// Euclidean distance to it (an upper bound on the ∞-norm distance) is used.
pub fn subgradient_distance(spec: &RegularizerSpec, x: &[f64], q: &[f64]) -> Result<f64> {
    if x.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "subgradient",
            expected: x.len(),
            found: q.len(),
        });
    }
    spec.validate(x.len())?;
    let weighted_l1 = |xi: f64, qi: f64, w: f64| -> f64 {
        if xi > 0.0 {
            (qi - w).abs()
        } else if xi < 0.0 {
            (qi + w).abs()
        } else {
            (qi.abs() - w).max(0.0)
        }
    };
    let dist = match spec.kind {
        RegularizerKind::L1 => x
            .iter()
            .zip(q)
            .map(|(&xi, &qi)| weighted_l1(xi, qi, 1.0))
            .fold(0.0, f64::max),
        RegularizerKind::L2Sq => x
            .iter()
            .zip(q)
            .map(|(&xi, &qi)| (qi - 2.0 * xi).abs())
            .fold(0.0, f64::max),
        RegularizerKind::ElasticNet => x
            .iter()
            .zip(q)
            .map(|(&xi, &qi)| weighted_l1(xi, qi - 2.0 * (1.0 - spec.mu) * xi, spec.mu))
            .fold(0.0, f64::max),
        _ => {
            let (groups, w1, w2) = spec.block_view(x.len()).expect("validated");
            let mut worst = 0.0_f64;
            for g in &groups {
                let xg: Vec<f64> = g.iter().map(|&i| x[i]).collect();
                let qg: Vec<f64> = g.iter().map(|&i| q[i]).collect();
                let nrm = l2_norm(&xg);
                let d = if nrm > 0.0 {
                    xg.iter()
                        .zip(&qg)
                        .map(|(&xi, &qi)| weighted_l1(xi, qi - w2 * xi / nrm, w1))
                        .fold(0.0, f64::max)
                } else {
                    let excess: f64 = qg
                        .iter()
                        .map(|&qi| (qi.abs() - w1).max(0.0).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    (excess - w2).max(0.0)
                };
                worst = worst.max(d);
            }
            worst
        }
    };
    Ok(dist)
}

/// Optimality residual of `x` for the Lagrangian program
/// `w_loss·‖y − Ax‖² + w_pen·R(x)`, in units of the penalty weight.
///
/// The weights come from `lambda` and `side` exactly as in the solver.
pub fn lagrangian_kkt_residual(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    spec: &RegularizerSpec,
    lambda: f64,
    side: LambdaSide,
    x: &[f64],
) -> Result<f64> {
    if a.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            what: "x",
            expected: a.ncols(),
            found: x.len(),
        });
    }
    let (w_loss, w_pen) = match side {
        LambdaSide::OnLoss => (lambda, 1.0),
        LambdaSide::OnPenalty => (1.0, lambda),
    };
    let xv = DVector::from_column_slice(x);
    let residual = y - a * &xv;
    // −∇loss = 2·w·Aᵀ(y − Ax)
    let q = a.tr_mul(&residual) * (2.0 * w_loss / w_pen);
    subgradient_distance(spec, x, q.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::Partition;

    #[test]
    fn l1_distance() {
        let s = RegularizerSpec::l1();
        assert_eq!(subgradient_distance(&s, &[1.0, 0.0, -2.0], &[1.0, 0.5, -1.0]).unwrap(), 0.0);
        assert!((subgradient_distance(&s, &[1.0, 0.0], &[0.5, 1.25]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clot_distance_at_nonzero_point() {
        let s = RegularizerSpec::clot(0.5);
        let x = [3.0, 4.0, 0.0];
        // gradient of 0.5‖x‖₁ + 0.5‖x‖₂ at x, plus an admissible value at the zero slot
        let q = [0.5 + 0.5 * 0.6, 0.5 + 0.5 * 0.8, -0.3];
        assert!(subgradient_distance(&s, &x, &q).unwrap() < 1e-15);
        let bad = [q[0], q[1], 0.7];
        assert!((subgradient_distance(&s, &x, &bad).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_block_uses_euclidean_distance() {
        let p = Partition::contiguous(&[2, 1]).unwrap();
        let s = RegularizerSpec::sparse_group_lasso(0.5, p);
        // ‖soft((1,1), 0.5)‖₂ = √0.5 ≈ 0.7071 > 0.5
        let d = subgradient_distance(&s, &[0.0, 0.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((d - (0.5f64.sqrt() - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn elastic_net_includes_quadratic_term() {
        let s = RegularizerSpec::elastic_net(0.5);
        // ∂ at x=1: 0.5 + 2·0.5·1 = 1.5
        assert!(subgradient_distance(&s, &[1.0], &[1.5]).unwrap() < 1e-15);
    }
}
