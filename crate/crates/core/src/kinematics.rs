//! Forward kinematics and Jacobians mapping joint configurations to
//! end-effector positions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// End-effector map of a plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kinematics {
    /// `x = q[..dim]`; the joints are Cartesian coordinates.
    Identity { dim: usize },
    /// Planar two-link chain rooted at the origin, angles in [rad].
    TwoLinkPlanar {
        /// Upper link length [m].
        l1: f64,
        /// Lower link length [m].
        l2: f64,
    },
}

impl Kinematics {
    /// Output dimension of the end-effector position.
    pub fn dim(&self) -> usize {
        match *self {
            Kinematics::Identity { dim } => dim,
            Kinematics::TwoLinkPlanar { .. } => 2,
        }
    }

    /// Minimum number of joints the map reads.
    pub fn arity(&self) -> usize {
        match *self {
            Kinematics::Identity { dim } => dim,
            Kinematics::TwoLinkPlanar { .. } => 2,
        }
    }

    pub fn forward(&self, q: &DVector<f64>) -> DVector<f64> {
        debug_assert!(q.len() >= self.arity());
        match *self {
            Kinematics::Identity { dim } => q.rows(0, dim).into_owned(),
            Kinematics::TwoLinkPlanar { l1, l2 } => {
                let (s1, c1) = q[0].sin_cos();
                let (s12, c12) = (q[0] + q[1]).sin_cos();
                DVector::from_vec(vec![l1 * c1 + l2 * c12, l1 * s1 + l2 * s12])
            }
        }
    }

    /// `∂forward/∂q`, shape `dim × q.len()`.
    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = q.len();
        let mut j = DMatrix::zeros(self.dim(), n);
        match *self {
            Kinematics::Identity { dim } => {
                for i in 0..dim {
                    j[(i, i)] = 1.0;
                }
            }
            Kinematics::TwoLinkPlanar { l1, l2 } => {
                let (s1, c1) = q[0].sin_cos();
                let (s12, c12) = (q[0] + q[1]).sin_cos();
                j[(0, 0)] = -l1 * s1 - l2 * s12;
                j[(0, 1)] = -l2 * s12;
                j[(1, 0)] = l1 * c1 + l2 * c12;
                j[(1, 1)] = l2 * c12;
            }
        }
        j
    }

    /// `∂J/∂q_k` for every joint `k`.
    pub fn jacobian_derivatives(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let n = q.len();
        let mut out = vec![DMatrix::zeros(self.dim(), n); n];
        if let Kinematics::TwoLinkPlanar { l1, l2 } = *self {
            let (s1, c1) = q[0].sin_cos();
            let (s12, c12) = (q[0] + q[1]).sin_cos();
            let d1 = &mut out[0];
            d1[(0, 0)] = -l1 * c1 - l2 * c12;
            d1[(0, 1)] = -l2 * c12;
            d1[(1, 0)] = -l1 * s1 - l2 * s12;
            d1[(1, 1)] = -l2 * s12;
            let d2 = &mut out[1];
            d2[(0, 0)] = -l2 * c12;
            d2[(0, 1)] = -l2 * c12;
            d2[(1, 0)] = -l2 * s12;
            d2[(1, 1)] = -l2 * s12;
        }
        out
    }

    /// Configuration reaching `x`, found by damped Gauss-Newton from
    /// `q_hint`. Joints beyond the map's arity keep their hint values.
    pub fn inverse(&self, x: &DVector<f64>, q_hint: &DVector<f64>) -> Option<DVector<f64>> {
        let mut q = q_hint.clone();
        if let Kinematics::Identity { dim } = *self {
            q.rows_mut(0, dim).copy_from(x);
            return Some(q);
        }
        let lambda = 1e-6;
        for _ in 0..200 {
            let r = x - self.forward(&q);
            if r.norm() < 1e-12 {
                return Some(q);
            }
            let j = self.jacobian(&q);
            let jjt = &j * j.transpose() + DMatrix::identity(self.dim(), self.dim()) * lambda;
            let step = j.transpose() * jjt.lu().solve(&r)?;
            q += step;
        }
        (self.forward(&q) - x).norm().lt(&1e-9).then_some(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    const ARM: Kinematics = Kinematics::TwoLinkPlanar { l1: 0.3, l2: 0.3 };

    fn fd_jacobian(kin: &Kinematics, q: &DVector<f64>) -> DMatrix<f64> {
        let eps = 1e-6;
        let mut j = DMatrix::zeros(kin.dim(), q.len());
        for k in 0..q.len() {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += eps;
            qm[k] -= eps;
            let col = (kin.forward(&qp) - kin.forward(&qm)) / (2.0 * eps);
            j.set_column(k, &col);
        }
        j
    }

    #[test]
    fn identity_forward() {
        let kin = Kinematics::Identity { dim: 2 };
        let x = kin.forward(&DVector::from_vec(vec![0.3, 0.0]));
        assert_eq!(x.as_slice(), &[0.3, 0.0]);
    }

    #[test]
    fn two_link_extended_and_rotated() {
        let x = ARM.forward(&DVector::from_vec(vec![0.0, 0.0]));
        assert_relative_eq!(x[0], 0.6);
        assert_relative_eq!(x[1], 0.0);
        let x = ARM.forward(&DVector::from_vec(vec![FRAC_PI_2, 0.0]));
        assert!(x[0].abs() < 1e-12);
        assert!((x[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn jacobian_at_zero() {
        let q = DVector::from_vec(vec![0.0, 0.0]);
        let j = ARM.jacobian(&q);
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.6, 0.3]);
        assert!((&j - &expected).amax() < 1e-12);
        assert!((fd_jacobian(&ARM, &q) - expected).amax() < 1e-6);
    }

    #[test]
    fn identity_jacobian_is_selector() {
        let kin = Kinematics::Identity { dim: 2 };
        let j = kin.jacobian(&DVector::from_vec(vec![0.1, -0.4, 2.0]));
        assert_eq!(j, DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn jacobian_derivatives_match_fd() {
        let q = DVector::from_vec(vec![0.4, 1.1]);
        let eps = 1e-6;
        let d = ARM.jacobian_derivatives(&q);
        for k in 0..2 {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += eps;
            qm[k] -= eps;
            let fd = (ARM.jacobian(&qp) - ARM.jacobian(&qm)) / (2.0 * eps);
            assert!((&fd - &d[k]).amax() < 1e-8);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let q = DVector::from_vec(vec![0.3, 1.2]);
        let x = ARM.forward(&q);
        let q2 = ARM.inverse(&x, &DVector::from_vec(vec![0.1, 1.0])).unwrap();
        assert!((ARM.forward(&q2) - x).norm() < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn jacobian_matches_finite_difference(q0 in -3.0..3.0f64, q1 in -3.0..3.0f64,
                                                  l1 in 0.1..1.0f64, l2 in 0.1..1.0f64) {
                let kin = Kinematics::TwoLinkPlanar { l1, l2 };
                let q = DVector::from_vec(vec![q0, q1]);
                let j = kin.jacobian(&q);
                let fd = fd_jacobian(&kin, &q);
                let rel = (&j - &fd).amax() / j.amax().max(1e-3);
                prop_assert!(rel < 1e-6, "relative error {rel}");
            }

            #[test]
            fn base_rotation_equivariance(q0 in -3.0..3.0f64, q1 in -3.0..3.0f64, delta in -3.0..3.0f64) {
                let q = DVector::from_vec(vec![q0, q1]);
                let x = ARM.forward(&q);
                let (s, c) = delta.sin_cos();
                let rotated = DVector::from_vec(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]]);
                let shifted = ARM.forward(&DVector::from_vec(vec![q0 + delta, q1]));
                prop_assert!((shifted - rotated).amax() < 1e-10);
            }
        }
    }
}
