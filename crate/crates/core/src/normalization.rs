//! Householder normalization of the five observations.
//!
//! Two reflections per camera move the first bearing onto the `z` axis and the
//! second into the `yz` plane, so that `x1 = y1 = x2 = 0` in both frames.

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::geometry::{
    householder_from_vector, sign, Correspondence, Mat3, RelativePose, Rotation3,
    UnitTranslation, Vec3,
};
use crate::tolerance::Tolerances;

/// Bearings of the five points in one camera, one per column.
pub type ObservationMatrix = SMatrix<f64, 3, 5>;

/// Builds the two observation matrices from unit-normalized correspondences.
pub fn observation_matrices(corrs: &[Correspondence; 5]) -> (ObservationMatrix, ObservationMatrix) {
    let mut a1 = ObservationMatrix::zeros();
    let mut a2 = ObservationMatrix::zeros();
    for (i, c) in corrs.iter().enumerate() {
        a1.set_column(i, &c.q1);
        a2.set_column(i, &c.q2);
    }
    (a1, a2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedProblem {
    /// `U1 * A1`
    pub a1: ObservationMatrix,
    /// `U2 * A2`
    pub a2: ObservationMatrix,
    /// `H12 * H11`
    pub u1: Mat3,
    /// `H22 * H21`
    pub u2: Mat3,
}

impl NormalizedProblem {
    pub fn bearing1(&self, i: usize) -> Vec3 {
        self.a1.column(i).into_owned()
    }

    pub fn bearing2(&self, i: usize) -> Vec3 {
        self.a2.column(i).into_owned()
    }

    /// Sign of the first bearing along `z` in each frame. The first point lies
    /// on the `z` axis of both normalized frames, but on its negative half
    /// whenever the reflection flipped it.
    pub fn first_point_orientation(&self) -> (f64, f64) {
        (sign(self.a1[(2, 0)]), sign(self.a2[(2, 0)]))
    }
}

/// Reflections `(H_j1, H_j2)` for one camera and the transformed matrix.
fn normalize_camera(a: &ObservationMatrix, tol: &Tolerances) -> Result<(Mat3, ObservationMatrix)> {
    for (column, col) in a.column_iter().enumerate() {
        let norm = col.norm();
        if !(norm >= tol.min_column_norm) {
            return Err(Error::DegenerateObservation { column, norm });
        }
    }
    let q = a.column(0);
    let h1 = Vec3::new(q.x, q.y, q.z + sign(q.z) * q.norm());
    let hh1 = reflector_or_identity(&h1, tol)?;
    let mut a_prime = hh1 * a;
    // entries the reflections zero in exact arithmetic are set exactly
    a_prime[(0, 0)] = 0.0;
    a_prime[(1, 0)] = 0.0;
    a_prime[(2, 0)] = -sign(q.z) * q.norm();

    let q = a_prime.column(1);
    let r = q.x.hypot(q.y);
    let h2 = Vec3::new(q.x, q.y + sign(q.y) * r, 0.0);
    let hh2 = reflector_or_identity(&h2, tol)?;
    let mut a_pp = hh2 * a_prime;
    a_pp[(0, 1)] = 0.0;
    a_pp[(1, 1)] = -sign(q.y) * r;

    Ok((hh2 * hh1, a_pp))
}

fn reflector_or_identity(h: &Vec3, tol: &Tolerances) -> Result<Mat3> {
    if h.norm() < tol.zero_reflector {
        Ok(Mat3::identity())
    } else {
        householder_from_vector(h)
    }
}

pub fn normalize_observations(
    a1: &ObservationMatrix,
    a2: &ObservationMatrix,
    tol: &Tolerances,
) -> Result<NormalizedProblem> {
    let (u1, a1pp) = normalize_camera(a1, tol)?;
    let (u2, a2pp) = normalize_camera(a2, tol)?;
    Ok(NormalizedProblem {
        a1: a1pp,
        a2: a2pp,
        u1,
        u2,
    })
}

/// Maps a pose of the normalized problem back to the input frames:
/// `R = U2^T R'' U1`, `t = U2^T t''`.
pub fn denormalize_pose(p: &RelativePose, n: &NormalizedProblem) -> RelativePose {
    let r = n.u2.transpose() * p.rotation.matrix() * n.u1;
    let t = n.u2.transpose() * p.translation.vector();
    RelativePose::new(
        Rotation3::from_matrix_unchecked(r),
        UnitTranslation::new_unchecked(t),
    )
}

/// Inverse of [`denormalize_pose`].
pub fn normalize_pose(p: &RelativePose, n: &NormalizedProblem) -> RelativePose {
    let r = n.u2 * p.rotation.matrix() * n.u1.transpose();
    let t = n.u2 * p.translation.vector();
    RelativePose::new(
        Rotation3::from_matrix_unchecked(r),
        UnitTranslation::new_unchecked(t),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{epipolar_residual, essential_from_pose};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 0.1 {
                return v.normalize();
            }
        }
    }

    fn random_obs(rng: &mut impl Rng) -> ObservationMatrix {
        let mut a = ObservationMatrix::zeros();
        for i in 0..5 {
            a.set_column(i, &random_unit(rng));
        }
        a
    }

    fn assert_zero_pattern(a: &ObservationMatrix, tol: f64) {
        assert!(a[(0, 0)].abs() <= tol, "{a}");
        assert!(a[(1, 0)].abs() <= tol, "{a}");
        assert!(a[(0, 1)].abs() <= tol, "{a}");
    }

    #[test]
    fn already_aligned_input() {
        let (s, c) = (0.6, 0.8);
        let mut a = ObservationMatrix::zeros();
        a.set_column(0, &Vec3::z());
        a.set_column(1, &Vec3::new(0.0, s, c));
        for i in 2..5 {
            a.set_column(i, &Vec3::new(0.3, 0.4, 0.866).normalize());
        }
        let n = normalize_observations(&a, &a, &Tolerances::STANDARD).unwrap();
        assert_zero_pattern(&n.a1, 0.0);
        // H11 = diag(1,1,-1), H12 reflects y
        let expected = Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0));
        assert!((n.u1 - expected).amax() < 1e-15);
    }

    #[test]
    fn random_columns_reach_zero_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a1 = random_obs(&mut rng);
            let a2 = random_obs(&mut rng);
            let n = normalize_observations(&a1, &a2, &Tolerances::STANDARD).unwrap();
            assert_zero_pattern(&n.a1, 0.0);
            assert_zero_pattern(&n.a2, 0.0);
            assert!((n.u1.transpose() * n.a1 - a1).amax() < 1e-13);
            assert!((n.u2.transpose() * n.a2 - a2).amax() < 1e-13);
            assert!((n.u1.determinant() - 1.0).abs() < 1e-13);
            assert!((n.u1 * n.u1.transpose() - Mat3::identity()).amax() < 1e-14);
        }
    }

    #[test]
    fn renormalizing_gives_sign_flips_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a1 = random_obs(&mut rng);
        let a2 = random_obs(&mut rng);
        let n = normalize_observations(&a1, &a2, &Tolerances::STANDARD).unwrap();
        let again = normalize_observations(&n.a1, &n.a2, &Tolerances::STANDARD).unwrap();
        for u in [again.u1, again.u2] {
            let off = u - Mat3::from_diagonal(&u.diagonal());
            assert!(off.amax() < 1e-15);
            assert!(u.diagonal().iter().all(|d| (d.abs() - 1.0).abs() < 1e-15));
        }
        assert_zero_pattern(&again.a1, 1e-15);
    }

    #[test]
    fn degenerate_column_is_rejected() {
        let mut a = random_obs(&mut ChaCha8Rng::seed_from_u64(3));
        a.set_column(1, &Vec3::zeros());
        let b = a;
        assert!(matches!(
            normalize_observations(&a, &b, &Tolerances::STANDARD),
            Err(Error::DegenerateObservation { column: 1, .. })
        ));
    }

    #[test]
    fn identity_transform_is_noop() {
        let n = NormalizedProblem {
            a1: ObservationMatrix::zeros(),
            a2: ObservationMatrix::zeros(),
            u1: Mat3::identity(),
            u2: Mat3::identity(),
        };
        let p = RelativePose::new(
            Rotation3::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), 0.3),
            UnitTranslation::new_normalize(Vec3::new(1.0, 2.0, 3.0)).unwrap(),
        );
        assert_eq!(denormalize_pose(&p, &n), p);
    }

    #[test]
    fn pose_round_trip_and_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let r = Rotation3::from_axis_angle(&random_unit(&mut rng), rng.random_range(0.0..1.0));
            let t = UnitTranslation::new_normalize(random_unit(&mut rng)).unwrap();
            let gt = RelativePose::new(r, t);
            let mut corrs = Vec::new();
            for _ in 0..5 {
                let x1 = random_unit(&mut rng) * rng.random_range(1.0..3.0);
                let x2 = r.matrix() * x1 + t.vector();
                corrs.push(Correspondence::new(x1, x2).unwrap());
            }
            let corrs: [Correspondence; 5] = corrs.try_into().unwrap();
            let (a1, a2) = observation_matrices(&corrs);
            let n = normalize_observations(&a1, &a2, &Tolerances::STANDARD).unwrap();
            let np = normalize_pose(&gt, &n);
            let e_norm = essential_from_pose(&np);
            for i in 0..5 {
                let c = Correspondence { q1: n.bearing1(i), q2: n.bearing2(i) };
                assert!(epipolar_residual(&e_norm, &c).abs() < 1e-12);
            }
            let back = denormalize_pose(&np, &n);
            assert!((back.rotation.matrix() - gt.rotation.matrix()).amax() < 1e-12);
            assert!((back.translation.vector() - gt.translation.vector()).amax() < 1e-12);
            assert!((back.translation.vector().norm() - 1.0).abs() < 1e-12);
            let e = essential_from_pose(&back);
            for c in &corrs {
                assert!(epipolar_residual(&e, c).abs() < 1e-11);
            }
        }
    }
}
