//! Linear Kalman filtering with a constant-velocity motion model.
//!
//! The generic `predict`/`update` functions work on any state and measurement
//! size; [`ConstantVelocity`] fixes the 6-dimensional (position, velocity)
//! state the tracker uses. Yaw and box size are not filtered.

use nalgebra::{DMatrix, SMatrix, SVector, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::types::{ObservationMode, TrackerConfig};

/// Condition-number ceiling for the innovation covariance.
pub const MAX_CONDITION: f64 = 1e12;

pub const STATE_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief<const N: usize> {
    pub mean: SVector<f64, N>,
    pub covariance: SMatrix<f64, N, N>,
}

pub type CvBelief = GaussianBelief<STATE_DIM>;

impl<const N: usize> GaussianBelief<N> {
    pub fn new(mean: SVector<f64, N>, covariance: SMatrix<f64, N, N>) -> Self {
        Self { mean, covariance }
    }

    /// Symmetric within `1e-9` and no eigenvalue below `-1e-9`.
    pub fn is_symmetric_psd(&self) -> bool {
        let p = &self.covariance;
        if (p - p.transpose()).abs().max() > 1e-9 {
            return false;
        }
        let dense = DMatrix::from_fn(N, N, |i, j| p[(i, j)]);
        dense.symmetric_eigenvalues().iter().all(|&l| l >= -1e-9)
    }
}

/// Posterior plus the innovation quantities used for scoring.
#[derive(Debug, Clone)]
pub struct KalmanUpdate<const N: usize, const M: usize> {
    pub posterior: GaussianBelief<N>,
    pub innovation: SVector<f64, M>,
    pub innovation_cov: SMatrix<f64, M, M>,
}

fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

/// `x' = A x`, `P' = A P Aᵀ + Q`.
pub fn predict<const N: usize>(
    belief: &GaussianBelief<N>,
    transition: &SMatrix<f64, N, N>,
    process_noise: &SMatrix<f64, N, N>,
) -> GaussianBelief<N> {
    let mean = transition * belief.mean;
    let cov = transition * belief.covariance * transition.transpose() + process_noise;
    GaussianBelief::new(mean, symmetrize(&cov))
}

fn checked_inverse<const M: usize>(s: &SMatrix<f64, M, M>) -> Result<SMatrix<f64, M, M>> {
    let chol = s.cholesky().ok_or_else(|| {
        Error::NumericalDegeneracy("innovation covariance is not positive definite".into())
    })?;
    let inv = chol.inverse();
    // Frobenius-norm estimate; it bounds the spectral condition number from above.
    let cond = s.norm() * inv.norm();
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::NumericalDegeneracy(format!(
            "innovation covariance condition number {cond:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    Ok(inv)
}

/// Standard Kalman measurement update in Joseph form.
pub fn update<const N: usize, const M: usize>(
    belief: &GaussianBelief<N>,
    measurement: &SVector<f64, M>,
    observation: &SMatrix<f64, M, N>,
    measurement_noise: &SMatrix<f64, M, M>,
) -> Result<KalmanUpdate<N, M>> {
    let p = &belief.covariance;
    let innovation = measurement - observation * belief.mean;
    let s = symmetrize(&(observation * p * observation.transpose() + measurement_noise));
    let s_inv = checked_inverse(&s)?;
    let gain = p * observation.transpose() * s_inv;
    let mean = belief.mean + gain * innovation;
    let i_kc = SMatrix::<f64, N, N>::identity() - gain * observation;
    let cov = i_kc * p * i_kc.transpose() + gain * measurement_noise * gain.transpose();
    Ok(KalmanUpdate {
        posterior: GaussianBelief::new(mean, symmetrize(&cov)),
        innovation,
        innovation_cov: s,
    })
}

/// `νᵀ S⁻¹ ν`.
pub fn mahalanobis_sq<const M: usize>(
    innovation: &SVector<f64, M>,
    innovation_cov: &SMatrix<f64, M, M>,
) -> Result<f64> {
    let chol = innovation_cov
        .cholesky()
        .ok_or_else(|| Error::NumericalDegeneracy("innovation covariance is singular".into()))?;
    let w = chol
        .l()
        .solve_lower_triangular(innovation)
        .ok_or_else(|| Error::NumericalDegeneracy("innovation covariance is singular".into()))?;
    Ok(w.norm_squared())
}

/// `log det S` for a symmetric positive definite matrix.
pub fn log_det_spd<const M: usize>(s: &SMatrix<f64, M, M>) -> Result<f64> {
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::NumericalDegeneracy("matrix is not positive definite".into()))?;
    let l = chol.l();
    Ok(2.0 * (0..M).map(|i| l[(i, i)].ln()).sum::<f64>())
}

/// Constant-velocity model over `(px, py, pz, vx, vy, vz)` with
/// white-acceleration process noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantVelocity {
    pub accel_psd: Vector3<f64>,
    pub pos_var: Vector3<f64>,
    pub vel_var: Vector3<f64>,
    pub mode: ObservationMode,
}

impl ConstantVelocity {
    pub fn from_config(config: &TrackerConfig) -> Self {
        let sq = |a: [f64; 3]| Vector3::new(a[0] * a[0], a[1] * a[1], a[2] * a[2]);
        Self {
            accel_psd: Vector3::from(config.process_accel_psd_m2ps3),
            pos_var: sq(config.measurement_pos_std_m),
            vel_var: sq(config.measurement_vel_std_mps),
            mode: config.observation_mode,
        }
    }

    pub fn transition(dt: f64) -> SMatrix<f64, 6, 6> {
        let mut a = SMatrix::<f64, 6, 6>::identity();
        for i in 0..3 {
            a[(i, i + 3)] = dt;
        }
        a
    }

    /// Discretized white-acceleration noise; vanishes as `dt → 0`.
    pub fn process_noise(&self, dt: f64) -> SMatrix<f64, 6, 6> {
        let mut q = SMatrix::<f64, 6, 6>::zeros();
        let (dt2, dt3) = (dt * dt, dt * dt * dt);
        for i in 0..3 {
            let s = self.accel_psd[i];
            q[(i, i)] = s * dt3 / 3.0;
            q[(i, i + 3)] = s * dt2 / 2.0;
            q[(i + 3, i)] = s * dt2 / 2.0;
            q[(i + 3, i + 3)] = s * dt;
        }
        q
    }

    pub fn predict(&self, belief: &CvBelief, dt: f64) -> Result<CvBelief> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "prediction interval {dt} must be > 0"
            )));
        }
        Ok(predict(
            belief,
            &Self::transition(dt),
            &self.process_noise(dt),
        ))
    }

    /// Belief seeded from a single detection. Velocity comes from the
    /// detection when the observation mode uses it, otherwise it starts at
    /// zero with standard deviation `velocity_std` per axis.
    pub fn initiate(
        &self,
        position: &Vector3<f64>,
        velocity: Option<&Vector3<f64>>,
        velocity_std: Vector3<f64>,
    ) -> CvBelief {
        let mut mean = Vector6::zeros();
        let mut cov = SMatrix::<f64, 6, 6>::zeros();
        mean.fixed_rows_mut::<3>(0).copy_from(position);
        let measured_velocity = match (self.mode, velocity) {
            (ObservationMode::PositionVelocity, Some(v)) => Some(v),
            _ => None,
        };
        for i in 0..3 {
            cov[(i, i)] = self.pos_var[i];
            cov[(i + 3, i + 3)] = match measured_velocity {
                Some(_) => self.vel_var[i],
                None => velocity_std[i] * velocity_std[i],
            };
        }
        if let Some(v) = measured_velocity {
            mean.fixed_rows_mut::<3>(3).copy_from(v);
        }
        GaussianBelief::new(mean, cov)
    }

    pub fn position_observation() -> SMatrix<f64, 3, 6> {
        let mut c = SMatrix::<f64, 3, 6>::zeros();
        for i in 0..3 {
            c[(i, i)] = 1.0;
        }
        c
    }

    pub fn update_position(
        &self,
        belief: &CvBelief,
        z: &Vector3<f64>,
    ) -> Result<KalmanUpdate<6, 3>> {
        let r = SMatrix::<f64, 3, 3>::from_diagonal(&self.pos_var);
        update(belief, z, &Self::position_observation(), &r)
    }

    pub fn update_position_velocity(
        &self,
        belief: &CvBelief,
        z: &Vector6<f64>,
    ) -> Result<KalmanUpdate<6, 6>> {
        let mut r_diag = Vector6::zeros();
        r_diag.fixed_rows_mut::<3>(0).copy_from(&self.pos_var);
        r_diag.fixed_rows_mut::<3>(3).copy_from(&self.vel_var);
        update(
            belief,
            z,
            &SMatrix::<f64, 6, 6>::identity(),
            &SMatrix::<f64, 6, 6>::from_diagonal(&r_diag),
        )
    }
}
