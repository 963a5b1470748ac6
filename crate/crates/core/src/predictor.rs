//! Polynomial least-squares prediction of the target trajectory.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::geometry::{Pose, Vec2};

/// Default polynomial degree used when a scenario does not set one.
pub const DEFAULT_DEGREE: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("observation times must be strictly increasing ({prev} then {next})")]
    NonIncreasingTime { prev: f64, next: f64 },
    #[error("non-finite observation")]
    NonFinite,
    #[error("degree {degree} fit needs at least {need} samples, buffer has {have}")]
    NotEnoughSamples { degree: usize, need: usize, have: usize },
    #[error("observation times are (nearly) repeated; least-squares system is singular")]
    SingularFit,
    #[error("buffer capacity must be positive")]
    ZeroCapacity,
}

/// Time-ordered target observations with bounded capacity; the oldest sample
/// is dropped when a new one arrives at capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBuffer {
    samples: VecDeque<(f64, Vec2)>,
    capacity: usize,
}

impl ObservationBuffer {
    pub fn new(capacity: usize) -> Result<Self, PredictError> {
        if capacity == 0 {
            return Err(PredictError::ZeroCapacity);
        }
        Ok(Self { samples: VecDeque::with_capacity(capacity), capacity })
    }

    pub fn from_samples(capacity: usize, samples: impl IntoIterator<Item = (f64, Vec2)>) -> Result<Self, PredictError> {
        let mut buf = Self::new(capacity)?;
        for (t, p) in samples {
            buf.push(t, p)?;
        }
        Ok(buf)
    }

    pub fn push(&mut self, t: f64, p: Vec2) -> Result<(), PredictError> {
        if !t.is_finite() || !p.x.is_finite() || !p.y.is_finite() {
            return Err(PredictError::NonFinite);
        }
        if let Some(&(prev, _)) = self.samples.back() {
            if t <= prev {
                return Err(PredictError::NonIncreasingTime { prev, next: t });
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((t, p));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn samples(&self) -> impl Iterator<Item = &(f64, Vec2)> {
        self.samples.iter()
    }

    pub fn last(&self) -> Option<(f64, Vec2)> {
        self.samples.back().copied()
    }
}

/// Fitted per-axis polynomial.
///
/// `eta[k]` holds the `(x, y)` coefficients of `tau^(degree - k)`, highest power
/// first, where `tau = t - time_offset` and `time_offset` is the first sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTrajectory {
    pub degree: usize,
    pub eta: Vec<[f64; 2]>,
    pub time_offset: f64,
    pub fit_window: (f64, f64),
    pub residual_rms: f64,
    pub last_observation: Vec2,
}

/// Least-squares polynomial fit of the buffered observations.
///
/// Solves the normal equations by Cholesky factorization on a time axis rescaled
/// to `[0, 1]`, then maps the coefficients back to shifted (unscaled) time.
pub fn fit_polynomial(buf: &ObservationBuffer, degree: usize) -> Result<PolyTrajectory, PredictError> {
    let need = degree + 1;
    if buf.len() < need {
        return Err(PredictError::NotEnoughSamples { degree, need, have: buf.len() });
    }
    let (t_first, _) = buf.samples[0];
    let (t_last, last_obs) = *buf.samples.back().expect("non-empty");
    let span = if t_last > t_first { t_last - t_first } else { 1.0 };

    let m = buf.len();
    let mut h = DMatrix::<f64>::zeros(m, need);
    let mut d = DMatrix::<f64>::zeros(m, 2);
    for (i, (t, p)) in buf.samples().enumerate() {
        let tau = (t - t_first) / span;
        let mut pw = 1.0;
        for col in (0..need).rev() {
            h[(i, col)] = pw;
            pw *= tau;
        }
        d[(i, 0)] = p.x;
        d[(i, 1)] = p.y;
    }
    let normal = h.transpose() * &h;
    let rhs = h.transpose() * &d;
    let chol = normal.cholesky().ok_or(PredictError::SingularFit)?;
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(dmin > 1e-8 * dmax) {
        return Err(PredictError::SingularFit);
    }
    let scaled = chol.solve(&rhs);

    // undo the time scaling: row k multiplies tau^(degree - k)
    let eta: Vec<[f64; 2]> = (0..need)
        .map(|k| {
            let s = span.powi((degree - k) as i32);
            [scaled[(k, 0)] / s, scaled[(k, 1)] / s]
        })
        .collect();

    let mut traj = PolyTrajectory {
        degree,
        eta,
        time_offset: t_first,
        fit_window: (t_first, t_last),
        residual_rms: 0.0,
        last_observation: last_obs,
    };
    let sq: f64 = buf.samples().map(|(t, p)| (predict_position(&traj, *t) - p).norm_squared()).sum();
    traj.residual_rms = (sq / m as f64).sqrt();
    Ok(traj)
}

/// Sum of squared fit residuals over the buffer for an arbitrary coefficient set.
pub fn fit_objective(traj: &PolyTrajectory, buf: &ObservationBuffer) -> f64 {
    buf.samples().map(|(t, p)| (predict_position(traj, *t) - p).norm_squared()).sum()
}

/// Horner evaluation of both coordinate polynomials at absolute time `t`.
pub fn predict_position(traj: &PolyTrajectory, t: f64) -> Vec2 {
    let tau = t - traj.time_offset;
    let mut acc = [0.0f64; 2];
    for row in &traj.eta {
        acc[0] = acc[0] * tau + row[0];
        acc[1] = acc[1] * tau + row[1];
    }
    Vec2::new(acc[0], acc[1])
}

/// Time derivative of the predicted trajectory at `t`.
pub fn predict_velocity(traj: &PolyTrajectory, t: f64) -> Vec2 {
    let tau = t - traj.time_offset;
    let n = traj.degree;
    let mut acc = [0.0f64; 2];
    for (k, row) in traj.eta.iter().enumerate().take(n) {
        let power = (n - k) as f64;
        acc[0] = acc[0] * tau + power * row[0];
        acc[1] = acc[1] * tau + power * row[1];
    }
    Vec2::new(acc[0], acc[1])
}

/// Predicted interception pose at time `t_int`: predicted position with the
/// trajectory tangent as heading. When the predicted velocity vanishes the
/// heading points from the last observation to the predicted position.
pub fn interception_goal(traj: &PolyTrajectory, t_int: f64) -> Pose {
    let p = predict_position(traj, t_int);
    let v = predict_velocity(traj, t_int);
    let theta = if v.norm() >= 1e-9 {
        v.y.atan2(v.x)
    } else {
        let d = p - traj.last_observation;
        d.y.atan2(d.x)
    };
    Pose::new(p.x, p.y, theta)
}
