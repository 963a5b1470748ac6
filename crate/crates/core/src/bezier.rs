//! Piecewise Bézier station curves.
//!
//! A segment over `[t_start, t_start + h]` stores scaled control points `c`;
//! with `tau = (t - t_start) / h` the station is `s = h B(tau)`, so the speed is
//! `B'(tau)` and the acceleration `B''(tau) / h`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BezierError {
    #[error("time {t} outside segment [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },
    #[error("invalid segment: {0}")]
    Invalid(String),
}

/// Evaluates a Bernstein polynomial with the given coefficients by de Casteljau.
pub fn de_casteljau(ctrl: &[f64], tau: f64) -> f64 {
    let mut w = ctrl.to_vec();
    let n = w.len();
    for r in 1..n {
        for i in 0..n - r {
            w[i] = (1.0 - tau) * w[i] + tau * w[i + 1];
        }
    }
    w[0]
}

/// Control points of the derivative curve, `n (c_{i+1} - c_i)`.
pub fn derivative_points(ctrl: &[f64]) -> Vec<f64> {
    let n = (ctrl.len() - 1) as f64;
    ctrl.windows(2).map(|w| n * (w[1] - w[0])).collect()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

/// `G[i][l] = integral over [0, 1] of b_{k,i} b_{k,l}`.
pub fn bernstein_gram(k: usize) -> Vec<Vec<f64>> {
    (0..=k)
        .map(|i| (0..=k).map(|l| binomial(k, i) * binomial(k, l) / ((2 * k + 1) as f64 * binomial(2 * k, i + l))).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BezierSegment {
    pub control_points: Vec<f64>,
    pub h: f64,
    pub t_start: f64,
}

impl BezierSegment {
    pub fn new(control_points: Vec<f64>, h: f64, t_start: f64) -> Result<Self, BezierError> {
        if control_points.len() < 5 {
            return Err(BezierError::Invalid(format!("order {} below 4", control_points.len() as isize - 1)));
        }
        if !(h > 0.0 && h.is_finite()) || !t_start.is_finite() || control_points.iter().any(|c| !c.is_finite()) {
            return Err(BezierError::Invalid("non-finite data or non-positive duration".into()));
        }
        Ok(Self { control_points, h, t_start })
    }

    pub fn order(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.h
    }

    /// `(s, s_dot, s_ddot)` at time `t`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64), BezierError> {
        let slack = 1e-12 * (1.0 + self.t_end().abs());
        if !(t >= self.t_start - slack && t <= self.t_end() + slack) {
            return Err(BezierError::Domain { t, start: self.t_start, end: self.t_end() });
        }
        let tau = ((t - self.t_start) / self.h).clamp(0.0, 1.0);
        let d1 = derivative_points(&self.control_points);
        let d2 = derivative_points(&d1);
        Ok((
            self.h * de_casteljau(&self.control_points, tau),
            de_casteljau(&d1, tau),
            de_casteljau(&d2, tau) / self.h,
        ))
    }

    /// Exact `integral of s_ddot^2 dt` over the segment.
    pub fn accel_energy(&self) -> f64 {
        let d2 = derivative_points(&derivative_points(&self.control_points));
        let g = bernstein_gram(d2.len() - 1);
        let mut acc = 0.0;
        for (i, gi) in g.iter().enumerate() {
            for (l, gil) in gi.iter().enumerate() {
                acc += d2[i] * gil * d2[l];
            }
        }
        acc / self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    pub segments: Vec<BezierSegment>,
    pub horizon: f64,
}

impl SpeedProfile {
    /// Checks tiling of `[0, horizon]`, continuity of `s`, `s_dot`, `s_ddot`
    /// at joins within `tol`, `s(0) = 0` and forward motion at the control
    /// polygon of the speed curve.
    pub fn validate(&self, tol: f64) -> Result<(), BezierError> {
        let first = self.segments.first().ok_or_else(|| BezierError::Invalid("no segments".into()))?;
        if first.t_start.abs() > 1e-12 {
            return Err(BezierError::Invalid("profile must start at t = 0".into()));
        }
        let last = self.segments.last().unwrap();
        if (last.t_end() - self.horizon).abs() > 1e-9 {
            return Err(BezierError::Invalid("segments do not reach the horizon".into()));
        }
        for (j, w) in self.segments.windows(2).enumerate() {
            if (w[0].t_end() - w[1].t_start).abs() > 1e-9 {
                return Err(BezierError::Invalid(format!("gap after segment {j}")));
            }
            let a = w[0].eval(w[0].t_end())?;
            let b = w[1].eval(w[1].t_start)?;
            if (a.0 - b.0).abs() > tol || (a.1 - b.1).abs() > tol || (a.2 - b.2).abs() > tol {
                return Err(BezierError::Invalid(format!("discontinuity at join {j}: {a:?} vs {b:?}")));
            }
        }
        if first.eval(0.0)?.0.abs() > tol {
            return Err(BezierError::Invalid("s(0) is not zero".into()));
        }
        for seg in &self.segments {
            if derivative_points(&seg.control_points).iter().any(|v| *v < -1e-9 - tol) {
                return Err(BezierError::Invalid("speed control point below zero".into()));
            }
        }
        Ok(())
    }

    fn segment_index(&self, t: f64) -> usize {
        let n = self.segments.len();
        self.segments.iter().position(|s| t < s.t_end()).unwrap_or(n - 1)
    }

    /// `(s, s_dot, s_ddot)` at `t`, clamped to `[0, horizon]`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let t = t.clamp(0.0, self.horizon);
        let seg = &self.segments[self.segment_index(t)];
        seg.eval(t.clamp(seg.t_start, seg.t_end())).expect("clamped time lies in segment")
    }

    /// `(t, s, s_dot, s_ddot)` at `per_segment` evenly spaced times per segment
    /// (both ends included).
    pub fn sample(&self, per_segment: usize) -> Vec<(f64, f64, f64, f64)> {
        let k = per_segment.max(2);
        let mut out = Vec::with_capacity(k * self.segments.len());
        for seg in &self.segments {
            for i in 0..k {
                let t = seg.t_start + seg.h * i as f64 / (k - 1) as f64;
                let (s, v, a) = seg.eval(t).expect("sample inside segment");
                out.push((t, s, v, a));
            }
        }
        out
    }

    pub fn accel_energy(&self) -> f64 {
        self.segments.iter().map(BezierSegment::accel_energy).sum()
    }

    /// `sqrt(1/T * integral of s_ddot^2 dt)`.
    pub fn rms_accel(&self) -> f64 {
        (self.accel_energy() / self.horizon).sqrt()
    }

    /// Largest `|s_ddot|` over 201 samples per segment.
    pub fn max_abs_accel(&self) -> f64 {
        self.sample(201).iter().map(|r| r.3.abs()).fold(0.0, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        self.sample(201).iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_station(&self) -> f64 {
        self.eval(self.horizon).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernstein_sum(ctrl: &[f64], tau: f64) -> f64 {
        let n = ctrl.len() - 1;
        ctrl.iter()
            .enumerate()
            .map(|(i, c)| c * binomial(n, i) * tau.powi(i as i32) * (1.0 - tau).powi((n - i) as i32))
            .sum()
    }

    #[test]
    fn constant_curve() {
        let seg = BezierSegment::new(vec![0.7; 6], 2.0, 1.0).unwrap();
        for t in [1.0, 1.5, 3.0] {
            let (s, v, a) = seg.eval(t).unwrap();
            assert!((s - 1.4).abs() < 1e-15 && v.abs() < 1e-15 && a.abs() < 1e-15);
        }
    }

    #[test]
    fn linear_ramp_has_unit_speed() {
        let n = 5;
        let seg = BezierSegment::new((0..=n).map(|i| i as f64 / n as f64).collect(), 3.0, 0.0).unwrap();
        for t in [0.0, 0.4, 2.9, 3.0] {
            let (s, v, a) = seg.eval(t).unwrap();
            assert!((s - t).abs() < 1e-12 && (v - 1.0).abs() < 1e-12 && a.abs() < 1e-12);
        }
    }

    #[test]
    fn matches_bernstein_sum_and_differences() {
        let ctrl = [0.1, -0.4, 0.9, 0.3, 1.7, 0.2];
        let seg = BezierSegment::new(ctrl.to_vec(), 1.7, 0.5).unwrap();
        for k in 1..20 {
            let tau = k as f64 / 20.0;
            let t = 0.5 + 1.7 * tau;
            let (s, v, a) = seg.eval(t).unwrap();
            assert!((s - 1.7 * bernstein_sum(&ctrl, tau)).abs() < 1e-12);
            let e = 1e-5;
            let sp = seg.eval(t + e).unwrap().0;
            let sm = seg.eval(t - e).unwrap().0;
            assert!((v - (sp - sm) / (2.0 * e)).abs() < 1e-6);
            let vp = seg.eval(t + e).unwrap().1;
            let vm = seg.eval(t - e).unwrap().1;
            assert!((a - (vp - vm) / (2.0 * e)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_out_of_domain_and_low_order() {
        let seg = BezierSegment::new(vec![0.0; 6], 1.0, 0.0).unwrap();
        assert!(matches!(seg.eval(1.1), Err(BezierError::Domain { .. })));
        assert!(BezierSegment::new(vec![0.0; 4], 1.0, 0.0).is_err());
        assert!(BezierSegment::new(vec![0.0; 6], 0.0, 0.0).is_err());
    }

    #[test]
    fn gram_rows_sum_to_basis_integral() {
        // sum_l b_{k,l} = 1, so each row sums to the integral of b_{k,i} = 1/(k+1)
        for k in 1..8 {
            for row in bernstein_gram(k) {
                assert!((row.iter().sum::<f64>() - 1.0 / (k + 1) as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn energy_of_parabola() {
        // s = t^2 on [0, 2]: h = 2, B(tau) = 2 tau^2 -> quintic elevation
        let h = 2.0;
        let ctrl: Vec<f64> = (0..=5).map(|i| 2.0 * (i * (i.max(1) - 1)) as f64 / 20.0).collect();
        let seg = BezierSegment::new(ctrl, h, 0.0).unwrap();
        let (s, v, a) = seg.eval(1.0).unwrap();
        assert!((s - 1.0).abs() < 1e-12 && (v - 2.0).abs() < 1e-12 && (a - 2.0).abs() < 1e-12);
        assert!((seg.accel_energy() - 8.0).abs() < 1e-12);
    }
}
