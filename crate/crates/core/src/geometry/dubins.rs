//! Shortest forward-only paths between two poses under a minimum turning radius.
//!
//! Each of the six candidate words is solved in closed form in a frame where the
//! start sits at the origin, the goal on the positive x-axis and distances are
//! measured in turning radii.

use std::f64::consts::TAU;

use super::{wrap_angle, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DubinsWord {
    LSL,
    RSR,
    LSR,
    RSL,
    RLR,
    LRL,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seg {
    L,
    S,
    R,
}

impl DubinsWord {
    /// Candidate order; equal-length ties resolve to the earliest entry.
    pub const ALL: [DubinsWord; 6] = [
        DubinsWord::LSL,
        DubinsWord::RSR,
        DubinsWord::LSR,
        DubinsWord::RSL,
        DubinsWord::RLR,
        DubinsWord::LRL,
    ];

    fn segments(self) -> [Seg; 3] {
        use Seg::*;
        match self {
            DubinsWord::LSL => [L, S, L],
            DubinsWord::RSR => [R, S, R],
            DubinsWord::LSR => [L, S, R],
            DubinsWord::RSL => [R, S, L],
            DubinsWord::RLR => [R, L, R],
            DubinsWord::LRL => [L, R, L],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DubinsPath {
    pub start: Pose,
    pub word: DubinsWord,
    /// Metric length of each of the three segments [m].
    pub segment_lengths: [f64; 3],
    pub radius: f64,
    pub total_length: f64,
}

fn mod2pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Normalised segment parameters (arc angles / straight length in radii) for one word.
fn solve_word(word: DubinsWord, alpha: f64, beta: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, sb) = (alpha.sin(), beta.sin());
    let (ca, cb) = (alpha.cos(), beta.cos());
    let c_ab = (alpha - beta).cos();
    match word {
        DubinsWord::LSL => {
            let tmp0 = d + sa - sb;
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb);
            if p_sq < 0.0 {
                return None;
            }
            let tmp1 = (cb - ca).atan2(tmp0);
            Some([mod2pi(tmp1 - alpha), p_sq.sqrt(), mod2pi(beta - tmp1)])
        }
        DubinsWord::RSR => {
            let tmp0 = d - sa + sb;
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa);
            if p_sq < 0.0 {
                return None;
            }
            let tmp1 = (ca - cb).atan2(tmp0);
            Some([mod2pi(alpha - tmp1), p_sq.sqrt(), mod2pi(tmp1 - beta)])
        }
        DubinsWord::LSR => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp2 = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(tmp2 - alpha), p, mod2pi(tmp2 - beta)])
        }
        DubinsWord::RSL => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab - 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp2 = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(alpha - tmp2), p, mod2pi(beta - tmp2)])
        }
        DubinsWord::RLR => {
            let tmp0 = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp0.abs() > 1.0 {
                return None;
            }
            let phi = (ca - cb).atan2(d - sa + sb);
            let p = mod2pi(TAU - tmp0.acos());
            let t = mod2pi(alpha - phi + mod2pi(p / 2.0));
            Some([t, p, mod2pi(alpha - beta - t + mod2pi(p))])
        }
        DubinsWord::LRL => {
            let tmp0 = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp0.abs() > 1.0 {
                return None;
            }
            let phi = (ca - cb).atan2(d + sa - sb);
            let p = mod2pi(TAU - tmp0.acos());
            let t = mod2pi(-alpha - phi + p / 2.0);
            Some([t, p, mod2pi(beta - alpha - t + mod2pi(p))])
        }
    }
}

/// Shortest of the six Dubins words from `start` to `goal` with turning radius `radius`.
///
/// Coincident poses give a zero-length path.
///
/// # Panics
/// If `radius` is not strictly positive.
pub fn dubins_shortest(start: Pose, goal: Pose, radius: f64) -> DubinsPath {
    assert!(radius > 0.0, "turning radius must be positive");
    let dx = goal.x - start.x;
    let dy = goal.y - start.y;
    let dist = dx.hypot(dy);
    let zero = DubinsPath {
        start,
        word: DubinsWord::LSL,
        segment_lengths: [0.0; 3],
        radius,
        total_length: 0.0,
    };
    if dist < 1e-12 && wrap_angle(goal.theta - start.theta).abs() < 1e-12 {
        return zero;
    }
    let d = dist / radius;
    let frame = if dist < 1e-12 { 0.0 } else { mod2pi(dy.atan2(dx)) };
    let alpha = mod2pi(start.theta - frame);
    let beta = mod2pi(goal.theta - frame);

    let mut best: Option<(DubinsWord, [f64; 3], f64)> = None;
    for word in DubinsWord::ALL {
        if let Some(params) = solve_word(word, alpha, beta, d) {
            let len: f64 = params.iter().sum();
            if best.is_none_or(|(_, _, b)| len < b) {
                best = Some((word, params, len));
            }
        }
    }
    // LSL/RSR always have a solution, so a candidate exists.
    let (word, params, len) = best.expect("at least one Dubins word is feasible");
    DubinsPath {
        start,
        word,
        segment_lengths: params.map(|p| p * radius),
        radius,
        total_length: len * radius,
    }
}

impl DubinsPath {
    /// Pose reached after travelling `s` metres along the path (clamped to `[0, total_length]`).
    pub fn sample(&self, s: f64) -> Pose {
        let mut remaining = s.clamp(0.0, self.total_length) / self.radius;
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, self.start.theta);
        for (seg, len) in self.word.segments().iter().zip(self.segment_lengths) {
            let t = (len / self.radius).min(remaining);
            match seg {
                Seg::L => {
                    x += (th + t).sin() - th.sin();
                    y += -(th + t).cos() + th.cos();
                    th += t;
                }
                Seg::R => {
                    x += -(th - t).sin() + th.sin();
                    y += (th - t).cos() - th.cos();
                    th -= t;
                }
                Seg::S => {
                    x += th.cos() * t;
                    y += th.sin() * t;
                }
            }
            remaining -= t;
            if remaining <= 0.0 {
                break;
            }
        }
        Pose::new(self.start.x + x * self.radius, self.start.y + y * self.radius, wrap_angle(th))
    }

    /// Samples spaced at most `step` apart, always including both endpoints.
    pub fn sample_spaced(&self, step: f64) -> Vec<Pose> {
        if self.total_length <= 0.0 {
            return vec![self.start];
        }
        let n = (self.total_length / step).ceil().max(1.0) as usize;
        (0..=n).map(|k| self.sample(self.total_length * k as f64 / n as f64)).collect()
    }
}
