mod common;

use intercept_core::geometry::{obstacle_contains, Obstacle, Vec2};
use intercept_core::smoother::PathPolyline;
use intercept_core::st_graph::{
    build_corridors_refined, dp_search, project_obstacles, uniform_segments, DpConfig, STGrid, STObstacle,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn dp_equals_exhaustive_enumeration() {
    assert_eq!(common::dp_enumeration_mismatches(17, 20), 0);
}

fn random_polygon(rng: &mut ChaCha8Rng, centre: Vec2) -> Vec<Vec2> {
    let n = rng.random_range(3..=6);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 0.3);
    if angles.len() < 3 {
        angles = vec![0.0, 2.1, 4.2];
    }
    let r = rng.random_range(0.4..1.2);
    angles.iter().map(|a| centre + r * Vec2::new(a.cos(), a.sin())).collect()
}

#[test]
fn projection_encloses_dense_membership() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let width = 0.2;
    for _ in 0..10 {
        let pts: Vec<Vec2> = (0..5).map(|i| Vec2::new(3.0 * i as f64, rng.random_range(-1.0..1.0))).collect();
        let path = PathPolyline::new(pts).unwrap();
        let horizon = 10.0;
        let cross = path.point_at(rng.random_range(2.0..10.0));
        let vel = Vec2::new(rng.random_range(-0.8..0.8), rng.random_range(0.5..1.2));
        let t_cross = rng.random_range(3.0..7.0);
        let centre = cross - vel * t_cross;
        let ob = Obstacle::new_dynamic(0, random_polygon(&mut rng, centre), vel, 0.1).unwrap();
        let st = project_obstacles(&path, std::slice::from_ref(&ob), horizon, width);
        assert!(!st.is_empty());
        let grown = ob.with_inflation(ob.inflation() + 0.5 * width).unwrap();
        let s_max = path.length();
        let (mut missed, mut extra) = (0, 0);
        let n = 10_000;
        for _ in 0..n {
            let t = rng.random_range(0.0..horizon);
            let s = rng.random_range(0.0..s_max);
            let truth = obstacle_contains(&grown, path.point_at(s), t);
            let claimed = st.iter().any(|o| o.contains(t, s));
            missed += (truth && !claimed) as usize;
            extra += (claimed && !truth) as usize;
        }
        assert_eq!(missed, 0, "projection must be conservative");
        assert!((extra as f64) <= 0.01 * n as f64, "{extra} of {n} samples over-approximated");
    }
}

#[test]
fn corridors_are_obstacle_free_and_contain_the_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut built = 0;
    for _ in 0..40 {
        let horizon = 10.0;
        let s_max = 20.0;
        let obs: Vec<STObstacle> = (0..rng.random_range(1..=3))
            .map(|k| {
                let t_in = rng.random_range(1.0..7.0);
                let lo = rng.random_range(2.0..16.0);
                STObstacle::new(k, t_in, t_in + rng.random_range(0.5..2.5), lo, lo + rng.random_range(0.5..2.5), rng.random_range(-0.5..1.0))
            })
            .collect();
        let grid = STGrid::new(horizon, s_max, 20, 80).unwrap();
        let cfg = DpConfig { v_max: 6.0, ..DpConfig::default() };
        let Ok(profile) = dp_search(&grid, &obs, &cfg, 2.0) else { continue };
        let Ok(corr) = build_corridors_refined(&profile, &obs, &uniform_segments(horizon, 5), 0.25) else { continue };
        built += 1;
        for (i, t) in profile.times().into_iter().enumerate() {
            let seg = &corr.segments[corr.segment_at(t).unwrap()];
            let s = profile.stations[i];
            assert!(seg.lower_at(t) <= s + 1e-9 && s <= seg.upper_at(t) + 1e-9);
        }
        for _ in 0..10_000 {
            let seg = &corr.segments[rng.random_range(0..corr.segments.len())];
            let t = rng.random_range(seg.t_start..seg.t_end);
            let (lo, hi) = (seg.lower_at(t), seg.upper_at(t));
            assert!(lo < hi);
            let s = rng.random_range(lo..hi);
            assert!(!obs.iter().any(|o| o.contains(t, s)), "corridor sample ({t}, {s}) inside an obstacle");
        }
    }
    assert!(built >= 20, "only {built} random cases produced corridors");
}
