use std::f64::consts::PI;

use navtune::geom::Pose2D;
use navtune::world::{
    generate_ca_world, inflate, inflation_breakpoints, is_collision, raycast, smooth_ca, traversable, CaConfig,
    InflationModel, OccupancyGrid, ScanConfig,
};
use proptest::prelude::*;

const GOLDEN_SEED7: &str = include_str!("data/ca_seed7.grid");

fn ca(seed: u64) -> navtune::world::GeneratedWorld {
    generate_ca_world(&CaConfig {
        seed,
        ..CaConfig::default()
    })
    .unwrap()
}

#[test]
fn seed_7_matches_golden_grid() {
    let g = ca(7);
    assert_eq!(g.world.grid.to_text(), GOLDEN_SEED7);
}

#[test]
fn generated_worlds_are_traversable_and_bordered() {
    for seed in 0..20 {
        let g = ca(seed);
        let grid = &g.world.grid;
        assert!(traversable(grid, g.world.start, g.world.goal, 0.15), "seed {seed}");
        assert!(g.seed_used >= seed);
        for ix in 0..grid.width() {
            assert!(grid.occupied(ix, 0) && grid.occupied(ix, grid.height() - 1));
        }
        for iy in 0..grid.height() {
            assert!(grid.occupied(0, iy) && grid.occupied(grid.width() - 1, iy));
        }
        assert!(!is_collision(grid, &g.world.start_pose(), 0.15));
    }
}

#[test]
fn text_format_round_trips() {
    let g = ca(3).world.grid;
    let back = OccupancyGrid::from_text(&g.to_text()).unwrap();
    assert_eq!(back, g);
    assert!(OccupancyGrid::from_text("grid 2 2 0.1\n..\n").is_err());
    assert!(OccupancyGrid::from_text("grid 2 1 0.1\n.x\n").is_err());
}

#[test]
fn fill_prob_is_validated() {
    let bad = CaConfig {
        fill_prob: 1.5,
        ..CaConfig::default()
    };
    assert!(generate_ca_world(&bad).is_err());
}

#[test]
fn empty_room_scan_matches_geometry() {
    let mut grid = OccupancyGrid::new(40, 40, 0.1).unwrap();
    navtune::world::force_border(&mut grid);
    let pose = Pose2D::new(2.0, 2.0, 0.0);
    let cfg = ScanConfig {
        num_beams: 5,
        angle_min: -PI / 2.0,
        angle_max: PI / 2.0,
        max_range: 10.0,
        noise_stddev: None,
    };
    let scan = raycast(&grid, &pose, &cfg).unwrap();
    // Inner wall faces sit at 0.1 and 3.9.
    assert!((scan.ranges[2] - 1.9).abs() < 1e-9, "{:?}", scan.ranges);
    assert!((scan.ranges[0] - 1.9).abs() < 1e-9);
    assert!((scan.ranges[4] - 1.9).abs() < 1e-9);
    let diag = 1.9 * 2f64.sqrt();
    assert!((scan.ranges[1] - diag).abs() < 1e-9);
    assert!(raycast(&grid, &Pose2D::new(0.05, 0.05, 0.0), &cfg).is_err());
}

#[test]
fn inflation_profile() {
    let mut grid = OccupancyGrid::new(21, 21, 0.1).unwrap();
    grid.set(10, 10, true);
    let model = InflationModel {
        inscribed_radius: 0.15,
        decay: 10.0,
    };
    let cost = inflate(&grid, 0.5, &model);
    assert_eq!(cost.cost(10, 10), 1.0);
    assert_eq!(cost.cost(11, 10), 1.0);
    let d = 0.3f64;
    assert!((cost.cost(13, 10) - (-10.0 * (d - 0.15)).exp()).abs() < 1e-12);
    assert_eq!(cost.cost(16, 10), 0.0);
    let none = inflate(&grid, 0.0, &model);
    assert_eq!(none.costs().iter().filter(|c| **c > 0.0).count(), 1);
}

#[test]
fn inflation_only_changes_at_breakpoints() {
    let grid = ca(11).world.grid;
    let model = InflationModel::default();
    let bps = inflation_breakpoints(grid.resolution(), 0.6);
    for pair in bps.windows(2).filter(|p| p[1] <= 0.6) {
        let a = inflate(&grid, pair[0] + 1e-9, &model);
        let b = inflate(&grid, (pair[0] + pair[1]) / 2.0, &model);
        assert_eq!(a, b, "between {} and {}", pair[0], pair[1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generation_is_deterministic(seed in 0u64..10_000, fill in 0.2f64..0.45) {
        let cfg = CaConfig { seed, fill_prob: fill, ..CaConfig::default() };
        let a = generate_ca_world(&cfg);
        let b = generate_ca_world(&cfg);
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a.world, b.world);
            prop_assert_eq!(a.seed_used, b.seed_used);
        }
    }

    #[test]
    fn smoothing_is_local(
        cells in prop::collection::vec(any::<bool>(), 20 * 20),
        flip in 0usize..400,
    ) {
        let (w, h, iters) = (20usize, 20usize, 2usize);
        let a = smooth_ca(&cells, w, h, iters);
        let mut other = cells.clone();
        other[flip] = !other[flip];
        let b = smooth_ca(&other, w, h, iters);
        let (fx, fy) = ((flip % w) as i64, (flip / w) as i64);
        for iy in 0..h as i64 {
            for ix in 0..w as i64 {
                if (ix - fx).abs().max((iy - fy).abs()) > iters as i64 {
                    prop_assert_eq!(a[(iy * w as i64 + ix) as usize], b[(iy * w as i64 + ix) as usize]);
                }
            }
        }
    }

    #[test]
    fn raycast_mirrors_with_grid(seed in 0u64..500, fx in 0.2f64..0.8, fy in 0.2f64..0.8, theta in -PI..PI) {
        let grid = ca(seed).world.grid;
        let ext = grid.extent();
        let pose = Pose2D::new(fx * ext.x, fy * ext.y, theta);
        prop_assume!(grid.cell_of(pose.position()).is_some_and(|(x, y)| !grid.occupied(x, y)));
        let cfg = ScanConfig { num_beams: 91, ..ScanConfig::default() };
        let scan = raycast(&grid, &pose, &cfg).unwrap();
        let mirrored = grid.mirrored_x();
        let mpose = Pose2D::new(ext.x - pose.x, pose.y, PI - theta);
        let mscan = raycast(&mirrored, &mpose, &cfg).unwrap();
        let n = scan.ranges.len();
        for k in 0..n {
            prop_assert!((scan.ranges[k] - mscan.ranges[n - 1 - k]).abs() < 1e-6,
                "beam {}: {} vs {}", k, scan.ranges[k], mscan.ranges[n - 1 - k]);
        }
    }

    #[test]
    fn ranges_are_bounded(seed in 0u64..500, theta in -PI..PI) {
        let w = ca(seed).world;
        let cfg = ScanConfig::default();
        let scan = raycast(&w.grid, &Pose2D::new(w.start.x, w.start.y, theta), &cfg).unwrap();
        prop_assert_eq!(scan.num_beams(), cfg.num_beams);
        for r in &scan.ranges {
            prop_assert!(*r > 0.0 && *r <= cfg.max_range);
        }
    }

    #[test]
    fn inflation_is_monotone_in_radius(seed in 0u64..200, r1 in 0.0f64..0.6, r2 in 0.0f64..0.6) {
        let grid = ca(seed).world.grid;
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let model = InflationModel::default();
        let a = inflate(&grid, lo, &model);
        let b = inflate(&grid, hi, &model);
        for (x, y) in a.costs().iter().zip(b.costs()) {
            prop_assert!(*x <= *y && (0.0..=1.0).contains(y));
        }
    }
}
