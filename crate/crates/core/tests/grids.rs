//! Dyadic grids on every model domain: exact net properties, unique kube
//! location and the nesting of cube measures.

use dyadlab::dyadic::{build_grid, read_grid, write_grid, Kube};
use dyadlab::qmc::{ball_point, rng_for};
use dyadlab::{Domain, DomainSpec, DyadicSystem, GridConfig, SampleSpec};
use rand::Rng;
use std::sync::OnceLock;

/// One grid per model domain, built once and shared by every test.
fn systems() -> &'static [(Domain, DyadicSystem)] {
    static SYSTEMS: OnceLock<Vec<(Domain, DyadicSystem)>> = OnceLock::new();
    SYSTEMS.get_or_init(|| {
        [
            DomainSpec::Ball { n: 1 },
            DomainSpec::Ball { n: 2 },
            DomainSpec::Ellipsoid { n: 2, weights: vec![1.0, 2.0] },
            DomainSpec::PerturbedBall { n: 2, eps: 0.1 },
        ]
        .into_iter()
        .map(|spec| {
            let d = Domain::new(spec).unwrap();
            // Net sizes grow like s^{2n} per level; keep a few sample points per deepest cube.
            let (levels, count) = if d.dim() == 1 { (4, 20_000) } else { (2, 100_000) };
            let grid = build_grid(&d, GridConfig::new(2.0, 0.7, levels, 11), SampleSpec::Uniform { count, seed: 11 }).unwrap();
            (d, DyadicSystem::new(grid))
        })
        .collect()
    })
}

#[test]
fn nets_are_separated_covering_and_nested() {
    for (d, sys) in systems() {
        assert_eq!(sys.grid.exact_audit(), (0, 0, 0), "{:?}", d.spec());
        for k in 1..=sys.depth() {
            assert!(sys.cube_count(k) >= sys.cube_count(k - 1));
        }
    }
}

#[test]
fn child_measures_sum_to_parent_measure() {
    for (_, sys) in systems() {
        for k in 0..sys.depth() {
            let parents = sys.grid.cube_measures(k);
            let kids = sys.grid.cube_measures(k + 1);
            for (j, children) in sys.grid.children(k).iter().enumerate() {
                let sum: f64 = children.iter().map(|&c| kids[c as usize]).sum();
                assert!((sum - parents[j]).abs() <= 1e-12 * parents[j].max(1e-300), "level {k} cube {j}");
            }
        }
        let total: f64 = sys.grid.cube_measures(0).iter().sum();
        let deepest: f64 = sys.grid.cube_measures(sys.depth()).iter().sum();
        assert!((total - deepest).abs() <= 1e-12 * total);
    }
}

#[test]
fn fast_and_brute_force_location_agree() {
    for (d, sys) in systems() {
        let mut rng = rng_for(14, 0);
        let mut cells = 0;
        for _ in 0..300 {
            let u: Vec<f64> = (0..2 * d.dim()).map(|_| rng.random()).collect();
            let dir = ball_point(d.dim(), &u);
            if dir.norm() < 1e-3 {
                continue;
            }
            // Push toward the boundary so every level is visited.
            let t: f64 = 1.0 - 10f64.powf(-3.0 * rng.random::<f64>());
            let z = d.radial_boundary_point(&dir.normalized()) * t;
            let fast = sys.locate(&z);
            assert_eq!(fast, sys.locate_brute(&z), "{:?} at {z:?}", d.spec());
            if let Kube::Cell { level, .. } = fast.kube {
                assert_eq!(fast.chain.len(), level as usize + 1);
                cells += 1;
            }
        }
        assert!(cells > 100);
    }
}

#[test]
fn grid_file_round_trip_preserves_every_level() {
    let (_, sys) = &systems()[2];
    let mut bytes = Vec::new();
    write_grid(&sys.grid, None, &mut bytes).unwrap();
    let (back, cal) = read_grid(bytes.as_slice()).unwrap();
    assert!(cal.is_none());
    assert_eq!(back.depth(), sys.depth());
    for k in 0..=sys.depth() {
        assert_eq!(back.levels[k].points, sys.grid.levels[k].points);
        assert_eq!(back.cube_of[k], sys.grid.cube_of[k]);
    }
}
