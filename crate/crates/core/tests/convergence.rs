//! Refinement behaviour of the boundary operators and the boundary solver.

use diracbag::ball_spectrum::{channels_up_to, eigenvalue_at, BallModel};
use diracbag::bie_spectrum::{eigenvalues_in, BieConfig};
use diracbag::halfint_bessel::{bessel_zero, HalfInt};
use diracbag::layerops::{identity_residuals, LayerOperators, SpectralParams};
use diracbag::surface::{make_ellipsoid, make_sphere};

const RESOLUTIONS: [usize; 3] = [12, 16, 20];

#[test]
fn identity_residuals_shrink_on_an_ellipsoid() {
    for lambda in [1.0, 1.5, 0.4] {
        let params = SpectralParams::new(lambda, 1.0).unwrap();
        let res: Vec<f64> = RESOLUTIONS
            .iter()
            .map(|&n| {
                let ops = LayerOperators::new(&make_ellipsoid(1.4, 1.0, 0.8, n, 2 * n).unwrap()).unwrap();
                identity_residuals(&ops, &ops.assemble(&params)).max()
            })
            .collect();
        println!("lambda {lambda}: {res:?}");
        assert!(res.windows(2).all(|w| w[1] < w[0]), "lambda {lambda}: {res:?}");
    }
}

/// Below the second threshold sqrt((z/R)^2 + m^2), z the first zero of J_{3/2},
/// the sphere spectrum is the ball spectrum, each value with even multiplicity.
#[test]
fn sphere_matches_ball_below_second_threshold() {
    let (r, m, tau) = (1.0, 1.0, 0.0);
    let z: f64 = bessel_zero(HalfInt::half_odd(1), 1).unwrap();
    let top = ((z / r).powi(2) + m * m).sqrt();
    let model = BallModel::new(r, m).unwrap();
    let mut exact: Vec<f64> = channels_up_to(9, 3)
        .into_iter()
        .filter_map(|ch| eigenvalue_at(ch, &model, tau).ok())
        .map(|s| s.lambda)
        .filter(|l| *l > m && *l < top)
        .collect();
    exact.sort_by(f64::total_cmp);
    exact.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    println!("ball: {exact:?} below {top}");
    assert!(!exact.is_empty());

    let grid: Vec<f64> = (1..80).map(|k| m + (top - m) * k as f64 / 80.0).collect();
    let mut worst = Vec::new();
    for n in RESOLUTIONS {
        let ops = LayerOperators::new(&make_sphere(r, n, 2 * n).unwrap()).unwrap();
        let found = eigenvalues_in(&ops, &BieConfig::new(m), tau, &grid).unwrap();
        let lambdas: Vec<f64> = found.iter().map(|p| p.lambda).collect();
        println!("{n}: {lambdas:?} mult {:?}", found.iter().map(|p| p.multiplicity).collect::<Vec<_>>());
        assert_eq!(found.len(), exact.len(), "{n}x{}: {lambdas:?} vs {exact:?}", 2 * n);
        for p in &found {
            assert!(p.multiplicity >= 2 && p.multiplicity % 2 == 0, "{n}: {} has multiplicity {}", p.lambda, p.multiplicity);
        }
        worst.push(lambdas.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    println!("errors {worst:?}");
    assert!(worst.windows(2).all(|w| w[1] < w[0]), "{worst:?}");
}
