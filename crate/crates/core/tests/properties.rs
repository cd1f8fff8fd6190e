//! Property tests: metric axioms, projection geometry, statistic
//! invariances, band ordering and scaling laws, and deterministic replay.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use wassreg::bands::{winf_band, BandOptions};
use wassreg::curve::{wasserstein2_distance, QuantileCurve};
use wassreg::fit::FitResult;
use wassreg::grid::TimeGrid;
use wassreg::inference::{global_statistic, test_global, Method, TestOptions};
use wassreg::isotonic::monotone_projection;
use wassreg::sim::{derive_seed, generate_dataset, SimConfig, TransportKind};
use wassreg::Dataset;

fn random_monotone_curve<R: Rng>(grid: &Arc<TimeGrid>, rng: &mut R) -> QuantileCurve {
    let mut v = Vec::with_capacity(grid.len());
    let mut acc = rng.random::<f64>() * 4.0 - 2.0;
    for _ in 0..grid.len() {
        acc += rng.random::<f64>() * 0.2;
        v.push(acc);
    }
    QuantileCurve::new(grid.clone(), v).unwrap()
}

#[test]
fn metric_axioms_on_random_triples() {
    let grid = TimeGrid::uniform(51);
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let a = random_monotone_curve(&grid, &mut rng);
        let b = random_monotone_curve(&grid, &mut rng);
        let c = random_monotone_curve(&grid, &mut rng);
        let dab = wasserstein2_distance(&a, &b).unwrap();
        let dba = wasserstein2_distance(&b, &a).unwrap();
        let dac = wasserstein2_distance(&a, &c).unwrap();
        let dcb = wasserstein2_distance(&c, &b).unwrap();
        assert_eq!(wasserstein2_distance(&a, &a).unwrap(), 0.0);
        assert!((dab - dba).abs() < 1e-12);
        assert!(dab <= dac + dcb + 1e-12, "triangle: {dab} > {dac} + {dcb}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_monotone(
        y in proptest::collection::vec(-10.0f64..10.0, 2..40),
        wseed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(wseed);
        let w: Vec<f64> = (0..y.len()).map(|_| 0.05 + rng.random::<f64>() * 4.0).collect();
        let once = monotone_projection(&y, &w, None).unwrap();
        prop_assert!(once.windows(2).all(|p| p[1] >= p[0]));
        let twice = monotone_projection(&once, &w, None).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_nonexpansive(
        y in proptestcollection_pair(),
        wseed in 0u64..1000,
    ) {
        let (y1, y2) = y;
        let mut rng = ChaCha8Rng::seed_from_u64(wseed);
        let w: Vec<f64> = (0..y1.len()).map(|_| 0.05 + rng.random::<f64>() * 4.0).collect();
        let p1 = monotone_projection(&y1, &w, None).unwrap();
        let p2 = monotone_projection(&y2, &w, None).unwrap();
        let norm = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(&w).map(|((x, y), w)| w * (x - y) * (x - y)).sum()
        };
        prop_assert!(norm(&p1, &p2) <= norm(&y1, &y2) + 1e-10);
    }

    #[test]
    fn weights_always_average_to_one(
        xseed in 0u64..500,
        n in 6usize..40,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(xseed);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        if let Ok(summary) = wassreg::DesignSummary::new(&x) {
            let at = DVector::from_vec(vec![
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ]);
            let w = summary.empirical_weights(&x, &at).unwrap();
            let mean = w.iter().sum::<f64>() / n as f64;
            prop_assert!((mean - 1.0).abs() < 1e-10);
        }
    }
}

fn proptestcollection_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..30).prop_flat_map(|len| {
        (
            proptest::collection::vec(-10.0f64..10.0, len),
            proptest::collection::vec(-10.0f64..10.0, len),
        )
    })
}

#[test]
fn statistic_invariant_under_relabeling_and_shift() {
    let config = SimConfig { grid_size: 201, ..SimConfig::global_design(40, 0.3, TransportKind::Linear) };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gen = generate_dataset(&config, &mut rng).unwrap();
    let stat = global_statistic(&FitResult::fit(&gen.data).unwrap());

    // relabel observations
    let n = gen.data.n();
    let perm: Vec<usize> = (0..n).rev().collect();
    let x = DMatrix::from_fn(n, 2, |i, j| gen.data.predictors()[(perm[i], j)]);
    let curves: Vec<QuantileCurve> = perm.iter().map(|&i| gen.data.quantile(i).clone()).collect();
    let relabeled = Dataset::new(x, curves, None).unwrap();
    let stat_relabeled = global_statistic(&FitResult::fit(&relabeled).unwrap());
    assert!((stat - stat_relabeled).abs() < 1e-9 * stat.max(1.0));

    // common location shift of every curve
    let grid = gen.data.grid().clone();
    let shifted_curves: Vec<QuantileCurve> = (0..n)
        .map(|i| {
            QuantileCurve::new(
                grid.clone(),
                gen.data.quantile(i).values().iter().map(|v| v + 11.0).collect(),
            )
            .unwrap()
        })
        .collect();
    let shifted = Dataset::new(gen.data.predictors().clone(), shifted_curves, None).unwrap();
    let stat_shifted = global_statistic(&FitResult::fit(&shifted).unwrap());
    assert!((stat - stat_shifted).abs() < 1e-9 * stat.max(1.0));
}

#[test]
fn mixture_report_replays_bit_for_bit() {
    let config = SimConfig { grid_size: 201, ..SimConfig::global_design(50, 0.2, TransportKind::Linear) };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gen = generate_dataset(&config, &mut rng).unwrap();
    let opts = TestOptions::new(0.05, Method::Mixture, 123);
    let a = test_global(&gen.data, opts).unwrap();
    let b = test_global(&gen.data, opts).unwrap();
    assert_eq!(a, b);
    assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    assert_eq!(a.reject, a.statistic > a.critical_value);
    // reject <=> p < alpha, up to the Monte Carlo resolution of 1/R
    let slack = 2.0 / opts.mc_reps as f64;
    if a.reject {
        assert!(a.p_value < a.alpha + slack);
    } else {
        assert!(a.p_value >= a.alpha - slack);
    }
}

#[test]
fn critical_values_decrease_in_alpha() {
    let config = SimConfig { grid_size: 201, ..SimConfig::global_design(60, 0.2, TransportKind::Linear) };
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let gen = generate_dataset(&config, &mut rng).unwrap();
    let mut prev = f64::INFINITY;
    for &alpha in &[0.01, 0.05, 0.10, 0.20] {
        let mut opts = TestOptions::new(alpha, Method::Mixture, 5);
        opts.mc_reps = 20_000;
        let crit = test_global(&gen.data, opts).unwrap().critical_value;
        assert!(crit < prev, "critical value not decreasing at alpha={alpha}");
        prev = crit;
    }
    let mut prev = f64::INFINITY;
    for &alpha in &[0.01, 0.05, 0.10, 0.20] {
        let crit = test_global(&gen.data, TestOptions::new(alpha, Method::Satterthwaite, 5))
            .unwrap()
            .critical_value;
        assert!(crit < prev);
        prev = crit;
    }
}

#[test]
fn band_half_width_scales_with_root_n() {
    // doubling n on the same data-generating law shrinks the median
    // half-width by √2, within tolerance
    let mut widths = Vec::new();
    for &n in &[200usize, 400] {
        let config = SimConfig { grid_size: 201, ..SimConfig::coverage_design(n, TransportKind::Linear) };
        let mut medians = Vec::new();
        for rep in 0..30u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(9, &[n as u64, rep]));
            let gen = generate_dataset(&config, &mut rng).unwrap();
            let fit = FitResult::fit(&gen.data).unwrap();
            let band = winf_band(
                &gen.data,
                &fit,
                &DVector::from_vec(vec![0.1]),
                &BandOptions::new(0.05, 1000, derive_seed(9, &[n as u64, rep, 7])),
            )
            .unwrap();
            let mut hw: Vec<f64> =
                (0..band.abscissa.len()).map(|l| band.half_width(l)).collect();
            hw.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(hw[hw.len() / 2]);
        }
        medians.sort_by(|a, b| a.partial_cmp(b).unwrap());
        widths.push(medians[medians.len() / 2]);
    }
    let ratio = widths[0] / widths[1];
    let expect = 2f64.sqrt();
    assert!(
        (ratio - expect).abs() < 0.1 * expect,
        "half-width ratio {ratio} vs √2"
    );
}

#[test]
fn coverage_decision_invariant_to_pivot_floor() {
    let config = SimConfig { grid_size: 201, ..SimConfig::coverage_design(150, TransportKind::Linear) };
    for rep in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(77, &[rep]));
        let gen = generate_dataset(&config, &mut rng).unwrap();
        let fit = FitResult::fit(&gen.data).unwrap();
        let x = DVector::from_vec(vec![0.0]);
        let truth: Vec<f64> = gen
            .data
            .grid()
            .points()
            .iter()
            .map(|&t| 2.0 * wassreg::sim::base_quantile(t))
            .collect();
        let mut decisions = Vec::new();
        for &tol in &[1e-12, 1e-14] {
            let mut opts = BandOptions::new(0.05, 1000, derive_seed(77, &[rep, 1]));
            opts.pivot_tol = tol;
            let band = winf_band(&gen.data, &fit, &x, &opts).unwrap();
            decisions.push(band.covers(&truth));
        }
        assert_eq!(decisions[0], decisions[1], "rep {rep}: floor changed the decision");
    }
}

#[test]
fn winf_bracket_never_crosses() {
    let config = SimConfig { grid_size: 201, ..SimConfig::coverage_design(80, TransportKind::Nonlinear) };
    for rep in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(31, &[rep]));
        let gen = generate_dataset(&config, &mut rng).unwrap();
        let fit = FitResult::fit(&gen.data).unwrap();
        let x = DVector::from_vec(vec![rng.random::<f64>() - 0.5]);
        let band = winf_band(
            &gen.data,
            &fit,
            &x,
            &BandOptions::new(0.05, 500, derive_seed(31, &[rep, 2])),
        )
        .unwrap();
        for l in 0..band.abscissa.len() {
            assert!(band.lower[l] <= band.upper[l] + 1e-12);
        }
    }
}
