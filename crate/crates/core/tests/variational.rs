mod common;

use ability_vi::ability::PriorSpec;
use ability_vi::events::FixtureCountTable;
use ability_vi::variational::{
    elbo, eta_prediction_interval, fit, grad_elbo, Objective, OptimizerConfig, VariationalState,
};
use ability_vi::{Error, PlayerId};
use common::{finite_difference, mc_elbo, pair, random_instance, random_state};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gradient_matches_finite_differences() {
    let prior = PriorSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let counts = random_instance(&mut rng, 3, 4);
        let state = random_state(&mut rng, &counts);
        let analytic = grad_elbo(&state, &counts, &prior).unwrap().flatten();
        let numeric = finite_difference(&state, 1e-5, |s| elbo(s, &counts, &prior).unwrap());
        for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1.0);
            assert!(rel < 1e-5, "{}: {a} vs {n}", state.coordinate_name(k));
        }
    }
}

#[test]
fn closed_form_agrees_with_monte_carlo() {
    let prior = PriorSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..3 {
        let counts = random_instance(&mut rng, 3, 3);
        let state = random_state(&mut rng, &counts);
        let closed = elbo(&state, &counts, &prior).unwrap();
        let (mc, se) = mc_elbo(&state, &counts, &prior, 20_000, 100 + k);
        assert!((closed - mc).abs() <= 3.0 * se, "{closed} vs {mc} ± {se}");
    }
}

#[test]
fn zero_iterations_return_the_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let counts = random_instance(&mut rng, 3, 3);
    let prior = PriorSpec::default();
    let config = OptimizerConfig {
        max_iters: 0,
        ..Default::default()
    };
    let (state, trace) = fit(&counts, &pair(), &prior, &config).unwrap();
    assert_eq!(state, VariationalState::for_counts(&counts, pair(), &prior));
    assert_eq!(trace.points.len(), 1);
    assert_eq!(trace.points[0].iter, 0);
}

#[test]
fn fit_without_data_stays_at_the_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = random_instance(&mut rng, 3, 2);
    // Drop every event but keep the players.
    let rows = counts
        .rows()
        .iter()
        .cloned()
        .map(|mut r| {
            r.counts = vec![0, 0];
            r.tau = 0.0;
            r
        })
        .collect();
    counts = FixtureCountTable::new(counts.columns().to_vec(), rows).unwrap();
    let prior = PriorSpec::default();
    let config = OptimizerConfig {
        max_iters: 300,
        ..Default::default()
    };
    let (state, trace) = fit(&counts, &pair(), &prior, &config).unwrap();
    for i in 0..state.players.len() {
        for e in 0..2 {
            assert!((state.mu[i][e] + 2.0).abs() < 1e-12);
            assert!((state.sigma[i][e] - 2.0).abs() < 1e-12);
        }
    }
    assert!(trace.history.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn fitted_optimum_is_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let counts = random_instance(&mut rng, 4, 6);
    let prior = PriorSpec::default();
    let config = OptimizerConfig {
        max_iters: 30_000,
        learning_rate: 0.02,
        final_learning_rate: 1e-5,
        ..Default::default()
    };
    let (state, trace) = fit(&counts, &pair(), &prior, &config).unwrap();
    let g = grad_elbo(&state, &counts, &prior).unwrap().flatten();
    let worst = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(worst < 1e-4, "gradient sup-norm {worst}");
    assert!(trace.converged_at.is_some());
    // Recorded every 100 iterations including the start and the end.
    assert_eq!(trace.points.len(), 301);
    assert!(trace.points.windows(2).all(|w| w[0].iter < w[1].iter));
}

#[test]
fn non_finite_objective_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let counts = random_instance(&mut rng, 3, 3);
    let prior = PriorSpec::default();
    let mut init = VariationalState::for_counts(&counts, pair(), &prior);
    init.mu[0] = [800.0, 800.0];
    let obj = Objective::new(&counts, &init, &prior).unwrap();
    assert!(!obj.value(&init).is_finite() || obj.design().rows.is_empty());
    if !obj.design().rows.is_empty() {
        let err = ability_vi::variational::fit_from(
            &counts,
            init,
            &prior,
            &OptimizerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { iteration: 0, .. }), "{err}");
    }
}

#[test]
fn prediction_intervals() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let counts = random_instance(&mut rng, 4, 3);
    let mut state = random_state(&mut rng, &counts);
    let row = counts.rows().iter().find(|r| r.tau > 0.0).unwrap().clone();

    let mut sharp = state.clone();
    for s in &mut sharp.sigma {
        *s = [0.0, 0.0];
    }
    let (lo, hi) =
        eta_prediction_interval(row.player, row.fixture, "Goal", &sharp, &counts, 0.95, 1000, 1)
            .unwrap();
    assert_eq!(lo, hi);

    let narrow =
        eta_prediction_interval(row.player, row.fixture, "Goal", &state, &counts, 0.95, 10_000, 2)
            .unwrap();
    for s in &mut state.sigma {
        s[0] *= 2.0;
        s[1] *= 2.0;
    }
    let wide =
        eta_prediction_interval(row.player, row.fixture, "Goal", &state, &counts, 0.95, 10_000, 2)
            .unwrap();
    assert!(wide.1 - wide.0 >= narrow.1 - narrow.0);
    assert!(eta_prediction_interval(PlayerId(999), row.fixture, "Goal", &state, &counts, 0.95, 10, 1)
        .is_err());
}
