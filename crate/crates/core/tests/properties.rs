mod common;

use std::collections::BTreeMap;

use ability_vi::ability::{PriorSpec, Psi};
use ability_vi::analytics::{gaussian_quantile, rank_players, simulate_predictive, team_total_stats};
use ability_vi::events::{
    aggregate_counts, filter_events, EventTaxonomy, EventType, FixtureMeta, Outcome, Period, PlayerAppearance,
    RawTouchEvent,
};
use ability_vi::goals::roc_auc;
use ability_vi::synth::{SynthConfig, SynthWorld};
use ability_vi::variational::VariationalState;
use ability_vi::{FixtureId, PlayerId, TeamId};
use common::{pair, random_instance};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn event_strategy() -> impl Strategy<Value = (FixtureId, RawTouchEvent)> {
    (
        1u64..3,
        0u32..95,
        0usize..EventType::ALL.len(),
        prop::bool::ANY,
        0u64..2,
        0u64..4,
    )
        .prop_map(|(f, minute, e, ok, team, k)| {
            (
                FixtureId(f),
                RawTouchEvent {
                    minute,
                    second: 0,
                    period: if minute < 45 { Period::FirstHalf } else { Period::SecondHalf },
                    team: TeamId(team + 1),
                    player: PlayerId((team + 1) * 10 + k),
                    event_type: EventType::ALL[e],
                    outcome: if ok { Outcome::Successful } else { Outcome::Unsuccessful },
                },
            )
        })
}

fn two_fixtures() -> (BTreeMap<FixtureId, FixtureMeta>, Vec<PlayerAppearance>) {
    let mut fixtures = BTreeMap::new();
    let mut appearances = Vec::new();
    for f in 1..3 {
        fixtures.insert(
            FixtureId(f),
            FixtureMeta {
                fixture: FixtureId(f),
                home_team: TeamId(1),
                away_team: TeamId(2),
                date: format!("d{f}"),
                block_label: None,
                home_goals: None,
                away_goals: None,
            },
        );
        for team in 1..3u64 {
            for k in 0..4 {
                appearances.push(PlayerAppearance::new(FixtureId(f), PlayerId(team * 10 + k), TeamId(team), 90.0).unwrap());
            }
        }
    }
    (fixtures, appearances)
}

fn brute_auc(pts: &[(f64, bool)]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for p in pts.iter().filter(|p| p.1) {
        for q in pts.iter().filter(|q| !q.1) {
            pairs += 1.0;
            wins += if p.0 > q.0 {
                1.0
            } else if p.0 == q.0 {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

proptest! {
    #[test]
    fn filtering_is_idempotent(events in prop::collection::vec(event_strategy(), 0..200)) {
        let taxonomy = EventTaxonomy::standard();
        let once = filter_events(events, &taxonomy);
        let twice = filter_events(once.clone(), &taxonomy);
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.iter().all(|(_, e)| taxonomy.is_active_play(e.event_type)));
    }

    #[test]
    fn composites_sum_their_members(events in prop::collection::vec(event_strategy(), 0..200)) {
        let taxonomy = EventTaxonomy::standard();
        let events = filter_events(events, &taxonomy);
        let (fixtures, appearances) = two_fixtures();
        for name in ["GoalStop", "Shots", "ShotStop", "AntiPass"] {
            let members: Vec<String> =
                taxonomy.composite(name).unwrap().iter().map(|e| e.as_str().to_string()).collect();
            let mut columns = members.clone();
            columns.push(name.to_string());
            let table = aggregate_counts(&events, &fixtures, &appearances, &taxonomy, &columns).unwrap();
            let c = table.column_index(name).unwrap();
            for row in table.rows() {
                let sum: u32 = members.iter().map(|m| row.counts[table.column_index(m).unwrap()]).sum();
                prop_assert_eq!(row.counts[c], sum);
            }
        }
    }

    #[test]
    fn ranks_form_a_permutation(seed in 0u64..1000, top in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = random_instance(&mut rng, 6, 5);
        let state = common::random_state(&mut rng, &counts);
        let ranking = rank_players(&state, "Goal", &counts, top).unwrap();
        let n = state.players.len().min(top);
        prop_assert_eq!(ranking.rows.len(), n);
        for (k, r) in ranking.rows.iter().enumerate() {
            prop_assert_eq!(r.rank, k + 1);
            prop_assert_eq!(r.rank_difference, r.observed_rank as i64 - r.rank as i64);
        }
        prop_assert!(ranking.rows.windows(2).all(|w| w[0].quantile_2_5 >= w[1].quantile_2_5));
        let full = rank_players(&state, "Goal", &counts, usize::MAX).unwrap();
        let mut observed: Vec<usize> = full.rows.iter().map(|r| r.observed_rank).collect();
        observed.sort();
        prop_assert_eq!(observed, (1..=state.players.len()).collect::<Vec<_>>());
        let mut ids: Vec<PlayerId> = full.rows.iter().map(|r| r.player_id).collect();
        ids.sort();
        prop_assert_eq!(&ids, &state.players);
    }

    #[test]
    fn quantile_is_monotone(mu in -5.0f64..5.0, sigma in 0.01f64..3.0, p in 0.001f64..0.998, dp in 0.0001f64..0.001) {
        let q = gaussian_quantile(mu, sigma, p).unwrap();
        prop_assert!(gaussian_quantile(mu, sigma, p + dp).unwrap() > q);
        prop_assert!(gaussian_quantile(mu + 0.1, sigma, p).unwrap() > q);
        if p < 0.5 {
            prop_assert!(gaussian_quantile(mu, sigma * 1.1, p).unwrap() < q);
        }
    }

    #[test]
    fn auc_matches_pairwise_count(
        pts in prop::collection::vec((0u8..10, prop::bool::ANY), 2..200),
    ) {
        let mut pts: Vec<(f64, bool)> = pts.into_iter().map(|(s, y)| (f64::from(s) / 10.0, y)).collect();
        pts[0].1 = true;
        pts[1].1 = false;
        let (roc, auc) = roc_auc(&pts).unwrap();
        prop_assert!((auc - brute_auc(&pts)).abs() < 1e-12);
        prop_assert!(roc.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
        // Invariant under a strictly increasing transform of the scores.
        let warped: Vec<(f64, bool)> = pts.iter().map(|(s, y)| ((3.0 * s).exp(), *y)).collect();
        prop_assert!((roc_auc(&warped).unwrap().1 - auc).abs() < 1e-12);
    }

    #[test]
    fn box_stats_are_ordered(xs in prop::collection::vec(-100.0f64..100.0, 1..100)) {
        let b = team_total_stats(&xs).unwrap();
        prop_assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
        prop_assert_eq!(b.min, xs.iter().copied().fold(f64::INFINITY, f64::min));
        prop_assert_eq!(b.max, xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn synthetic_worlds_are_reproducible(seed in 0u64..1_000_000) {
        let config = SynthConfig { n_teams: 4, seed, ..SynthConfig::default() };
        let a = SynthWorld::build(&config).unwrap();
        let b = SynthWorld::build(&config).unwrap();
        prop_assert_eq!(a.count_table().unwrap(), b.count_table().unwrap());
        prop_assert_eq!(a.match_results(None).unwrap(), b.match_results(None).unwrap());
        prop_assert_eq!(&a.truth, &b.truth);
    }
}

#[test]
fn simulated_means_match_lognormal_rates() {
    // Without coupling or home terms a cell's mean is τ exp(μ + σ²/2).
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let counts = random_instance(&mut rng, 3, 2);
    let mut state = VariationalState::for_counts(&counts, pair(), &PriorSpec::default());
    for i in 0..state.players.len() {
        state.mu[i] = [0.2 - 0.1 * i as f64, -0.5];
        state.sigma[i] = [0.3, 0.2 + 0.05 * i as f64];
    }
    state.psi = [Psi { lambda1: 0.0, lambda2: 0.0, gamma: 0.0 }; 2];
    let n = 20_000;
    let mut sums = vec![[0.0f64; 2]; counts.rows().len()];
    let mut sq = vec![[0.0f64; 2]; counts.rows().len()];
    for d in simulate_predictive(&state, &counts, n, 5).unwrap() {
        for (k, c) in d.cells.iter().enumerate() {
            for e in 0..2 {
                sums[k][e] += f64::from(c[e]);
                sq[k][e] += f64::from(c[e]).powi(2);
            }
        }
    }
    for (k, row) in counts.rows().iter().enumerate() {
        let i = state.player_index(row.player).unwrap();
        for e in 0..2 {
            let expected = row.tau * (state.mu[i][e] + state.sigma[i][e].powi(2) / 2.0).exp();
            let mean = sums[k][e] / n as f64;
            let var = sq[k][e] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            if row.tau == 0.0 {
                assert_eq!(mean, 0.0);
            } else {
                assert!((mean - expected).abs() <= 3.0 * se, "row {k} event {e}: {mean} vs {expected}");
            }
        }
    }
}
