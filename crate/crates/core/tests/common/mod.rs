//! Independent oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use ability_vi::ability::{EventPair, PriorSpec, Psi};
use ability_vi::events::{CountRow, FixtureCountTable};
use ability_vi::variational::VariationalState;
use ability_vi::{FixtureId, PlayerId, TeamId};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub fn pair() -> EventPair {
    EventPair::new("Goal", "GoalStop").unwrap()
}

/// ln(k!) by direct summation.
pub fn ln_fact(k: u32) -> f64 {
    (1..=k).map(|j| f64::from(j).ln()).sum()
}

/// Two teams playing up to `max_fixtures` fixtures with up to `max_side`
/// players each; some players sit out some fixtures or play partial time.
pub fn random_instance(rng: &mut ChaCha8Rng, max_side: usize, max_fixtures: usize) -> FixtureCountTable {
    let n_side = rng.random_range(1..=max_side);
    let n_fix = rng.random_range(1..=max_fixtures);
    sized_instance(rng, n_side, n_fix)
}

/// As [`random_instance`] with exactly `n_side` players per team.
pub fn sized_instance(rng: &mut ChaCha8Rng, n_side: usize, n_fix: usize) -> FixtureCountTable {
    let mut rows = Vec::new();
    for f in 0..n_fix {
        let home_team = rng.random_range(0..2u64);
        for team in 0..2u64 {
            let mut any = false;
            for k in 0..n_side {
                let last = k + 1 == n_side;
                if (!last || any)
                    && rng.random_bool(0.2) {
                        continue;
                    }
                any = true;
                let tau = if rng.random_bool(0.6) {
                    1.0
                } else if rng.random_bool(0.1) {
                    0.0
                } else {
                    rng.random_range(0.05..1.0)
                };
                let counts = if tau == 0.0 {
                    vec![0, 0]
                } else {
                    (0..2)
                        .map(|_| {
                            let rate: f64 = rng.random_range(0.0..4.0) * tau;
                            if rate == 0.0 {
                                0
                            } else {
                                Poisson::new(rate).unwrap().sample(rng) as u32
                            }
                        })
                        .collect()
                };
                rows.push(CountRow {
                    fixture: FixtureId(f as u64),
                    player: PlayerId(team * 100 + k as u64),
                    team: TeamId(team),
                    home: team == home_team,
                    tau,
                    counts,
                });
            }
        }
    }
    FixtureCountTable::new(vec!["Goal".into(), "GoalStop".into()], rows).unwrap()
}

/// A random point in variational parameter space for the table's players.
pub fn random_state(rng: &mut ChaCha8Rng, counts: &FixtureCountTable) -> VariationalState {
    let mut s = VariationalState::for_counts(counts, pair(), &PriorSpec::default());
    for i in 0..s.players.len() {
        for e in 0..2 {
            s.mu[i][e] = rng.random_range(-1.5..0.8);
            s.sigma[i][e] = rng.random_range(0.05..0.8);
        }
    }
    for e in 0..2 {
        s.psi[e] = Psi {
            lambda1: rng.random_range(0.01..0.3),
            lambda2: rng.random_range(0.01..0.3),
            gamma: rng.random_range(-0.4..0.4),
        };
    }
    s
}

/// Log joint density minus log q at one sampled Δ, evaluated directly from
/// the model definition.
fn log_weight(
    state: &VariationalState,
    counts: &FixtureCountTable,
    prior: &PriorSpec,
    delta: &[[f64; 2]],
) -> f64 {
    let idx = |p: PlayerId| state.players.binary_search(&p).unwrap();
    let mut total = 0.0;
    for (i, d) in delta.iter().enumerate() {
        for e in 0..2 {
            let (m, s) = (state.mu[i][e], state.sigma[i][e]);
            let lp = -0.5 * (2.0 * std::f64::consts::PI * prior.s * prior.s).ln()
                - (d[e] - prior.m).powi(2) / (2.0 * prior.s * prior.s);
            let lq = -0.5 * (2.0 * std::f64::consts::PI * s * s).ln() - (d[e] - m).powi(2) / (2.0 * s * s);
            total += lp - lq;
        }
    }
    let mut by_fixture: std::collections::BTreeMap<FixtureId, Vec<&CountRow>> = Default::default();
    for r in counts.rows().iter().filter(|r| r.tau > 0.0) {
        by_fixture.entry(r.fixture).or_default().push(r);
    }
    for rows in by_fixture.values() {
        // Team sums of each event's abilities over the players on the pitch.
        let mut sums: Vec<(TeamId, [f64; 2])> = Vec::new();
        for q in rows {
            let d = delta[idx(q.player)];
            match sums.iter_mut().find(|(t, _)| *t == q.team) {
                Some((_, s)) => {
                    s[0] += d[0];
                    s[1] += d[1];
                }
                None => sums.push((q.team, d)),
            }
        }
        for r in rows {
            for e in 0..2 {
                let other = 1 - e;
                let psi = state.psi[e];
                let own = sums.iter().find(|(t, _)| *t == r.team).map_or(0.0, |(_, s)| s[e]);
                let opp = sums.iter().find(|(t, _)| *t != r.team).map_or(0.0, |(_, s)| s[other]);
                let log_eta = delta[idx(r.player)][e] + r.tau * (psi.lambda1 * own - psi.lambda2 * opp)
                    + if r.home { psi.gamma } else { 0.0 };
                let rate = log_eta.exp() * r.tau;
                let x = r.counts[e];
                total += f64::from(x) * rate.ln() - rate - ln_fact(x);
            }
        }
    }
    total
}

/// Monte Carlo ELBO estimate and its standard error.
pub fn mc_elbo(
    state: &VariationalState,
    counts: &FixtureCountTable,
    prior: &PriorSpec,
    n: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut delta = vec![[0.0; 2]; state.players.len()];
    for _ in 0..n {
        for (i, d) in delta.iter_mut().enumerate() {
            for e in 0..2 {
                let z: f64 = StandardNormal.sample(&mut rng);
                d[e] = state.mu[i][e] + state.sigma[i][e] * z;
            }
        }
        let w = log_weight(state, counts, prior, &delta);
        sum += w;
        sum_sq += w * w;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean) * nf / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Central finite-difference gradient of `f` in the state's unconstrained
/// coordinates.
pub fn finite_difference(
    state: &VariationalState,
    h: f64,
    f: impl Fn(&VariationalState) -> f64,
) -> Vec<f64> {
    let base = state.to_params();
    (0..base.len())
        .map(|k| {
            let mut s = state.clone();
            let mut p = base.clone();
            p[k] = base[k] + h;
            s.set_params(&p);
            let up = f(&s);
            p[k] = base[k] - h;
            s.set_params(&p);
            let down = f(&s);
            (up - down) / (2.0 * h)
        })
        .collect()
}
