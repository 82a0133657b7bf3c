//! One function per subcommand. Each claims its outputs up front, computes,
//! writes, and returns the tag that names its manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ability_vi::ability::EventPair;
use ability_vi::analytics::{
    observed_team_totals, rank_players, simulate_predictive, team_total_stats, team_totals, trajectory,
    write_trajectories, QUARTILE_METHOD,
};
use ability_vi::events::{
    aggregate_counts, derive_appearances, derive_starters, filter_events, merge_appearances, read_appearances,
    read_fixtures, read_touch_log, EventTaxonomy, FixtureCountTable,
};
use ability_vi::goals::{
    features_for, mcmc_fit, predict_over_under, roc_auc, run_block_experiment, AbilityTable,
    BlockPrediction, BlockSchedule, ExperimentConfig, HierDraw, MatchResult, McmcConfig, ModelKind,
};
use ability_vi::synth::{write_world, SynthWorld};
use ability_vi::variational::{fit, PosteriorDocument, VariationalState};
use ability_vi::{FixtureId, TeamId};

use crate::run::{io_error, CliError, CliResult, Context};

fn existing(path: &Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
    let path = path
        .clone()
        .ok_or_else(|| CliError::Validation(format!("{key} is not set in the configuration")))?;
    if !path.exists() {
        return Err(CliError::Validation(format!("{key} {} does not exist", path.display())));
    }
    Ok(path)
}

/// An artifact an earlier stage should have written.
fn upstream(ctx: &Context, stage: &str, name: &str) -> CliResult<PathBuf> {
    let path = ctx.stage_dir(stage).join(name);
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "{} does not exist; run {stage} first",
            path.display()
        )));
    }
    Ok(path)
}

fn pair_tag(pair: &[String; 2], block: Option<usize>) -> String {
    match block {
        Some(b) => format!("{}-{}.block{b}", pair[0], pair[1]),
        None => format!("{}-{}", pair[0], pair[1]),
    }
}

fn block_suffix(block: Option<usize>) -> String {
    block.map(|b| format!(".block{b}")).unwrap_or_default()
}

fn event_pair(ctx: &Context) -> CliResult<[String; 2]> {
    let pair = ctx.config.ability_model.pair.clone().ok_or_else(|| {
        CliError::Validation("no event pair: pass --event-pair A,B or set [ability-model] pair".into())
    })?;
    EventPair::new(pair[0].clone(), pair[1].clone())?;
    Ok(pair)
}

fn model(ctx: &Context) -> ModelKind {
    ctx.config.goals.model
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error("cannot read", path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(format!("serializing: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error("cannot write", path, e))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| io_error("cannot write", path, e))
}

fn csv_done(mut w: csv::Writer<std::fs::File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| io_error("cannot write", path, e))
}

fn load_schedule(ctx: &Context) -> CliResult<BlockSchedule> {
    let path = ctx.stage_dir("ingest").join("blocks.json");
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "{} does not exist: the fixtures file carries no block labels",
            path.display()
        )));
    }
    read_json(&path)
}

fn check_block(schedule: &BlockSchedule, b: usize, first: usize) -> CliResult<()> {
    if b < first || b >= schedule.blocks.len() {
        return Err(CliError::Validation(format!(
            "--block {b} is outside {first}..{} for this schedule",
            schedule.blocks.len() - 1
        )));
    }
    Ok(())
}

/// The counts table, restricted to blocks 0..=b when a block is given.
fn load_counts(ctx: &Context, block: Option<usize>) -> CliResult<FixtureCountTable> {
    let counts = FixtureCountTable::read_path(&upstream(ctx, "ingest", "counts.csv")?)?;
    match block {
        None => Ok(counts),
        Some(b) => {
            let schedule = load_schedule(ctx)?;
            check_block(&schedule, b, 0)?;
            let keep: BTreeSet<FixtureId> = schedule.blocks[..=b].iter().flatten().copied().collect();
            Ok(counts.restrict(&keep))
        }
    }
}

fn posterior_name(pair: &[String; 2], block: Option<usize>) -> String {
    format!("posterior.{}.json", pair_tag(pair, block))
}

fn load_state(ctx: &Context, pair: &[String; 2], block: Option<usize>) -> CliResult<VariationalState> {
    let path = upstream(ctx, "fit-ability", &posterior_name(pair, block))?;
    Ok(PosteriorDocument::read(&path)?.state()?)
}

/// Factors of every lineup-term pair fitted on blocks 0..=b.
fn load_abilities(ctx: &Context, block: Option<usize>) -> CliResult<AbilityTable> {
    let states = ctx
        .config
        .goals
        .pairs()
        .iter()
        .map(|p| load_state(ctx, p, block))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(AbilityTable::from_states(&states, ctx.config.ability_model.prior()))
}

fn experiment_config(ctx: &Context, seed: u64) -> CliResult<ExperimentConfig> {
    Ok(ExperimentConfig {
        mcmc: McmcConfig {
            seed,
            ..ctx.config.goals.mcmc.clone()
        },
        features: ctx.config.goals.features()?,
        point: ctx.config.goals.point,
        threshold: ctx.config.goals.threshold,
    })
}

pub fn ingest(ctx: &mut Context) -> CliResult<String> {
    let ed = ctx.config.event_data.clone();
    let events_path = existing(&ed.events, "[event-data] events")?;
    let fixtures_path = existing(&ed.fixtures, "[event-data] fixtures")?;
    let appearances_path = match &ed.appearances {
        Some(_) => Some(existing(&ed.appearances, "[event-data] appearances")?),
        None => None,
    };
    let taxonomy = EventTaxonomy::standard();
    let columns = ed.columns.clone().unwrap_or_else(|| taxonomy.column_names());

    let fixtures = read_fixtures(&fixtures_path)?;
    let labelled: Vec<(FixtureId, String)> = fixtures
        .values()
        .filter_map(|m| m.block_label.clone().map(|l| (m.fixture, l)))
        .collect();
    let counts_out = ctx.claim("counts.csv")?;
    let matches_out = ctx.claim("matches.json")?;
    let blocks_out = if labelled.is_empty() {
        None
    } else {
        Some(ctx.claim("blocks.json")?)
    };

    let log = read_touch_log(&events_path, &fixtures)?;
    let derived = derive_appearances(&log)?;
    let explicit = match &appearances_path {
        Some(p) => read_appearances(p)?,
        None => Vec::new(),
    };
    let appearances = merge_appearances(derived, explicit);
    let events = filter_events(log.events.clone(), &taxonomy);
    let counts = aggregate_counts(&events, &fixtures, &appearances, &taxonomy, &columns)?;
    counts.write_path(&counts_out)?;

    let by_fixture = log.by_fixture();
    let mut matches = Vec::new();
    for meta in fixtures.values() {
        let (Some(y_h), Some(y_a)) = (meta.home_goals, meta.away_goals) else {
            continue;
        };
        let evs = by_fixture.get(&meta.fixture).map(Vec::as_slice).unwrap_or(&[]);
        let starters = |team: TeamId| -> CliResult<Vec<_>> {
            let mut xi = derive_starters(evs, team)
                .map_err(|e| CliError::Validation(format!("fixture {}: {e}", meta.fixture)))?;
            xi.sort();
            Ok(xi)
        };
        let m = MatchResult {
            fixture: meta.fixture,
            home_team: meta.home_team,
            away_team: meta.away_team,
            y_h,
            y_a,
            starters_home: starters(meta.home_team)?,
            starters_away: starters(meta.away_team)?,
        };
        m.validate()?;
        matches.push(m);
    }
    write_json(&matches_out, &matches)?;

    if let Some(path) = blocks_out {
        if labelled.len() != fixtures.len() {
            return Err(CliError::Validation(format!(
                "{}: {} of {} fixtures carry a block label; label all or none",
                fixtures_path.display(),
                labelled.len(),
                fixtures.len()
            )));
        }
        let teams: BTreeMap<FixtureId, (TeamId, TeamId)> =
            fixtures.values().map(|m| (m.fixture, (m.home_team, m.away_team))).collect();
        let schedule = BlockSchedule::from_labels(&labelled, &teams)?;
        write_json(&path, &schedule)?;
    }
    tracing::info!(rows = counts.rows().len(), matches = matches.len(), "ingested");
    Ok(String::new())
}

pub fn fit_ability(ctx: &mut Context) -> CliResult<String> {
    let pair = event_pair(ctx)?;
    let block = ctx.flags.block;
    let counts = load_counts(ctx, block)?.select(&[pair[0].as_str(), pair[1].as_str()])?;
    let out = ctx.claim(&posterior_name(&pair, block))?;
    let event_pair = EventPair::new(pair[0].clone(), pair[1].clone())?;
    let (state, trace) = fit(&counts, &event_pair, &ctx.config.ability_model.prior(), &ctx.config.variational)?;
    PosteriorDocument::new(&state, &trace).write(&out)?;
    Ok(pair_tag(&pair, block))
}

pub fn rank(ctx: &mut Context) -> CliResult<String> {
    let pair = event_pair(ctx)?;
    let block = ctx.flags.block;
    let state = load_state(ctx, &pair, block)?;
    let counts = load_counts(ctx, block)?;
    let top_n = ctx.config.analytics.top_n;
    for event in &pair {
        let out = ctx.claim(&format!("ranking.{event}{}.csv", block_suffix(block)))?;
        rank_players(&state, event, &counts, top_n)?.write_path(&out)?;
    }

    // Trajectories over every block fitted so far.
    if block.is_none() && ctx.stage_dir("ingest").join("blocks.json").exists() {
        let n_blocks = load_schedule(ctx)?.blocks.len();
        let states: Vec<VariationalState> = (0..n_blocks)
            .map_while(|b| load_state(ctx, &pair, Some(b)).ok())
            .collect();
        if !states.is_empty() {
            let out = ctx.claim(&format!("trajectories.{}.csv", pair_tag(&pair, None)))?;
            let players: BTreeSet<_> = states.iter().flat_map(|s| s.players.iter().copied()).collect();
            let prior = ctx.config.ability_model.prior();
            let mut points = Vec::new();
            for p in players {
                for event in &pair {
                    points.extend(trajectory(&states, p, event, &prior)?);
                }
            }
            let file = std::fs::File::create(&out).map_err(|e| io_error("cannot write", &out, e))?;
            write_trajectories(&points, file)?;
        }
    }
    Ok(pair_tag(&pair, block))
}

pub fn simulate(ctx: &mut Context) -> CliResult<String> {
    let seed = ctx.seed()?;
    let pair = event_pair(ctx)?;
    let block = ctx.flags.block;
    let state = load_state(ctx, &pair, block)?;
    let counts = load_counts(ctx, block)?;
    let out = ctx.claim(&format!("box_stats.{}.csv", pair_tag(&pair, block)))?;

    let mut simulated: BTreeMap<TeamId, [Vec<f64>; 2]> = BTreeMap::new();
    for draw in simulate_predictive(&state, &counts, ctx.config.analytics.n_draws, seed)? {
        for ((_, team), v) in team_totals(&counts, &draw.cells) {
            let slot = simulated.entry(team).or_default();
            slot[0].push(f64::from(v[0]));
            slot[1].push(f64::from(v[1]));
        }
    }
    let mut w = csv_writer(&out)?;
    w.write_record(["team_id", "event_type", "source", "min", "q1", "median", "q3", "max", "quartile_method"])
        .map_err(|e| io_error("cannot write", &out, e))?;
    for (team, sims) in &simulated {
        for (e, event) in pair.iter().enumerate() {
            let observed = observed_team_totals(&counts, *team, event)?;
            for (source, values) in [("observed", &observed), ("simulated", &sims[e])] {
                let b = team_total_stats(values)?;
                let row = [
                    team.to_string(),
                    event.clone(),
                    source.to_string(),
                    b.min.to_string(),
                    b.q1.to_string(),
                    b.median.to_string(),
                    b.q3.to_string(),
                    b.max.to_string(),
                    QUARTILE_METHOD.to_string(),
                ];
                w.write_record(&row).map_err(|e| io_error("cannot write", &out, e))?;
            }
        }
    }
    csv_done(w, &out)?;
    Ok(pair_tag(&pair, block))
}

fn load_matches(ctx: &Context) -> CliResult<Vec<MatchResult>> {
    read_json(&upstream(ctx, "ingest", "matches.json")?)
}

fn draws_name(model: ModelKind, block: Option<usize>) -> String {
    format!("draws.{}{}.jsonl", model.as_str(), block_suffix(block))
}

pub fn fit_goals(ctx: &mut Context) -> CliResult<String> {
    let seed = ctx.seed()?;
    let model = model(ctx);
    let block = ctx.flags.block;
    let matches = load_matches(ctx)?;
    let train: Vec<&MatchResult> = match block {
        None => matches.iter().collect(),
        Some(b) => {
            let schedule = load_schedule(ctx)?;
            check_block(&schedule, b, 1)?;
            let keep: BTreeSet<FixtureId> = schedule.blocks[..b].iter().flatten().copied().collect();
            matches.iter().filter(|m| keep.contains(&m.fixture)).collect()
        }
    };
    let config = experiment_config(ctx, seed.wrapping_add(block.unwrap_or(0) as u64))?;
    let features = match model {
        ModelKind::Baseline => None,
        ModelKind::Extended => {
            let table = load_abilities(ctx, block.map(|b| b - 1))?;
            Some(features_for(&train, &table, &config)?)
        }
    };
    let suffix = format!("{}{}", model.as_str(), block_suffix(block));
    let draws_out = ctx.claim(&draws_name(model, block))?;
    let diag_out = ctx.claim(&format!("diagnostics.{suffix}.csv"))?;
    let accept_out = ctx.claim(&format!("acceptance.{suffix}.csv"))?;

    let teams: BTreeSet<TeamId> = train.iter().flat_map(|m| [m.home_team, m.away_team]).collect();
    let owned: Vec<MatchResult> = train.iter().map(|m| (*m).clone()).collect();
    let fit = mcmc_fit(&teams, &owned, features.as_deref(), &config.mcmc)?;

    let file = std::fs::File::create(&draws_out).map_err(|e| io_error("cannot write", &draws_out, e))?;
    let mut w = std::io::BufWriter::new(file);
    for d in &fit.draws {
        let line = serde_json::to_string(d).map_err(|e| CliError::Runtime(format!("serializing draw: {e}")))?;
        writeln!(w, "{line}").map_err(|e| io_error("cannot write", &draws_out, e))?;
    }
    w.flush().map_err(|e| io_error("cannot write", &draws_out, e))?;

    let mut w = csv_writer(&diag_out)?;
    for d in &fit.diagnostics {
        w.serialize(d).map_err(|e| io_error("cannot write", &diag_out, e))?;
    }
    csv_done(w, &diag_out)?;
    let mut w = csv_writer(&accept_out)?;
    w.write_record(["coordinate", "acceptance"]).map_err(|e| io_error("cannot write", &accept_out, e))?;
    for (name, rate) in &fit.acceptance {
        w.write_record([name.clone(), rate.to_string()])
            .map_err(|e| io_error("cannot write", &accept_out, e))?;
    }
    csv_done(w, &accept_out)?;
    Ok(suffix)
}

fn read_draws(path: &Path) -> CliResult<Vec<HierDraw>> {
    let file = std::fs::File::open(path).map_err(|e| io_error("cannot read", path, e))?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(k, line)| {
            let line = line.map_err(|e| io_error("cannot read", path, e))?;
            serde_json::from_str(&line)
                .map_err(|e| CliError::Validation(format!("{}, line {}: {e}", path.display(), k + 1)))
        })
        .collect()
}

fn write_predictions(path: &Path, preds: &[BlockPrediction]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["fixture_id", "block", "model", "p_over", "actual_over"])
        .map_err(|e| io_error("cannot write", path, e))?;
    for p in preds {
        w.write_record([
            p.fixture.to_string(),
            p.block.to_string(),
            p.model.as_str().to_string(),
            p.p_over.to_string(),
            p.actual_over.to_string(),
        ])
        .map_err(|e| io_error("cannot write", path, e))?;
    }
    csv_done(w, path)
}

pub fn predict(ctx: &mut Context) -> CliResult<String> {
    let seed = ctx.seed()?;
    let model = model(ctx);
    let schedule = load_schedule(ctx)?;
    let matches = load_matches(ctx)?;
    let config = experiment_config(ctx, seed)?;

    let preds = match ctx.flags.block {
        Some(b) => {
            check_block(&schedule, b, 1)?;
            let draws = read_draws(&upstream(ctx, "fit-goals", &draws_name(model, Some(b)))?)?;
            let by_id: BTreeMap<FixtureId, &MatchResult> = matches.iter().map(|m| (m.fixture, m)).collect();
            let test: Vec<&MatchResult> = schedule.predict[b]
                .iter()
                .map(|f| {
                    by_id
                        .get(f)
                        .copied()
                        .ok_or_else(|| CliError::Validation(format!("fixture {f} has no result in matches.json")))
                })
                .collect::<CliResult<_>>()?;
            let features = match model {
                ModelKind::Baseline => None,
                ModelKind::Extended => Some(features_for(&test, &load_abilities(ctx, Some(b - 1))?, &config)?),
            };
            let out = ctx.claim(&format!("predictions.{}.block{b}.csv", model.as_str()))?;
            let mut preds = Vec::with_capacity(test.len());
            for (k, m) in test.iter().enumerate() {
                let f = features.as_ref().map(|f| f[k]);
                preds.push(BlockPrediction {
                    fixture: m.fixture,
                    block: b,
                    model,
                    p_over: predict_over_under(&draws, m.home_team, m.away_team, f, config.threshold)?,
                    actual_over: f64::from(m.total_goals()) > config.threshold,
                });
            }
            write_predictions(&out, &preds)?;
            preds
        }
        None => {
            let abilities = match model {
                ModelKind::Baseline => None,
                ModelKind::Extended => Some(
                    (0..schedule.blocks.len() - 1)
                        .map(|b| load_abilities(ctx, Some(b)))
                        .collect::<CliResult<Vec<_>>>()?,
                ),
            };
            let out = ctx.claim(&format!("predictions.{}.csv", model.as_str()))?;
            let preds = run_block_experiment(&matches, &schedule, abilities.as_deref(), model, &config)?;
            write_predictions(&out, &preds)?;
            preds
        }
    };
    tracing::info!(predictions = preds.len(), "predicted");
    Ok(format!("{}{}", model.as_str(), block_suffix(ctx.flags.block)))
}

#[derive(serde::Deserialize)]
struct PredictionRow {
    fixture_id: FixtureId,
    block: usize,
    model: ModelKind,
    p_over: f64,
    actual_over: bool,
}

pub fn evaluate(ctx: &mut Context) -> CliResult<String> {
    let dir = ctx.stage_dir("predict");
    let wanted = ctx.flags.model.as_ref().map(|_| ctx.config.goals.model);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|_| CliError::Validation(format!("{} does not exist; run predict first", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("predictions.") && name.ends_with(".csv")
        })
        .collect();
    files.sort();

    let mut by_model: BTreeMap<ModelKind, BTreeMap<FixtureId, PredictionRow>> = BTreeMap::new();
    for path in &files {
        let mut reader = csv::Reader::from_path(path).map_err(|e| io_error("cannot read", path, e))?;
        for row in reader.deserialize::<PredictionRow>() {
            let row = row.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            if wanted.is_some_and(|m| m != row.model) {
                continue;
            }
            let fixture = row.fixture_id;
            if by_model.entry(row.model).or_default().insert(fixture, row).is_some() {
                return Err(CliError::Validation(format!(
                    "fixture {fixture} is predicted twice for one model in {}",
                    dir.display()
                )));
            }
        }
    }
    if by_model.is_empty() {
        return Err(CliError::Validation(format!("no predictions found in {}", dir.display())));
    }

    let tag = wanted.map(|m| m.as_str().to_string()).unwrap_or_default();
    let auc_out = ctx.claim(&if tag.is_empty() { "auc.csv".to_string() } else { format!("auc.{tag}.csv") })?;
    let mut auc_rows = Vec::new();
    for (model, rows) in &by_model {
        let pooled: Vec<(f64, bool)> = rows.values().map(|r| (r.p_over, r.actual_over)).collect();
        let (roc, auc) = roc_auc(&pooled)?;
        let roc_out = ctx.claim(&format!("roc.{}.csv", model.as_str()))?;
        let mut w = csv_writer(&roc_out)?;
        for p in &roc {
            w.serialize(p).map_err(|e| io_error("cannot write", &roc_out, e))?;
        }
        csv_done(w, &roc_out)?;

        let blocks: BTreeSet<usize> = rows.values().map(|r| r.block).collect();
        for b in blocks {
            let pts: Vec<(f64, bool)> =
                rows.values().filter(|r| r.block == b).map(|r| (r.p_over, r.actual_over)).collect();
            match roc_auc(&pts) {
                Ok((_, a)) => auc_rows.push([model.as_str().to_string(), b.to_string(), a.to_string()]),
                Err(e) => tracing::warn!(model = model.as_str(), block = b, "no AUC: {e}"),
            }
        }
        auc_rows.push([model.as_str().to_string(), "all".to_string(), auc.to_string()]);
    }
    let mut w = csv_writer(&auc_out)?;
    w.write_record(["model", "block", "auc"]).map_err(|e| io_error("cannot write", &auc_out, e))?;
    for r in &auc_rows {
        w.write_record(r).map_err(|e| io_error("cannot write", &auc_out, e))?;
    }
    csv_done(w, &auc_out)?;
    Ok(tag)
}

pub fn synth(ctx: &mut Context) -> CliResult<String> {
    let seed = ctx.seed()?;
    ctx.config.synth.config.seed = seed;
    let features = ctx.config.synth.features();
    for name in ["fixtures.csv", "appearances.csv", "events.csv", "counts.csv", "truth.json"] {
        ctx.claim(name)?;
    }
    let world = SynthWorld::build(&ctx.config.synth.config)?;
    write_world(&world, &ctx.stage_dir("synth"), features.as_ref())?;
    Ok(String::new())
}
