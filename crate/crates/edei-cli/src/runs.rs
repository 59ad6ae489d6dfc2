//! Run orchestration: scenario resolution, training and evaluation runs,
//! checkpoint layout, manifests, and the nine-cell sweep.
//!
//! Every run writes its outputs into one directory: the resolved scenario,
//! per-episode metrics, aggregate means, a manifest recording the full
//! configuration, and (for training) a checkpoint.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use edei_core::checkpoint::CheckpointBundle;
use edei_core::env::obs::{obs_len, state_len};
use edei_core::graph::Graphs;
use edei_core::marl::{evaluate, train, AgentNets, EvalPolicy, MarlConfig, TrainArtifacts};
use edei_core::metrics::{aggregate, to_csv, trace_csv, Aggregate, EpisodeRecord};
use edei_core::predictor::{Predictor, PredictorConfig};
use edei_core::scenario::format::{read_file, write_file};
use edei_core::scenario::generate::{generate, table_cells, ScenarioKind};
use edei_core::scenario::ScenarioConfig;
use edei_core::seed;

/// Run-level stream tags, continuing the training-side tag family.
const TAG_SWEEP_CELL: u64 = 0x5000_0000;

/// Scenario selection shared by train, eval, and sweep.
#[derive(Clone, Debug)]
pub struct ScenarioChoice {
    pub kind: Option<String>,
    pub file: Option<PathBuf>,
    pub agents: Option<u32>,
    pub incidents: Option<u32>,
    pub reduced: bool,
}

impl ScenarioChoice {
    pub fn resolve(&self, seed_value: u64) -> Result<ScenarioConfig> {
        if let Some(path) = &self.file {
            if self.agents.is_some() || self.incidents.is_some() {
                bail!("--agents/--incidents apply to built-in scenarios, not --scenario-file");
            }
            let cfg = read_file(path)
                .with_context(|| format!("loading scenario file {}", path.display()))?;
            return Ok(cfg);
        }
        let slug = self.kind.as_deref().unwrap_or("storage");
        let mut kind = ScenarioKind::parse(slug)
            .ok_or_else(|| anyhow!("unknown scenario '{slug}' (storage, factory, airport, storage-reduced)"))?;
        let (mut agents, mut incidents) = (self.agents.unwrap_or(3), self.incidents.unwrap_or(6));
        if self.reduced || kind == ScenarioKind::StorageReduced {
            kind = ScenarioKind::StorageReduced;
            agents = self.agents.unwrap_or(2).min(2);
            incidents = self.incidents.unwrap_or(2).min(2);
        }
        generate(kind, agents, incidents, seed_value)
            .map_err(|e| anyhow!("generating scenario: {e}"))
    }
}

fn build(cfg: ScenarioConfig) -> Result<(Arc<ScenarioConfig>, Arc<Graphs>)> {
    let graphs = cfg.build_graphs().map_err(|e| anyhow!("building graphs: {e}"))?;
    Ok((Arc::new(cfg), Arc::new(graphs)))
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    entries: &[(&str, String)],
) -> Result<()> {
    let mut text = format!("edei-manifest/1\ncommand={command}\n");
    let mut sorted: Vec<&(&str, String)> = entries.iter().collect();
    sorted.sort_by_key(|(k, _)| *k);
    for (key, value) in sorted {
        text.push_str(&format!("{key}={value}\n"));
    }
    text.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
    fs::write(dir.join("manifest.txt"), text).context("writing manifest.txt")
}

fn aggregate_csv(rows: &[Aggregate]) -> String {
    let mut out = String::from("scenario,policy,episodes,rate_s,rate_s_paper,rate_f,tp,te,it,reward\n");
    for a in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            a.scenario, a.policy, a.episodes, a.rate_s, a.rate_s_paper, a.rate_f, a.tp, a.te, a.it,
            a.reward
        ));
    }
    out
}

fn write_records(dir: &Path, records: &[EpisodeRecord], traces: bool) -> Result<()> {
    let csv = to_csv(records).map_err(|e| anyhow!("formatting metrics: {e}"))?;
    fs::write(dir.join("metrics.csv"), csv).context("writing metrics.csv")?;
    let agg = aggregate(records).map_err(|e| anyhow!("aggregating metrics: {e}"))?;
    fs::write(dir.join("aggregate.csv"), aggregate_csv(&agg)).context("writing aggregate.csv")?;
    if traces {
        for record in records {
            let name = format!("trace_ep{:03}.csv", record.episode);
            fs::write(dir.join(name), trace_csv(record)).context("writing trace csv")?;
        }
    }
    Ok(())
}

/// Checkpoint layout: `meta/*` scalars describing shapes, `agent{i}/{net}`
/// parameter stores, and `predictor` when the policy predicts.
fn bundle_artifacts(artifacts: &TrainArtifacts, marl: &MarlConfig, cfg: &ScenarioConfig) -> CheckpointBundle {
    let mut bundle = CheckpointBundle::new();
    bundle.push_scalar("meta/n_agents", artifacts.nets.len() as f64);
    bundle.push_scalar("meta/k", cfg.n_nodes() as f64);
    bundle.push_scalar("meta/obs_len", obs_len(cfg) as f64);
    bundle.push_scalar("meta/state_len", state_len(cfg) as f64);
    bundle.push_scalar("meta/hidden", marl.hidden as f64);
    bundle.push_scalar("meta/predict", if artifacts.predictor.is_some() { 1.0 } else { 0.0 });
    if let Some(p) = &artifacts.predictor {
        let pc = p.config();
        bundle.push_scalar("meta/predictor_hidden", pc.hidden as f64);
        bundle.push_scalar("meta/predictor_unroll", pc.unroll as f64);
        bundle.push_scalar("meta/predictor_threshold", pc.threshold);
        bundle.push_store("predictor", p.store());
    }
    for (i, nets) in artifacts.nets.iter().enumerate() {
        bundle.push_store(&format!("agent{i}/actor"), &nets.actor_store);
        bundle.push_store(&format!("agent{i}/critic"), &nets.critic_store);
        bundle.push_store(&format!("agent{i}/target_actor"), &nets.target_actor);
        bundle.push_store(&format!("agent{i}/target_critic"), &nets.target_critic);
    }
    bundle
}

fn scalar_usize(bundle: &CheckpointBundle, name: &str) -> Result<usize> {
    let v = bundle.scalar(name).ok_or_else(|| anyhow!("checkpoint is missing {name}"))?;
    Ok(v as usize)
}

/// Rebuilds the trained networks and optional predictor, checking the
/// checkpoint's shapes against the scenario it is being evaluated on.
pub fn restore_artifacts(
    bundle: &CheckpointBundle,
    cfg: &ScenarioConfig,
) -> Result<(Vec<AgentNets>, Option<Predictor>)> {
    let n_agents = scalar_usize(bundle, "meta/n_agents")?;
    let k = scalar_usize(bundle, "meta/k")?;
    let o_len = scalar_usize(bundle, "meta/obs_len")?;
    let s_len = scalar_usize(bundle, "meta/state_len")?;
    let hidden = scalar_usize(bundle, "meta/hidden")?;
    if n_agents != cfg.n_agents() || k != cfg.n_nodes() {
        bail!(
            "checkpoint was trained on {n_agents} agents x {k} nodes, scenario has {} agents x {} nodes",
            cfg.n_agents(),
            cfg.n_nodes()
        );
    }
    if o_len != obs_len(cfg) || s_len != state_len(cfg) {
        bail!("checkpoint observation shapes do not match the scenario");
    }
    let mut nets = Vec::with_capacity(n_agents);
    for i in 0..n_agents {
        let actor = bundle
            .store(&format!("agent{i}/actor"))
            .ok_or_else(|| anyhow!("checkpoint is missing agent {i} actor parameters"))?;
        let critic = bundle
            .store(&format!("agent{i}/critic"))
            .ok_or_else(|| anyhow!("checkpoint is missing agent {i} critic parameters"))?;
        let target_actor = bundle
            .store(&format!("agent{i}/target_actor"))
            .ok_or_else(|| anyhow!("checkpoint is missing agent {i} target actor parameters"))?;
        let target_critic = bundle
            .store(&format!("agent{i}/target_critic"))
            .ok_or_else(|| anyhow!("checkpoint is missing agent {i} target critic parameters"))?;
        let net = AgentNets::from_stores(
            actor,
            critic,
            target_actor,
            target_critic,
            o_len,
            s_len,
            n_agents,
            k,
            hidden,
            1e-3,
        )
        .ok_or_else(|| anyhow!("checkpoint parameters do not form agent {i}'s networks"))?;
        nets.push(net);
    }
    let predictor = if bundle.scalar("meta/predict") == Some(1.0) {
        let store = bundle
            .store("predictor")
            .ok_or_else(|| anyhow!("checkpoint is missing predictor parameters"))?;
        let pc = PredictorConfig {
            hidden: scalar_usize(bundle, "meta/predictor_hidden")?,
            unroll: scalar_usize(bundle, "meta/predictor_unroll")?,
            threshold: bundle
                .scalar("meta/predictor_threshold")
                .ok_or_else(|| anyhow!("checkpoint is missing meta/predictor_threshold"))?,
            ..PredictorConfig::default()
        };
        Some(
            Predictor::from_store(pc, store)
                .ok_or_else(|| anyhow!("checkpoint predictor parameters are incomplete"))?,
        )
    } else {
        None
    };
    Ok((nets, predictor))
}

pub struct TrainRun {
    pub choice: ScenarioChoice,
    pub predict: bool,
    pub episodes: u32,
    pub seed: u64,
    pub out: PathBuf,
    pub trace: bool,
}

pub fn run_train(run: &TrainRun) -> Result<()> {
    fs::create_dir_all(&run.out)
        .with_context(|| format!("creating output directory {}", run.out.display()))?;
    let cfg = run.choice.resolve(run.seed)?;
    write_file(&cfg, run.out.join("scenario.scn")).map_err(|e| anyhow!("writing scenario: {e}"))?;
    let (cfg, graphs) = build(cfg)?;

    let mut marl = if run.choice.reduced || cfg.n_nodes() <= 16 {
        MarlConfig::reduced(run.episodes, run.predict)
    } else {
        MarlConfig::new(run.episodes, run.predict)
    };
    marl.collect_traces = run.trace;

    let artifacts = train(Arc::clone(&cfg), Arc::clone(&graphs), &marl, run.seed)
        .map_err(|e| anyhow!("{e}"))?;
    write_records(&run.out, &artifacts.episodes, run.trace)?;
    let bundle = bundle_artifacts(&artifacts, &marl, &cfg);
    bundle
        .write_file(&run.out.join("checkpoint.edei"))
        .map_err(|e| anyhow!("writing checkpoint: {e}"))?;

    write_manifest(
        &run.out,
        "train",
        &[
            ("scenario", cfg.name.clone()),
            ("policy", artifacts.policy.clone()),
            ("episodes", run.episodes.to_string()),
            ("seed", run.seed.to_string()),
            ("reduced", run.choice.reduced.to_string()),
            ("agents", cfg.n_agents().to_string()),
            ("nodes", cfg.n_nodes().to_string()),
            ("hidden", marl.hidden.to_string()),
            ("batch", marl.batch.to_string()),
            ("warmup", marl.warmup.to_string()),
            ("buffer", marl.buffer.to_string()),
            ("update_every", marl.update_every.to_string()),
            ("gamma", marl.gamma.to_string()),
            ("lr", marl.lr.to_string()),
            ("rho", marl.rho.to_string()),
            ("eps_start", marl.eps_start.to_string()),
            ("eps_end", marl.eps_end.to_string()),
            ("trace", run.trace.to_string()),
        ],
    )?;

    let mean_reward: f64 = artifacts.episodes.iter().map(|r| r.reward_sum).sum::<f64>()
        / artifacts.episodes.len().max(1) as f64;
    println!(
        "trained {} on {}: {} episodes, {} updates, mean episode reward {:.3}",
        artifacts.policy,
        cfg.name,
        artifacts.episodes.len(),
        artifacts.updates,
        mean_reward
    );
    if artifacts.adam_skipped > 0 {
        eprintln!("warning: {} optimizer steps skipped on non-finite gradients", artifacts.adam_skipped);
    }
    Ok(())
}

pub struct EvalRun {
    pub choice: ScenarioChoice,
    pub policy: String,
    pub checkpoint: Option<PathBuf>,
    pub episodes: u32,
    pub seed: u64,
    pub out: PathBuf,
    pub trace: bool,
}

pub fn run_eval(run: &EvalRun) -> Result<()> {
    if run.episodes == 0 {
        bail!("episodes must be positive");
    }
    fs::create_dir_all(&run.out)
        .with_context(|| format!("creating output directory {}", run.out.display()))?;
    let cfg = run.choice.resolve(run.seed)?;
    write_file(&cfg, run.out.join("scenario.scn")).map_err(|e| anyhow!("writing scenario: {e}"))?;
    let (cfg, graphs) = build(cfg)?;

    let restored = match run.policy.as_str() {
        "greedy" | "random" => None,
        "maddpg" | "pmaddpg" => {
            let path = run
                .checkpoint
                .as_ref()
                .ok_or_else(|| anyhow!("policy '{}' needs --checkpoint", run.policy))?;
            let bundle = CheckpointBundle::read_file(path)
                .map_err(|e| anyhow!("reading checkpoint {}: {e}", path.display()))?;
            let (nets, predictor) = restore_artifacts(&bundle, &cfg)?;
            if run.policy == "pmaddpg" && predictor.is_none() {
                bail!("checkpoint has no predictor; evaluate it with --policy maddpg");
            }
            if run.policy == "maddpg" && predictor.is_some() {
                bail!("checkpoint was trained with prediction; evaluate it with --policy pmaddpg");
            }
            Some((nets, predictor))
        }
        other => bail!("unknown policy '{other}' (greedy, random, maddpg, pmaddpg)"),
    };
    let policy = match &restored {
        None if run.policy == "greedy" => EvalPolicy::Greedy,
        None => EvalPolicy::Random,
        Some((nets, predictor)) => {
            EvalPolicy::Trained { nets, predictor: predictor.as_ref() }
        }
    };

    let records = evaluate(
        Arc::clone(&cfg),
        Arc::clone(&graphs),
        &policy,
        run.seed,
        run.episodes,
        run.trace,
    );
    write_records(&run.out, &records, run.trace)?;
    write_manifest(
        &run.out,
        "eval",
        &[
            ("scenario", cfg.name.clone()),
            ("policy", run.policy.clone()),
            ("episodes", run.episodes.to_string()),
            ("seed", run.seed.to_string()),
            ("reduced", run.choice.reduced.to_string()),
            ("agents", cfg.n_agents().to_string()),
            ("nodes", cfg.n_nodes().to_string()),
            (
                "checkpoint",
                run.checkpoint.as_ref().map_or(String::from("none"), |p| p.display().to_string()),
            ),
            ("trace", run.trace.to_string()),
        ],
    )?;

    let mean_reward: f64 =
        records.iter().map(|r| r.reward_sum).sum::<f64>() / records.len() as f64;
    println!(
        "evaluated {} on {}: {} episodes, mean episode reward {:.3}",
        run.policy,
        cfg.name,
        records.len(),
        mean_reward
    );
    Ok(())
}

pub fn run_gen(out: &Path, seed_value: u64) -> Result<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let mut names = Vec::new();
    for (kind, agents, incidents) in table_cells() {
        let cfg = generate(kind, agents, incidents, seed_value)
            .map_err(|e| anyhow!("generating {}: {e}", kind.slug()))?;
        let name = format!("{}-a{agents}-i{incidents}.scn", kind.slug());
        write_file(&cfg, out.join(&name)).map_err(|e| anyhow!("writing {name}: {e}"))?;
        names.push(name);
    }
    write_manifest(
        out,
        "gen",
        &[("seed", seed_value.to_string()), ("files", names.join(" "))],
    )?;
    println!("wrote {} scenario files to {}", names.len(), out.display());
    Ok(())
}

pub struct SweepRun {
    pub policy: String,
    pub episodes: u32,
    pub seed: u64,
    pub out: PathBuf,
    pub reduced: bool,
}

/// Runs every benchmark cell in parallel: scripted policies evaluate
/// directly, trained policies train first and then evaluate 20 episodes.
pub fn run_sweep(run: &SweepRun) -> Result<()> {
    fs::create_dir_all(&run.out)
        .with_context(|| format!("creating output directory {}", run.out.display()))?;
    let cells = table_cells();
    let results: Vec<Result<Vec<Aggregate>>> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(kind, agents, incidents))| {
            let cell_seed = seed::derive(run.seed, TAG_SWEEP_CELL + idx as u64);
            let dir = run.out.join(format!("{}-a{agents}-i{incidents}", kind.slug()));
            let choice = ScenarioChoice {
                kind: Some(kind.slug().to_string()),
                file: None,
                agents: Some(agents),
                incidents: Some(incidents),
                reduced: run.reduced,
            };
            match run.policy.as_str() {
                "greedy" | "random" => {
                    let eval = EvalRun {
                        choice,
                        policy: run.policy.clone(),
                        checkpoint: None,
                        episodes: run.episodes,
                        seed: cell_seed,
                        out: dir.clone(),
                        trace: false,
                    };
                    run_eval(&eval)?;
                }
                "maddpg" | "pmaddpg" => {
                    let train_run = TrainRun {
                        choice: choice.clone(),
                        predict: run.policy == "pmaddpg",
                        episodes: run.episodes,
                        seed: cell_seed,
                        out: dir.clone(),
                        trace: false,
                    };
                    run_train(&train_run)?;
                    let eval = EvalRun {
                        choice,
                        policy: run.policy.clone(),
                        checkpoint: Some(dir.join("checkpoint.edei")),
                        episodes: 20,
                        seed: cell_seed,
                        out: dir.join("eval"),
                        trace: false,
                    };
                    run_eval(&eval)?;
                }
                other => bail!("unknown policy '{other}' (greedy, random, maddpg, pmaddpg)"),
            }
            let metrics_dir = if matches!(run.policy.as_str(), "greedy" | "random") {
                dir
            } else {
                dir.join("eval")
            };
            let text = fs::read_to_string(metrics_dir.join("aggregate.csv"))
                .context("reading cell aggregate")?;
            parse_aggregates(&text)
        })
        .collect();

    let mut all = Vec::new();
    for cell in results {
        all.extend(cell?);
    }
    all.sort_by(|a, b| (&a.scenario, &a.policy).cmp(&(&b.scenario, &b.policy)));
    fs::write(run.out.join("sweep.csv"), aggregate_csv(&all)).context("writing sweep.csv")?;
    write_manifest(
        &run.out,
        "sweep",
        &[
            ("policy", run.policy.clone()),
            ("episodes", run.episodes.to_string()),
            ("seed", run.seed.to_string()),
            ("reduced", run.reduced.to_string()),
            ("cells", cells.len().to_string()),
        ],
    )?;
    println!("swept {} cells with {} into {}", cells.len(), run.policy, run.out.display());
    Ok(())
}

fn parse_aggregates(text: &str) -> Result<Vec<Aggregate>> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            bail!("malformed aggregate row: {line}");
        }
        rows.push(Aggregate {
            scenario: cols[0].to_string(),
            policy: cols[1].to_string(),
            episodes: cols[2].parse().context("episodes column")?,
            rate_s: cols[3].parse().context("rate_s column")?,
            rate_s_paper: cols[4].parse().context("rate_s_paper column")?,
            rate_f: cols[5].parse().context("rate_f column")?,
            tp: cols[6].parse().context("tp column")?,
            te: cols[7].parse().context("te column")?,
            it: cols[8].parse().context("it column")?,
            reward: cols[9].parse().context("reward column")?,
        });
    }
    Ok(rows)
}
