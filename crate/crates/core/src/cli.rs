//! Command-line surface: `synth`, `train`, `eval`, `perturb` and `reward`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{dataset_to_json, generate_synthetic, load_mos_csv, read_dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate, evaluate_predictions};
use crate::grpo::{train_with_probe, PolicyParams, TrainConfig};
use crate::perturb::{
    apply_mode, apply_random_perturbation_with, PerturbMode, PerturbOptions, PerturbSpec,
};
use crate::rewards::{
    parse_score, score_group, temporal_bonus, with_temporal_bonus, GroupStats, Partner,
};
use crate::types::{FrameSequence, HyperParams, QualityResponse, RewardBreakdown};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "GRPO_VQA_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "vqa-grpo",
    version,
    about = "GRPO training for video quality assessment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its oracle.
    Synth(SynthArgs),
    /// Train a policy from a key=value config file.
    Train(TrainArgs),
    /// Score a model on a dataset, or score a predictions CSV.
    Eval(EvalArgs),
    /// Perturb a JSON list of frame ids.
    Perturb(PerturbArgs),
    /// Compute reward breakdowns for a JSONL file of responses.
    Reward(RewardArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Dataset output path.
    #[arg(long)]
    out: PathBuf,
    /// Oracle output path [default: <out>.oracle.json].
    #[arg(long)]
    oracle_out: Option<PathBuf>,
    #[arg(long, default_value_t = SynthSpec::default().n_videos)]
    n_videos: usize,
    #[arg(long, default_value_t = SynthSpec::default().n_frames)]
    n_frames: usize,
    #[arg(long, default_value_t = SynthSpec::default().feature_dim)]
    feature_dim: usize,
    #[arg(long, default_value_t = SynthSpec::default().noise_std)]
    noise_std: f64,
    #[arg(long, default_value_t = SynthSpec::default().temporal_coherence_weight)]
    coherence_weight: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing files.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, requires = "dataset", conflicts_with = "predictions")]
    model: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// CSV with header `id,pred,mos`.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Also write the metrics JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    /// JSON array of frame ids.
    #[arg(long)]
    input: PathBuf,
    /// One of global-shuffle, local-shuffle, reverse, jitter, duplicate,
    /// random-drop. Omitted: chosen uniformly by seed.
    #[arg(long, conflicts_with = "replay")]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = PerturbOptions::default().window)]
    window: usize,
    /// Frames duplicated or dropped [default: ceil(0.2 * len)].
    #[arg(long)]
    count: Option<usize>,
    /// Replay a previously written spec instead of drawing a new one.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Perturbed id list output; stdout gets `{frame_ids, spec}` otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    spec_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RewardArgs {
    /// JSONL of {response_text, mos, group_id, pair_id, twin_of}.
    #[arg(long)]
    responses: PathBuf,
    /// CSV `id,mos[,scale_lo,scale_hi]` keyed by group_id.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Responses per group.
    #[arg(long, default_value_t = HyperParams::default().k_group)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Map an error to its process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter { .. } => 1,
        Error::NonFinite(_) => 3,
        _ => 2,
    }
}

/// Parse `args` (including the program name), run the subcommand and return
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Perturb(a) => cmd_perturb(&a),
        Command::Reward(a) => cmd_reward(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_videos: a.n_videos,
        n_frames: a.n_frames,
        feature_dim: a.feature_dim,
        noise_std: a.noise_std,
        temporal_coherence_weight: a.coherence_weight,
        seed: match a.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(SynthSpec::default().seed),
        },
    };
    let oracle_out = a
        .oracle_out
        .clone()
        .unwrap_or_else(|| a.out.with_extension("oracle.json"));
    for path in [&a.out, &oracle_out] {
        if path.exists() && !a.force {
            return Err(Error::Config(format!(
                "{} exists; pass --force to overwrite",
                path.display()
            )));
        }
    }
    let ds = generate_synthetic(&spec)?;
    write_file(&a.out, &dataset_to_json(&ds.videos)?)?;
    write_file(&oracle_out, &serde_json::to_string(&ds.oracle)?)?;
    eprintln!(
        "wrote {} videos to {} and the oracle to {}",
        ds.videos.len(),
        a.out.display(),
        oracle_out.display()
    );
    Ok(())
}

/// Everything a `train` config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// Probe set for the per-step SRCC; the training set when absent.
    pub probe: Option<PathBuf>,
    pub model_out: PathBuf,
    pub log_out: PathBuf,
    pub train: TrainConfig,
}

/// Parse a flat `key = value` config. Blank lines and `#` comments are
/// ignored; relative paths resolve against `base`.
///
/// Keys: `dataset` (required), `probe`, `model_out`, `log_out`, `seed`,
/// `pairing_seed`, `perturb_every_step`, `zero_coherence`, `k_group`,
/// `beta_kl`, `clip_eps`, `alpha_reg`, `sigma_reg`, `delta_temp`,
/// `tau_temp`, `eps_stab`, `learning_rate`, `batch_size`, `epochs`,
/// `init_weight_std`, `init_bias`, `init_std`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let mut kv: HashMap<String, (usize, String)> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = k.trim().to_string();
        if kv
            .insert(key.clone(), (i + 1, v.trim().to_string()))
            .is_some()
        {
            return Err(Error::Config(format!(
                "line {}: duplicate key `{key}`",
                i + 1
            )));
        }
    }

    fn num<T: std::str::FromStr>(
        kv: &mut HashMap<String, (usize, String)>,
        key: &str,
        into: &mut T,
    ) -> Result<()> {
        if let Some((line, v)) = kv.remove(key) {
            *into = v
                .parse()
                .map_err(|_| Error::Config(format!("line {line}: bad value {v:?} for `{key}`")))?;
        }
        Ok(())
    }
    let path = |v: String| {
        let p = PathBuf::from(v);
        if p.is_relative() {
            base.join(p)
        } else {
            p
        }
    };

    let mut t = TrainConfig::default();
    let h = &mut t.hyper;
    num(&mut kv, "k_group", &mut h.k_group)?;
    num(&mut kv, "beta_kl", &mut h.beta_kl)?;
    num(&mut kv, "clip_eps", &mut h.clip_eps)?;
    num(&mut kv, "alpha_reg", &mut h.alpha_reg)?;
    num(&mut kv, "sigma_reg", &mut h.sigma_reg)?;
    num(&mut kv, "delta_temp", &mut h.delta_temp)?;
    num(&mut kv, "tau_temp", &mut h.tau_temp)?;
    num(&mut kv, "eps_stab", &mut h.eps_stab)?;
    num(&mut kv, "learning_rate", &mut h.learning_rate)?;
    num(&mut kv, "batch_size", &mut h.batch_size)?;
    num(&mut kv, "epochs", &mut h.epochs)?;
    num(&mut kv, "seed", &mut t.seed)?;
    num(&mut kv, "pairing_seed", &mut t.pairing_seed)?;
    num(&mut kv, "perturb_every_step", &mut t.perturb_every_step)?;
    num(&mut kv, "zero_coherence", &mut t.zero_coherence)?;
    num(&mut kv, "init_weight_std", &mut t.init.weight_std)?;
    num(&mut kv, "init_bias", &mut t.init.bias)?;
    num(&mut kv, "init_std", &mut t.init.std)?;

    let dataset = kv
        .remove("dataset")
        .map(|(_, v)| path(v))
        .ok_or_else(|| Error::Config("missing required key `dataset`".into()))?;
    let probe = kv.remove("probe").map(|(_, v)| path(v));
    let model_out = kv
        .remove("model_out")
        .map_or_else(|| base.join("model.json"), |(_, v)| path(v));
    let log_out = kv
        .remove("log_out")
        .map_or_else(|| base.join("train_log.jsonl"), |(_, v)| path(v));
    if let Some((key, (line, _))) = kv.into_iter().min_by_key(|(_, (line, _))| *line) {
        return Err(Error::Config(format!("line {line}: unknown key `{key}`")));
    }
    Ok(RunConfig {
        dataset,
        probe,
        model_out,
        log_out,
        train: t,
    })
}

/// Serialized trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub policy: PolicyParams,
    /// Whether the policy was trained without the coherence channel.
    #[serde(default)]
    pub zero_coherence: bool,
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let base = a.config.parent().unwrap_or(Path::new("."));
    let mut cfg = parse_config(&read_file(&a.config)?, base)?;
    if let Some(seed) = env_seed()? {
        cfg.train.seed = seed;
    }
    cfg.train.hyper.validate()?;
    if !cfg.dataset.exists() {
        return Err(Error::Config(format!(
            "dataset {} not found",
            cfg.dataset.display()
        )));
    }
    let dataset = read_dataset(&cfg.dataset)?;
    let probe = match &cfg.probe {
        Some(p) => read_dataset(p)?,
        None => dataset.clone(),
    };
    for path in [&cfg.model_out, &cfg.log_out] {
        if path.exists() {
            eprintln!("warning: overwriting {}", path.display());
        }
    }
    let outcome = train_with_probe(&dataset, &probe, &cfg.train)?;
    let model = ModelFile {
        policy: outcome.policy,
        zero_coherence: cfg.train.zero_coherence,
    };
    write_file(&cfg.model_out, &serde_json::to_string_pretty(&model)?)?;
    let mut log = String::new();
    for row in &outcome.log {
        log.push_str(&serde_json::to_string(row)?);
        log.push('\n');
    }
    write_file(&cfg.log_out, &log)?;
    eprintln!(
        "trained {} steps; model {} log {}",
        outcome.log.len(),
        cfg.model_out.display(),
        cfg.log_out.display()
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    #[allow(dead_code)]
    id: String,
    pred: f64,
    mos: f64,
}

fn read_predictions(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let (mut pred, mut mos) = (Vec::new(), Vec::new());
    for (i, row) in reader.deserialize::<PredictionRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: i + 2,
            reason: e.to_string(),
        })?;
        pred.push(row.pred);
        mos.push(row.mos);
    }
    Ok((pred, mos))
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let report = match (&a.model, &a.dataset, &a.predictions) {
        (Some(model), Some(dataset), None) => {
            let model: ModelFile = serde_json::from_str(&read_file(model)?)?;
            let videos = read_dataset(dataset)?;
            evaluate(&model.policy, &videos, model.zero_coherence)?
        }
        (None, None, Some(preds)) => {
            let (pred, mos) = read_predictions(preds)?;
            evaluate_predictions(&pred, &mos)?
        }
        _ => {
            return Err(Error::Config(
                "pass either --model with --dataset, or --predictions".into(),
            ))
        }
    };
    if let Some(out) = &a.out {
        write_file(out, &serde_json::to_string(&report)?)?;
    }
    print_json(&report)
}

#[derive(Debug, Serialize, Deserialize)]
struct PerturbOutput {
    frame_ids: Vec<usize>,
    spec: PerturbSpec,
}

fn cmd_perturb(a: &PerturbArgs) -> Result<()> {
    let ids: Vec<usize> = serde_json::from_str(&read_file(&a.input)?)?;
    let seq = FrameSequence::from_ids(ids)?;
    let opts = PerturbOptions {
        window: a.window,
        count: a.count,
    };
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let (out, spec) = if let Some(replay) = &a.replay {
        let spec: PerturbSpec = serde_json::from_str(&read_file(replay)?)?;
        (spec.apply(&seq)?, spec)
    } else if let Some(name) = &a.mode {
        let mode = PerturbMode::from_cli_name(name).ok_or_else(|| {
            let known: Vec<&str> = PerturbMode::ALL.iter().map(|m| m.cli_name()).collect();
            Error::Config(format!(
                "unknown mode `{name}`; expected one of {}",
                known.join(", ")
            ))
        })?;
        apply_mode(&seq, mode, seed, &opts)?
    } else {
        apply_random_perturbation_with(&seq, seed, &opts)?
    };
    let result = PerturbOutput {
        frame_ids: out.frame_ids().to_vec(),
        spec,
    };
    if let Some(path) = &a.spec_out {
        write_file(path, &serde_json::to_string(&result.spec)?)?;
    }
    match &a.out {
        Some(path) => write_file(path, &serde_json::to_string(&result.frame_ids)?),
        None => print_json(&result),
    }
}

/// One input line of the `reward` subcommand.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardRecord {
    pub response_text: String,
    #[serde(default)]
    pub mos: Option<f64>,
    pub group_id: String,
    /// Group this one is ranked against.
    #[serde(default)]
    pub pair_id: Option<String>,
    /// Marks a perturbed twin of the named raw group.
    #[serde(default)]
    pub twin_of: Option<String>,
}

/// One output line of the `reward` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLine {
    pub line: usize,
    pub group_id: String,
    #[serde(flatten)]
    pub reward: RewardBreakdown,
}

fn parse_reward_records<R: BufRead>(reader: R) -> Result<Vec<(usize, RewardRecord)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RewardRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        out.push((line_no, rec));
    }
    Ok(out)
}

struct InputGroup {
    id: String,
    lines: Vec<usize>,
    responses: Vec<QualityResponse>,
    mos: f64,
    pair_id: Option<String>,
    twin_of: Option<String>,
}

fn group_field<'a>(
    id: &str,
    field: &str,
    values: impl Iterator<Item = &'a Option<String>>,
) -> Result<Option<String>> {
    let mut values = values.cloned();
    let first = values.next().flatten();
    if values.any(|v| v != first) {
        return Err(Error::Grouping(format!(
            "group `{id}` has inconsistent {field}"
        )));
    }
    Ok(first)
}

/// Group, pair and score reward records. Output rows follow input order.
pub fn score_records(
    records: &[(usize, RewardRecord)],
    labels: &HashMap<String, f64>,
    hyper: &HyperParams,
) -> Result<Vec<RewardLine>> {
    let mut order: Vec<String> = Vec::new();
    let mut members: HashMap<&str, Vec<&(usize, RewardRecord)>> = HashMap::new();
    for rec in records {
        let id = rec.1.group_id.as_str();
        if !members.contains_key(id) {
            order.push(id.to_string());
        }
        members.entry(id).or_default().push(rec);
    }

    let mut groups = Vec::with_capacity(order.len());
    for id in &order {
        let rows = &members[id.as_str()];
        if rows.len() != hyper.k_group {
            return Err(Error::Grouping(format!(
                "group `{id}` has {} responses, expected {}",
                rows.len(),
                hyper.k_group
            )));
        }
        let mos = match labels.get(id) {
            Some(&m) => m,
            None => {
                let first = rows[0].1.mos;
                if rows.iter().any(|r| r.1.mos != first) {
                    return Err(Error::Grouping(format!(
                        "group `{id}` has inconsistent mos"
                    )));
                }
                first.ok_or_else(|| Error::Grouping(format!("group `{id}` has no mos")))?
            }
        };
        let responses = rows
            .iter()
            .map(|(_, r)| {
                let parsed_score = parse_score(&r.response_text);
                QualityResponse {
                    text: r.response_text.clone(),
                    parsed_score,
                    raw_draw: parsed_score.unwrap_or(0.0),
                    log_prob_current: 0.0,
                    log_prob_old: 0.0,
                }
            })
            .collect();
        groups.push(InputGroup {
            id: id.clone(),
            lines: rows.iter().map(|r| r.0).collect(),
            responses,
            mos,
            pair_id: group_field(id, "pair_id", rows.iter().map(|r| &r.1.pair_id))?,
            twin_of: group_field(id, "twin_of", rows.iter().map(|r| &r.1.twin_of))?,
        });
    }

    let index: HashMap<&str, usize> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| (g.id.as_str(), i))
        .collect();
    let lookup = |id: &str, what: &str, of: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Grouping(format!("{what} `{id}` of group `{of}` not found")))
    };
    let stats: Vec<Option<GroupStats>> = groups
        .iter()
        .map(|g| GroupStats::from_responses(&g.responses).ok())
        .collect();

    let mut scored: Vec<Vec<RewardBreakdown>> = Vec::with_capacity(groups.len());
    for g in &groups {
        let partner = match &g.pair_id {
            Some(p) => {
                let j = lookup(p, "pair_id", &g.id)?;
                stats[j].as_ref().map(|s| Partner {
                    stats: s,
                    mos: groups[j].mos,
                })
            }
            None => None,
        };
        scored.push(score_group(&g.responses, g.mos, partner, hyper)?);
    }
    for (t, g) in groups.iter().enumerate() {
        if let Some(raw) = &g.twin_of {
            let r = lookup(raw, "twin_of", &g.id)?;
            if groups[r].twin_of.is_some() {
                return Err(Error::Grouping(format!(
                    "twin target `{raw}` is itself a twin"
                )));
            }
            let bonus = temporal_bonus(&scored[r], &scored[t], hyper);
            with_temporal_bonus(&mut scored[r], bonus);
        }
    }

    let mut out: Vec<RewardLine> = groups
        .iter()
        .zip(scored)
        .flat_map(|(g, rewards)| {
            g.lines
                .iter()
                .zip(rewards)
                .map(|(&line, reward)| RewardLine {
                    line,
                    group_id: g.id.clone(),
                    reward,
                })
        })
        .collect();
    out.sort_by_key(|r| r.line);
    Ok(out)
}

fn cmd_reward(a: &RewardArgs) -> Result<()> {
    let file = fs::File::open(&a.responses).map_err(|e| Error::io(&a.responses, e))?;
    let records = parse_reward_records(BufReader::new(file))?;
    let labels: HashMap<String, f64> = match &a.labels {
        Some(p) => load_mos_csv(p)?
            .into_iter()
            .map(|l| (l.id, l.mos))
            .collect(),
        None => HashMap::new(),
    };
    let hyper = HyperParams {
        k_group: a.k,
        ..HyperParams::default()
    };
    if hyper.k_group < 2 {
        return Err(Error::Config("--k must be at least 2".into()));
    }
    let lines = score_records(&records, &labels, &hyper)?;
    let mut text = String::new();
    for l in &lines {
        text.push_str(&serde_json::to_string(l)?);
        text.push('\n');
    }
    match &a.out {
        Some(path) => write_file(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}
