//! `tempogen` — command-line workbench driving the full pipeline:
//! bank -> simulate -> train -> generate -> evaluate -> report.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 finished
//! with partial results (e.g. missing generated clips during evaluate).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tempogen_core::bank::{self, Bank};
use tempogen_core::caption::{self, DEFAULT_RESOLUTION};
use tempogen_core::config::PipelineConfig;
use tempogen_core::diffusion::{
    align_to_frames, encode_dataset, sample, toy_decode, train, Denoiser, LatentSequence,
};
use tempogen_core::metrics::{self, EvalParams, EvalReport};
use tempogen_core::normalize::{self, HttpChatClient, NormalizeOutcome};
use tempogen_core::scene;
use tempogen_core::{audio, dsp, rngutil, Error};

#[derive(Parser)]
#[command(name = "tempogen", version, about = "Temporally-controllable sound-scene workbench")]
struct Cli {
    /// TOML pipeline configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed override for the subcommand.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Working directory root (overrides `paths.workdir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Normalize captions through the configured chat endpoint.
    #[arg(long, global = true)]
    llm: bool,
    /// Worker threads for generation.
    #[arg(long, global = true, value_name = "INT")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the synthetic one-occurrence segment bank.
    Bank,
    /// Simulate the train/test scene datasets from the bank.
    Simulate,
    /// Train the timestamp-conditioned denoiser on the train split.
    Train {
        /// Ablation: train with the condition zeroed for every clip.
        #[arg(long)]
        zero_condition: bool,
    },
    /// Generate clips from captions and/or a dataset manifest.
    Generate {
        /// Free-text caption; repeatable.
        #[arg(long = "caption", value_name = "TEXT")]
        captions: Vec<String>,
        /// Generate one clip per record of this JSONL manifest.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        /// Checkpoint path (default: <workdir>/models/denoiser.json).
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Output subdirectory name under <workdir>/generated.
        #[arg(long, default_value = "default", value_name = "NAME")]
        label: String,
    },
    /// Score generated clips against a dataset manifest.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        /// Directory holding <clip_id>.wav files.
        #[arg(long, value_name = "DIR")]
        generated: PathBuf,
        #[arg(long, default_value = "system", value_name = "NAME")]
        label: String,
    },
    /// Aggregate stored evaluation reports into one CSV table.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful exits; everything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> tempogen_core::Result<u8> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let workdir = cli.out.clone().unwrap_or_else(|| config.paths.workdir.clone());
    std::fs::create_dir_all(&workdir)
        .map_err(|e| Error::io(workdir.display().to_string(), e))?;

    let code = match &cli.command {
        Command::Bank => cmd_bank(cli, &config, &workdir)?,
        Command::Simulate => cmd_simulate(cli, &config, &workdir)?,
        Command::Train { zero_condition } => cmd_train(cli, &config, &workdir, *zero_condition)?,
        Command::Generate {
            captions,
            manifest,
            model,
            label,
        } => cmd_generate(cli, &config, &workdir, captions, manifest.as_deref(), model.as_deref(), label)?,
        Command::Evaluate {
            manifest,
            generated,
            label,
        } => cmd_evaluate(cli, &config, &workdir, manifest, generated, label)?,
        Command::Report => cmd_report(&workdir)?,
    };
    write_run_record(cli, &config, &workdir)?;
    Ok(code)
}

// --- run records ------------------------------------------------------------

#[derive(Serialize)]
struct RunRecord {
    command: String,
    seed: Option<u64>,
    config_sha256: String,
    workdir: String,
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Bank => "bank",
        Command::Simulate => "simulate",
        Command::Train { .. } => "train",
        Command::Generate { .. } => "generate",
        Command::Evaluate { .. } => "evaluate",
        Command::Report => "report",
    }
}

/// Record the resolved configuration hash per subcommand so a finished
/// workdir documents how it was produced.
fn write_run_record(cli: &Cli, config: &PipelineConfig, workdir: &Path) -> tempogen_core::Result<()> {
    let dir = workdir.join("runs");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let canonical = serde_json::to_string(config)?;
    let hash = Sha256::digest(canonical.as_bytes());
    let record = RunRecord {
        command: command_name(&cli.command).to_string(),
        seed: cli.seed,
        config_sha256: format!("{hash:x}"),
        workdir: workdir.display().to_string(),
    };
    let path = dir.join(format!("{}.json", record.command));
    std::fs::write(&path, serde_json::to_string_pretty(&record)?)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

// --- subcommands ------------------------------------------------------------

fn cmd_bank(cli: &Cli, config: &PipelineConfig, workdir: &Path) -> tempogen_core::Result<u8> {
    let seed = cli.seed.unwrap_or(config.sim.master_seed);
    let sources = bank::default_synth_sources(config.bank.per_class, seed);
    let bank_config = bank::BankConfig {
        filter_threshold: config.bank.filter_threshold,
        segment_threshold: config.bank.segment_threshold,
    };
    let built = bank::build_bank(&sources, &bank_config)?;
    let dir = workdir.join("bank");
    bank::save_bank(&built, &dir)?;
    println!(
        "bank: {} segments across {} classes -> {}",
        built.segments.len(),
        built.classes.len(),
        dir.display()
    );
    Ok(0)
}

fn load_bank_dir(workdir: &Path) -> tempogen_core::Result<Bank> {
    bank::load_bank(&workdir.join("bank"))
}

fn cmd_simulate(cli: &Cli, config: &PipelineConfig, workdir: &Path) -> tempogen_core::Result<u8> {
    let bank = load_bank_dir(workdir)?;
    let mut sim = config.sim.clone();
    if let Some(seed) = cli.seed {
        sim.master_seed = seed;
    }
    let out = workdir.join("data");
    let summary = scene::simulate_dataset(&bank, &sim, &out)?;
    for split in &summary.splits {
        println!(
            "simulate: {} -> {} clips ({} infeasible seeds skipped)",
            split.split,
            split.written,
            split.skipped_seeds.len()
        );
    }
    Ok(0)
}

fn cmd_train(
    cli: &Cli,
    config: &PipelineConfig,
    workdir: &Path,
    zero_condition: bool,
) -> tempogen_core::Result<u8> {
    let bank = load_bank_dir(workdir)?;
    let manifest_path = workdir.join("data").join("train.jsonl");
    let records = scene::read_manifest(&manifest_path)?;
    if records.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "empty train manifest {}",
            manifest_path.display()
        )));
    }
    let items = encode_dataset(&records, &workdir.join("data"), &bank.classes)?;
    let mut train_config = config.train.clone();
    if let Some(seed) = cli.seed {
        train_config.seed = seed;
    }
    train_config.zero_condition = zero_condition;
    let (model, logs) = train(&items, &bank.classes, &train_config)?;
    let models_dir = workdir.join("models");
    std::fs::create_dir_all(&models_dir)
        .map_err(|e| Error::io(models_dir.display().to_string(), e))?;
    let name = if zero_condition {
        "denoiser_uncond.json"
    } else {
        "denoiser.json"
    };
    let ck_path = models_dir.join(name);
    model.save(&ck_path)?;
    let mut csv = String::from("epoch,mean_loss,lr\n");
    for log in &logs {
        csv.push_str(&format!("{},{},{}\n", log.epoch, log.mean_loss, log.lr));
    }
    let log_path = models_dir.join(format!("{}.log.csv", name.trim_end_matches(".json")));
    std::fs::write(&log_path, csv.as_bytes())
        .map_err(|e| Error::io(log_path.display().to_string(), e))?;
    let last = logs.last().map(|l| l.mean_loss).unwrap_or(f64::NAN);
    println!(
        "train: {} clips, {} epochs, final loss {last:.5} -> {}",
        items.len(),
        logs.len(),
        ck_path.display()
    );
    Ok(0)
}

/// One generation request resolved to a schedule.
struct GenItem {
    clip_id: String,
    caption_in: String,
    caption: String,
    used_fallback: bool,
    schedule: tempogen_core::EventSchedule,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct GenRecord {
    clip_id: String,
    wav: String,
    caption_input: String,
    caption: String,
    used_llm_fallback: bool,
    clip_length: f64,
    schedule: IndexMap<String, Vec<[f64; 2]>>,
    seed: u64,
}

fn normalize_caption(
    cli: &Cli,
    config: &PipelineConfig,
    text: &str,
) -> tempogen_core::Result<NormalizeOutcome> {
    if cli.llm && !config.llm.endpoint.is_empty() {
        let client = HttpChatClient {
            endpoint: config.llm.endpoint.clone(),
            model: config.llm.model.clone(),
            token_env: config.llm.token_env.clone(),
        };
        let examples = vec![
            (
                "A dog barked between two and three seconds.".to_string(),
                "dog barking at 2-3".to_string(),
            ),
            (
                "Someone knocks on a door three times.".to_string(),
                "door knocking 3 times".to_string(),
            ),
        ];
        normalize::llm_normalize(text, &client, &examples, config.generate.clip_length)
    } else {
        Ok(normalize::normalize_offline(text))
    }
}

fn caption_to_schedule(
    caption: &str,
    bank: &Bank,
    clip_length: f64,
    seed: u64,
) -> tempogen_core::Result<tempogen_core::EventSchedule> {
    if caption.contains(" at ") {
        caption::parse_timestamp_caption(caption, clip_length)
    } else {
        let spec = caption::parse_frequency_caption(caption)?;
        caption::freq_to_schedule(&spec, &bank.stats, clip_length, seed)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    cli: &Cli,
    config: &PipelineConfig,
    workdir: &Path,
    captions: &[String],
    manifest: Option<&Path>,
    model_path: Option<&Path>,
    label: &str,
) -> tempogen_core::Result<u8> {
    let bank = load_bank_dir(workdir)?;
    let default_model = workdir.join("models").join("denoiser.json");
    let model = Denoiser::load(model_path.unwrap_or(&default_model))?;
    let schedule = config.train.schedule()?;
    let master_seed = cli.seed.unwrap_or(config.sim.master_seed);

    let mut items: Vec<GenItem> = Vec::new();
    for (i, text) in captions.iter().enumerate() {
        let outcome = normalize_caption(cli, config, text)?;
        let seed = rngutil::derive_seed(master_seed, 0x6e00 + i as u64);
        let schedule = caption_to_schedule(&outcome.caption, &bank, config.generate.clip_length, seed)?;
        items.push(GenItem {
            clip_id: format!("caption_{i:03}"),
            caption_in: text.clone(),
            caption: outcome.caption,
            used_fallback: outcome.used_fallback,
            schedule,
            seed,
        });
    }
    if let Some(path) = manifest {
        for (i, record) in scene::read_manifest(path)?.iter().enumerate() {
            let outcome = normalize_caption(cli, config, &record.timestamp_caption)?;
            let seed = rngutil::derive_seed(master_seed, 0x9e00 + i as u64);
            let schedule = caption_to_schedule(&outcome.caption, &bank, record.clip_length, seed)?;
            items.push(GenItem {
                clip_id: record.clip_id.clone(),
                caption_in: record.timestamp_caption.clone(),
                caption: outcome.caption,
                used_fallback: outcome.used_fallback,
                schedule,
                seed,
            });
        }
    }
    if items.is_empty() {
        return Err(Error::InvalidConfig(
            "generate needs --caption and/or --manifest".into(),
        ));
    }

    let gen_dir = workdir.join("generated").join(label);
    std::fs::create_dir_all(&gen_dir).map_err(|e| Error::io(gen_dir.display().to_string(), e))?;
    let names = bank.class_names();
    let sample_config_base = config.sample_config(0);
    let jobs = cli.jobs.unwrap_or(1).max(1);

    let generate_one = |item: &GenItem| -> tempogen_core::Result<GenRecord> {
        let matrix = caption::schedule_to_matrix(&item.schedule, &names, DEFAULT_RESOLUTION)?;
        let frames = matrix.frames();
        let cond = align_to_frames(&matrix, frames);
        let active: Vec<usize> = bank
            .classes
            .iter()
            .filter(|c| item.schedule.entries.contains_key(&c.name))
            .map(|c| c.id)
            .collect();
        let mut sample_config = sample_config_base.clone();
        sample_config.seed = item.seed;
        let latent = sample(&model, &cond, &active, &schedule, &sample_config)?;
        let audio_out = toy_decode(
            &LatentSequence {
                data: latent,
                frame_resolution: dsp::FRAME_SECONDS,
            },
            &bank.classes,
        )?;
        let wav_rel = format!("{}.wav", item.clip_id);
        audio::write_wav(&gen_dir.join(&wav_rel), &audio_out)?;
        Ok(GenRecord {
            clip_id: item.clip_id.clone(),
            wav: wav_rel,
            caption_input: item.caption_in.clone(),
            caption: item.caption.clone(),
            used_llm_fallback: item.used_fallback,
            clip_length: item.schedule.clip_length,
            schedule: item
                .schedule
                .entries
                .iter()
                .map(|(name, ivs)| {
                    (
                        name.clone(),
                        ivs.iter().map(|iv| [iv.onset, iv.offset]).collect(),
                    )
                })
                .collect(),
            seed: item.seed,
        })
    };

    let mut records: Vec<GenRecord> = Vec::with_capacity(items.len());
    if jobs == 1 {
        for item in &items {
            records.push(generate_one(item)?);
        }
    } else {
        let chunk = items.len().div_ceil(jobs);
        let results: Vec<tempogen_core::Result<Vec<GenRecord>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = items
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(|| part.iter().map(generate_one).collect::<Result<Vec<_>, _>>())
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for result in results {
            records.extend(result?);
        }
    }

    let manifest_path = gen_dir.join("manifest.jsonl");
    let mut body = String::new();
    for record in &records {
        body.push_str(&serde_json::to_string(record)?);
        body.push('\n');
    }
    std::fs::write(&manifest_path, body.as_bytes())
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    println!("generate: {} clips -> {}", records.len(), gen_dir.display());
    Ok(0)
}

fn cmd_evaluate(
    cli: &Cli,
    config: &PipelineConfig,
    workdir: &Path,
    manifest: &Path,
    generated: &Path,
    label: &str,
) -> tempogen_core::Result<u8> {
    let _ = cli;
    let bank = load_bank_dir(workdir)?;
    let records = scene::read_manifest(manifest)?;
    let manifest_dir = manifest.parent().unwrap_or(Path::new("."));
    let params = EvalParams {
        detector: config.detector.clone(),
        segment_length: config.metrics.segment_length,
        class_universe: bank.classes.len(),
    };
    let report = metrics::evaluate_system(
        &records,
        manifest_dir,
        generated,
        &bank.classes,
        &params,
        label,
    )?;
    let reports_dir = workdir.join("reports");
    std::fs::create_dir_all(&reports_dir)
        .map_err(|e| Error::io(reports_dir.display().to_string(), e))?;
    let json_path = reports_dir.join(format!("{label}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)
        .map_err(|e| Error::io(json_path.display().to_string(), e))?;
    println!(
        "evaluate: {label}: clips {} f1_segment {:.4} l1_freq {:.4} frechet {:.4}",
        report.clips, report.f1_segment, report.l1_freq, report.frechet
    );
    if report.is_partial() {
        eprintln!(
            "evaluate: {} generated clips missing; report is partial",
            report.missing_files.len()
        );
        return Ok(3);
    }
    Ok(0)
}

fn cmd_report(workdir: &Path) -> tempogen_core::Result<u8> {
    let reports_dir = workdir.join("reports");
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&reports_dir)
        .map_err(|e| Error::io(reports_dir.display().to_string(), e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::MissingFiles(vec![format!(
            "{}/*.json",
            reports_dir.display()
        )]));
    }
    let mut csv = String::from(metrics::REPORT_CSV_HEADER);
    csv.push('\n');
    let mut partial = false;
    for path in &entries {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let report: EvalReport = serde_json::from_str(&text)?;
        partial |= report.is_partial();
        csv.push_str(&metrics::report_csv_row(&report));
        csv.push('\n');
    }
    let out = reports_dir.join("summary.csv");
    std::fs::write(&out, csv.as_bytes()).map_err(|e| Error::io(out.display().to_string(), e))?;
    print!("{csv}");
    println!("report: {} systems -> {}", entries.len(), out.display());
    Ok(if partial { 3 } else { 0 })
}
