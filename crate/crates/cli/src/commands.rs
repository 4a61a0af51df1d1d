//! The work behind each subcommand, writing human-readable progress to
//! `out`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use robomorph::compiler::{compile, emit_mjcf, is_corrupted, Corruption, RobotModel};
use robomorph::components::{emit_design_text, parse_design_text, DesignRecord};
use robomorph::evolution::{
    evaluate_design, init_few_shots, resume_evolution, EvolutionTrace, JsonLinesSink, SummaryLine, TraceLine,
    TraceSink, INIT_STREAM,
};
use robomorph::seeds::derive_seed;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub const TRACE_FILE: &str = "trace.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FEW_SHOT_DIR: &str = "few_shots";

/// Provenance written beside every artifact set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub init_seed: u64,
    pub backend: String,
    pub files: Vec<String>,
    pub config: RunConfig,
}

impl Manifest {
    fn new(command: &str, config: &RunConfig, backend: &str, files: &[&str]) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            init_seed: derive_seed(config.seed, INIT_STREAM),
            backend: backend.into(),
            files: files.iter().map(|f| f.to_string()).collect(),
            config: config.clone(),
        }
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Samples the initial few-shots exactly as `evolve` does and writes each
/// as design text plus MJCF. Returns the written paths.
pub fn init(config: &RunConfig, out: &mut dyn Write) -> Result<Vec<PathBuf>, CliError> {
    config.validate()?;
    let evo = &config.evolution;
    let records = init_few_shots(evo.k, evo.init_max_steps, derive_seed(config.seed, INIT_STREAM))?;
    let dir = config.output_dir.join(FEW_SHOT_DIR);
    create_dir(&dir)?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for (i, record) in records.iter().enumerate() {
        if let Some(c) = is_corrupted(record) {
            return Err(CliError::corrupted(&c));
        }
        let model = compile(record, evo.collisions).map_err(|e| CliError::data(e.to_string()))?;
        let stem = format!("example_{:02}", i + 1);
        for (ext, text) in [("txt", emit_design_text(record)), ("xml", emit_mjcf(&model))] {
            let name = format!("{stem}.{ext}");
            let path = dir.join(&name);
            write_file(&path, &text)?;
            written.push(path);
            names.push(name);
        }
        let graph = record.validate().expect("checked above");
        let _ = writeln!(out, "{stem}: {graph} ({} actuators)", model.actuators.len());
    }
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Manifest::new("init", config, "none", &name_refs).write(&dir.join(MANIFEST_FILE))?;
    Ok(written)
}

fn format_row(s: &SummaryLine) -> String {
    let label = if s.evolution == 0 {
        "init".to_string()
    } else {
        s.evolution.to_string()
    };
    let mean = s.mean.map_or("-".to_string(), |m| format!("{m:.4}"));
    format!(
        "{label:>9} {:>9.4} {mean:>9} {:>9} {:>9}",
        s.best, s.evaluated, s.corrupted
    )
}

/// Forwards trace lines to the archive and prints each summary.
struct Live<'a, S> {
    inner: S,
    out: &'a mut dyn Write,
}

impl<S: TraceSink> TraceSink for Live<'_, S> {
    fn record(&mut self, line: &TraceLine) -> io::Result<()> {
        self.inner.record(line)?;
        if let TraceLine::Summary(s) = line {
            writeln!(self.out, "{}", format_row(s))?;
        }
        Ok(())
    }
}

/// Reads a trace for resuming; a torn final line is dropped.
fn read_partial_trace(path: &Path) -> Result<EvolutionTrace, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match EvolutionTrace::from_jsonl(&text) {
        Ok(t) => Ok(t),
        Err(e) if !text.ends_with('\n') && e.line == text.lines().count() => {
            let cut = text.rfind('\n').map_or(0, |i| i + 1);
            EvolutionTrace::from_jsonl(&text[..cut]).map_err(|e| CliError::data(format!("{}:{}: {}", path.display(), e.line, e.reason)))
        }
        Err(e) => Err(CliError::data(format!("{}:{}: {}", path.display(), e.line, e.reason))),
    }
}

fn write_summary_csv(path: &Path, trace: &EvolutionTrace) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(["evolution", "best", "mean", "evaluated", "corrupted"])
        .map_err(|e| CliError::io(path, e))?;
    for s in trace.summaries().filter(|s| s.evolution > 0) {
        w.write_record([
            s.evolution.to_string(),
            s.best.to_string(),
            s.mean.map_or(String::new(), |m| m.to_string()),
            s.evaluated.to_string(),
            s.corrupted.to_string(),
        ])
        .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Runs (or with `resume`, continues) the evolution loop into
/// `output_dir`. The backend is built before anything is written.
pub fn evolve(config: &RunConfig, resume: bool, out: &mut dyn Write) -> Result<EvolutionTrace, CliError> {
    config.validate()?;
    let generator = config.generator()?;
    let dir = &config.output_dir;
    let trace_path = dir.join(TRACE_FILE);
    let manifest_path = dir.join(MANIFEST_FILE);
    let previous = if resume && trace_path.exists() {
        if manifest_path.exists() {
            let m = Manifest::read(&manifest_path)?;
            if m.config != *config {
                return Err(CliError::config(format!(
                    "{} was started with a different configuration",
                    dir.display()
                )));
            }
        }
        read_partial_trace(&trace_path)?.complete_prefix()
    } else {
        EvolutionTrace::default()
    };
    create_dir(dir)?;
    Manifest::new("evolve", config, generator.backend(), &[TRACE_FILE, SUMMARY_FILE, "champion.txt", "champion.xml"])
        .write(&manifest_path)?;
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(&trace_path)
        .map_err(|e| CliError::io(&trace_path, e))?;
    let mut writer = BufWriter::new(file);
    writer
        .write_all(previous.to_jsonl().as_bytes())
        .and_then(|_| writer.flush())
        .map_err(|e| CliError::io(&trace_path, e))?;

    let _ = writeln!(
        out,
        "{:>9} {:>9} {:>9} {:>9} {:>9}",
        "evolution", "best", "mean", "evaluated", "corrupted"
    );
    for s in previous.summaries() {
        let _ = writeln!(out, "{}", format_row(s));
    }
    let trace = {
        let mut sink = Live {
            inner: JsonLinesSink(writer),
            out: &mut *out,
        };
        resume_evolution(&config.evolution, generator.as_ref(), config.seed, previous, &mut sink)?
    };

    write_summary_csv(&dir.join(SUMMARY_FILE), &trace)?;
    let queue = trace.replay_queue(config.evolution.k);
    if let Some(best) = queue.best() {
        let model = compile(&best.record, config.evolution.collisions).map_err(|e| CliError::data(e.to_string()))?;
        write_file(&dir.join("champion.txt"), &emit_design_text(&best.record))?;
        write_file(&dir.join("champion.xml"), &emit_mjcf(&model))?;
        let graph = best.record.validate().expect("queued designs validate");
        let _ = writeln!(out, "champion {graph}: fitness {:.4} m/s", best.fitness);
    }
    Ok(trace)
}

/// Parses design text, reporting the failing stage.
pub fn read_design(text: &str) -> Result<DesignRecord, CliError> {
    let record = parse_design_text(text).map_err(|e| CliError::corrupted(&Corruption::from(&e)))?;
    if let Some(c) = is_corrupted(&record) {
        return Err(CliError::corrupted(&c));
    }
    Ok(record)
}

pub fn compile_design(text: &str, collisions: bool) -> Result<(String, RobotModel), CliError> {
    let record = read_design(text)?;
    let model = compile(&record, collisions).map_err(|e| CliError::data(e.to_string()))?;
    Ok((emit_mjcf(&model), model))
}

/// Gait search plus final evaluation of one design on the configured
/// terrain.
pub fn eval(config: &RunConfig, text: &str) -> Result<Value, CliError> {
    config.validate()?;
    let record = read_design(text)?;
    let evaluation = evaluate_design(&record, &config.evolution, config.seed).map_err(|c| CliError::corrupted(&c))?;
    let graph = record.validate().expect("checked above");
    Ok(json!({
        "design": graph.canonical(),
        "terrain": config.evolution.terrain,
        "seed": config.seed,
        "fitness": evaluation.report.fitness,
        "report": evaluation.report,
        "training": evaluation.training,
    }))
}

/// Creates `path` for writing, its parent directory included.
pub fn create_output(path: &Path) -> Result<File, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    File::create(path).map_err(|e| CliError::io(path, e))
}
