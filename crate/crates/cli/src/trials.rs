//! Batches of simulated trials and their statistics.
//!
//! A runs directory holds one directory per subject, each containing one
//! session record directory per mode:
//!
//! ```text
//! runs/
//!   s01/front-camera/  s01/spir-existing/  s01/spir2/
//!   s02/...
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spir_core::compositor::Mode;
use spir_core::metrics::{average_speed, position_error, RunLog};
use spir_core::par::Exec;
use spir_core::session::{run_batch, Horizon, SessionConfig};
use spir_core::stats::{pairwise_lsd, within_subjects_anova, Report, TrialMatrix};

/// Per-subject variation of the scripted driver: lookahead, target speed
/// and localization noise are drawn from the subject seed.
pub fn subject_config(base: &SessionConfig, mode: Mode, seed: u64) -> SessionConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = SessionConfig::for_mode(mode);
    cfg.course = base.course.clone();
    cfg.seed = seed;
    cfg.operator.lookahead = rng.random_range(4.0..6.0);
    cfg.operator.target_speed = rng.random_range(0.8..1.0);
    cfg.noise.enabled = true;
    cfg.noise.sigma_position = 0.02;
    cfg.noise.sigma_heading = 0.002;
    cfg.noise.seed = seed;
    cfg
}

/// Runs every mode for `subjects` simulated subjects and writes the records
/// under `out`.
pub fn run_trials(base: &SessionConfig, subjects: u32, horizon: Horizon, out: &Path, exec: Exec) -> anyhow::Result<()> {
    let mut configs = Vec::new();
    let mut dirs = Vec::new();
    for s in 0..subjects {
        for mode in Mode::ALL {
            configs.push(subject_config(base, mode, base.seed.wrapping_add(u64::from(s))));
            dirs.push(out.join(format!("s{:02}", s + 1)).join(mode.as_str()));
        }
    }
    for (record, dir) in run_batch(&configs, horizon, exec).into_iter().zip(dirs) {
        let record = record?;
        record.write_dir(&dir).with_context(|| format!("writing {}", dir.display()))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub subject: String,
    pub mode: Mode,
    pub duration: f64,
    pub average_speed: f64,
    pub position_error_sum: f64,
    pub position_error_mean: f64,
}

pub const METRICS_HEADER: &str = "subject,mode,duration,average_speed,position_error_sum,position_error_mean";

fn record_dirs(runs: &Path) -> anyhow::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for subject in fs::read_dir(runs).with_context(|| format!("reading {}", runs.display()))? {
        let subject = subject?.path();
        if !subject.is_dir() {
            continue;
        }
        let name = subject.file_name().unwrap_or_default().to_string_lossy().into_owned();
        for run in fs::read_dir(&subject)? {
            let run = run?.path();
            if run.join("runlog.csv").is_file() {
                out.push((name.clone(), run));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn read_config(dir: &Path) -> anyhow::Result<SessionConfig> {
    let text = fs::read(dir.join("config.json")).with_context(|| format!("reading {}/config.json", dir.display()))?;
    Ok(serde_json::from_slice(&text)?)
}

pub fn collect_metrics(runs: &Path) -> anyhow::Result<Vec<RunMetrics>> {
    let mut out = Vec::new();
    for (subject, dir) in record_dirs(runs)? {
        let config = read_config(&dir)?;
        let course = config.load_course()?;
        let log = RunLog::from_file(dir.join("runlog.csv"))?;
        let pe = position_error(&log, &course).with_context(|| format!("{}", dir.display()))?;
        out.push(RunMetrics {
            subject,
            mode: config.mode,
            duration: log.duration().as_secs(),
            average_speed: average_speed(&log).with_context(|| format!("{}", dir.display()))?,
            position_error_sum: pe.sum,
            position_error_mean: pe.mean,
        });
    }
    if out.is_empty() {
        bail!("no run records under {}", runs.display());
    }
    Ok(out)
}

pub fn metrics_csv(rows: &[RunMetrics]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.subject, r.mode, r.duration, r.average_speed, r.position_error_sum, r.position_error_mean
        );
    }
    s
}

/// Subjects x modes matrix of `value`, keeping only subjects with every mode.
fn matrix(rows: &[RunMetrics], value: impl Fn(&RunMetrics) -> f64) -> anyhow::Result<TrialMatrix> {
    let mut by_subject: BTreeMap<&str, HashMap<Mode, f64>> = BTreeMap::new();
    for r in rows {
        by_subject.entry(&r.subject).or_default().insert(r.mode, value(r));
    }
    let values: Vec<Vec<f64>> = by_subject
        .values()
        .filter(|m| m.len() == Mode::ALL.len())
        .map(|m| Mode::ALL.iter().map(|mode| m[mode]).collect())
        .collect();
    Ok(TrialMatrix::new(values)?)
}

/// ANOVA tables and LSD comparisons for average speed and position error.
pub fn report(rows: &[RunMetrics], alpha: f64) -> anyhow::Result<String> {
    let names: Vec<&str> = Mode::ALL.iter().map(|m| m.as_str()).collect();
    let mut out = String::new();
    type Metric = fn(&RunMetrics) -> f64;
    let metrics: [(&str, Metric); 2] =
        [("Average speed [m/s]", |r| r.average_speed), ("Position error [m]", |r| r.position_error_mean)];
    for (title, value) in metrics {
        let m = matrix(rows, value)?;
        let anova = within_subjects_anova(&m)?;
        let lsd = pairwise_lsd(&m, alpha)?;
        let _ = writeln!(out, "{}", Report { title, systems: &names, anova, lsd: &lsd });
    }
    Ok(out)
}
