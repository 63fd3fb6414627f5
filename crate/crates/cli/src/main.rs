use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use spir_core::channel::ChannelPreset;
use spir_core::compositor::Mode;
use spir_core::metrics::position_error;
use spir_core::par::Exec;
use spir_core::session::{replay, run_pursuit, Horizon, SessionConfig, SessionRecord};
use spir_core::SimTime;
use spir_teleop::server::{serve, ServeOptions};
use spir_teleop::trials;

#[derive(Parser)]
#[command(name = "spir-teleop", version, about = "Past-image-record teleoperation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Drive the course headless with the scripted operator and record the session.
    Run {
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        horizon: HorizonArgs,
        /// Record directory to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve one session to a browser console over WebSocket.
    Serve {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        /// Console bundle to serve at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Tick as fast as possible instead of at wall-clock pace.
        #[arg(long)]
        fast: bool,
        /// Send every n-th frame.
        #[arg(long, default_value_t = 1)]
        frame_stride: u32,
        /// Write the session record here on shutdown.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a recorded command log and check the run log reproduces byte for byte.
    Replay {
        #[arg(long)]
        record: PathBuf,
        /// Write the replayed record here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every mode for several simulated subjects.
    Trials {
        #[arg(long, default_value_t = 8)]
        subjects: u32,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[arg(long)]
        course: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-run metrics as CSV and the ANOVA/LSD report for a runs directory.
    Stats {
        #[arg(long)]
        runs: PathBuf,
        /// Write the per-run CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Args)]
struct SessionArgs {
    #[arg(long, default_value = "spir2")]
    mode: Mode,
    /// Channel preset; defaults to the one the mode uses.
    #[arg(long)]
    preset: Option<String>,
    /// Course file; the built-in course otherwise.
    #[arg(long)]
    course: Option<PathBuf>,
    /// Overridden by SPIR_SEED.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SessionArgs {
    fn config(&self) -> anyhow::Result<SessionConfig> {
        let mut cfg = SessionConfig::for_mode(self.mode);
        if let Some(p) = &self.preset {
            cfg.preset = ChannelPreset::by_name(p)?;
        }
        cfg.course = self.course.clone();
        cfg.seed = self.seed;
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct HorizonArgs {
    #[arg(long, conflicts_with = "duration")]
    laps: Option<u32>,
    /// Seconds of simulated time.
    #[arg(long)]
    duration: Option<f64>,
}

impl HorizonArgs {
    fn horizon(&self) -> anyhow::Result<Horizon> {
        Ok(match (self.laps, self.duration) {
            (_, Some(s)) if !(s.is_finite() && s >= 0.0) => bail!("duration must be a non-negative number of seconds"),
            (_, Some(s)) => Horizon::Duration(SimTime::from_secs(s)),
            (Some(n), None) => Horizon::laps(n),
            (None, None) => Horizon::laps(1),
        })
    }
}

fn summarize(record: &SessionRecord) -> anyhow::Result<()> {
    let course = record.config.load_course()?;
    print!(
        "mode {}  t {} s  laps {}  switches {}",
        record.config.mode,
        record.runlog.duration(),
        record.laps_completed(),
        record.switch_count()
    );
    if record.runlog.len() >= 2 {
        let speed = spir_core::metrics::average_speed(&record.runlog)?;
        let pe = position_error(&record.runlog, &course)?;
        print!("  speed {speed:.4} m/s  position error {:.4} m", pe.mean);
    }
    println!();
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Cmd::Run { session, horizon, out } => {
            let record = run_pursuit(session.config()?, horizon.horizon()?)?;
            summarize(&record)?;
            if let Some(dir) = out {
                record.write_dir(&dir).with_context(|| format!("writing {}", dir.display()))?;
            }
        }
        Cmd::Serve { session, port, bind, static_dir, fast, frame_stride, out } => {
            let config = session.config()?;
            let opts = ServeOptions { realtime: !fast, frame_stride, static_dir };
            let rt = tokio::runtime::Runtime::new()?;
            let record = rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(SocketAddr::new(bind, port)).await?;
                eprintln!("serving on http://{}  (console endpoint /ws)", listener.local_addr()?);
                let shutdown = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                serve(listener, config, opts, shutdown).await
            })?;
            summarize(&record)?;
            if let Some(dir) = out {
                record.write_dir(&dir).with_context(|| format!("writing {}", dir.display()))?;
            }
        }
        Cmd::Replay { record, out } => {
            let original = SessionRecord::read_dir(&record).with_context(|| format!("reading {}", record.display()))?;
            let stored = fs::read(record.join("runlog.csv"))?;
            let again = replay(&original)?;
            if let Some(dir) = out {
                again.write_dir(&dir)?;
            }
            let same = again.runlog.to_csv_string().as_bytes() == stored.as_slice();
            println!("{} samples, run log {}", again.runlog.len(), if same { "identical" } else { "DIFFERS" });
            return Ok(same);
        }
        Cmd::Trials { subjects, horizon, course, seed, out } => {
            let mut base = SessionConfig::for_mode(Mode::Spir2);
            base.course = course;
            base.seed = seed;
            base.apply_env()?;
            trials::run_trials(&base, subjects, horizon.horizon()?, &out, Exec::default())?;
            println!("wrote {} runs to {}", subjects as usize * Mode::ALL.len(), out.display());
        }
        Cmd::Stats { runs, csv, alpha } => {
            let rows = trials::collect_metrics(&runs)?;
            let table = trials::metrics_csv(&rows);
            match csv {
                Some(path) => fs::write(&path, table)?,
                None => println!("{table}"),
            }
            print!("{}", trials::report(&rows, alpha)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
