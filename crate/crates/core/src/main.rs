use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frost::observation::ObservationMode;
use frost::pipeline::{self, PipelineConfig, PlacementKind, RomDimension};
use frost::{Error, Result};

#[derive(Parser)]
#[command(name = "frost", version, about = "Temperature field reconstruction for food freezing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus per-key overrides.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON pipeline config; desk defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    subtract_mean: bool,
    #[arg(long)]
    pixel_size: Option<f64>,
    /// unit_norm or average
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    exclude_food: bool,
    /// all, greedy or regular
    #[arg(long)]
    placement: Option<String>,
    #[arg(long)]
    sensor_count: Option<usize>,
    #[arg(long)]
    noise_sd: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward solver for every sampled parameter set
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Build the POD basis from run files
    Pod {
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write a sensor layout
    Sensors {
        #[arg(long)]
        rom: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// ROM dimension used by greedy/regular placement: a count or `auto`
        #[arg(long)]
        n: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate the a-priori bound curve e(n)
    Bound {
        #[arg(long)]
        rom: PathBuf,
        #[arg(long)]
        sensors: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Produce synthetic measurements of a run
    Measure {
        #[arg(long)]
        sensors: PathBuf,
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Reconstruct full fields from measurements
    Reconstruct {
        #[arg(long)]
        rom: PathBuf,
        #[arg(long)]
        sensors: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
        /// ROM dimension: a count or `auto`
        #[arg(long, default_value = "auto")]
        n: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compare reconstructed fields with the truth
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run every stage into one directory
    Pipeline {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print the effective config as JSON
    Config {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn parse_mode(s: &str) -> Result<ObservationMode> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidArgument(format!("unknown observation mode `{s}`")))
}

fn parse_placement(s: &str) -> Result<PlacementKind> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidArgument(format!("unknown placement `{s}`")))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.nx {
            c.grid.nx = v;
        }
        if let Some(v) = self.ny {
            c.grid.ny = v;
        }
        if let Some(v) = self.dt {
            c.solver.dt = v;
        }
        if let Some(v) = self.t_final {
            c.solver.t_final = v;
        }
        if let Some(v) = self.stride {
            c.solver.stride = v;
        }
        if let Some(v) = self.count {
            c.sampling.count = v;
        }
        if let Some(v) = self.seed {
            c.sampling.seed = v;
        }
        if let Some(v) = self.train {
            c.sampling.train = v;
        }
        if let Some(v) = self.n_max {
            c.rom.n_max = v;
        }
        if self.subtract_mean {
            c.rom.subtract_mean = true;
        }
        if let Some(v) = self.pixel_size {
            c.sensors.pixel_size = v;
        }
        if let Some(v) = &self.mode {
            c.sensors.mode = parse_mode(v)?;
        }
        if self.exclude_food {
            c.sensors.exclude_food = true;
        }
        if let Some(v) = &self.placement {
            c.sensors.placement = parse_placement(v)?;
        }
        if let Some(v) = self.sensor_count {
            c.sensors.count = Some(v);
        }
        if let Some(v) = self.noise_sd {
            c.sensors.noise_sd = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    use serde_json::json;
    Ok(match cli.command {
        Command::Simulate { out, cfg } => {
            let paths = pipeline::cmd_simulate(&cfg.resolve()?, &out)?;
            json!({ "runs": paths })
        }
        Command::Pod { runs, out, cfg } => {
            let b = pipeline::cmd_pod(&cfg.resolve()?, &runs, &out)?;
            json!({ "basis": out, "n_max": b.n_max() })
        }
        Command::Sensors { rom, out, n, cfg } => {
            let mut c = cfg.resolve()?;
            if let Some(n) = n {
                c.estimation.n = n.parse::<RomDimension>()?;
            }
            let layout = pipeline::cmd_sensors(&c, rom.as_deref(), &out)?;
            json!({ "sensors": out, "m": layout.sensors.len() })
        }
        Command::Bound { rom, sensors, out, cfg } => {
            let n = pipeline::cmd_bound(&cfg.resolve()?, &rom, &sensors, &out)?;
            json!({ "curve": out, "n_star": n })
        }
        Command::Measure { sensors, run, out, cfg } => {
            let set = pipeline::cmd_measure(&cfg.resolve()?, &sensors, &run, &out)?;
            json!({ "measurements": out, "m": set.field_len, "snapshots": set.len() })
        }
        Command::Reconstruct { rom, sensors, measurements, n, out, cfg } => {
            let dim = n.parse::<RomDimension>()?;
            let used = pipeline::cmd_reconstruct(&cfg.resolve()?, &rom, &sensors, &measurements, dim, &out)?;
            json!({ "reconstruction": out, "n": used })
        }
        Command::Evaluate { truth, recon, out, cfg } => {
            let r = pipeline::cmd_evaluate(&cfg.resolve()?, &truth, &recon, &out)?;
            json!({ "report": out.join("report.json"), "time_averaged": r.time_averaged, "accumulated": r.accumulated })
        }
        Command::Pipeline { out, cfg } => {
            let reports = pipeline::cmd_pipeline(&cfg.resolve()?, &out)?;
            json!({ "out": out, "time_averaged": reports.iter().map(|r| r.time_averaged).collect::<Vec<_>>() })
        }
        Command::Config { cfg } => serde_json::to_value(cfg.resolve()?)?,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let doc = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{doc}");
            ExitCode::FAILURE
        }
    }
}
