//! `qwalk`: simulate, synthesize, calibrate, reconstruct and score
//! waveguide quantum walks. Each stage reads and writes plain files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qwalk::calibration::{calibrate_sweep, Direction, SweepOptions};
use qwalk::evolution::{evolution_map_over_distance, uniform_walk, EvolutionMap};
use qwalk::experiment::{nominal_xi, to_array_xi, Campaign, Manifest, NoiseModel, SweepPlan, DEFAULT_SEED, MAX_STRAIN};
use qwalk::io;
use qwalk::lattice::{Device, DeviceConfig};
use qwalk::reconstruction::{calibrate_snapshots, fidelity_curve, reconstruct};

#[derive(Parser)]
#[command(name = "qwalk", version, about = "Quantum walks on stretchable waveguide arrays")]
struct Cli {
    /// Device description (JSON). Defaults to the built-in 51-guide chip.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Master seed for synthetic data.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Which files to write for evolution maps.
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Pgm,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an evolution map and write evolution.csv / evolution.pgm.
    Simulate(SimulateArgs),
    /// Generate synthetic end-face snapshots (snapshots.csv, manifest.json).
    Synth(SynthArgs),
    /// Turn reference-pair readings into ξ values (calibration.csv).
    Calibrate(CalibrateArgs),
    /// Stack calibrated snapshots into a map (reconstructed.csv / .pgm).
    Reconstruct(ReconstructArgs),
    /// Score a map against theory; prints min/mean, writes fidelity.csv.
    Fidelity(FidelityArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of guides (default: from the device).
    #[arg(long)]
    n: Option<usize>,
    /// Coupling in rad/mm (default: device value at --strain, --wavelength).
    #[arg(long)]
    gamma: Option<f64>,
    /// Final propagation distance in mm (default: chip length).
    #[arg(long)]
    z: Option<f64>,
    /// Number of rows, evenly spaced from 0 to z; 1 gives the single row at z.
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Input guide (default: centre).
    #[arg(long)]
    input: Option<usize>,
    /// Strain used to derive the coupling from the device.
    #[arg(long, default_value_t = 0.0)]
    strain: f64,
    /// Wavelength in nm used to derive the coupling from the device.
    #[arg(long, default_value_t = 532.0)]
    wavelength: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// Wavelengths in nm, one sweep each.
    #[arg(long, value_delimiter = ',', default_value = "532")]
    wavelength: Vec<f64>,
    /// Strain points per sweep.
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Largest strain of each sweep.
    #[arg(long, default_value_t = MAX_STRAIN)]
    strain_max: f64,
    /// Input guide (default: centre).
    #[arg(long)]
    input: Option<usize>,
    /// Detected photons per frame before loss.
    #[arg(long, default_value_t = 1e4)]
    budget: f64,
    /// Fraction of power scattered into the scatter sites.
    #[arg(long, default_value_t = 0.02)]
    scatter: f64,
    /// Readout noise, relative to the expected total counts.
    #[arg(long, default_value_t = 0.001)]
    readout: f64,
    /// Propagation loss in dB/mm.
    #[arg(long, default_value_t = 0.1)]
    loss: f64,
    /// Switch all noise off.
    #[arg(long)]
    noiseless: bool,
    /// Also write snapshots.json.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Snapshot file (.csv or .json).
    #[arg(long, conflicts_with = "readings", required_unless_present = "readings")]
    snapshots: Option<PathBuf>,
    /// Reference readings CSV (strain,p_bar,p_cross).
    #[arg(long)]
    readings: Option<PathBuf>,
    /// Direction of ξ along the readings (readings CSV only; snapshots
    /// always decrease with strain).
    #[arg(long, default_value_t = Direction::Decreasing)]
    direction: Direction,
    /// Tolerated step against the direction, for noisy data.
    #[arg(long, default_value_t = 0.05)]
    slack: f64,
    /// Largest allowed ξ step between neighbouring readings.
    #[arg(long, default_value_t = 0.4)]
    max_step: f64,
    /// Expected ξ of the first reading (readings CSV only).
    #[arg(long)]
    start_hint: Option<f64>,
    /// Do not use the device model to choose branches for snapshots.
    #[arg(long)]
    no_prior: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Snapshot file (.csv or .json).
    #[arg(long)]
    snapshots: PathBuf,
    /// Calibration CSV matching the snapshots row by row.
    #[arg(long)]
    calibration: PathBuf,
    /// Resample onto this many evenly spaced ξ values (default: keep the
    /// calibrated ones).
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct FidelityArgs {
    /// Measured or reconstructed map CSV.
    #[arg(long)]
    map: PathBuf,
    /// Theory map CSV on the same ξ grid (default: simulate the ideal walk).
    #[arg(long)]
    theory: Option<PathBuf>,
    /// Input guide of the simulated theory (default: centre).
    #[arg(long)]
    input: Option<usize>,
}

/// Bad flags, config or missing inputs (exit 2) vs failures while working
/// (exit 1).
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e:#}"),
            Failure::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

trait Classify<T> {
    fn config(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn config(self) -> Outcome<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn config_error(msg: impl fmt::Display) -> Failure {
    Failure::Config(anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qwalk: {e}");
            ExitCode::from(match e {
                Failure::Config(_) => 2,
                Failure::Runtime(_) => 1,
            })
        }
    }
}

fn run(cli: &Cli) -> Outcome<()> {
    let config = load_config(cli.config.as_deref())?;
    let device = Device::from_config(&config).config()?;
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("cannot create output directory {}", cli.out.display()))
        .config()?;
    match &cli.command {
        Command::Simulate(args) => simulate(cli, &device, args),
        Command::Synth(args) => synth(cli, &config, &device, args),
        Command::Calibrate(args) => calibrate(cli, &device, args),
        Command::Reconstruct(args) => reconstruct_cmd(cli, args),
        Command::Fidelity(args) => fidelity_cmd(cli, args),
    }
}

fn load_config(path: Option<&Path>) -> Outcome<DeviceConfig> {
    let Some(path) = path else {
        return Ok(DeviceConfig::default());
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .config()?;
    DeviceConfig::from_json(&text)
        .with_context(|| format!("in {}", path.display()))
        .config()
}

fn require_file(path: &Path) -> Outcome<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config_error(format!("input file {} does not exist", path.display())))
    }
}

fn write(cli: &Cli, name: &str, bytes: &[u8]) -> Outcome<PathBuf> {
    let path = cli.out.join(name);
    io::write_atomic(&path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()?;
    Ok(path)
}

fn write_map(cli: &Cli, stem: &str, map: &EvolutionMap) -> Outcome<()> {
    if cli.format != Format::Pgm {
        write(cli, &format!("{stem}.csv"), io::map_to_csv(map).as_bytes())?;
    }
    if cli.format != Format::Csv {
        write(cli, &format!("{stem}.pgm"), &io::map_to_pgm(map))?;
    }
    Ok(())
}

fn input_or_centre(input: Option<usize>, n: usize) -> Outcome<usize> {
    match input {
        Some(i) if i >= n => Err(config_error(format!("--input {i} is outside 0..{n}"))),
        Some(i) => Ok(i),
        None => Ok(n / 2),
    }
}

fn simulate(cli: &Cli, device: &Device, args: &SimulateArgs) -> Outcome<()> {
    let n = args.n.unwrap_or(device.geometry.n_guides);
    let gamma = match args.gamma {
        Some(g) => g,
        None => device.gamma_at(args.strain, args.wavelength).config()?,
    };
    let z = args.z.unwrap_or(device.geometry.chip_length_mm);
    if args.steps == 0 {
        return Err(config_error("--steps must be at least 1"));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(config_error("--z must be a nonnegative distance"));
    }
    let input = input_or_centre(args.input, n)?;
    let z_grid: Vec<f64> = if args.steps == 1 {
        vec![z]
    } else {
        (0..args.steps).map(|i| z * i as f64 / (args.steps - 1) as f64).collect()
    };
    let map = evolution_map_over_distance(n, gamma, &z_grid, input).config()?;
    write_map(cli, "evolution", &map)?;
    let grid = map.xi_grid();
    println!(
        "simulated n={n} gamma={gamma:.6} rad/mm input={input}: {} rows, xi {:.6} .. {:.6}",
        map.n_rows(),
        grid[0],
        grid[grid.len() - 1]
    );
    Ok(())
}

fn synth(cli: &Cli, config: &DeviceConfig, device: &Device, args: &SynthArgs) -> Outcome<()> {
    let input = input_or_centre(args.input, device.geometry.n_guides)?;
    let noise = if args.noiseless {
        NoiseModel::noiseless().with_seed(cli.seed)
    } else {
        NoiseModel {
            photon_budget: Some(args.budget),
            scatter_fraction: args.scatter,
            readout_sigma: args.readout,
            loss_db_per_mm: args.loss,
            ..NoiseModel::default().with_seed(cli.seed)
        }
    };
    noise.validate().config()?;
    let plans = args
        .wavelength
        .iter()
        .map(|&wl| {
            device.wavelength_model.scale(wl)?;
            SweepPlan::linear(wl, args.strain_max, args.points, input)
        })
        .collect::<qwalk::Result<Vec<_>>>()
        .config()?;
    let campaign = Campaign { plans, noise };
    let snapshots = campaign.synthesize(device).runtime()?;
    write(cli, "snapshots.csv", io::snapshots_to_csv(&snapshots).runtime()?.as_bytes())?;
    if args.json {
        write(cli, "snapshots.json", io::snapshots_to_json(&snapshots).as_bytes())?;
    }
    let manifest = Manifest {
        device: config.clone(),
        campaign,
        master_seed: cli.seed,
    };
    let text = serde_json::to_string_pretty(&manifest).context("serializing manifest").runtime()?;
    write(cli, "manifest.json", text.as_bytes())?;
    println!(
        "synthesized {} snapshots ({} sweeps, seed {})",
        snapshots.len(),
        manifest.campaign.plans.len(),
        cli.seed
    );
    Ok(())
}

fn calibrate(cli: &Cli, device: &Device, args: &CalibrateArgs) -> Outcome<()> {
    let mut options = SweepOptions::new(args.direction)
        .with_slack(args.slack)
        .with_max_step(args.max_step);
    let (strains, calibration) = if let Some(path) = &args.readings {
        require_file(path)?;
        if let Some(h) = args.start_hint {
            options = options.with_start_hint(h);
        }
        let text = fs::read_to_string(path).context("reading readings").runtime()?;
        let rows = io::readings_from_csv(&text, &path.display().to_string()).runtime()?;
        let readings: Vec<_> = rows.iter().map(|(_, r)| *r).collect();
        let cal = calibrate_sweep(&readings, &options).runtime()?;
        (rows.iter().map(|(s, _)| *s).collect::<Vec<_>>(), cal)
    } else {
        let path = args.snapshots.as_ref().expect("clap requires one input");
        require_file(path)?;
        let snapshots = io::read_snapshots(path).runtime()?;
        let mut cal = if args.no_prior {
            calibrate_snapshots(&snapshots, &options, |_| None)
        } else {
            calibrate_snapshots(&snapshots, &options, |s| nominal_xi(device, s))
        }
        .runtime()?;
        to_array_xi(device, &snapshots, &mut cal).runtime()?;
        (snapshots.iter().map(|s| s.strain).collect(), cal)
    };
    write(cli, "calibration.csv", io::calibration_to_csv(&strains, &calibration).as_bytes())?;
    for (s, c) in strains.iter().zip(&calibration) {
        println!("strain {s:.6}  xi {:.6}  branch {}", c.xi, c.branch);
    }
    Ok(())
}

fn reconstruct_cmd(cli: &Cli, args: &ReconstructArgs) -> Outcome<()> {
    require_file(&args.snapshots)?;
    require_file(&args.calibration)?;
    if args.steps.is_some_and(|s| s < 2) {
        return Err(config_error("--steps must be at least 2"));
    }
    let snapshots = io::read_snapshots(&args.snapshots).runtime()?;
    let cal_path = args.calibration.display().to_string();
    let text = fs::read_to_string(&args.calibration).context("reading calibration").runtime()?;
    let rows = io::calibration_from_csv(&text, &cal_path).runtime()?;
    if rows.len() != snapshots.len() {
        return Err(Failure::Runtime(anyhow!(
            "{cal_path} has {} rows but there are {} snapshots",
            rows.len(),
            snapshots.len()
        )));
    }
    for (i, ((strain, _), s)) in rows.iter().zip(&snapshots).enumerate() {
        if (strain - s.strain).abs() > 1e-12 {
            return Err(Failure::Runtime(anyhow!(
                "{cal_path} row {}: strain {strain} does not match snapshot strain {}",
                i + 1,
                s.strain
            )));
        }
    }
    let calibration: Vec<_> = rows.into_iter().map(|(_, c)| c).collect();
    let grid = args.steps.map(|steps| {
        let lo = calibration.iter().map(|c| c.xi).fold(f64::INFINITY, f64::min);
        let hi = calibration.iter().map(|c| c.xi).fold(f64::NEG_INFINITY, f64::max);
        (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect::<Vec<_>>()
    });
    let map = reconstruct(&snapshots, &calibration, grid.as_deref()).runtime()?;
    write_map(cli, "reconstructed", &map)?;
    let g = map.xi_grid();
    println!("reconstructed {} rows, xi {:.6} .. {:.6}", map.n_rows(), g[0], g[g.len() - 1]);
    Ok(())
}

fn read_map(path: &Path) -> Outcome<EvolutionMap> {
    require_file(path)?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .runtime()?;
    io::map_from_csv(&text, &path.display().to_string()).runtime()
}

fn fidelity_cmd(cli: &Cli, args: &FidelityArgs) -> Outcome<()> {
    if let Some(t) = &args.theory {
        require_file(t)?;
    }
    let map = read_map(&args.map)?;
    let theory = match &args.theory {
        Some(path) => read_map(path)?,
        None => {
            let input = input_or_centre(args.input, map.n_guides())?;
            uniform_walk(map.n_guides(), map.xi_grid(), input).runtime()?
        }
    };
    let curve = fidelity_curve(&map, &theory).runtime()?;
    if curve.values.is_empty() {
        return Err(Failure::Runtime(anyhow!("{} has no rows", args.map.display())));
    }
    write(cli, "fidelity.csv", io::fidelity_to_csv(&curve).as_bytes())?;
    println!("min fidelity {:.6}", curve.min());
    println!("mean fidelity {:.6}", curve.mean());
    Ok(())
}
