use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use xhom::quadrature::GridSpec;
use xhom_cli::run::{self, Axis, DipRequest, Report, ScanRequest};
use xhom_cli::setup::{DeviceName, Setup, TABLE_DIR_ENV};
use xhom_cli::{load_setup, RunError};

#[derive(Parser)]
#[command(name = "xhom", version, about = "X-ray Hong-Ou-Mandel simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides [output].dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Quadrature grid <omega>x<kx>x<ky>; overrides [quadrature].grid.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Repeat the dip on the doubled grid and report the change.
    #[arg(long, global = true)]
    refine: bool,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config and print it with defaults filled in.
    Validate,
    /// Down-conversion spectrum through the detector aperture.
    Spectrum,
    /// Reflectivity sweep of one multilayer device.
    Scan {
        #[arg(long, value_enum)]
        device: Device,
        #[arg(long, value_enum, default_value = "angle")]
        axis: ScanAxis,
        /// Sweep start, deg or keV.
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        /// Sweep end, deg or keV.
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Coincidence rate versus delay.
    Dip {
        #[arg(long, allow_hyphen_values = true)]
        from_as: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to_as: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Device {
    #[value(name = "mirror_s")]
    MirrorS,
    #[value(name = "mirror_i")]
    MirrorI,
    #[value(name = "beam_splitter")]
    BeamSplitter,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanAxis {
    Angle,
    Energy,
}

fn setup(cli: &Cli) -> Result<Setup, RunError> {
    let path = cli.config.as_ref().ok_or_else(|| RunError::Usage("--config <path> is required".into()))?;
    let table_dir = std::env::var_os(TABLE_DIR_ENV).map(PathBuf::from);
    let mut s = load_setup(path, table_dir.as_deref())?;
    if let Some(g) = &cli.grid {
        s.grid = g.parse::<GridSpec>().map_err(|e| RunError::Usage(e.to_string()))?;
        s.config.quadrature.grid = s.grid.to_string();
    }
    if let Some(o) = &cli.out {
        s.config.output.dir = o.display().to_string();
    }
    Ok(s)
}

fn execute(cli: &Cli) -> Result<Report, RunError> {
    let s = setup(cli)?;
    let out = PathBuf::from(&s.config.output.dir);
    match &cli.command {
        Command::Validate => Ok(Report { lines: vec![s.config.normalized()], ..Report::default() }),
        Command::Spectrum => run::spectrum(&s, &out).map(|r| r.1),
        Command::Scan { device, axis, from, to, points } => {
            let device = match device {
                Device::MirrorS => DeviceName::MirrorS,
                Device::MirrorI => DeviceName::MirrorI,
                Device::BeamSplitter => DeviceName::BeamSplitter,
            };
            let axis = match axis {
                ScanAxis::Angle => Axis::Angle,
                ScanAxis::Energy => Axis::Energy,
            };
            run::scan(&s, ScanRequest { device, axis, from: *from, to: *to, points: *points }, &out).map(|r| r.1)
        }
        Command::Dip { from_as, to_as, points } => {
            let req = DipRequest { from_as: *from_as, to_as: *to_as, points: *points, refine: cli.refine };
            run::dip(&s, req, &out).map(|r| r.1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            if !cli.quiet {
                for n in &report.notices {
                    eprintln!("notice: {n}");
                }
                for l in &report.lines {
                    println!("{l}");
                }
                for f in &report.files {
                    println!("wrote {}", f.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
