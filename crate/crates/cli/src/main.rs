mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hodgeloop::Error;
use serde::Serialize;

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "hodgeloop", version, about = "Homology embeddings and homologous loops from weighted Hodge Laplacians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Build a 2-complex from a point cloud (CSV) or a grayscale image (PGM).
    BuildComplex(BuildArgs),
    /// Harmonic basis Y of the edge Laplacian.
    Embed(EmbedArgs),
    /// Unmix Y into Z.
    Ica(IcaArgs),
    /// One shortest homologous loop per column of Z.
    Loops(LoopsArgs),
    /// build-complex, embed, ica and loops in one go.
    RunAll(RunAllArgs),
    /// Perturbation diagnostics on a synthetic connected sum.
    PerturbCheck(PerturbArgs),
    /// Boundary maps in Matrix Market format.
    ExportBoundary(ExportArgs),
    /// Weighted Hodge Laplacian in Matrix Market format plus weight CSVs.
    ExportLaplacian(ExportArgs),
    /// Furthest point sampling of a point cloud.
    Fps(FpsArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct InputArgs {
    /// Point cloud CSV or PGM image.
    #[arg(long)]
    input: PathBuf,
    /// Skip one header line of the CSV.
    #[arg(long)]
    header: bool,
    /// Treat the input as a PGM image (implied by a .pgm extension).
    #[arg(long)]
    image: bool,
    #[arg(long, default_value_t = 30)]
    knn: usize,
    /// CkNN scale; required for point clouds.
    #[arg(long)]
    delta: Option<f64>,
    /// Subsample the cloud to this many points by furthest point sampling first.
    #[arg(long)]
    fps: Option<usize>,
    /// Foreground threshold for images.
    #[arg(long, default_value_t = 128)]
    threshold: u32,
    #[arg(long, default_value_t = 0)]
    closing_radius: usize,
    /// Foreground is dark instead of bright.
    #[arg(long)]
    invert: bool,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
struct SpectralArgs {
    #[arg(long, default_value_t = 1e-8)]
    zero_tol: f64,
    #[arg(long, default_value_t = 100.0)]
    gap_factor: f64,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
struct IcaFlags {
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-7)]
    conv_tol: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
enum Variant {
    Exhaustive,
    Maxedge,
}

#[derive(Args, Debug, Serialize)]
struct BuildArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EmbedArgs {
    /// complex.json from build-complex.
    #[arg(long)]
    complex: PathBuf,
    #[command(flatten)]
    spectral: SpectralArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct IcaArgs {
    /// Y.csv from embed.
    #[arg(long)]
    y: PathBuf,
    /// With the complex, per-column harmonic residuals |L z| are reported.
    #[arg(long)]
    complex: Option<PathBuf>,
    #[command(flatten)]
    ica: IcaFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct LoopsArgs {
    /// Z.csv from ica.
    #[arg(long)]
    z: PathBuf,
    #[arg(long)]
    complex: PathBuf,
    /// Edge lengths, one per line in edge order.
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, value_enum, default_value_t = Variant::Exhaustive)]
    variant: Variant,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct RunAllArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    spectral: SpectralArgs,
    #[command(flatten)]
    ica: IcaFlags,
    #[arg(long, value_enum, default_value_t = Variant::Exhaustive)]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BandwidthArg {
    Glued,
    PerPart,
}

#[derive(Args, Debug, Serialize)]
struct PerturbArgs {
    /// punctplane, tori_concat or genus2.
    #[arg(long, default_value = "punctplane")]
    manifold: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds to evaluate.
    #[arg(long, default_value_t = 1)]
    repeats: u64,
    #[arg(long, default_value_t = 1.2)]
    delta: f64,
    #[arg(long, default_value_t = 30)]
    knn: usize,
    #[arg(long, value_enum, default_value_t = BandwidthArg::Glued)]
    bandwidth: BandwidthArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ExportArgs {
    #[arg(long)]
    complex: PathBuf,
    /// 0 or 1.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct FpsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::AmbiguousBetti { .. } => 3,
        Error::Convergence { .. }
        | Error::DegenerateColumn(_)
        | Error::NoLoop { .. }
        | Error::ZeroEigengap
        | Error::Partition(_)
        | Error::IsolatedCell { .. }
        | Error::NotApplicable(_) => 2,
        _ => 1,
    }
}

fn dispatch(cmd: &Command, manifest: &mut RunManifest) -> hodgeloop::Result<PathBuf> {
    match cmd {
        Command::BuildComplex(a) => stages::build_complex_cmd(a, manifest).map(|_| a.out.clone()),
        Command::Embed(a) => stages::embed_cmd(a, manifest).map(|_| a.out.clone()),
        Command::Ica(a) => stages::ica_cmd(a, manifest).map(|_| a.out.clone()),
        Command::Loops(a) => stages::loops_cmd(a, manifest).map(|_| a.out.clone()),
        Command::RunAll(a) => stages::run_all_cmd(a, manifest).map(|_| a.out.clone()),
        Command::PerturbCheck(a) => stages::perturb_cmd(a, manifest).map(|_| a.out.clone()),
        Command::ExportBoundary(a) => stages::export_boundary_cmd(a, manifest).map(|_| a.out.clone()),
        Command::ExportLaplacian(a) => stages::export_laplacian_cmd(a, manifest).map(|_| a.out.clone()),
        Command::Fps(a) => stages::fps_cmd(a, manifest).map(|_| a.out.clone()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let mut manifest = RunManifest::new(&cli.command);
    match dispatch(&cli.command, &mut manifest) {
        Ok(out) => {
            manifest.wall_time_s = start.elapsed().as_secs_f64();
            if let Err(e) = manifest.write(&out) {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
