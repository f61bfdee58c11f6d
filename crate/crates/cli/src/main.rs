mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavblur::ErrorClass;

use commands::Failure;

#[derive(Parser)]
#[command(name = "wavblur", version, about = "Sparse wavelet-domain blur operators and TV restoration")]
struct Cli {
    /// Worker threads for the build and apply stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Transform {
    /// Wavelet family: haar, db2 or db3.
    #[arg(long, default_value = "db2")]
    wavelet: String,
    /// Decomposition depth (default: log2(N) - 3, at least 1).
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the exact blur to an image.
    Blur {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blur an image and add white Gaussian noise.
    Degrade {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the noiseless blurred image here.
        #[arg(long)]
        blurred: Option<PathBuf>,
    },
    /// Build the wavelet-domain operator of a kernel, full or thresholded.
    BuildTheta {
        #[arg(long)]
        kernel: PathBuf,
        #[command(flatten)]
        transform: Transform,
        /// Keep only k entries per pixel while building.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold a full operator file for each entry budget in one pass.
    Threshold {
        #[arg(long)]
        theta: PathBuf,
        /// Comma-separated entries-per-pixel budgets.
        #[arg(long)]
        k: String,
        /// Output path containing `{k}`, or a directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an operator restricted to a neighbourhood pattern.
    Pattern {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        pattern: PathBuf,
        #[command(flatten)]
        transform: Transform,
        #[arg(long)]
        out: PathBuf,
    },
    /// TV-L2 restoration through an operator file.
    Restore {
        /// Degraded image.
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        theta: PathBuf,
        /// Solver configuration file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Clean image, for reporting SNR.
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time exact against sparse application and sweep the image size.
    Bench {
        #[arg(long)]
        kernel: PathBuf,
        #[command(flatten)]
        transform: Transform,
        #[arg(long, default_value = "1,20")]
        k: String,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Image sizes of the scaling sweep.
        #[arg(long, default_value = "32,64,128")]
        sizes: String,
        /// Timing table (CSV).
        #[arg(long)]
        out: PathBuf,
        /// Scaling table (CSV).
        #[arg(long)]
        scaling_out: Option<PathBuf>,
    },
    /// Check off-diagonal decay of the 1D operator matrix.
    VerifyDecay {
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 0.8)]
        sigma_min: f64,
        #[arg(long, default_value_t = 3.0)]
        sigma_max: f64,
        /// Kernel cutoff in standard deviations.
        #[arg(long, default_value_t = 8.0)]
        truncation: f64,
        #[command(flatten)]
        transform: Transform,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the desk-scale experiment chain and write its tables.
    Reproduce {
        /// Experiment manifest (default: built-in 64x64 setup).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(failure: &Failure) -> u8 {
    match failure {
        Failure::Lib(e) => match e.class() {
            ErrorClass::Usage => 2,
            ErrorClass::Io => 3,
            ErrorClass::Format => 4,
            ErrorClass::Geometry => 5,
        },
        Failure::Infeasible => 6,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(exit_code(&failure))
        }
    }
}
