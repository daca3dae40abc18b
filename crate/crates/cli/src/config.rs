use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use symext::hierarchy::HierarchyOptions;
use symext::sdp::SolverOptions;
use symext::Error;

pub const EXIT_USAGE: u8 = 64;
pub const EXIT_SOFTWARE: u8 = 70;
pub const EXIT_CANTCREAT: u8 = 73;

#[derive(Debug, Parser)]
#[command(name = "symext", version, about = "PPT symmetric-extension separability tests")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Duality-gap tolerance of the SDP solver.
    #[arg(long, global = true, default_value_t = SolverOptions::default().gap_tol)]
    pub tol_gap: f64,
    /// Feasibility tolerance of the SDP solver.
    #[arg(long, global = true, default_value_t = SolverOptions::default().feas_tol)]
    pub tol_feas: f64,
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Directory receiving report files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Verbose solver logging on stderr.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub trace: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LevelArgs {
    /// Number of copies of A.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Drop the partial-transpose constraints (levels above 1).
    #[arg(long)]
    pub no_ppt: bool,
    /// Work on the full copy space instead of the symmetric subspace.
    #[arg(long)]
    pub no_reduce: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "verb")]
pub enum Command {
    /// Run one level of the hierarchy on a state file.
    Test {
        state: PathBuf,
        #[command(flatten)]
        #[serde(flatten)]
        level: LevelArgs,
    },
    /// Run levels 1..=k-max, stopping at the first detection.
    Ladder {
        state: PathBuf,
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        #[arg(long)]
        no_ppt: bool,
        #[arg(long)]
        no_reduce: bool,
    },
    /// Test a built-in family over a parameter range.
    Sweep {
        /// choi, gisin, or choi-gamma (filter parameter sweep of a Choi state).
        family: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        /// Base parameter of the filtered family (choi-gamma only).
        #[arg(long, default_value_t = 3.0001)]
        alpha: f64,
        #[command(flatten)]
        #[serde(flatten)]
        level: LevelArgs,
    },
    /// Decomposability analysis of a witness file.
    Decompose { witness: PathBuf },
    /// Positivity certification of a map file.
    Posmap {
        map: PathBuf,
        #[arg(long, default_value_t = 4)]
        kmax: usize,
    },
    /// Thresholds alpha_k for the tracial / Choi-witness map pair.
    Table1 {
        #[arg(long, default_value_t = 8)]
        kmax: usize,
    },
    /// List or emit catalog states and witnesses.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Check a witness file on product states and optionally on a state.
    VerifyWitness {
        witness: PathBuf,
        #[arg(long)]
        state: Option<PathBuf>,
        /// Test report carrying the dual blocks, for the k-SOS identity check.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "action")]
pub enum CatalogAction {
    List,
    Emit {
        name: String,
        #[arg(long)]
        param: Option<f64>,
        /// Local dimensions for maximally-mixed.
        #[arg(long, num_args = 2, value_names = ["D_A", "D_B"])]
        dims: Option<Vec<usize>>,
        /// Destination file; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: EXIT_SOFTWARE, message: message.into() }
    }

    /// Errors raised while reading inputs are usage errors; everything else is internal.
    pub fn input(path: &Path, e: Error) -> Self {
        match e {
            Error::Io(err) => Self::usage(format!("{}: {err}", path.display())),
            other => Self::usage(format!("{}: {other}", path.display())),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Format { .. } => Self::usage(e.to_string()),
            other => Self::internal(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

impl GlobalArgs {
    pub fn validate(&self) -> CliResult<()> {
        for (name, v) in [("--tol-gap", self.tol_gap), ("--tol-feas", self.tol_feas)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::usage(format!("{name} must be positive, got {v}")));
            }
        }
        if self.jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { gap_tol: self.tol_gap, feas_tol: self.tol_feas, ..SolverOptions::default() }
    }

    pub fn hierarchy_options(&self) -> HierarchyOptions {
        HierarchyOptions { solver: self.solver_options(), seed: self.seed, ..HierarchyOptions::default() }
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output(&self) -> CliResult<()> {
        let fail = |e: std::io::Error| Failure {
            code: EXIT_CANTCREAT,
            message: format!("output directory {} is not writable: {e}", self.out.display()),
        };
        std::fs::create_dir_all(&self.out).map_err(fail)?;
        let probe = self.out.join(".symext-write-probe");
        std::fs::write(&probe, b"").map_err(fail)?;
        std::fs::remove_file(&probe).map_err(fail)?;
        Ok(())
    }
}

/// Everything that determines a run's output; its hash names the report file.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a> {
    pub command: &'a Command,
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub seed: u64,
    /// SHA-256 of each input file, in argument order.
    pub inputs: Vec<String>,
}

impl<'a> RunConfig<'a> {
    pub fn new(cli: &'a Cli, inputs: &[&Path]) -> CliResult<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                std::fs::read(p)
                    .map(|bytes| hex::encode(Sha256::digest(&bytes)))
                    .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(Self {
            command: &cli.command,
            tol_gap: cli.global.tol_gap,
            tol_feas: cli.global.tol_feas,
            seed: cli.global.seed,
            inputs,
        })
    }

    /// First 16 hex digits of the SHA-256 of the canonical config text.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
    }
}
