use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chatter::error::{CliError, Result};
use chatter::identities::{self, IdentityOptions, Mutation};
use chatter::input::{read_json, read_times, CascadeSpec, FlowConfigSpec, SkewSpec, StateSpec, SystemSpec};
use chatter::manifest::RunManifest;
use chatter::output::{simulation_summary, to_json, write_file, write_samples};
use chatter_core::bound::fuller_bound;
use chatter_core::flow::{hamiltonian_drift, integrate, FlowConfig};
use chatter_core::fuller::{fuller_order, make_cascade, sample_strata, strata, SampleSet};
use chatter_core::hamsym::{mu_sequence, phi_sequence, Branch, MuOptions, DEFAULT_BUDGET};
use chatter_core::skew::{block_decompose_at_rank, even_rank, kernel_basis, pfaffian, SkewMatrix, DEFAULT_RANK_TOL};
use chatter_core::vecfield::ControlAffineSystem;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "chatter", version, about = "Extremal flows, Pfaffian algebra and Fuller orders of switching sets")]
struct Cli {
    /// Flow configuration JSON (used by `simulate`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output path: a directory for `simulate`, a file otherwise. Default is stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rank tolerance (relative to the largest singular value).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrates the extremal flow.
    ///
    /// With `--out DIR` writes DIR/samples.csv and DIR/events.json. CSV
    /// columns: t, q0..q(n-1), p0..p(n-1), u0..u(m-1), regime
    /// (bang|singular|degenerate), h_norm. Floats have 17 significant digits.
    Simulate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        state: PathBuf,
    },
    /// Runs the seeded identity suites; exits 1 if any suite fails.
    Identities {
        /// Matrix sizes to exercise.
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 6, 8])]
        sizes: Vec<usize>,
        /// Deliberately corrupt one routine; the run must then fail.
        #[arg(long, value_enum)]
        mutate: Option<MutationArg>,
    },
    /// Evaluates φ₀, …, φ_lmax at a state with invertible Goh matrix.
    Phi {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 3)]
        lmax: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Builds the μ ladder at a basepoint with singular Goh matrix.
    Mu {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        rmax: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Pfaffian, J₀ and kernel basis of a skew matrix.
    ///
    /// A `.csv` file holds the strict upper triangle in row-major order (any
    /// line layout); anything else is read as JSON with `k`+`upper` or `rows`.
    Kernel {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Fuller order and strata of a cascade description, or ε-strata of sampled times.
    Fuller {
        #[arg(long, conflicts_with_all = ["times", "make"])]
        cascade: Option<PathBuf>,
        /// CSV with one time per row (optional header).
        #[arg(long, requires = "eps", conflicts_with = "make")]
        times: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        /// Generate a random cascade of this order from `--seed`.
        #[arg(long)]
        make: Option<usize>,
    },
    /// Explicit upper bound on the generic Fuller order in dimension n.
    Bound {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    AdjSign,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Identities { .. } => "identities",
            Command::Phi { .. } => "phi",
            Command::Mu { .. } => "mu",
            Command::Kernel { .. } => "kernel",
            Command::Fuller { .. } => "fuller",
            Command::Bound { .. } => "bound",
        }
    }
}

fn load_system(path: &Path) -> Result<ControlAffineSystem> {
    read_json::<SystemSpec>(path)?.build().map_err(|e| within(path, e))
}

fn within(path: &Path, e: CliError) -> CliError {
    match e {
        CliError::Field { field, message } => {
            let field = if field.starts_with('$') { field } else { format!("$.{field}") };
            CliError::field(format!("{}: {field}", path.display()), message)
        }
        other => other,
    }
}

/// Writes `text` to `out` or stdout and records the path.
fn emit(out: &Option<PathBuf>, text: &str, manifest: &mut RunManifest) -> Result<()> {
    match out {
        Some(p) => {
            write_file(p, text.as_bytes())?;
            manifest.outputs.push(p.display().to_string());
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct KernelOut {
    k: usize,
    rank: usize,
    odd_raw_rank: bool,
    pfaffian: Option<f64>,
    j0: Vec<usize>,
    pf_j0: f64,
    kernel: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct MuStepOut {
    r: usize,
    rho: usize,
    j: Vec<usize>,
    mu: f64,
    branch: Option<&'static str>,
    ambiguous: bool,
    sigma: f64,
}

#[derive(Serialize)]
struct MuOut {
    j0: Vec<usize>,
    permutation: Vec<usize>,
    plateau: Option<usize>,
    steps: Vec<MuStepOut>,
}

#[derive(Serialize)]
struct BoundOut {
    n: usize,
    big_n: usize,
    m: Vec<usize>,
    n_star_upper: Vec<String>,
    terms: Vec<String>,
    upper_bound: String,
}

#[derive(Serialize)]
#[serde(untagged)]
enum FullerOut {
    Exact { order: i64, set: CascadeSpec, strata: Vec<CascadeSpec> },
    Sampled { eps: f64, order: usize, labels: Vec<usize> },
}

fn run(cli: &Cli, manifest: &mut RunManifest) -> Result<()> {
    let tol = cli.tol.unwrap_or(DEFAULT_RANK_TOL);
    match &cli.command {
        Command::Simulate { system, state } => {
            let sys = load_system(system)?;
            let init = read_json::<StateSpec>(state)?.build(sys.n()).map_err(|e| within(state, e))?;
            let mut cfg = match &cli.config {
                Some(p) => read_json::<FlowConfigSpec>(p)?.build().map_err(|e| within(p, e))?,
                None => FlowConfig::default(),
            };
            if let Some(t) = cli.tol {
                cfg.goh_tol = t;
            }
            let traj = integrate(&sys, &init, &cfg)?;
            let drift = hamiltonian_drift(&traj, &sys)?;
            let summary = to_json(&simulation_summary(&traj, drift));
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)
                        .map_err(|e| CliError::Io { path: dir.display().to_string(), message: e.to_string() })?;
                    let csv_path = dir.join("samples.csv");
                    let file = std::fs::File::create(&csv_path)
                        .map_err(|e| CliError::Io { path: csv_path.display().to_string(), message: e.to_string() })?;
                    write_samples(std::io::BufWriter::new(file), &traj, sys.n(), sys.controls())?;
                    let events = dir.join("events.json");
                    write_file(&events, summary.as_bytes())?;
                    manifest.outputs.extend([csv_path.display().to_string(), events.display().to_string()]);
                }
                None => print!("{summary}"),
            }
        }
        Command::Identities { sizes, mutate } => {
            let report = identities::run(&IdentityOptions {
                seed: cli.seed,
                sizes: sizes.clone(),
                mutation: mutate.map(|MutationArg::AdjSign| Mutation::AdjSign),
                threads: identities::default_threads(),
            });
            emit(&cli.out, &to_json(&report), manifest)?;
            let failed = report.suites.iter().filter(|s| s.failures > 0).count();
            if failed > 0 {
                return Err(CliError::SuiteFailed(failed));
            }
        }
        Command::Phi { system, state, lmax, budget } => {
            let sys = load_system(system)?;
            let st = read_json::<StateSpec>(state)?.build(sys.n()).map_err(|e| within(state, e))?;
            let values = phi_sequence(&sys, &st, *lmax, *budget)?;
            emit(&cli.out, &to_json(&serde_json::json!({ "phi": values })), manifest)?;
        }
        Command::Mu { system, state, rmax, budget } => {
            let sys = load_system(system)?;
            let st = read_json::<StateSpec>(state)?.build(sys.n()).map_err(|e| within(state, e))?;
            let opts = MuOptions { budget: *budget, goh_tol: tol, ..MuOptions::new(*rmax) };
            let trace = mu_sequence(&sys, &st, &opts)?;
            let out = MuOut {
                j0: trace.j0.clone(),
                permutation: trace.permutation.clone(),
                plateau: trace.plateau(2 * sys.n()),
                steps: trace
                    .steps
                    .iter()
                    .map(|s| MuStepOut {
                        r: s.r,
                        rho: s.rho,
                        j: s.j.clone(),
                        mu: s.mu_value,
                        branch: s.branch.map(|b| match b {
                            Branch::Increase => "increase",
                            Branch::Stagnant => "stagnant",
                        }),
                        ambiguous: s.ambiguous,
                        sigma: s.sigma,
                    })
                    .collect(),
            };
            emit(&cli.out, &to_json(&out), manifest)?;
        }
        Command::Kernel { matrix } => {
            let a = read_matrix(matrix)?;
            let rank = even_rank(&a, tol);
            let dec = block_decompose_at_rank(&a, rank.rank / 2, tol)?;
            let out = KernelOut {
                k: a.size(),
                rank: rank.rank,
                odd_raw_rank: rank.odd_raw,
                pfaffian: if a.size() % 2 == 0 { Some(pfaffian(&a)?) } else { None },
                j0: dec.j0.clone(),
                pf_j0: dec.pf_a1,
                kernel: kernel_basis(&a, &dec)?,
            };
            emit(&cli.out, &to_json(&out), manifest)?;
        }
        Command::Fuller { cascade, times, eps, make } => {
            let out = if let Some(t) = times {
                let eps = eps.ok_or_else(|| CliError::field("--eps", "required with --times"))?;
                let set = SampleSet::new(read_times(t)?, eps).map_err(|e| CliError::field("--times", e.to_string()))?;
                let labels = sample_strata(&set);
                FullerOut::Sampled { eps, order: labels.iter().copied().max().unwrap_or(0), labels }
            } else {
                let set = match (cascade, make) {
                    (Some(p), _) => read_json::<CascadeSpec>(p)?.build().map_err(|e| within(p, e))?,
                    (None, Some(k)) => make_cascade(*k, cli.seed)?,
                    (None, None) => return Err(CliError::field("fuller", "give --cascade, --times or --make")),
                };
                FullerOut::Exact {
                    order: fuller_order(&set)?,
                    set: CascadeSpec::from_set(&set),
                    strata: strata(&set)?.iter().map(CascadeSpec::from_set).collect(),
                }
            };
            emit(&cli.out, &to_json(&out), manifest)?;
        }
        Command::Bound { n } => {
            let b = fuller_bound(*n)?;
            let out = BoundOut {
                n: b.n,
                big_n: b.big_n,
                m: b.terms.iter().map(|t| t.m).collect(),
                n_star_upper: b.terms.iter().map(|t| t.n_star.to_string()).collect(),
                terms: b.terms.iter().map(|t| t.value.to_string()).collect(),
                upper_bound: b.upper_bound.to_string(),
            };
            emit(&cli.out, &to_json(&out), manifest)?;
        }
    }
    Ok(())
}

fn read_matrix(path: &Path) -> Result<SkewMatrix> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let mut upper = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            for (col, field) in rec?.iter().enumerate().filter(|(_, f)| !f.is_empty()) {
                upper.push(field.parse::<f64>().map_err(|_| {
                    CliError::field(format!("{}:{}:{}", path.display(), line + 1, col + 1), format!("`{field}` is not a number"))
                })?);
            }
        }
        let k = (1..=64).find(|k| k * (k - 1) / 2 == upper.len()).ok_or_else(|| {
            CliError::field(path.display().to_string(), format!("{} entries is not a triangular count", upper.len()))
        })?;
        SkewMatrix::from_upper(k, &upper).map_err(|e| CliError::field(path.display().to_string(), e.to_string()))
    } else {
        read_json::<SkewSpec>(path)?.build().map_err(|e| within(path, e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut manifest = RunManifest::new(cli.command.name());
    manifest.config = cli.config.as_ref().map(|p| p.display().to_string());
    manifest.seed = Some(cli.seed);
    let result = run(&cli, &mut manifest);
    if let Err(e) = &result {
        eprintln!("error: {e}");
        manifest.exit_code = e.exit_code();
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    eprintln!("{}", serde_json::to_string(&manifest).expect("serializable"));
    ExitCode::from(manifest.exit_code as u8)
}
