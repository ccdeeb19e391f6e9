//! `spofe`: sparse polynomial features from kernel principal components.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use spofe::dataio::write_matrix_csv;
use spofe::inference::{PValueMethod, SelectionStrategy};
use spofe::kernels::{Gamma, KernelKind};
use spofe::pipeline::signals_for;
use spofe::polybasis::term_names;
use spofe::{build_basis, expand, load_csv, run_pipeline_detailed, simulate_fdr, standardize, Error, PipelineConfig};
use spofe::{Result, SimulationSpec};

#[derive(Parser)]
#[command(name = "spofe", version, about = "Sparse polynomial feature extraction with weighted knockoffs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the JSON report.
    Run(RunArgs),
    /// Write the degree-2 polynomial expansion of a CSV.
    Expand(ExpandArgs),
    /// Monte-Carlo check of knockoff FDR control on synthetic signals.
    SimulateFdr(SimArgs),
    /// Write the kernel PCA signals and their weights.
    DumpSignals(DumpArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// The first CSV row holds data, not column names.
    #[arg(long)]
    no_header: bool,
}

/// Settings shared by every subcommand that builds kernel signals. Anything
/// given here overrides the config file.
#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<KernelKind>,
    /// A positive number or `auto` (1/p).
    #[arg(long)]
    gamma: Option<Gamma>,
    #[arg(long)]
    coef0: Option<f64>,
    #[arg(long)]
    rff_dim: Option<usize>,
    #[arg(long)]
    num_components: Option<usize>,
    #[arg(long)]
    max_rows: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl KernelArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.kernel {
            c.kernel = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.coef0 {
            c.coef0 = v;
        }
        if let Some(v) = self.rff_dim {
            c.rff_dim = v;
        }
        if let Some(v) = self.num_components {
            c.num_components = v;
        }
        if let Some(v) = self.max_rows {
            c.max_rows = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Target FDR for the per-component knockoff+ supports.
    #[arg(long)]
    fdr: Option<f64>,
    /// `threshold:<alpha>`, `bh:<alpha>`, `fixed:<r>` or `auto`.
    #[arg(long)]
    selection: Option<SelectionStrategy>,
    #[arg(long)]
    pvalues: Option<PValueMethod>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write Ψ, the signals, Λ and the per-signal statistics as CSVs here.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    /// Include wall-clock stage timings (the report is then not reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct ExpandArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    output: PathBuf,
    /// Expand the raw values instead of the standardized features.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    p: usize,
    /// Number of planted terms.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.2)]
    q: f64,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    coef: f64,
    /// Use `inf` for pure-noise signals.
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 0.05)]
    shrinkage: f64,
    /// Summary path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Directory receiving `signals.csv` and `lambdas.csv`.
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("spofe: {msg}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Expand(a) => cmd_expand(a),
        Command::SimulateFdr(a) => cmd_simulate(a),
        Command::DumpSignals(a) => cmd_dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spofe: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("SPOFE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SPOFE_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut config = a.kernel.config()?;
    if let Some(v) = a.fdr {
        config.fdr_q = v;
    }
    if let Some(v) = a.selection {
        config.selection = v;
    }
    if let Some(v) = a.pvalues {
        config.pvalue_method = v;
    }
    config.validate()?;
    let data = load_csv(&a.input.input, !a.input.no_header)?;
    let mut out = run_pipeline_detailed(&config, &data)?;
    if a.timings {
        out.report.timings = Some(out.timings.clone());
    }
    if let Some(dir) = &a.dump_dir {
        create_dir(dir)?;
        write_matrix_csv(&dir.join("psi.csv"), &out.term_names, &out.features.psi)?;
        let m = out.signals.m_eff;
        let sig_names: Vec<String> = (1..=m).map(|j| format!("z{j}")).collect();
        write_matrix_csv(&dir.join("signals.csv"), &sig_names, &out.signals.signals)?;
        write_lambdas(&dir.join("lambdas.csv"), &out.signals.lambdas, &out.signals.eigenvalues)?;
        let mut w_header = vec!["term".to_string()];
        w_header.extend(sig_names);
        write_labeled_csv(&dir.join("stats.csv"), &w_header, &out.term_names, &out.weko.per_signal)?;
    }
    write_output(a.output.as_deref(), &out.report.to_json())
}

fn write_lambdas(path: &Path, lambdas: &[f64], eigenvalues: &[f64]) -> Result<()> {
    let m = DMatrix::from_fn(lambdas.len(), 2, |j, c| if c == 0 { lambdas[j] } else { eigenvalues[j] });
    write_matrix_csv(path, &["lambda".to_string(), "eigenvalue".to_string()], &m)
}

fn write_labeled_csv(path: &Path, header: &[String], labels: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for (i, label) in labels.iter().enumerate() {
        text.push_str(label);
        for j in 0..m.ncols() {
            text.push(',');
            text.push_str(&m[(i, j)].to_string());
        }
        text.push('\n');
    }
    write_output(Some(path), &text)
}

fn cmd_expand(a: ExpandArgs) -> Result<()> {
    let data = load_csv(&a.input.input, !a.input.no_header)?;
    if a.raw {
        let basis = build_basis(data.p());
        let names = term_names(&basis, data.column_names());
        write_matrix_csv(&a.output, &names, &basis.expand_raw(&data)?)
    } else {
        let (x, _) = standardize(&data)?;
        let basis = build_basis(x.p());
        let names = term_names(&basis, x.column_names());
        write_matrix_csv(&a.output, &names, &expand(&basis, &x)?.psi)
    }
}

fn cmd_simulate(a: SimArgs) -> Result<()> {
    let mut spec = SimulationSpec::new(a.n, a.p, a.k, a.q, a.repeats, a.seed);
    spec.coef = a.coef;
    spec.noise_std = a.noise_std;
    spec.shrinkage = a.shrinkage;
    let summary = simulate_fdr(&spec)?;
    let mut text = serde_json::to_string_pretty(&summary).expect("summary is serializable");
    text.push('\n');
    write_output(a.output.as_deref(), &text)
}

fn cmd_dump(a: DumpArgs) -> Result<()> {
    let config = a.kernel.config()?;
    let data = load_csv(&a.input.input, !a.input.no_header)?;
    let (_, _, bundle) = signals_for(&config, &data)?;
    create_dir(&a.output)?;
    let names: Vec<String> = (1..=bundle.m_eff).map(|j| format!("z{j}")).collect();
    write_matrix_csv(&a.output.join("signals.csv"), &names, &bundle.signals)?;
    write_lambdas(&a.output.join("lambdas.csv"), &bundle.lambdas, &bundle.eigenvalues)
}
