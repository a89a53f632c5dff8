use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tokenpress::config::RunConfig;
use tokenpress::harness::{
    generate, oracle_suite, AttentionProfile, BaselineMethod, SuiteConfig, SyntheticSpec,
};
use tokenpress::manifest::{load_bundle, write_bundle, Manifest, SubImageEntry};
use tokenpress::output::{read_results, StatsDoc};
use tokenpress::{masks, run_baseline, run_compress, Error, Result};
use tokenpress_core::{
    compute_density, corpus_stats_from_ratios, local_sample_count, DensityConfig,
};

/// Adaptive, deterministic compression of vision-transformer patch tokens.
#[derive(Parser)]
#[command(name = "tokenpress", version, about)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress every sub-image of a manifest.
    Compress {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the information density of every sub-image.
    Density {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = DensityConfig::default().alpha)]
        alpha: f64,
        #[arg(long, default_value_t = DensityConfig::default().limit_k)]
        limit_k: usize,
        /// Count each token as its own similar peer.
        #[arg(long)]
        count_self: bool,
    },
    /// Compression-ratio statistics over one or more results directories.
    Stats {
        #[arg(long, num_args = 1.., required = true)]
        results: Vec<PathBuf>,
        /// One dataset label per results directory; defaults to the
        /// manifest's per-sub-image labels.
        #[arg(long, num_args = 1..)]
        labels: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render redundancy and selection masks as PGM images.
    Masks {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pixels per patch along each axis.
        #[arg(long, default_value_t = 1)]
        scale: usize,
    },
    /// Compress with a non-adaptive selector, same output layout.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Sampling ratio for `--method fixed`.
        #[arg(long, required_if_eq("method", "fixed"))]
        ratio: Option<f64>,
    },
    /// Check the kernels against brute-force oracles on random instances.
    Selftest {
        #[arg(long, default_value_t = SuiteConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = SuiteConfig::default().instances)]
        instances: usize,
    },
    /// Write a synthetic manifest with known redundancy levels.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Redundancy fraction of each generated sub-image.
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.5, 0.8])]
    redundancy: Vec<f64>,
    #[arg(long, default_value_t = 576)]
    n_tokens: usize,
    /// Key dimension; defaults to the token count.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 1)]
    clusters: usize,
    #[arg(long, value_enum, default_value_t = ProfileArg::Concentrated)]
    profile: ProfileArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit a global image.
    #[arg(long)]
    global: bool,
    #[arg(long, default_value = "synthetic")]
    dataset: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Random,
    Uniform,
    Fixed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    Uniform,
    Concentrated,
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn density_table(manifest: &Path, cfg: &DensityConfig) -> Result<()> {
    let doc = load_bundle(manifest)?;
    println!(
        "{:<24} {:>6} {:>6} {:>8} {:>8} {:>6}",
        "id", "N", "N_R", "r", "d", "m"
    );
    for (e, b) in doc.entries() {
        if b.is_global() {
            println!(
                "{:<24} {:>6} {:>6} {:>8} {:>8} {:>6}",
                e.id,
                b.n_tokens(),
                "-",
                "-",
                "-",
                "-"
            );
            continue;
        }
        let report =
            compute_density(b.keys_low(), cfg).map_err(|err| Error::core(e.id.clone(), err))?;
        println!(
            "{:<24} {:>6} {:>6} {:>8.4} {:>8.4} {:>6}",
            e.id,
            b.n_tokens(),
            report.n_redundant,
            report.redundancy,
            report.density,
            local_sample_count(report.density, b.n_tokens())
        );
    }
    Ok(())
}

fn stats(results: &[PathBuf], labels: &[String], out: &Path) -> Result<()> {
    if !labels.is_empty() && labels.len() != results.len() {
        return Err(Error::Usage(format!(
            "{} labels given for {} results directories",
            labels.len(),
            results.len()
        )));
    }
    let mut ratios = Vec::new();
    let mut names = Vec::new();
    for (i, dir) in results.iter().enumerate() {
        let index = read_results(dir)?;
        for e in index.entries.iter().filter(|e| !e.is_global) {
            ratios.push(e.ratio);
            names.push(labels.get(i).cloned().unwrap_or_else(|| e.dataset.clone()));
        }
    }
    let stats = corpus_stats_from_ratios(&ratios, &names).map_err(|e| Error::core("stats", e))?;
    let doc = StatsDoc::new(&stats);
    doc.write(out)?;
    print!("{}", doc.boxplot_csv());
    Ok(())
}

fn render(manifest: &Path, results: &Path, out: &Path, scale: usize) -> Result<()> {
    let m = Manifest::read(manifest)?;
    let index = read_results(results)?;
    let grid_of = |id: &str| {
        m.sub_images
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.grid_shape())
    };
    let written = masks::render_masks(results, &index, grid_of, out, scale)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let profile = match a.profile {
        ProfileArg::Uniform => AttentionProfile::Uniform,
        ProfileArg::Concentrated => AttentionProfile::ConcentratedOnUnique,
    };
    let spec = |rho: f64, seed: u64| SyntheticSpec {
        n_clusters: if rho > 0.0 { a.clusters } else { 0 },
        attention_profile: profile,
        seed,
        ..SyntheticSpec::new(a.n_tokens, a.dim.unwrap_or(a.n_tokens), rho)
    };
    let mut manifest = Manifest::default();
    let mut bundles = Vec::new();
    let mut push = |id: String, rho: f64, seed: u64, is_global: bool| -> Result<()> {
        let b = generate(&spec(rho, seed))?.bundle;
        let mut entry = SubImageEntry::with_default_paths(&id, &a.dataset, b.grid());
        entry.image_id = "synthetic-0".into();
        entry.is_global = is_global;
        manifest.sub_images.push(entry);
        bundles.push(b);
        Ok(())
    };
    if a.global {
        push("global".into(), 0.0, a.seed, true)?;
    }
    for (i, &rho) in a.redundancy.iter().enumerate() {
        push(
            format!("crop{i}"),
            rho,
            a.seed.wrapping_add(1 + i as u64),
            false,
        )?;
    }
    let path = a.out.join("manifest.toml");
    write_bundle(&path, &manifest, &bundles)?;
    println!("{}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Compress { run } => {
            run_compress(&run.manifest, &run.out, &run_config(&run)?)?;
        }
        Command::Density {
            manifest,
            alpha,
            limit_k,
            count_self,
        } => {
            let cfg = DensityConfig {
                alpha,
                limit_k,
                count_self,
            };
            cfg.validate().map_err(|e| Error::core("density", e))?;
            density_table(&manifest, &cfg)?;
        }
        Command::Stats {
            results,
            labels,
            out,
        } => stats(&results, &labels, &out)?,
        Command::Masks {
            manifest,
            results,
            out,
            scale,
        } => render(&manifest, &results, &out, scale)?,
        Command::Baseline { run, method, ratio } => {
            let method = match method {
                MethodArg::Random => BaselineMethod::Random,
                MethodArg::Uniform => BaselineMethod::Uniform,
                MethodArg::Fixed => BaselineMethod::FixedRatio(ratio.expect("required by clap")),
            };
            run_baseline(&run.manifest, &run.out, method, &run_config(&run)?)?;
        }
        Command::Selftest { seed, instances } => {
            let report = oracle_suite(&SuiteConfig { seed, instances });
            println!("{report}");
            return Ok(report.all_passed());
        }
        Command::Synth(a) => synth(&a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
