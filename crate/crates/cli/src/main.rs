use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use w2sg_core::activations::{gaussian_moments, make_activation};
use w2sg_core::analysis::{r_squared, spearman, spearman_permutation};
use w2sg_core::experiments::{self, ExperimentConfig};
use w2sg_core::landscape::{radius_report, theory_bound};
use w2sg_core::rng::seeded;
use w2sg_core::spectral::{
    assumption_predicates, bbp_overlap, empirical_top_eigenvector, PredicateInputs, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use w2sg_core::spiked::{build_config, sample, sigma_z_sq};
use w2sg_core::Error;

#[derive(Parser)]
#[command(name = "w2sg", version, about = "Weak-to-strong generalization on spiked single-index data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run(RunArgs),
    /// Effective-region radius from an activation or explicit constants.
    Radius(RadiusArgs),
    /// Predicted (and optionally measured) PCA overlap with the spike.
    Overlap(OverlapArgs),
    /// Convergence-bound curve as CSV.
    Bound(BoundArgs),
    /// Evaluate the four assumption predicates.
    Check(CheckArgs),
    /// R² and Spearman correlation between two CSV columns.
    Stats(StatsArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory (overrides the config's output_path).
    #[arg(long, env = "W2SG_OUT")]
    out: Option<PathBuf>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Override a config key, e.g. --set rho=0.6 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RadiusArgs {
    #[arg(long, conflicts_with_all = ["mu0", "m1", "m2", "m3"], requires = "rho")]
    activation: Option<String>,
    /// Activation parameter, e.g. --param eps=0.5 (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE", requires = "activation")]
    params: Vec<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, requires_all = ["m1", "m2", "m3"])]
    mu0: Option<f64>,
    #[arg(long)]
    m1: Option<f64>,
    #[arg(long)]
    m2: Option<f64>,
    #[arg(long)]
    m3: Option<f64>,
    #[arg(long)]
    lambda: f64,
}

#[derive(Args)]
struct OverlapArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    lambda: f64,
    /// Also measure the overlap of the top sample eigenvector.
    #[arg(long)]
    empirical: bool,
    #[arg(long, default_value_t = 500)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long = "G")]
    g: f64,
    #[arg(long)]
    d: usize,
    #[arg(long = "T-list", value_delimiter = ',', required = true)]
    t_list: Vec<u64>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    eps0: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long = "G")]
    g: f64,
    #[arg(long = "eps-d")]
    eps_d: f64,
    #[arg(long)]
    rho: f64,
}

#[derive(Args)]
struct StatsArgs {
    /// FILE:COLUMN
    #[arg(long)]
    x: String,
    /// FILE:COLUMN
    #[arg(long)]
    y: String,
    /// Permutation p-value (10⁴ shuffles) instead of the t approximation.
    #[arg(long)]
    permutation: bool,
}

fn parse_kv(s: &str) -> Result<(String, f64), Error> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got `{s}`")))?;
    let v: f64 = v.trim().parse().map_err(|_| Error::Config(format!("`{v}` is not a number")))?;
    Ok((k.trim().to_string(), v))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn cmd_run(a: RunArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    for s in &a.set {
        cfg.set(s)?;
    }
    if let Some(seeds) = a.seeds {
        cfg.seeds = seeds;
        cfg.validate()?;
    }
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let dir = a.out.unwrap_or_else(|| {
        if cfg.output_path.is_empty() {
            PathBuf::from("results").join(cfg.kind.as_str())
        } else {
            PathBuf::from(&cfg.output_path)
        }
    });
    let manifest = experiments::write_manifest(&cfg, &dir)?;
    let result = experiments::run(&cfg)?;
    let out = experiments::write_outputs(&cfg, &result, &dir)?;
    println!("{}", manifest.display());
    for f in out.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn cmd_radius(a: RadiusArgs) -> Result<(), Error> {
    let report = match (&a.activation, a.mu0) {
        (Some(name), _) => {
            let rho = a.rho.ok_or_else(|| Error::Config("--activation needs --rho".into()))?;
            let s2 = sigma_z_sq(a.lambda, rho);
            let mut params: BTreeMap<String, f64> = a.params.iter().map(|s| parse_kv(s)).collect::<Result<_, _>>()?;
            if !params.contains_key("c") {
                params.entry("sigma_z_sq".into()).or_insert(s2);
            }
            let spec = make_activation(name, &params)?;
            let m = gaussian_moments(&spec, s2)?;
            radius_report(m.mu0, spec.m1, spec.m2, spec.m3, a.lambda)?
        }
        (None, Some(mu0)) => radius_report(mu0, a.m1.unwrap(), a.m2.unwrap(), a.m3.unwrap(), a.lambda)?,
        (None, None) => {
            return Err(Error::Config(
                "give either --activation NAME --rho Y or --mu0 --m1 --m2 --m3".into(),
            ))
        }
    };
    print_json(&serde_json::to_value(report).map_err(|e| Error::Numerical(e.to_string()))?);
    Ok(())
}

fn cmd_overlap(a: OverlapArgs) -> Result<(), Error> {
    if !(a.alpha > 0.0) || !(a.lambda > 0.0) {
        return Err(Error::Config("--alpha and --lambda must be positive".into()));
    }
    let predicted = bbp_overlap(a.alpha, a.lambda);
    if !a.empirical {
        print_json(&json!({ "alpha": a.alpha, "lambda": a.lambda, "predicted": predicted }));
        return Ok(());
    }
    let n = (a.alpha * a.d as f64).round() as usize;
    let mut per_seed = Vec::new();
    for &s in &a.seeds {
        let mut rng = seeded(s);
        let cfg = build_config(a.d, a.lambda, 1.0, 1.0, &mut rng)?;
        let batch = sample(&cfg, n, &mut rng)?;
        let top = empirical_top_eigenvector(&batch, DEFAULT_TOL, DEFAULT_MAX_ITER, &mut rng)?;
        per_seed.push(top.direction.dot(cfg.v.as_slice()).abs());
    }
    let mean = per_seed.iter().sum::<f64>() / per_seed.len().max(1) as f64;
    print_json(&json!({
        "alpha": a.alpha,
        "lambda": a.lambda,
        "predicted": predicted,
        "d": a.d,
        "n": n,
        "empirical_mean": mean,
        "empirical": per_seed,
    }));
    Ok(())
}

fn cmd_bound(a: BoundArgs) -> Result<(), Error> {
    let b = theory_bound(a.tau, a.mu, a.phi, a.delta, a.g, a.d, &a.t_list)?;
    println!("# d0={} d_inf={} contraction={}", b.d0, b.d_inf, b.contraction);
    println!("T,bound");
    for (t, v) in b.t_values.iter().zip(&b.values) {
        println!("{t},{v}");
    }
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Result<(), Error> {
    let r = assumption_predicates(&PredicateInputs {
        alpha: a.alpha,
        lambda: a.lambda,
        tau: a.tau,
        eps0: a.eps0,
        mu: a.mu,
        phi: a.phi,
        delta: a.delta,
        g: a.g,
        eps_d: a.eps_d,
        rho: a.rho,
    })?;
    // serde_json cannot write an infinite ρ_min; report it as null
    let mut v = serde_json::to_value(r).unwrap_or_else(|_| json!({}));
    if !r.rho_min.is_finite() {
        v = json!({
            "detectable": r.detectable, "lambda_min": r.lambda_min,
            "aligned": r.aligned, "rho_min": null,
            "informative": r.informative, "phi_max": r.phi_max,
            "stable": r.stable, "delta_max": r.delta_max,
        });
    }
    print_json(&v);
    Ok(())
}

fn read_column(spec: &str) -> Result<Vec<f64>, Error> {
    let (file, col) = spec
        .rsplit_once(':')
        .ok_or_else(|| Error::Config(format!("expected FILE:COLUMN, got `{spec}`")))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(Path::new(file))
        .map_err(|e| Error::Config(format!("{file}: {e}")))?;
    let headers = rdr.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
    let idx = headers
        .iter()
        .position(|h| h == col)
        .ok_or_else(|| Error::Config(format!("{file}: no column `{col}`")))?;
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| Error::Config(e.to_string()))?;
            let cell = r.get(idx).unwrap_or("");
            cell.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{file}:{col}: `{cell}` is not a number")))
        })
        .collect()
}

fn cmd_stats(a: StatsArgs) -> Result<(), Error> {
    let x = read_column(&a.x)?;
    let y = read_column(&a.y)?;
    let r2 = r_squared(&x, &y)?;
    let s = if a.permutation {
        spearman_permutation(&x, &y, 10_000, &mut seeded(0))?
    } else {
        spearman(&x, &y)?
    };
    print_json(&json!({ "r_squared": r2, "spearman_rho": s.rho, "p_value": s.p_value, "n": x.len() }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Radius(a) => cmd_radius(a),
        Command::Overlap(a) => cmd_overlap(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Check(a) => cmd_check(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
