use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use opera_core::bounds::{min_samples_dimension, min_samples_theorem2};
use opera_core::experiments::{run_preset, write_report, Method, Overrides, Preset, SweepReport, ThresholdKind};
use opera_core::experiments::sweep::write_summary_csv;
use opera_core::{
    build_system, extract_signal, gen_instance, magnitudes, quantize, solve, InequalitySystem, LiftedMatrix, NoiseSpec,
    RkaConfig, SignalModel,
};

#[derive(Parser)]
#[command(name = "opera", version, about = "One-bit phase retrieval experiments")]
struct Cli {
    /// TOML file whose keys mirror the long flags; flags on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct RunArgs {
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Comma-separated sample counts.
    #[arg(long, global = true, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, global = true)]
    model: Option<SignalModel>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Comma-separated noise levels.
    #[arg(long, global = true, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[arg(long, global = true)]
    threshold: Option<ThresholdKind>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative oracle stop `||X_i - X*||^2 <= eps ||X*||^2`.
    #[arg(long, global = true)]
    stop_eps: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
}

impl RunArgs {
    fn or(self, base: RunArgs) -> RunArgs {
        RunArgs {
            n: self.n.or(base.n),
            m: self.m.or(base.m),
            model: self.model.or(base.model),
            seed: self.seed.or(base.seed),
            trials: self.trials.or(base.trials),
            sigma: self.sigma.or(base.sigma),
            threshold: self.threshold.or(base.threshold),
            out: self.out.or(base.out),
            stop_eps: self.stop_eps.or(base.stop_eps),
            max_iters: self.max_iters.or(base.max_iters),
        }
    }

    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            m: self.m.clone(),
            model: self.model,
            seed: self.seed,
            trials: self.trials,
            sigma: self.sigma.clone(),
            threshold: self.threshold,
            stop_eps: self.stop_eps,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw an instance and write its signal, sign records and polyhedron.
    Simulate,
    /// Recover with randomized Kaczmarz, from a generated instance or a
    /// polyhedron text file.
    Solve {
        #[arg(long)]
        system: Option<PathBuf>,
    },
    /// Recover with adaptively refined thresholds.
    Adaptive,
    /// Maximum-likelihood recovery from noisy sign data.
    Mle,
    /// Run a convex baseline.
    Baseline {
        #[arg(long, default_value = "onebit-phaselift")]
        method: Method,
    },
    /// Run a named experiment preset.
    Sweep { preset: String },
    /// Sample-size lower bounds.
    Bounds {
        #[command(flatten)]
        tail: TailArgs,
    },
}

#[derive(Args, Debug)]
struct TailArgs {
    /// Tail amplitude of the penalty fit.
    #[arg(long, requires_all = ["gamma1", "eps1"])]
    eps0: Option<f64>,
    /// Tail decay rate of the penalty fit.
    #[arg(long)]
    gamma1: Option<f64>,
    /// Target squared error.
    #[arg(long)]
    eps1: Option<f64>,
    /// Kaczmarz contraction factor.
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    iters: u32,
    /// Initial squared error.
    #[arg(long, default_value_t = 0.0)]
    omega0: f64,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let file_args = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunArgs::default(),
    };
    let args = cli.run.or(file_args);

    match cli.command {
        Command::Simulate => simulate(&args),
        Command::Solve { system: Some(path) } => solve_file(&path, &args),
        Command::Solve { system: None } => single(Method::Opera, &args),
        Command::Adaptive => single(Method::OperaAdaptive, &args),
        Command::Mle => single(Method::NoisyOpera, &args),
        Command::Baseline { method } => {
            if !matches!(method, Method::Phaselift | Method::OnebitPhaselift | Method::NoisyPhaselift) {
                bail!("`{method}` is not a baseline");
            }
            single(method, &args)
        }
        Command::Sweep { preset } => {
            let mut p = Preset::by_name(&preset)?;
            p.apply(&args.overrides())?;
            finish(&run_preset(&p)?, args.out.as_deref())
        }
        Command::Bounds { tail } => bounds(&args, &tail),
    }
}

fn single(method: Method, args: &RunArgs) -> Result<()> {
    let mut p = Preset::single(method);
    p.apply(&args.overrides())?;
    finish(&run_preset(&p)?, args.out.as_deref())
}

fn finish(report: &SweepReport, out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        for f in write_report(report, dir)? {
            log::info!("wrote {}", f.display());
        }
    }
    write_summary_csv(&report.summary, io::stdout().lock())?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateManifest {
    crate_name: &'static str,
    version: &'static str,
    n: usize,
    m: usize,
    model: SignalModel,
    seed: u64,
    threshold: ThresholdKind,
    sigma: f64,
    files: Vec<&'static str>,
}

fn simulate(args: &RunArgs) -> Result<()> {
    let n = args.n.unwrap_or(10);
    let m = args.m.as_ref().and_then(|v| v.first().copied()).unwrap_or(5000);
    let model = args.model.unwrap_or(SignalModel::Real);
    let seed = args.seed.unwrap_or(0);
    let sigma = args.sigma.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.0);
    let noisy = sigma > 0.0;
    let threshold = args.threshold.unwrap_or(if noisy { ThresholdKind::Gaussian } else { ThresholdKind::Lognormal });
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;

    let (x, ens) = gen_instance(n, m, model, seed)?;
    let thresholds = threshold.spec().draw(m, seed)?;
    // noisy data compares Tr(V_j X) against lambda_j, noiseless data compares y_j against tau_j
    let records = if noisy {
        quantize(&ens.apply(x.lifted().coords()), &thresholds, NoiseSpec::gaussian(sigma)?, seed)?
    } else {
        quantize(&magnitudes(&x, &ens)?, &thresholds, NoiseSpec::none(), seed)?
    };

    let mut files = vec!["signal.csv", "records.csv"];
    let mut w = BufWriter::new(File::create(out.join("signal.csv"))?);
    writeln!(w, "index,re,im")?;
    for (i, z) in x.entries().iter().enumerate() {
        writeln!(w, "{i},{:.16e},{:.16e}", z.re, z.im)?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(out.join("records.csv"))?);
    writeln!(w, "index,sign,threshold")?;
    for (i, r) in records.iter().enumerate() {
        writeln!(w, "{i},{},{:.16e}", r.sign.value(), r.threshold)?;
    }
    w.flush()?;

    if !noisy {
        let sys = build_system(&records, &ens)?;
        sys.write_text(BufWriter::new(File::create(out.join("system.txt"))?))?;
        files.push("system.txt");
    }
    files.push("manifest.json");
    let manifest = SimulateManifest {
        crate_name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        n,
        m,
        model,
        seed,
        threshold,
        sigma,
        files,
    };
    serde_json::to_writer_pretty(File::create(out.join("manifest.json"))?, &manifest)?;
    println!("wrote {} records to {}", m, out.display());
    Ok(())
}

fn solve_file(path: &Path, args: &RunArgs) -> Result<()> {
    let sys = InequalitySystem::read_text(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))?;
    let cfg = RkaConfig {
        max_iters: args.max_iters.unwrap_or(RkaConfig::default().max_iters),
        seed: args.seed.unwrap_or(0),
        ..Default::default()
    };
    let res = solve(&sys, &vec![0.0; sys.dim()], &cfg)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    res.write_trace_csv(BufWriter::new(File::create(out.join("trace.csv"))?))?;

    let mut w = BufWriter::new(File::create(out.join("estimate.csv"))?);
    writeln!(w, "index,coord")?;
    for (i, c) in res.coords.iter().enumerate() {
        writeln!(w, "{i},{c:.16e}")?;
    }
    w.flush()?;

    if let Some(shape) = sys.shape() {
        let est = LiftedMatrix::from_coords(res.coords.clone(), shape.n, shape.model)?;
        match extract_signal(&est) {
            Ok(x) => {
                let mut w = BufWriter::new(File::create(out.join("signal_estimate.csv"))?);
                writeln!(w, "index,re,im")?;
                for (i, z) in x.entries().iter().enumerate() {
                    writeln!(w, "{i},{:.16e},{:.16e}", z.re, z.im)?;
                }
                w.flush()?;
            }
            Err(e) => log::warn!("no signal estimate: {e}"),
        }
    }
    println!("stop={:?} iterations={} gap={:.3e}", res.stop_reason, res.iterations_used, res.final_gap());
    Ok(())
}

fn bounds(args: &RunArgs, tail: &TailArgs) -> Result<()> {
    let n = args.n.unwrap_or(10);
    println!("quantity,value");
    println!("min_samples_dimension,{}", min_samples_dimension(n));
    if let (Some(eps0), Some(gamma1), Some(eps1)) = (tail.eps0, tail.gamma1, tail.eps1) {
        let m = min_samples_theorem2(eps0, gamma1, eps1, tail.q, tail.iters, tail.omega0)?;
        println!("min_samples_tail,{}", m.ceil());
    }
    Ok(())
}
