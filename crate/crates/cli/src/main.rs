use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pentropy_cli::config::{merge, ExperimentConfig, IndexSet};
use pentropy_cli::{run, Command, Failure, EXIT_INTERNAL, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "plab", version, about = "P-entropy and weak-limit experiments for interval maps")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Entropy profile h_j along a length schedule.
    Pentropy(Opts),
    /// Search for a schedule forcing h_j < 1/j over a family.
    Schedule(Opts),
    /// Correlation, kappa, theta, rigidity and fingerprint scans.
    Scan(Opts),
    /// Rank-one tower heights and rigidity ratios.
    Tower(Opts),
    /// Monte Carlo cross-checks against the exact engines.
    Oracle(Opts),
}

#[derive(Args, Clone)]
struct Opts {
    /// JSON configuration file; its keys override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    workers: Option<usize>,
    /// System descriptor as JSON.
    #[arg(long)]
    system: Option<String>,
    /// Family of system descriptors as a JSON array.
    #[arg(long)]
    family: Option<String>,
    /// Partition descriptor as JSON, e.g. {"dyadic":2}.
    #[arg(long)]
    partition: Option<String>,
    /// Partition descriptors as a JSON array.
    #[arg(long)]
    partitions: Option<String>,
    /// Schedule as JSON, e.g. {"rule":"linear","scale":2}.
    #[arg(long)]
    schedule: Option<String>,
    /// Index set: a:b, a:b:step or a comma list.
    #[arg(long)]
    j: Option<String>,
    /// Time set: a:b, a:b:step or a comma list.
    #[arg(long)]
    m: Option<String>,
    /// Test sets as a JSON array.
    #[arg(long)]
    sets: Option<String>,
    /// "diagonal" or "all".
    #[arg(long)]
    pairs: Option<String>,
    /// Fit support as a comma list.
    #[arg(long)]
    support: Option<String>,
    /// Time pairs for the asymmetry fingerprint as JSON, e.g. [[1,2],[3,7]].
    #[arg(long)]
    times: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    kappa_threshold: Option<f64>,
    #[arg(long)]
    l_cap: Option<u64>,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    m_cap: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    output: Option<String>,
}

fn json<T: serde::de::DeserializeOwned>(key: &str, v: &Option<String>, errors: &mut Vec<String>) -> Option<T> {
    let text = v.as_ref()?;
    serde_json::from_str(text).map_err(|e| errors.push(format!("--{key}: {e}"))).ok()
}

fn index(key: &str, v: &Option<String>, errors: &mut Vec<String>) -> Option<IndexSet> {
    IndexSet::parse(v.as_ref()?).map_err(|e| errors.push(format!("--{key}: {e}"))).ok()
}

impl Opts {
    fn to_config(&self) -> Result<ExperimentConfig, Failure> {
        let mut errors = Vec::new();
        let support = self.support.as_ref().and_then(|s| match IndexSet::parse(s).and_then(|i| i.values()) {
            Ok(v) => Some(v),
            Err(e) => {
                errors.push(format!("--support: {e}"));
                None
            }
        });
        let config = ExperimentConfig {
            system: json("system", &self.system, &mut errors),
            family: json("family", &self.family, &mut errors),
            partition: json("partition", &self.partition, &mut errors),
            partitions: json("partitions", &self.partitions, &mut errors),
            schedule: json("schedule", &self.schedule, &mut errors),
            j: index("j", &self.j, &mut errors),
            m: index("m", &self.m, &mut errors),
            sets: json("sets", &self.sets, &mut errors),
            pairs: self.pairs.clone(),
            support,
            times: json("times", &self.times, &mut errors),
            c: self.c,
            kappa_threshold: self.kappa_threshold,
            l_cap: self.l_cap,
            cap: self.cap,
            m_cap: self.m_cap,
            samples: self.samples,
            seed: self.seed,
            output: self.output.clone(),
        };
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(Failure::validation(errors))
        }
    }
}

fn load(opts: &Opts) -> Result<ExperimentConfig, Failure> {
    let flags = opts.to_config()?;
    let Some(path) = &opts.config else { return Ok(flags) };
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::validation(vec![format!("{}: {e}", path.display())]))?;
    let file: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Failure::validation(vec![format!("{}: {e}", path.display())]))?;
    let (merged, conflicts) = merge(&flags, &file);
    for key in conflicts {
        eprintln!("warning: --{key} is overridden by the configuration file");
    }
    Ok(merged)
}

fn execute(command: Command, opts: &Opts) -> Result<i32, Failure> {
    let config = load(opts)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        if w == 0 {
            return Err(Failure::validation(vec!["--workers must be >= 1".into()]));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Failure {
        exit: EXIT_INTERNAL,
        code: "internal".into(),
        messages: vec![e.to_string()],
    })?;
    let out = pool.install(|| run(command, &config));
    let dir = PathBuf::from(config.output.as_deref().unwrap_or("."));
    let io = |e: std::io::Error| Failure {
        exit: EXIT_INTERNAL,
        code: "io".into(),
        messages: vec![format!("{}: {e}", dir.display())],
    };
    if !out.files.is_empty() {
        std::fs::create_dir_all(&dir).map_err(io)?;
        for (name, contents) in &out.files {
            std::fs::write(dir.join(name), contents).map_err(io)?;
        }
    }
    if let Some(f) = &out.failure {
        eprint!("{}", f.to_json());
    }
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION as u8 } else { 0 });
        }
    };
    let (command, opts) = match &cli.command {
        Sub::Pentropy(o) => (Command::Pentropy, o),
        Sub::Schedule(o) => (Command::Schedule, o),
        Sub::Scan(o) => (Command::Scan, o),
        Sub::Tower(o) => (Command::Tower, o),
        Sub::Oracle(o) => (Command::Oracle, o),
    };
    let code = execute(command, opts).unwrap_or_else(|f| {
        eprint!("{}", f.to_json());
        f.exit
    });
    ExitCode::from(code as u8)
}
