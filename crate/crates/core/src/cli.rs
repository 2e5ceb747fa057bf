//! The `wcd` command line.
//!
//! Exit status: 0 when nothing was found (or the self-check agreed with the
//! oracle), 1 when vulnerabilities or oracle disagreements were found, 2 on
//! any error.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::client::{HostOverrides, HttpEngine, RateLimiter, Role, UreqTransport};
use crate::config::{parse_techniques, ScanConfig, ScanMode, SiteConfig};
use crate::crawler::{load_journal, CrawlJournal, SeedPool};
use crate::detector::{DetectorConfig, ScanVerdict};
use crate::lab::{catalog_scenario, Lab, LabServer, Scenario, SimSite};
use crate::pipeline::{
    oracle_table, render_selfcheck, scan, selfcheck, targets_from_pool, LabMode, ScanOptions, SelfcheckOptions,
};
use crate::report::{aggregate, load_fingerprints, read_verdicts, render, write_verdict, ReportFormat, SiteMap};
use crate::urls::PathConfusionTechnique;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FOUND: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wcd", version, about = "Web cache deception scanner and cache lab")]
pub struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crawl and test a seed pool, write verdicts and print a report.
    Scan(ScanArgs),
    /// Serve a lab scenario over HTTP until interrupted.
    Lab(LabArgs),
    /// Print the ground-truth matrix of a lab scenario.
    Oracle(OracleArgs),
    /// Summarise a verdict stream.
    Report(ReportArgs),
    /// Scan a lab scenario and compare every verdict with the oracle.
    Selfcheck(SelfcheckArgs),
}

/// Scan settings shared by `scan` and `selfcheck`. Unset flags fall back to
/// the `--config` file, then to built-in defaults.
#[derive(Debug, Args, Default)]
pub struct TuningArgs {
    /// Scan settings file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated techniques, or `all`.
    #[arg(long)]
    pub techniques: Option<String>,
    /// Unique page groups crawled per domain.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Requests per second per host (0 = unlimited).
    #[arg(long)]
    pub rate: Option<f64>,
    /// Seconds between the victim and the attacker request.
    #[arg(long)]
    pub delay: Option<u64>,
    /// Seed for representative selection.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sites scanned in parallel.
    #[arg(long)]
    pub workers: Option<usize>,
    /// File extension of the payload name.
    #[arg(long)]
    pub extension: Option<String>,
}

impl TuningArgs {
    fn resolve(&self, base: ScanConfig) -> Result<ScanConfig, String> {
        let mut c = match &self.config {
            Some(p) => ScanConfig::load(p).map_err(|e| e.to_string())?,
            None => base,
        };
        if let Some(t) = &self.techniques {
            c.techniques = parse_techniques(t)?;
        }
        if let Some(v) = self.budget {
            c.budget = v;
        }
        if let Some(v) = self.rate {
            c.rate = v;
        }
        if let Some(v) = self.delay {
            c.delay_secs = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(v) = &self.extension {
            c.extension = v.clone();
        }
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Seed pool file.
    #[arg(long)]
    pub seeds: PathBuf,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, value_enum)]
    pub mode: Option<ScanMode>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
    /// Replace site and host names in the report.
    #[arg(long)]
    pub redact: bool,
    /// `HOST=ADDR:PORT` (or `*.suffix=...`) DNS override; repeatable.
    #[arg(long = "resolve")]
    pub resolve: Vec<String>,
    /// Ignore proxy settings from the environment.
    #[arg(long)]
    pub no_proxy: bool,
    /// Crawl journal; completed crawls recorded there are reused.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Verdict stream (JSON lines). Existing verdicts are kept and their
    /// tests skipped.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip the liveness probe of seed hosts.
    #[arg(long)]
    pub no_probe: bool,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    pub timeout: u64,
}

#[derive(Debug, Args)]
pub struct LabArgs {
    /// Scenario file; the built-in catalog when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Write a seed file and per-site login files for `wcd scan` here.
    #[arg(long)]
    pub emit_seeds: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub techniques: Option<String>,
    /// Simulated seconds between victim and attacker.
    #[arg(long, default_value_t = 0)]
    pub delay: u64,
    #[arg(long, default_value = crate::urls::DEFAULT_EXTENSION)]
    pub extension: String,
    /// Print JSON lines instead of a matrix.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Verdict stream; `-` for stdin.
    #[arg(default_value = "-")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
    #[arg(long)]
    pub redact: bool,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Skip sockets and call the lab directly.
    #[arg(long)]
    pub in_process: bool,
}

/// Parse `args` and run. Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_CLEAN };
        }
    };
    init_logging(cli.verbose);
    let stdout = std::io::stdout();
    let result = match cli.command {
        Command::Scan(a) => cmd_scan(a, &mut stdout.lock()),
        Command::Lab(a) => cmd_lab(a, &mut stdout.lock()),
        Command::Oracle(a) => cmd_oracle(a, &mut stdout.lock()),
        Command::Report(a) => cmd_report(a, &mut stdout.lock()),
        Command::Selfcheck(a) => cmd_selfcheck(a, &mut stdout.lock()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("wcd: {e}");
            EXIT_ERROR
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(format!("wcd={level}")));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

type CmdResult = Result<i32, String>;

fn load_scenario(path: &Option<PathBuf>) -> Result<Vec<SimSite>, String> {
    let s = match path {
        Some(p) => Scenario::load(p).map_err(|e| e.to_string())?,
        None => catalog_scenario(),
    };
    s.build().map_err(|e| e.to_string())
}

pub fn cmd_scan(a: ScanArgs, out: &mut dyn Write) -> CmdResult {
    let mut config = a.tuning.resolve(ScanConfig::default())?;
    if let Some(m) = a.mode {
        config.mode = m;
    }
    let mut overrides = HostOverrides::new();
    for spec in &a.resolve {
        overrides.insert_spec(spec)?;
    }
    let timeout = Duration::from_secs(a.timeout.max(1));
    let transport =
        if a.no_proxy { UreqTransport::direct(overrides, timeout) } else { UreqTransport::new(overrides, timeout) };
    let engine = HttpEngine::new(Arc::new(transport), Arc::new(RateLimiter::new(config.rate)));

    let mut pool = SeedPool::load(&a.seeds).map_err(|e| e.to_string())?;
    let fingerprints = match &config.fingerprints {
        Some(p) => load_fingerprints(p).map_err(|e| e.to_string())?,
        None => crate::report::default_fingerprints(),
    };
    let targets = targets_from_pool(&pool).map_err(|e| e.to_string())?;
    if !a.no_probe && !pool.is_empty() {
        pool = pool.retain_live(&engine, config.workers);
    }
    let live: std::collections::HashSet<String> =
        pool.sites.iter().flat_map(|s| s.hosts().cloned()).collect();
    let targets: Vec<_> = targets
        .into_iter()
        .filter_map(|mut t| {
            t.roots.retain(|r| live.contains(&r.origin()));
            (!t.roots.is_empty()).then_some(t)
        })
        .collect();

    let mut options = ScanOptions::default();
    let mut previous = Vec::new();
    if let Some(p) = &a.out {
        if p.exists() {
            let f = File::open(p).map_err(|e| format!("{}: {e}", p.display()))?;
            previous = read_verdicts(BufReader::new(f)).map_err(|e| format!("{}: {e}", p.display()))?;
            previous.retain(|v| !v.is_inconclusive());
        }
        options = options.skip_verdicts(&previous);
    }
    if let Some(p) = &a.journal {
        options.resume_surfaces = load_journal(p).map_err(|e| format!("{}: {e}", p.display()))?;
        options.journal = Some(Arc::new(CrawlJournal::open(p).map_err(|e| format!("{}: {e}", p.display()))?));
    }
    let sink_file: Option<Mutex<BufWriter<File>>> = match &a.out {
        Some(p) => {
            let f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| format!("{}: {e}", p.display()))?;
            Some(Mutex::new(BufWriter::new(f)))
        }
        None => None,
    };
    let detector = DetectorConfig {
        randomness: config.randomness.clone(),
        extension: config.extension.clone(),
        embedded_param: config.embedded_param.clone(),
        fingerprints,
        delay_secs: config.delay_secs,
        ..DetectorConfig::default()
    };
    let collected = Mutex::new(previous);
    let summary = scan(&engine, &targets, &config, &detector, &options, &|v: &ScanVerdict| {
        if let Some(f) = &sink_file {
            let mut f = f.lock().unwrap();
            let _ = write_verdict(&mut *f, v).and_then(|_| f.flush());
        }
        collected.lock().unwrap().push(v.clone());
    });
    let verdicts = collected.into_inner().unwrap();
    let stats = aggregate(&verdicts, &SiteMap::registrable());
    out.write_all(render(&stats, a.format, a.redact).as_bytes()).map_err(|e| e.to_string())?;
    for e in &summary.errors {
        eprintln!("wcd: {e}");
    }
    Ok(if stats.vulnerable.pages > 0 { EXIT_FOUND } else { EXIT_CLEAN })
}

fn emit_seeds(dir: &Path, sites: &[SimSite], listen: SocketAddr) -> Result<(), String> {
    let io = |e: std::io::Error| format!("{}: {e}", dir.display());
    std::fs::create_dir_all(dir.join("sites")).map_err(io)?;
    let mut seeds = String::from("# Generated by `wcd lab --emit-seeds`.\n");
    for s in sites {
        let login = |role| {
            let mut d = s.login_descriptor(role)?;
            for step in &mut d.steps {
                step.url = s.auth.login_path.clone();
            }
            Some(d)
        };
        let cfg = SiteConfig {
            user_agent: None,
            victim: login(Role::Victim),
            attacker: login(Role::Attacker),
            markers: s.victim_markers(),
        };
        let rel = format!("sites/{}.toml", s.name);
        std::fs::write(dir.join(&rel), cfg.to_toml()).map_err(io)?;
        seeds.push_str(&format!("http://{}:{} login={rel}\n", s.host, listen.port()));
    }
    std::fs::write(dir.join("seeds.txt"), seeds).map_err(io)
}

pub fn cmd_lab(a: LabArgs, out: &mut dyn Write) -> CmdResult {
    let sites = load_scenario(&a.scenario)?;
    if let Some(dir) = &a.emit_seeds {
        emit_seeds(dir, &sites, a.listen)?;
    }
    let lab = Arc::new(Lab::new(sites));
    let server = LabServer::start(lab.clone(), a.listen).map_err(|e| format!("{}: {e}", a.listen))?;
    let w = |out: &mut dyn Write, s: String| out.write_all(s.as_bytes()).map_err(|e| e.to_string());
    w(out, format!("lab: {} sites on http://{}\n", lab.hosts().len(), server.addr()))?;
    w(out, format!("scan with: --resolve '*.test={}'\n", server.addr()))?;
    let _ = out.flush();
    server.wait();
    Ok(EXIT_CLEAN)
}

pub fn cmd_oracle(a: OracleArgs, out: &mut dyn Write) -> CmdResult {
    let sites: Vec<Arc<SimSite>> = load_scenario(&a.scenario)?.into_iter().map(Arc::new).collect();
    let techniques = match &a.techniques {
        Some(t) => parse_techniques(t)?,
        None => PathConfusionTechnique::ALL.to_vec(),
    };
    let cfg = ScanConfig { techniques: techniques.clone(), delay_secs: a.delay, extension: a.extension, ..Default::default() };
    cfg.validate().map_err(|e| e.to_string())?;
    let table = oracle_table(&sites, &cfg);
    let mut s = String::new();
    if a.json {
        for (site, host, t, v) in &table {
            let rec = serde_json::json!({ "site": site, "host": host, "technique": t, "vulnerable": v });
            s.push_str(&rec.to_string());
            s.push('\n');
        }
    } else {
        s.push_str(&format!("{:<28}", "site"));
        for t in &techniques {
            s.push_str(&format!("{:>6}", short(*t)));
        }
        s.push('\n');
        for chunk in table.chunks(techniques.len()) {
            s.push_str(&format!("{:<28}", chunk[0].0));
            for (_, _, _, v) in chunk {
                s.push_str(&format!("{:>6}", if *v { "x" } else { "." }));
            }
            s.push('\n');
        }
    }
    out.write_all(s.as_bytes()).map_err(|e| e.to_string())?;
    Ok(EXIT_CLEAN)
}

fn short(t: PathConfusionTechnique) -> &'static str {
    match t {
        PathConfusionTechnique::PathParameter => "pp",
        PathConfusionTechnique::EncodedNewline => "nl",
        PathConfusionTechnique::EncodedSemicolon => "sc",
        PathConfusionTechnique::EncodedPound => "pd",
        PathConfusionTechnique::EncodedQuestion => "qm",
    }
}

pub fn cmd_report(a: ReportArgs, out: &mut dyn Write) -> CmdResult {
    let reader: Box<dyn BufRead> = if a.input.as_os_str() == "-" {
        Box::new(BufReader::new(std::io::stdin()))
    } else {
        Box::new(BufReader::new(File::open(&a.input).map_err(|e| format!("{}: {e}", a.input.display()))?))
    };
    let verdicts = read_verdicts(reader)?;
    let stats = aggregate(&verdicts, &SiteMap::registrable());
    out.write_all(render(&stats, a.format, a.redact).as_bytes()).map_err(|e| e.to_string())?;
    Ok(if stats.vulnerable.pages > 0 { EXIT_FOUND } else { EXIT_CLEAN })
}

pub fn cmd_selfcheck(a: SelfcheckArgs, out: &mut dyn Write) -> CmdResult {
    let sites = load_scenario(&a.scenario)?;
    let defaults = SelfcheckOptions::default();
    let scan = a.tuning.resolve(defaults.scan)?;
    let opts = SelfcheckOptions { mode: if a.in_process { LabMode::InProcess } else { LabMode::Http }, scan };
    let report = selfcheck(sites, &opts).map_err(|e| format!("cannot start lab: {e}"))?;
    out.write_all(render_selfcheck(&report).as_bytes()).map_err(|e| e.to_string())?;
    Ok(if report.is_clean() { EXIT_CLEAN } else { EXIT_FOUND })
}
