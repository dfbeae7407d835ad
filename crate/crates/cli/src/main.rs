mod render;
mod repl;
mod script;

use std::fmt;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tabchain_core::command::ParseError;
use tabchain_core::pipeline::{run_parsed, PipelineError, ResultTable};
use tabchain_core::planner::{default_registry, MeasureRegistry};
use tabchain_core::{load_csv, to_csv, CsvOptions, Table};
use tabchain_encoder::{encode, synthetic_corpus, train_from, EncoderError, EncoderParams};
use tabchain_service::{AppState, Config};

#[derive(Parser)]
#[command(name = "tabchain", version, about = "Query tables with command chains, offline")]
struct Cli {
    /// TOML config with [service], [planner] and [train] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a script of command chains against a CSV table.
    Run {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Interactive loop: plain lines are questions, lines starting with ':'
    /// are raw chains, ':quit' exits.
    Repl {
        #[arg(long)]
        table: PathBuf,
    },
    /// Pretrain the table encoder on a directory of CSV files.
    Pretrain {
        #[arg(long)]
        corpus: PathBuf,
        /// Output parameter file (TGE1 format).
        #[arg(long)]
        out: PathBuf,
        /// Loss curve CSV [default: <out>.loss.csv]
        #[arg(long)]
        curve: Option<PathBuf>,
        /// [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        /// [default: 200]
        #[arg(long)]
        steps: Option<usize>,
        /// [default: 0.001]
        #[arg(long)]
        lr: Option<f64>,
        /// [default: 0.15]
        #[arg(long)]
        mask_frac: Option<f64>,
        /// [default: 8]
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Print a table's global embedding as JSON.
    Encode {
        #[arg(long)]
        table: PathBuf,
        /// Trained parameters; a seeded initialization when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also print the per-column vectors.
        #[arg(long)]
        per_column: bool,
    },
    /// Start the HTTP service.
    Serve {
        /// [default: 127.0.0.1:8080]
        #[arg(long)]
        bind: Option<String>,
        /// [default: tabchain-data]
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Write a seeded synthetic pretraining corpus as CSV files.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        tables: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Re-run every journaled session and compare responses byte for byte.
    Replay {
        #[arg(long)]
        data_dir: PathBuf,
    },
}

/// An error carrying its exit code.
#[derive(Debug)]
struct Coded(u8, String);

impl fmt::Display for Coded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Coded {}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(Coded(code, _)) = cause.downcast_ref() {
            return *code;
        }
        if cause.is::<ParseError>() {
            return 2;
        }
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            return if matches!(p, PipelineError::Parse(_)) { 2 } else { 3 };
        }
        if let Some(EncoderError::NonFiniteLoss { .. }) = cause.downcast_ref() {
            return 4;
        }
    }
    1
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    Ok(Config::load(path)?)
}

fn registry(cfg: &Config) -> Result<MeasureRegistry> {
    match &cfg.planner.registry {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(MeasureRegistry::from_toml(&text)?)
        }
        None => Ok(default_registry()),
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.file_stem().map_or("table".into(), |s| s.to_string_lossy().into_owned());
    load_csv(&bytes, &CsvOptions::named(name)).with_context(|| format!("loading {}", path.display()))
}

fn annotated(t: Table, reg: &MeasureRegistry) -> Table {
    let schema = reg.annotate(t.schema());
    t.with_schema_synonyms(schema)
}

#[derive(Serialize)]
struct RunOutput {
    chains: Vec<String>,
    result_table: ResultTable,
    reply: String,
}

fn run_script(cfg: &Config, script_path: &Path, table_path: &Path, format: Format) -> Result<()> {
    let source = std::fs::read_to_string(script_path).with_context(|| format!("reading {}", script_path.display()))?;
    let mut table = annotated(read_table(table_path)?, &registry(cfg)?);
    let blocks = script::blocks(&source);
    // parse everything first so a syntax error runs nothing
    let chains = blocks
        .iter()
        .map(|b| script::parse_block(b).with_context(|| script_path.display().to_string()))
        .collect::<Result<Vec<_>>>()?;
    let mut reply = String::new();
    let mut texts = Vec::new();
    for (chain, block) in chains.iter().zip(&blocks) {
        let answer = run_parsed(chain, &table, Vec::new())
            .with_context(|| format!("{}: block at line {}", script_path.display(), block.first_line))?;
        for c in &answer.corrections {
            eprintln!(
                "note: line {}: `{}` read as `{}`",
                block.first_line, c.original, c.replacement
            );
        }
        texts.push(answer.chain_text());
        reply = answer.result.reply;
        table = answer.result.table;
    }
    let mut out = io::stdout().lock();
    match format {
        Format::Table => writeln!(out, "{}\n\n{reply}", render::grid(&table, None))?,
        Format::Csv => {
            write!(out, "{}", to_csv(&table, b','))?;
            for line in reply.lines() {
                writeln!(out, "# {line}")?;
            }
        }
        Format::Json => {
            let o = RunOutput {
                chains: texts,
                result_table: ResultTable::from(&table),
                reply,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&o)?)?;
        }
    }
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<Vec<Table>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading corpus directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")));
    paths.sort();
    if paths.is_empty() {
        return Err(Coded(1, format!("no CSV files in {}", dir.display())).into());
    }
    paths.iter().map(|p| read_table(p)).collect()
}

#[allow(clippy::too_many_arguments)]
fn pretrain(
    cfg: &Config,
    corpus: &Path,
    out: &Path,
    curve: Option<PathBuf>,
    seed: Option<u64>,
    steps: Option<usize>,
    lr: Option<f64>,
    mask_frac: Option<f64>,
    batch_size: Option<usize>,
) -> Result<()> {
    let mut train = cfg.train.clone();
    train.seed = seed.unwrap_or(train.seed);
    train.steps = steps.unwrap_or(train.steps);
    train.learning_rate = lr.unwrap_or(train.learning_rate);
    train.mask_frac = mask_frac.unwrap_or(train.mask_frac);
    train.batch_size = batch_size.unwrap_or(train.batch_size);
    train.validate()?;
    let tables = load_corpus(corpus)?;
    let init = EncoderParams::init(train.d_model, train.n_heads, train.seed)?;
    let every = (train.steps / 10).max(1);
    let report = train_from(init, &tables, &train, |step, loss| {
        if (step + 1) % every == 0 {
            eprintln!("step {:>5}  loss {loss:.6}", step + 1);
        }
    })?;
    std::fs::write(out, report.params.to_bytes()).with_context(|| format!("writing {}", out.display()))?;
    let curve = curve.unwrap_or_else(|| out.with_extension("loss.csv"));
    let mut text = String::from("step,loss\n");
    for (i, l) in report.curve.iter().enumerate() {
        text.push_str(&format!("{},{l}\n", i + 1));
    }
    std::fs::write(&curve, text).with_context(|| format!("writing {}", curve.display()))?;
    println!("tables used:  {}", report.tables_used);
    println!("initial loss: {}", report.initial_loss);
    println!("final loss:   {}", report.final_loss);
    println!("params:       {}", out.display());
    println!("loss curve:   {}", curve.display());
    Ok(())
}

fn encode_table(table: &Path, params: Option<&Path>, seed: u64, per_column: bool) -> Result<()> {
    let t = read_table(table)?;
    let p = match params {
        Some(path) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            EncoderParams::from_bytes(&bytes)?
        }
        None => EncoderParams::default_init(seed),
    };
    let e = encode(&t, &p)?;
    let json = if per_column {
        serde_json::to_string(&e)?
    } else {
        serde_json::to_string(&serde_json::json!({ "global": e.global }))?
    };
    println!("{json}");
    Ok(())
}

fn serve(mut cfg: Config, bind: Option<String>, data_dir: Option<PathBuf>) -> Result<()> {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    if let Some(b) = bind {
        cfg.service.bind = b;
    }
    if let Some(d) = data_dir {
        cfg.service.data_dir = d;
    }
    std::fs::create_dir_all(&cfg.service.data_dir)
        .with_context(|| format!("creating {}", cfg.service.data_dir.display()))?;
    let bind = cfg.service.bind.clone();
    let (state, report) = AppState::open(cfg)?;
    if report.entries > 0 {
        eprintln!(
            "restored {} sessions, {}/{} entries reproduced",
            report.sessions, report.reproduced, report.entries
        );
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        println!("listening on http://{}", listener.local_addr()?);
        io::stdout().flush()?;
        tabchain_service::serve(Arc::new(state), listener).await?;
        Ok(())
    })
}

fn synth(out: &Path, n: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for t in synthetic_corpus(n, seed) {
        let path = out.join(format!("{}.csv", t.schema().table_name));
        std::fs::write(&path, to_csv(&t, b',')).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {n} tables to {}", out.display());
    Ok(())
}

fn replay(mut cfg: Config, data_dir: PathBuf) -> Result<()> {
    cfg.service.data_dir = data_dir;
    let report = tabchain_service::replay(cfg)?;
    println!(
        "sessions: {}  entries: {}  reproduced: {}",
        report.sessions, report.entries, report.reproduced
    );
    for m in &report.mismatches {
        println!("mismatch in session {} entry {}", m.session_id, m.seq);
        println!("  recorded: {}", m.expected);
        println!("  replayed: {}", m.found);
    }
    if report.is_exact() {
        Ok(())
    } else {
        Err(Coded(3, format!("{} entries did not reproduce", report.mismatches.len())).into())
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Cmd::Run { script, table, format } => run_script(&cfg, &script, &table, format),
        Cmd::Repl { table } => {
            let reg = registry(&cfg)?;
            let t = annotated(read_table(&table)?, &reg);
            let stdin = io::stdin();
            let prompt = stdin.is_terminal();
            repl::run(stdin.lock(), io::stdout().lock(), t, &reg, &cfg, prompt)?;
            Ok(())
        }
        Cmd::Pretrain {
            corpus,
            out,
            curve,
            seed,
            steps,
            lr,
            mask_frac,
            batch_size,
        } => pretrain(&cfg, &corpus, &out, curve, seed, steps, lr, mask_frac, batch_size),
        Cmd::Encode {
            table,
            params,
            seed,
            per_column,
        } => encode_table(&table, params.as_deref(), seed, per_column),
        Cmd::Serve { bind, data_dir } => serve(cfg, bind, data_dir),
        Cmd::SynthCorpus { out, tables, seed } => synth(&out, tables, seed),
        Cmd::Replay { data_dir } => replay(cfg, data_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
