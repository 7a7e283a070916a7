use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amrql::dataset::{read_jsonl, Record};
use amrql::eval::{evaluate_record, EvalReport};
use amrql::kg::{execute, load_ntriples, TripleStore};
use amrql::oracle::{oracle_record, CoverageReport};
use amrql::pipeline::{Pipeline, PolicyChoice};
use amrql::sparql::{parse_sparql_with, PrefixTable};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "amrql", version, about = "Transpile AMR question graphs into SPARQL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transpile every record; one JSON line per record.
    Transpile(RunArgs),
    /// Derive oracle action sequences from gold SPARQL.
    Oracle(RunArgs),
    /// Execute predicted and gold queries and report Macro F1.
    Eval(RunArgs),
    /// Dump per-step action and token masks for one record.
    Masks {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        id: String,
    },
    /// Run one SPARQL file against the knowledge graph.
    Exec {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        prefixes: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Oracle,
    Lexical,
}

#[derive(Args)]
struct RunArgs {
    /// N-Triples knowledge graph.
    #[arg(long)]
    kg: Option<PathBuf>,
    /// JSON-lines question records.
    #[arg(long)]
    dataset: PathBuf,
    /// JSON object mapping prefix labels to namespaces.
    #[arg(long)]
    prefixes: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lexical")]
    policy: PolicyArg,
    /// Similarity threshold for the lexical policy, in (0, 1).
    #[arg(long, default_value_t = amrql::decode::DEFAULT_TAU)]
    tau: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_prefixes(path: Option<&Path>) -> Result<PrefixTable> {
    match path {
        None => Ok(PrefixTable::default()),
        Some(p) => PrefixTable::from_json(&read(p)?).with_context(|| format!("invalid prefix table {}", p.display())),
    }
}

fn load_kg(path: &Path) -> Result<TripleStore> {
    load_ntriples(&read(path)?).with_context(|| format!("invalid knowledge graph {}", path.display()))
}

struct Loaded {
    records: Vec<Record>,
    store: TripleStore,
    prefixes: PrefixTable,
    policy: PolicyChoice,
    pool: rayon::ThreadPool,
}

impl RunArgs {
    fn load(&self, need_kg: bool) -> Result<Loaded> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            bail!("--tau must lie strictly between 0 and 1, got {}", self.tau);
        }
        let records =
            read_jsonl(&read(&self.dataset)?).with_context(|| format!("invalid dataset {}", self.dataset.display()))?;
        let store = match (&self.kg, need_kg) {
            (Some(p), _) => load_kg(p)?,
            (None, false) => TripleStore::new(),
            (None, true) => bail!("--kg is required for this command"),
        };
        let policy = match self.policy {
            PolicyArg::Oracle => PolicyChoice::Oracle,
            PolicyArg::Lexical => PolicyChoice::Lexical { tau: self.tau },
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.workers).build()?;
        Ok(Loaded { records, store, prefixes: load_prefixes(self.prefixes.as_deref())?, policy, pool })
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => {
                Box::new(BufWriter::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

impl Loaded {
    fn pipeline(&self) -> Pipeline<'_> {
        Pipeline::new(&self.store, &self.prefixes, self.policy)
    }

    /// Maps records in parallel, keeping input order.
    fn map<T: Send>(&self, f: impl Fn(&Record) -> T + Sync) -> Vec<T> {
        self.pool.install(|| self.records.par_iter().map(&f).collect())
    }
}

fn transpile(args: &RunArgs) -> Result<()> {
    let ctx = args.load(true)?;
    let pipeline = ctx.pipeline();
    let lines = ctx.map(|r| match pipeline.transpile(r) {
        Ok(t) => json!({"id": r.id, "sparql": t.query.to_string(), "actions": t.actions}),
        Err(e) => json!({"id": r.id, "error": e.to_string(), "cause": e.cause()}),
    });
    let mut out = args.output()?;
    for line in lines {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn oracle(args: &RunArgs) -> Result<()> {
    let ctx = args.load(false)?;
    let records = ctx.map(|r| oracle_record(r, &ctx.prefixes));
    let mut out = args.output()?;
    for r in &records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    out.flush()?;
    eprintln!("{}", serde_json::to_string(&CoverageReport::from_records(&records))?);
    Ok(())
}

fn eval(args: &RunArgs) -> Result<()> {
    let ctx = args.load(true)?;
    let pipeline = ctx.pipeline();
    let report = EvalReport::from_results(ctx.map(|r| evaluate_record(&pipeline, r)));
    let text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(_) => {
            let mut out = args.output()?;
            writeln!(out, "{text}")?;
            out.flush()?;
            print!("{}", report.table());
        }
        None => {
            println!("{text}");
            eprint!("{}", report.table());
        }
    }
    Ok(())
}

fn masks(args: &RunArgs, id: &str) -> Result<()> {
    let ctx = args.load(true)?;
    let Some(record) = ctx.records.iter().find(|r| r.id == id) else {
        bail!("no record with id `{id}`");
    };
    let t = ctx.pipeline().transpile(record).with_context(|| format!("record `{id}` failed"))?;
    let mut out = args.output()?;
    for s in &t.trace {
        let tokens = s.state_mask.as_ref().map(|m| m.token_indices.clone()).unwrap_or_default();
        let line = json!({"step": s.step, "allowed": s.action_mask, "supporting_tokens": tokens, "action": s.action});
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn exec(kg: &Path, query: &Path, prefixes: Option<&Path>) -> Result<()> {
    let store = load_kg(kg)?;
    let table = load_prefixes(prefixes)?;
    let q = parse_sparql_with(&read(query)?, &table).with_context(|| format!("invalid query {}", query.display()))?;
    let answers = execute(&store, &q)?;
    println!("{}", serde_json::to_string(&answers)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Transpile(a) => transpile(a),
        Command::Oracle(a) => oracle(a),
        Command::Eval(a) => eval(a),
        Command::Masks { run, id } => masks(run, id),
        Command::Exec { kg, query, prefixes } => exec(kg, query, prefixes.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
