use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Result;
use bioquery::{load_manifest, load_rules, router, Config};
use bioquery_core::service::QueryResult;
use bioquery_core::Service;
use clap::{Parser, Subcommand};

/// Ask biomedical questions in controlled English.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Rule layer file (default: built-in layer)
    #[arg(long, global = true, env = "BQ_RULES")]
    rules: Option<PathBuf>,
    /// Source manifest listing the fact files to load
    #[arg(long, global = true, env = "BQ_MANIFEST")]
    manifest: Option<PathBuf>,
    /// Lexicon file (default: built-in lexicon)
    #[arg(long, global = true, env = "BQ_LEXICON")]
    lexicon: Option<PathBuf>,
    /// Explanation templates (default: built-in templates)
    #[arg(long, global = true, env = "BQ_TEMPLATES")]
    templates: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one query
    Ask {
        query: String,
        /// Print a minimal explanation after each answer
        #[arg(long)]
        explain: bool,
        /// Print the compiled rule first
        #[arg(long)]
        program: bool,
        /// Print one JSON document instead of text
        #[arg(long)]
        json: bool,
    },
    /// Read queries from standard input
    Repl,
    /// Load the fact files of a manifest and report what was ingested
    Load,
    /// Check a rule file
    ValidateRules { path: PathBuf },
    /// Serve the HTTP API
    Serve {
        #[arg(long, env = "BQ_PORT", default_value_t = 8080)]
        port: u16,
        /// Directory of static files served next to the API
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = Config {
        rules: cli.rules,
        manifest: cli.manifest,
        lexicon: cli.lexicon,
        templates: cli.templates,
    };
    match run(cli.command, config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command, config: Config) -> Result<ExitCode> {
    match command {
        Command::Ask {
            query,
            explain,
            program,
            json,
        } => ask(&config.build()?, &query, explain, program, json),
        Command::Repl => repl(&config.build()?),
        Command::Load => {
            let Some(path) = &config.manifest else {
                anyhow::bail!("no manifest given (use --manifest or BQ_MANIFEST)");
            };
            let (store, reports) = load_manifest(path)?;
            let mut failed = false;
            for (file, r) in &reports {
                println!(
                    "{}: {} added, {} duplicates, {} rejected",
                    file.display(),
                    r.added,
                    r.duplicates,
                    r.errors.len()
                );
                for e in &r.errors {
                    println!("  {e}");
                }
                failed |= !r.errors.is_empty();
            }
            let stats = store.stats();
            println!("{} facts", stats.total);
            for (p, n) in &stats.per_predicate {
                println!("  {p}\t{n}");
            }
            Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::ValidateRules { path } => {
            let layer = load_rules(&path)?;
            println!("{}: {} rules", path.display(), layer.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { port, static_dir } => {
            let service = Arc::new(config.build()?);
            let app = router(service, static_dir.as_deref());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let addr = SocketAddr::from(([0, 0, 0, 0], port));
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("listening on {addr}");
                eprintln!("listening on http://{addr}");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                Ok(ExitCode::SUCCESS)
            })
        }
    }
}

fn ask(svc: &Service, query: &str, explain: bool, program: bool, json: bool) -> Result<ExitCode> {
    let res = match svc.handle_query(query) {
        Ok(r) => r,
        Err(e) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&e.body())?);
            } else {
                eprintln!("{}", caret(query, &e.body()));
            }
            return Ok(ExitCode::from(2));
        }
    };
    if json {
        let mut doc = serde_json::to_value(&res)?;
        if explain {
            let mut explanations = Vec::new();
            for a in &res.answers {
                explanations.push(serde_json::to_value(svc.handle_explain(&res.query_id, a)?)?);
            }
            doc["explanations"] = explanations.into();
        }
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(ExitCode::SUCCESS);
    }
    print_result(svc, &res, explain, program)?;
    Ok(ExitCode::SUCCESS)
}

fn print_result(svc: &Service, res: &QueryResult, explain: bool, program: bool) -> Result<()> {
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    if program {
        println!("{}", res.program);
    }
    for a in &res.answers {
        println!("{}", a.join("\t"));
        if explain {
            println!("{}", svc.handle_explain(&res.query_id, a)?.text);
        }
    }
    if res.answers.is_empty() {
        eprintln!("no answers");
    }
    Ok(())
}

/// Error message with a caret under the offending position.
fn caret(query: &str, body: &bioquery_core::service::ErrorBody) -> String {
    let mut out = format!("error: {}", body.message);
    if let Some(pos) = body.position {
        let col = query[..pos.min(query.len())].chars().count();
        out.push_str(&format!("\n  {query}\n  {}^", " ".repeat(col)));
    }
    out
}

fn repl(svc: &Service) -> Result<ExitCode> {
    let stdin = std::io::stdin();
    let mut last: Option<QueryResult> = None;
    let mut out = std::io::stdout();
    write!(out, "> ")?;
    out.flush()?;
    for line in stdin.lock().lines() {
        let line = line?;
        let line = line.trim();
        if line == ":quit" || line == ":q" {
            break;
        } else if let Some(prefix) = line.strip_prefix(":complete") {
            println!("{}", svc.handle_complete(prefix.trim_start()).join("  "));
        } else if let Some(n) = line.strip_prefix(":why") {
            match (&last, n.trim().parse::<usize>()) {
                (Some(res), Ok(i)) if i >= 1 && i <= res.answers.len() => {
                    match svc.handle_explain(&res.query_id, &res.answers[i - 1]) {
                        Ok(e) => println!("{}", e.text),
                        Err(e) => println!("error: {e}"),
                    }
                }
                _ => println!("usage: :why <answer number> (after a query)"),
            }
        } else if line == ":help" {
            println!(":why N   explain answer N\n:complete TEXT   next-word suggestions\n:quit");
        } else if !line.is_empty() {
            match svc.handle_query(line) {
                Ok(res) => {
                    for w in &res.warnings {
                        println!("warning: {w}");
                    }
                    for (i, a) in res.answers.iter().enumerate() {
                        println!("{:>3}. {}", i + 1, a.join("\t"));
                    }
                    if res.answers.is_empty() {
                        println!("no answers");
                    }
                    last = Some(res);
                }
                Err(e) => println!("{}", caret(line, &e.body())),
            }
        }
        write!(out, "> ")?;
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}
