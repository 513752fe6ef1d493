use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use sacode_core::analytics::{agreement, compare, frequency_table, question_flow_stats, FlowMode};
use sacode_core::corpus::{bundled_assignments, parse_assignments};
use sacode_core::report::{render_agreement, render_comparison, render_flow, render_frequency};
use sacode_core::session::CodingDecision;
use sacode_core::{load_tree, parse_dataset, CodingTree, DatasetFormat, ReportFormat, Session, Workspace};

use crate::{Cli, Command, Format, Mode};

fn workspace(cli: &Cli) -> Result<Workspace> {
    Workspace::open(&cli.data_dir, Arc::new(CodingTree::default_tree()))
        .with_context(|| format!("opening data directory {}", cli.data_dir.display()))
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn format(cli: &Cli) -> ReportFormat {
    cli.format.unwrap_or(Format::Table).into()
}

fn load(ws: &Workspace, key: &str) -> Result<Session> {
    ws.load_session(key).with_context(|| format!("loading session `{key}`"))
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest { file } => ingest(&cli, file),
        Command::ValidateTree { file } => validate_tree(&cli, file),
        Command::Code { dataset, coder, session } => {
            let ws = workspace(&cli)?;
            let key = session.clone().unwrap_or_else(|| format!("{dataset}-{coder}"));
            let stdin = io::stdin();
            crate::terminal::code(&ws, dataset, coder, &key, stdin.lock(), io::stdout().lock())
        }
        Command::Replay {
            dataset,
            codes,
            name,
            coder,
            force,
        } => replay(&cli, dataset, codes, name.as_deref(), coder, *force),
        Command::Report { session } => {
            let ws = workspace(&cli)?;
            let s = load(&ws, session)?;
            let dataset = ws.dataset(s.dataset_id())?;
            let report = frequency_table(&s, &dataset)?;
            emit(&cli, &render_frequency(&report, format(&cli)))
        }
        Command::Compare { sessions } => {
            let ws = workspace(&cli)?;
            let loaded = sessions.iter().map(|k| load(&ws, k)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Session> = loaded.iter().collect();
            emit(&cli, &render_comparison(&compare(&refs)?, format(&cli)))
        }
        Command::Flow { session, mode } => {
            let ws = workspace(&cli)?;
            let s = load(&ws, session)?;
            let mode = match mode {
                Mode::Inferred => FlowMode::InferredFromCodes,
                Mode::Recorded => FlowMode::RecordedPaths,
            };
            emit(&cli, &render_flow(&question_flow_stats(&s, mode)?, format(&cli))?)
        }
        Command::Agree { first, second } => {
            let ws = workspace(&cli)?;
            let a = load(&ws, first)?;
            let b = load(&ws, second)?;
            emit(&cli, &render_agreement(&agreement(&a, &b)?, format(&cli))?)
        }
        Command::Export { session } => export(&cli, session),
        Command::Serve { host, port } => serve(&cli, host, *port),
    }
}

fn ingest(cli: &Cli, file: &Path) -> Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let dataset =
        parse_dataset(&text, DatasetFormat::from_path(file)).with_context(|| format!("parsing {}", file.display()))?;
    workspace(cli)?.add_dataset(&dataset)?;
    emit(
        cli,
        &format!(
            "stored dataset `{}`: {} items in {} categories\n",
            dataset.dataset_id,
            dataset.items.len(),
            dataset.categories.len()
        ),
    )
}

fn validate_tree(cli: &Cli, file: &Path) -> Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let tree = load_tree(&text).with_context(|| format!("invalid tree {}", file.display()))?;
    emit(
        cli,
        &format!(
            "ok: {} questions, {} leaves, {} root-to-leaf paths\n{}\n",
            tree.questions().len(),
            tree.leaves().len(),
            tree.enumerate_paths().len(),
            tree.fingerprint()
        ),
    )
}

fn replay(cli: &Cli, dataset_id: &str, codes: &str, name: Option<&str>, coder: &str, force: bool) -> Result<()> {
    let ws = workspace(cli)?;
    let dataset = ws.dataset(dataset_id)?;
    let path = Path::new(codes);
    let assignments = if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {codes}"))?;
        parse_assignments(&text).with_context(|| format!("parsing {codes}"))?
    } else {
        bundled_assignments(codes).ok_or_else(|| anyhow!("`{codes}` is neither a file nor a bundled code file"))?
    };
    let session = Session::import_recorded_codes(&dataset, ws.tree().clone(), coder, &assignments)?;
    let key = name.unwrap_or(dataset_id);
    if force {
        ws.sessions().write(key, &session)?;
    } else {
        ws.sessions().create(key, &session).map_err(|e| anyhow!("{e} (use --force to replace it)"))?;
    }
    emit(
        cli,
        &format!(
            "session `{key}`: {} of {} items coded from {codes}\n",
            session.coded_count(),
            session.item_count()
        ),
    )
}

fn in_dataset_order(s: &Session) -> impl Iterator<Item = &CodingDecision> {
    s.items().iter().filter_map(|i| s.decision(i))
}

fn export(cli: &Cli, key: &str) -> Result<()> {
    let ws = workspace(cli)?;
    let s = load(&ws, key)?;
    let text = match cli.format.unwrap_or(Format::Json) {
        Format::Json => s.checkpoint_json(),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["item_id", "code", "path", "tags"])?;
            for d in in_dataset_order(&s) {
                let path: Vec<String> = d.path.iter().map(|p| p.to_string()).collect();
                let tags: Vec<&str> = d.supplementary_tags.iter().map(String::as_str).collect();
                w.write_record([d.item_id.as_str(), d.code.as_str(), &path.join(" "), &tags.join(";")])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
        Format::Table => {
            let mut out = String::new();
            let width = s.decisions().keys().map(String::len).max().unwrap_or(0);
            for d in in_dataset_order(&s) {
                let path: Vec<String> = d.path.iter().map(|p| p.to_string()).collect();
                let mut line = format!("{:<width$}  {:<6}  {}", d.item_id, d.code.as_str(), path.join(" "));
                if !d.supplementary_tags.is_empty() {
                    let tags: Vec<&str> = d.supplementary_tags.iter().map(String::as_str).collect();
                    line.push_str(&format!("  [{}]", tags.join(", ")));
                }
                out.push_str(line.trim_end());
                out.push('\n');
            }
            out.push_str(&format!("{} of {} items coded\n", s.coded_count(), s.item_count()));
            out
        }
        Format::Chart => {
            let dataset = ws.dataset(s.dataset_id())?;
            render_frequency(&frequency_table(&s, &dataset)?, ReportFormat::Chart)
        }
    };
    emit(cli, &text)
}

fn serve(cli: &Cli, host: &str, port: u16) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let config = sacode_service::ServiceConfig {
            host: host.to_string(),
            port,
            data_dir: cli.data_dir.clone(),
        };
        let handle = sacode_service::serve(config).await?;
        eprintln!("listening on http://{}", handle.local_addr());
        tokio::signal::ctrl_c().await?;
        eprintln!("shutting down");
        handle.shutdown().await?;
        Ok::<(), anyhow::Error>(())
    })
}
