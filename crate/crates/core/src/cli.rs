//! Command-line front end.
//!
//! Exit codes: 0 works, 10 works after rollback, 1 does not work, 2 usage or
//! input errors. Reports go to stdout, diagnostics to stderr; `--machine`
//! switches reports to pretty-printed JSON.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::{SubsecRound, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::app::{load_application, AppVerification, ExchangeResult, Member};
use crate::catalogue::{AlignedRevisions, Catalogue, CatalogueEntry, ProofVerdict};
use crate::linkage::{analyse, AnalysisResult, LinkRequest};
use crate::nmc::{parse_manifest, Nmc};
use crate::rollback::{classify, Verdict};

pub const EXIT_WORKS: i32 = 0;
pub const EXIT_DOES_NOT_WORK: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_ROLLBACK: i32 = 10;

#[derive(Debug, Parser)]
#[command(name = "semlink", version, about = "Semantic linkage checks for component-based control software")]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    machine: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify one required port of A against B.
    Check {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        port: String,
        /// Record the result in this catalogue file.
        #[arg(long)]
        catalogue: Option<PathBuf>,
    },
    /// Find a partner for a required port among the manifests in a directory.
    Analyse {
        initial: PathBuf,
        candidates: PathBuf,
        #[arg(long)]
        port: String,
    },
    /// Verify or hot-swap an application.
    #[command(subcommand)]
    App(AppCommand),
    /// Inspect a proof catalogue.
    Catalogue(CatalogueArgs),
}

#[derive(Debug, Subcommand)]
enum AppCommand {
    Verify {
        app: PathBuf,
    },
    Swap {
        app: PathBuf,
        /// `<member id>=<manifest path>`
        #[arg(long, value_name = "OLD=MANIFEST")]
        replace: String,
        #[arg(long)]
        apply_rollback: bool,
    },
}

#[derive(Debug, Args)]
struct CatalogueArgs {
    #[arg(long, global = true)]
    catalogue: Option<PathBuf>,
    #[command(subcommand)]
    action: CatalogueAction,
}

#[derive(Debug, Subcommand)]
enum CatalogueAction {
    List,
    Query { a: String, b: String },
    Partners { id: String },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_WORKS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli) {
        Ok((code, report)) => {
            let _ = out.write_all(report.as_bytes());
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(i32, String)> {
    match &cli.command {
        Command::Check { a, b, port, catalogue } => cmd_check(a, b, port, catalogue.as_deref(), cli.machine),
        Command::Analyse { initial, candidates, port } => cmd_analyse(initial, candidates, port, cli.machine),
        Command::App(AppCommand::Verify { app }) => cmd_app_verify(app, cli.machine),
        Command::App(AppCommand::Swap { app, replace, apply_rollback }) => {
            cmd_app_swap(app, replace, *apply_rollback, cli.machine)
        }
        Command::Catalogue(args) => {
            let path = args.catalogue.as_deref().ok_or_else(|| anyhow!("--catalogue <PATH> is required"))?;
            cmd_catalogue(path, &args.action, cli.machine)
        }
    }
}

fn exit_code(verdict: ProofVerdict) -> i32 {
    match verdict {
        ProofVerdict::Works => EXIT_WORKS,
        ProofVerdict::WorksAfterRollback => EXIT_ROLLBACK,
        ProofVerdict::DoesNotWork => EXIT_DOES_NOT_WORK,
    }
}

fn read_manifest(path: &Path) -> Result<Nmc> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_manifest(&text).with_context(|| format!("invalid manifest {}", path.display()))
}

fn render_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn label(nmc: &Nmc, ordinal: usize) -> &str {
    &nmc.revisions()[ordinal].label
}

fn push_verdict_lines(text: &mut String, verdict: &Verdict, initial: &Nmc, target: &Nmc) {
    text.push_str(&format!("verdict: {}\n", verdict.name()));
    match verdict {
        Verdict::Works => {}
        Verdict::DoesNotWork { reasons } => {
            for r in reasons {
                text.push_str(&format!("  reason: {r}\n"));
            }
        }
        Verdict::WorksAfterRollback(a) => {
            text.push_str(&format!(
                "  aligned: {}@{} with {}@{} (distance {})\n",
                initial.id(),
                label(initial, a.initial_ordinal),
                target.id(),
                label(target, a.target_ordinal),
                a.distance
            ));
        }
    }
}

fn cmd_check(a: &Path, b: &Path, port: &str, catalogue: Option<&Path>, machine: bool) -> Result<(i32, String)> {
    let initial = read_manifest(a)?;
    let target = read_manifest(b)?;
    let verdict = classify(&initial, &target, port)?;
    let proof = ProofVerdict::from(&verdict);
    let aligned = match &verdict {
        Verdict::WorksAfterRollback(al) => Some(AlignedRevisions {
            a_rev: label(&initial, al.initial_ordinal).to_owned(),
            b_rev: label(&target, al.target_ordinal).to_owned(),
        }),
        _ => None,
    };

    if let Some(path) = catalogue {
        let mut cat = Catalogue::load(path)?;
        cat.record(CatalogueEntry {
            a_id: initial.id().to_owned(),
            a_rev: label(&initial, initial.newest_ordinal()).to_owned(),
            b_id: target.id().to_owned(),
            b_rev: label(&target, target.newest_ordinal()).to_owned(),
            port: port.to_owned(),
            verdict: proof,
            aligned: aligned.clone(),
            checked_at: Utc::now().trunc_subsecs(0),
        })?;
        cat.save(path)?;
    }

    let report = if machine {
        render_json(&json!({
            "command": { "name": "check", "a": a, "b": b, "port": port },
            "initial": { "id": initial.id(), "revision": label(&initial, initial.newest_ordinal()) },
            "target": { "id": target.id(), "revision": label(&target, target.newest_ordinal()) },
            "verdict": verdict,
            "aligned_revisions": aligned,
        }))?
    } else {
        let mut text = format!(
            "check: {}@{} requires {} from {}@{}\n",
            initial.id(),
            label(&initial, initial.newest_ordinal()),
            port,
            target.id(),
            label(&target, target.newest_ordinal())
        );
        push_verdict_lines(&mut text, &verdict, &initial, &target);
        text
    };
    Ok((exit_code(proof), report))
}

/// `*.nmc.xml` files in `dir`, sorted by file name.
fn candidate_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("cannot read directory {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name();
        if name.to_string_lossy().ends_with(".nmc.xml") && entry.file_type()?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort_by(|x, y| x.file_name().cmp(&y.file_name()));
    Ok(files)
}

fn cmd_analyse(initial_path: &Path, dir: &Path, port: &str, machine: bool) -> Result<(i32, String)> {
    let initial = read_manifest(initial_path)?;
    let own = initial_path.canonicalize().ok();
    let mut candidates = Vec::new();
    for file in candidate_files(dir)? {
        if own.is_some() && file.canonicalize().ok() == own {
            continue;
        }
        candidates.push(read_manifest(&file)?);
    }
    let result = analyse(&LinkRequest { initial: &initial, port, candidates: &candidates })?;
    let proof = ProofVerdict::from(&result.verdict);

    let report = if machine {
        render_json(&json!({
            "command": { "name": "analyse", "initial": initial_path, "candidates": dir, "port": port },
            "initial": initial.id(),
            "result": result,
        }))?
    } else {
        render_analysis(&initial, port, &candidates, &result)
    };
    Ok((exit_code(proof), report))
}

fn render_analysis(initial: &Nmc, port: &str, candidates: &[Nmc], result: &AnalysisResult) -> String {
    let mut text = format!("analyse: {} requests {} from {} candidate(s)\n", initial.id(), port, candidates.len());
    for s in &result.skipped {
        text.push_str(&format!("skipped: {} ({})\n", s.id, s.reason));
    }
    match &result.target {
        Some(id) => {
            text.push_str(&format!("target: {id}\n"));
            let target = candidates.iter().find(|c| c.id() == id).expect("target is a candidate");
            push_verdict_lines(&mut text, &result.verdict, initial, target);
        }
        None => {
            text.push_str("target: none\n");
            text.push_str(&format!("verdict: {}\n", result.verdict.name()));
            if let Verdict::DoesNotWork { reasons } = &result.verdict {
                for r in reasons {
                    text.push_str(&format!("  reason: {r}\n"));
                }
            }
        }
    }
    text
}

fn render_verification(v: &AppVerification) -> String {
    let mut text = format!("app verify: {} link(s)\n", v.links.len());
    for l in &v.links {
        text.push_str(&format!("  {}: {}\n", l.link, if l.report.ok { "ok" } else { "broken" }));
        for r in &l.report.reasons {
            text.push_str(&format!("    reason: {r}\n"));
        }
    }
    text.push_str(&format!("overall: {}\n", if v.overall { "ok" } else { "broken" }));
    text
}

fn cmd_app_verify(path: &Path, machine: bool) -> Result<(i32, String)> {
    let app = load_application(path)?;
    let v = app.verify()?;
    let code = if v.overall { EXIT_WORKS } else { EXIT_DOES_NOT_WORK };
    let report = if machine {
        render_json(&json!({ "command": { "name": "app verify", "app": path }, "verification": v }))?
    } else {
        render_verification(&v)
    };
    Ok((code, report))
}

/// Reference to `manifest` as written into the application file at `app`.
fn member_reference(app: &Path, manifest: &Path) -> Result<String> {
    let manifest = manifest.canonicalize().with_context(|| format!("cannot resolve {}", manifest.display()))?;
    let dir = app.canonicalize()?.parent().map(Path::to_path_buf).unwrap_or_default();
    let rel = match manifest.strip_prefix(&dir) {
        Ok(rel) => rel.to_path_buf(),
        Err(_) => manifest,
    };
    Ok(rel.to_string_lossy().replace('\\', "/"))
}

fn render_exchange(r: &ExchangeResult, new_id: &str) -> String {
    let mut text = format!("app swap: replace {} with {}\n", r.replaced_id, new_id);
    for lv in &r.per_link {
        text.push_str(&format!("  {}: {}\n", lv.link, lv.verdict.name()));
        match &lv.verdict {
            Verdict::DoesNotWork { reasons } => {
                for reason in reasons {
                    text.push_str(&format!("    reason: {reason}\n"));
                }
            }
            Verdict::WorksAfterRollback(a) => text.push_str(&format!(
                "    aligned ordinals: {} -> {}, {} -> {} (distance {})\n",
                lv.link.from, a.initial_ordinal, lv.link.to, a.target_ordinal, a.distance
            )),
            Verdict::Works => {}
        }
    }
    text.push_str(&format!("overall: {}\n", r.overall.as_str()));
    for step in &r.applied_alignments {
        text.push_str(&format!("applied: {} ordinal {} -> {}\n", step.component, step.from_ordinal, step.to_ordinal));
    }
    text.push_str(&format!("committed: {}\n", if r.committed { "yes" } else { "no" }));
    text
}

fn cmd_app_swap(path: &Path, replace: &str, apply_rollback: bool, machine: bool) -> Result<(i32, String)> {
    let (old_id, manifest_path) =
        replace.split_once('=').ok_or_else(|| anyhow!("--replace expects OLD=MANIFEST, got `{replace}`"))?;
    if old_id.is_empty() || manifest_path.is_empty() {
        bail!("--replace expects OLD=MANIFEST, got `{replace}`");
    }
    let mut app = load_application(path)?;
    let replacement = read_manifest(Path::new(manifest_path))?;
    let new_id = replacement.id().to_owned();
    let source = member_reference(path, Path::new(manifest_path))?;
    let result = app.exchange_member(old_id, Member { source, nmc: replacement }, apply_rollback)?;

    if result.committed {
        write_atomically(path, &app.to_xml())?;
    }
    let report = if machine {
        render_json(&json!({
            "command": { "name": "app swap", "app": path, "replace": replace, "apply_rollback": apply_rollback },
            "exchange": result,
        }))?
    } else {
        render_exchange(&result, &new_id)
    };
    Ok((exit_code(result.overall), report))
}

fn write_atomically(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn entry_line(e: &CatalogueEntry) -> String {
    let mut line = format!("{}@{} -> {}@{} {} {}", e.a_id, e.a_rev, e.b_id, e.b_rev, e.port, e.verdict.as_str());
    if let Some(al) = &e.aligned {
        line.push_str(&format!(" aligned {}/{}", al.a_rev, al.b_rev));
    }
    line.push_str(&format!(" {}\n", e.checked_at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)));
    line
}

fn cmd_catalogue(path: &Path, action: &CatalogueAction, machine: bool) -> Result<(i32, String)> {
    let cat = Catalogue::load(path)?;
    let report = match action {
        CatalogueAction::List => {
            let rows: Vec<&CatalogueEntry> = cat.entries().collect();
            if machine {
                render_json(&json!({ "command": { "name": "catalogue list", "catalogue": path }, "entries": rows }))?
            } else {
                let mut text = format!("{} entr{}\n", rows.len(), if rows.len() == 1 { "y" } else { "ies" });
                rows.iter().for_each(|e| text.push_str(&entry_line(e)));
                text
            }
        }
        CatalogueAction::Query { a, b } => {
            let rows = cat.query(a, b);
            if machine {
                render_json(&json!({
                    "command": { "name": "catalogue query", "catalogue": path, "a": a, "b": b },
                    "entries": rows,
                }))?
            } else {
                let mut text = format!("{} entr{}\n", rows.len(), if rows.len() == 1 { "y" } else { "ies" });
                rows.iter().for_each(|e| text.push_str(&entry_line(e)));
                text
            }
        }
        CatalogueAction::Partners { id } => {
            let rows = cat.partners(id);
            if machine {
                render_json(&json!({
                    "command": { "name": "catalogue partners", "catalogue": path, "id": id },
                    "partners": rows,
                }))?
            } else {
                let mut text = format!("{} partner row(s)\n", rows.len());
                for r in &rows {
                    text.push_str(&format!("{} {} {}\n", r.partner, r.port, r.verdict.as_str()));
                }
                text
            }
        }
    };
    Ok((EXIT_WORKS, report))
}
