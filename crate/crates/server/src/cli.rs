//! Command-line front end.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use inspire_core::corpus::{crawl_plan, FileGraphSource, StopwordLanguageDetector};
use inspire_core::evaluation::{AssessmentEntry, ConsensusAssessment, NodeAssessment, Relationship, Scores};
use inspire_core::llm_gateway::Gateway;
use inspire_core::refinement::{Approach, Feature, FeatureNode, FeatureTree, InspireMode, InspireOptions, NodeEdit};
use inspire_core::store::{NewTree, StoreError, Workspace, WORKSPACE_ENV};

use crate::provider::{self, ProviderMode};

/// Exit status for command-line usage errors.
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "inspire", version, about = "Refine app features into feature trees with LLM and app-store inspiration")]
pub struct Cli {
    /// Workspace directory; created on first use.
    #[arg(long, global = true, env = WORKSPACE_ENV, default_value = "inspire-workspace")]
    pub workspace: PathBuf,
    /// Serve provider calls from the recorded transcript only.
    #[arg(long, global = true)]
    pub replay: bool,
    /// Transcript to replay instead of the workspace transcript.
    #[arg(long, global = true, value_name = "FILE", requires = "replay")]
    pub transcript: Option<PathBuf>,
    /// Chat backend when not replaying.
    #[arg(long, global = true, env = "INSPIRE_PROVIDER", value_enum, default_value_t = ProviderKind::Live)]
    pub provider: ProviderKind,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// OpenAI-compatible endpoint from INSPIRE_PROVIDER_URL / INSPIRE_PROVIDER_KEY.
    Live,
    /// Built-in deterministic model for offline runs.
    Mock,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest, collect and inspect app descriptions.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Build and query the description index.
    #[command(subcommand)]
    Index(IndexCmd),
    /// Create, refine and inspect feature trees.
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Record assessments and print reports.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum CorpusCmd {
    /// Filter a record file (one JSON object per line) into the corpus.
    Ingest { file: PathBuf },
    /// Plan a collection: search seed words, then expand breadth-first.
    Crawl {
        /// Word list, one seed per line.
        #[arg(long)]
        seeds: PathBuf,
        /// Graph fixture with `search` and `neighbors` maps.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1000)]
        max: usize,
        /// Write the app ids here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print corpus statistics.
    Stats,
}

#[derive(Debug, Subcommand)]
pub enum IndexCmd {
    /// Rebuild the index from the corpus.
    Build,
    /// Print the apps most similar to a query.
    Query {
        text: String,
        #[arg(short, long)]
        k: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Llm,
    Appstore,
}

impl From<SourceArg> for Approach {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Llm => Approach::Llm,
            SourceArg::Appstore => Approach::Appstore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Replace,
    Append,
}

#[derive(Debug, Subcommand)]
pub enum TreeCmd {
    /// Create a tree; with --approach the full tree is generated.
    New {
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "")]
        desc: String,
        #[arg(long)]
        id: Option<String>,
        /// Report grouping label, e.g. existing or novel.
        #[arg(long)]
        group: Option<String>,
        #[arg(long, value_enum)]
        approach: Option<SourceArg>,
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(short, long)]
        k: Option<usize>,
    },
    /// Generate children for one node.
    Refine {
        tree: String,
        node: String,
        #[arg(long, value_enum)]
        source: SourceArg,
        /// Extra instruction appended to the prompt.
        #[arg(long)]
        feedback: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Replace)]
        mode: ModeArg,
        #[arg(short, long)]
        n: Option<usize>,
    },
    /// Change a node's name or description.
    Edit {
        tree: String,
        node: String,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        desc: Option<String>,
    },
    /// Remove a node and its children.
    Delete { tree: String, node: String },
    /// Print a tree as an indented outline.
    Show { tree: String },
    /// Print or write the tree file.
    Export {
        tree: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List stored trees.
    List,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    /// Record line(s) from a file instead of flags (one JSON entry per line).
    #[arg(long, conflicts_with_all = ["tree", "node", "rater", "consensus"])]
    pub file: Option<PathBuf>,
    #[arg(long, required_unless_present = "file")]
    pub tree: Option<String>,
    #[arg(long, required_unless_present = "file")]
    pub node: Option<String>,
    /// Rater id; omit with --consensus.
    #[arg(long, required_unless_present_any = ["file", "consensus"])]
    pub rater: Option<String>,
    /// Record the agreed values instead of one rater's.
    #[arg(long)]
    pub consensus: bool,
    #[arg(long, required_unless_present = "file")]
    pub relationship: Option<String>,
    #[arg(long)]
    pub note: Option<String>,
    #[arg(long, required_unless_present = "file")]
    pub relevance: Option<u8>,
    #[arg(long, required_unless_present = "file")]
    pub clarity: Option<u8>,
    #[arg(long)]
    pub feasibility: Option<u8>,
    #[arg(long)]
    pub traceability: Option<u8>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// Record one assessment.
    Record(RecordArgs),
    /// Print the quality, relationship and redundancy tables.
    Report {
        #[arg(long, default_value = "3,4,5")]
        tables: String,
        #[arg(long)]
        json: bool,
    },
    /// Common and distinct relevant features of two trees.
    Venn { a: String, b: String },
}

/// Parse and run; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code().as_str());
            e.code().exit_code()
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializes"));
}

fn validation(msg: impl Into<String>) -> StoreError {
    StoreError::Validation(msg.into())
}

fn read_file(path: &PathBuf) -> Result<String, StoreError> {
    std::fs::read_to_string(path).map_err(|e| StoreError::NotFound(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<(), StoreError> {
    let ws = Workspace::init(&cli.workspace)?;
    let mode = if cli.replay {
        ProviderMode::Replay(cli.transcript.clone())
    } else {
        match cli.provider {
            ProviderKind::Live => ProviderMode::Live,
            ProviderKind::Mock => ProviderMode::Mock,
        }
    };
    let (ws, gateway) = provider::build(ws, &mode)?;
    match cli.command {
        Command::Corpus(c) => corpus(&ws, c),
        Command::Index(c) => index(&ws, c),
        Command::Tree(c) => tree(&ws, &gateway, c),
        Command::Eval(c) => eval(&ws, c),
        Command::Serve { bind } => crate::serve(ws, gateway, &bind).map_err(|e| StoreError::Validation(format!("serve: {e}"))),
    }
}

fn corpus(ws: &Workspace, cmd: CorpusCmd) -> Result<(), StoreError> {
    match cmd {
        CorpusCmd::Ingest { file } => {
            let summary = ws.ingest(&read_file(&file)?, &StopwordLanguageDetector)?;
            for d in &summary.diagnostics {
                eprintln!("{}:{}: {}", file.display(), d.line, d.message);
            }
            print_json(&summary);
        }
        CorpusCmd::Crawl { seeds, graph, max, out } => {
            let words: Vec<String> = read_file(&seeds)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect();
            if words.is_empty() {
                return Err(validation("the seed word list is empty"));
            }
            if max == 0 {
                return Err(validation("--max must be at least 1"));
            }
            let source = FileGraphSource::load(&graph)?;
            let outcome = crawl_plan(&source, &words, max);
            for f in &outcome.failures {
                eprintln!("skipped: {f:?}");
            }
            let mut text = outcome.app_ids.join("\n");
            text.push('\n');
            match out {
                Some(path) => inspire_core::persist::write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        CorpusCmd::Stats => print_json(&ws.corpus_stats()?),
    }
    Ok(())
}

fn index(ws: &Workspace, cmd: IndexCmd) -> Result<(), StoreError> {
    match cmd {
        IndexCmd::Build => print_json(&ws.build_index()?),
        IndexCmd::Query { text, k } => {
            let hits = ws.query_index(&text, k.unwrap_or(ws.config().index.k))?;
            for h in hits {
                println!("{}\t{:.6}\t{}", h.app_id, h.score, h.best_chunk_index);
            }
        }
    }
    Ok(())
}

/// Indented outline of a tree, one node per line.
pub fn outline(tree: &FeatureTree) -> String {
    fn walk(node: &FeatureNode, out: &mut String) {
        let indent = "  ".repeat(node.level as usize);
        let source = node.source_app_id.as_deref().map(|s| format!(" <{s}>")).unwrap_or_default();
        let _ = writeln!(out, "{indent}[{}] {}: {}{source}", node.node_id, node.name, node.description);
        if let Some(e) = &node.error {
            let _ = writeln!(out, "{indent}  ! {e}");
        }
        for c in &node.children {
            walk(c, out);
        }
    }
    let mut out = String::new();
    walk(&tree.root, &mut out);
    out
}

fn tree(ws: &Workspace, gateway: &Gateway, cmd: TreeCmd) -> Result<(), StoreError> {
    match cmd {
        TreeCmd::New { name, desc, id, group, approach, n, k } => {
            let root = Feature::new(name, desc)?;
            let request = NewTree { tree_id: id, group, n, k };
            let tree = match approach {
                None => ws.create_tree(&root, &request)?,
                Some(a) => ws.generate_tree(&root, a.into(), &request, gateway)?,
            };
            for w in &tree.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", tree.tree_id);
        }
        TreeCmd::Refine { tree, node, source, feedback, mode, n } => {
            let options = InspireOptions {
                feedback,
                mode: match mode {
                    ModeArg::Replace => InspireMode::Replace,
                    ModeArg::Append => InspireMode::Append,
                },
                n,
            };
            let (t, ids) = ws.inspire(&tree, &node, source.into(), &options, gateway)?;
            for id in ids {
                let n = t.node(&id).expect("new node exists");
                println!("[{}] {}: {}", n.node_id, n.name, n.description);
            }
        }
        TreeCmd::Edit { tree, node, name, desc } => {
            if name.is_none() && desc.is_none() {
                return Err(validation("nothing to change; pass --name and/or --desc"));
            }
            ws.edit_node(&tree, &node, &NodeEdit { name, description: desc }, None)?;
        }
        TreeCmd::Delete { tree, node } => {
            ws.delete_node(&tree, &node, None)?;
        }
        TreeCmd::Show { tree } => print!("{}", outline(&ws.load_tree(&tree)?)),
        TreeCmd::Export { tree, out } => {
            let t = ws.load_tree(&tree)?;
            match out {
                Some(p) => inspire_core::persist::write_atomic(&p, t.to_json().as_bytes())?,
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    lock.write_all(t.to_json().as_bytes()).map_err(inspire_core::persist::PersistError::from)?;
                }
            }
        }
        TreeCmd::List => {
            for t in ws.list_trees()? {
                let approach = t.approach.map_or("interactive", |a| a.as_str());
                println!("{}\t{}\t{}\t{} nodes", t.tree_id, approach, t.root, t.nodes);
            }
        }
    }
    Ok(())
}

fn record_entry(args: RecordArgs) -> Result<AssessmentEntry, StoreError> {
    let missing = |f: &str| validation(format!("--{f} is required"));
    let relationship: Relationship = args
        .relationship
        .ok_or_else(|| missing("relationship"))?
        .parse()
        .map_err(|e: inspire_core::evaluation::EvalError| validation(e.to_string()))?;
    let scores = Scores {
        relationship,
        relationship_note: args.note,
        relevance: args.relevance.ok_or_else(|| missing("relevance"))?,
        clarity: args.clarity.ok_or_else(|| missing("clarity"))?,
        feasibility: args.feasibility,
        traceability: args.traceability,
    };
    let tree_id = args.tree.ok_or_else(|| missing("tree"))?;
    let node_id = args.node.ok_or_else(|| missing("node"))?;
    Ok(if args.consensus {
        AssessmentEntry::Consensus(ConsensusAssessment {
            tree_id,
            node_id,
            scores,
            raters: args.rater.into_iter().collect(),
        })
    } else {
        AssessmentEntry::Rater(NodeAssessment {
            tree_id,
            node_id,
            rater_id: args.rater.ok_or_else(|| missing("rater"))?,
            scores,
        })
    })
}

fn eval(ws: &Workspace, cmd: EvalCmd) -> Result<(), StoreError> {
    match cmd {
        EvalCmd::Record(args) => match &args.file {
            Some(path) => {
                let text = read_file(path)?;
                let mut n = 0;
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || inspire_core::persist::FormatHeader::sniff(line).is_some() {
                        continue;
                    }
                    let entry: AssessmentEntry =
                        serde_json::from_str(line).map_err(|e| validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
                    ws.record_assessment(entry)?;
                    n += 1;
                }
                println!("recorded {n} assessments");
            }
            None => {
                ws.record_assessment(record_entry(args)?)?;
                println!("recorded");
            }
        },
        EvalCmd::Report { tables, json } => {
            let tables = crate::api::parse_tables(Some(&tables)).map_err(validation)?;
            let report = ws.report()?;
            if json {
                print!("{}", report.to_json());
            } else {
                print!("{}", report.to_text(&tables)?);
            }
        }
        EvalCmd::Venn { a, b } => {
            let r = ws.venn(&a, &b)?;
            println!("common ({}): {}", r.common.len(), r.common.join(", "));
            println!("only {a} ({}): {}", r.only_a.len(), r.only_a.join(", "));
            println!("only {b} ({}): {}", r.only_b.len(), r.only_b.join(", "));
        }
    }
    Ok(())
}
