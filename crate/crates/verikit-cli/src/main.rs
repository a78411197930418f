//! `verikit` — claim-verification dataset tooling.
//!
//! Subcommands cover the synthesis pipeline (claims → retrieve → screen →
//! panel → assemble, plus `run` for all of them), dataset statistics,
//! reward scoring, benchmark conversion/evaluation, and the two citation
//! audits. Global flags select the config file, seed, workdir, and an
//! optional mock script that replaces every remote service for offline runs.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 stage failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use verikit::bench::{self, BenchError, BootstrapSettings};
use verikit::citeaudit::{
    audit_answer, compute_metrics, AuditRecord, CitationStyle, HttpResolver, IdConvClient,
    MatcherClient, ScriptedIdConv, ScriptedMatcher,
};
use verikit::config::{validate_config, ConfigError, PipelineConfig};
use verikit::corpus::{load_articles, ArticleStore};
use verikit::gateway::Gateway;
use verikit::guideaudit::{
    extract_citation_statements, flag_contradictions, parse_worthiness, read_bioc, stratified_sample,
    BiocConfig, CitationStatement, ExtractionCounts,
};
use verikit::jsonl::write_jsonl;
use verikit::pipeline::{build_index, PipelineError, Stage, SynthRunner};
use verikit::prompts;
use verikit::reward::score_file;
use verikit::verdict::parse_verification_output;

#[derive(Parser)]
#[command(
    name = "verikit",
    version,
    about = "Build, score, and audit biomedical claim-verification datasets"
)]
struct Cli {
    /// Path to the TOML run configuration (defaults apply when omitted)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the run seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the working directory from the config
    #[arg(long, global = true, value_name = "DIR")]
    workdir: Option<PathBuf>,

    /// JSON mock script replacing the chat gateway (and, via optional
    /// "matcher"/"idconv" sections, the bibliographic services)
    #[arg(long, global = true, value_name = "SCRIPT")]
    mock: Option<PathBuf>,

    /// Override the article corpus path from the config
    #[arg(long, global = true, value_name = "FILE")]
    articles: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one supported and one refuted claim per stored article
    GenerateClaims,
    /// Retrieve the top-k most similar articles for every claim
    Retrieve,
    /// Score every retrieved (claim, article) pair with the screening verifier
    Screen,
    /// Collect three panel verdicts for every controversial claim's pairs
    Panel,
    /// Assemble training instances via the consensus rule
    Assemble,
    /// Run every synthesis stage in order and write the manifest
    Run,
    /// Summarize assembled instances (score/label/word distributions)
    Stats,
    /// Embed every stored article and write the binary embedding index
    BuildIndex {
        /// Output path (default: the configured embeddings path)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Score a prediction file against gold verdicts with the scoring rule
    Reward {
        /// JSONL file of raw verifier outputs: {"raw": "..."} records,
        /// JSON strings, or plain raw lines
        #[arg(long, value_name = "FILE")]
        predictions: PathBuf,
        /// JSONL file of gold verdicts ({"score": n} records)
        #[arg(long, value_name = "FILE")]
        gold: PathBuf,
        /// Also write the summary JSON here
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Benchmark construction and evaluation
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Extract, resolve, and verify the citations in generated answers
    AuditCitations {
        /// Directory of answer files (*.txt; the stem is the answer id)
        #[arg(long, value_name = "DIR")]
        answers: PathBuf,
        /// Citation style of the answers: nlm, ama, vancouver, apa, mla,
        /// chicago, pmid, or doi
        #[arg(long)]
        style: CitationStyle,
        /// Citation-matcher service base URL (overrides the config)
        #[arg(long, value_name = "URL")]
        matcher_url: Option<String>,
        /// Identifier-converter service base URL (overrides the config)
        #[arg(long, value_name = "URL")]
        idconv_url: Option<String>,
        /// Where to write the metrics (default: <workdir>/metrics.json)
        #[arg(long, value_name = "FILE")]
        metrics_out: Option<PathBuf>,
        /// Where to write per-claim records (default: <workdir>/records.jsonl)
        #[arg(long, value_name = "FILE")]
        records_out: Option<PathBuf>,
    },
    /// Extract single-citation statements from BioC guideline documents,
    /// verify them against their own cited articles, and flag contradictions
    AuditGuidelines {
        /// Directory of BioC JSON documents
        #[arg(long, value_name = "DIR")]
        bioc: PathBuf,
        /// Where to write flagged cases (default: <workdir>/flagged.jsonl)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Where to write the summary (default: <workdir>/summary.json)
        #[arg(long, value_name = "FILE")]
        summary: Option<PathBuf>,
        /// Review-sample size per verdict stratum
        #[arg(long, default_value_t = 50)]
        sample: usize,
        /// Where to write the stratified review sample (omit to skip sampling)
        #[arg(long, value_name = "FILE")]
        sample_out: Option<PathBuf>,
        /// Annotation `type` infon value that marks a citation
        #[arg(long, default_value = "citation")]
        citation_type: String,
        /// Annotation infon key holding the cited PMID
        #[arg(long, default_value = "pmid")]
        pmid_key: String,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Convert a source dataset into benchmark instances
    Convert {
        /// Source dataset layout
        #[arg(long, value_enum)]
        format: BenchFormat,
        /// Path to the source file (claims file for scifact)
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Corpus file (scifact only)
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Where to write the benchmark instances
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Evaluate a prediction file against benchmark instances
    Eval {
        /// One prediction per line, aligned with the instance file
        #[arg(long, value_name = "FILE")]
        predictions: PathBuf,
        /// Benchmark instance file
        #[arg(long, value_name = "FILE")]
        instances: PathBuf,
        /// Attach per-dataset bootstrap confidence intervals
        #[arg(long)]
        ci: bool,
        /// Also write the summary JSON here
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchFormat {
    Scifact,
    Healthver,
    Pubmedqa,
    Bioasq,
    Medaesqa,
}

/// A failure with the exit code it maps to.
enum Failure {
    /// Bad configuration or invocation (exit 2).
    Config(String),
    /// A stage failed at runtime (exit 3).
    Stage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Stage(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Stage(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(err: ConfigError) -> Failure {
        Failure::Config(err.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(err: PipelineError) -> Failure {
        match err {
            PipelineError::Config(err) => Failure::Config(err.to_string()),
            other => Failure::Stage(other.to_string()),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(err: BenchError) -> Failure {
        Failure::Stage(err.to_string())
    }
}

fn stage_failure(err: impl std::fmt::Display) -> Failure {
    Failure::Stage(err.to_string())
}

/// Optional scripted-service sections of a mock file. Unknown keys (the
/// chat-script keys among them) are ignored, so one file can script the
/// gateway and both bibliographic services together.
#[derive(Debug, Default, Deserialize)]
struct MockServices {
    matcher: Option<ScriptedMatcher>,
    idconv: Option<ScriptedIdConv>,
}

/// Everything a subcommand might need, resolved from flags + config.
struct Context {
    config: PipelineConfig,
    mock_path: Option<PathBuf>,
    mock_services: MockServices,
}

impl Context {
    fn new(cli: &Cli) -> Result<Context, Failure> {
        let mut config = match &cli.config {
            Some(path) => validate_config(path)?,
            None => PipelineConfig::default_config(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(workdir) = &cli.workdir {
            config.workdir = workdir.clone();
        }
        if let Some(articles) = &cli.articles {
            config.articles = Some(articles.clone());
        }
        let mock_services = match &cli.mock {
            Some(path) => {
                let raw = std::fs::read_to_string(path).map_err(|err| {
                    Failure::Config(format!("cannot read mock script {}: {err}", path.display()))
                })?;
                serde_json::from_str(&raw).map_err(|err| {
                    Failure::Config(format!("invalid mock script {}: {err}", path.display()))
                })?
            }
            None => MockServices::default(),
        };
        Ok(Context {
            config,
            mock_path: cli.mock.clone(),
            mock_services,
        })
    }

    fn gateway(&self) -> Result<Gateway, Failure> {
        match &self.mock_path {
            Some(path) => Gateway::mock_from_path(path)
                .map_err(|err| Failure::Config(format!("invalid mock script: {err}"))),
            None => {
                let http = self.config.gateway.http_config()?;
                Gateway::http(http, self.config.gateway.retry_policy())
                    .map_err(|err| Failure::Config(err.to_string()))
            }
        }
    }

    fn store(&self) -> Result<ArticleStore, Failure> {
        let path = self.config.articles.as_ref().ok_or_else(|| {
            Failure::Config(
                "no article corpus configured; pass --articles or set [paths] articles"
                    .to_string(),
            )
        })?;
        load_articles(path).map_err(stage_failure)
    }

    fn runner(&self, store: ArticleStore) -> Result<SynthRunner, Failure> {
        Ok(SynthRunner::new(self.config.clone(), self.gateway()?, store)?)
    }

    fn matcher(&self, url_flag: Option<&str>) -> Result<MatcherClient, Failure> {
        if let Some(script) = &self.mock_services.matcher {
            return Ok(MatcherClient::Scripted(script.clone()));
        }
        match url_flag.or(self.config.matcher_url.as_deref()) {
            Some(url) => Ok(MatcherClient::Http(
                HttpResolver::new(url).map_err(Failure::Config)?,
            )),
            None => Ok(MatcherClient::Unconfigured),
        }
    }

    fn idconv(&self, url_flag: Option<&str>) -> Result<IdConvClient, Failure> {
        if let Some(script) = &self.mock_services.idconv {
            return Ok(IdConvClient::Scripted(script.clone()));
        }
        match url_flag.or(self.config.idconv_url.as_deref()) {
            Some(url) => Ok(IdConvClient::Http(
                HttpResolver::new(url).map_err(Failure::Config)?,
            )),
            None => Ok(IdConvClient::Unconfigured),
        }
    }

    fn bootstrap(&self) -> BootstrapSettings {
        BootstrapSettings {
            iterations: u64::from(self.config.bootstrap.iterations),
            level: self.config.bootstrap.level,
            seed: self.config.seed,
        }
    }

    fn workdir_file(&self, name: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.config.workdir).map_err(|err| {
            Failure::Stage(format!(
                "cannot create workdir {}: {err}",
                self.config.workdir.display()
            ))
        })?;
        Ok(self.config.workdir.join(name))
    }
}

fn print_manifest(manifest: &verikit::manifest::RunManifest) {
    for record in &manifest.stages {
        let c = &record.counts;
        println!(
            "stage {}: inputs={} outputs={} dropped={} errors={}",
            record.stage, c.inputs, c.outputs, c.dropped, c.errors
        );
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(value).map_err(stage_failure)?;
    std::fs::write(path, json + "\n")
        .map_err(|err| Failure::Stage(format!("cannot write {}: {err}", path.display())))
}

/// Files in `dir` with the given extension, sorted by filename.
fn sorted_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>, Failure> {
    let entries = std::fs::read_dir(dir)
        .map_err(|err| Failure::Stage(format!("cannot read {}: {err}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| {
            path.is_file() && path.extension().map(|e| e == extension).unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}

async fn run_synth_stage(ctx: &Context, stage: Stage) -> Result<(), Failure> {
    let runner = ctx.runner(ctx.store()?)?;
    let manifest = runner.run_single(stage).await?;
    print_manifest(&manifest);
    Ok(())
}

async fn cmd_run(ctx: &Context) -> Result<(), Failure> {
    let runner = ctx.runner(ctx.store()?)?;
    let manifest = runner.run_all().await?;
    print_manifest(&manifest);
    println!(
        "workdir {} complete; manifest written",
        ctx.config.workdir.display()
    );
    Ok(())
}

fn cmd_stats(ctx: &Context) -> Result<(), Failure> {
    let store = ArticleStore::from_articles(Vec::new()).map_err(stage_failure)?;
    let runner = ctx.runner(store)?;
    let stats = runner.write_stats()?;
    println!("{}", serde_json::to_string_pretty(&stats).map_err(stage_failure)?);
    Ok(())
}

async fn cmd_build_index(ctx: &Context, out: Option<PathBuf>) -> Result<(), Failure> {
    let store = ctx.store()?;
    let path = match out {
        Some(path) => path,
        None => match &ctx.config.embeddings {
            Some(path) => path.clone(),
            None => ctx.workdir_file("embeddings.mfei")?,
        },
    };
    let written = build_index(&store, &ctx.config.embedding, &path).await?;
    println!("wrote {written} vectors to {}", path.display());
    Ok(())
}

fn cmd_reward(predictions: &Path, gold: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let summary = score_file(predictions, gold).map_err(stage_failure)?;
    let json = serde_json::to_string_pretty(&summary).map_err(stage_failure)?;
    if let Some(out) = out {
        std::fs::write(out, json.clone() + "\n")
            .map_err(|err| Failure::Stage(format!("cannot write {}: {err}", out.display())))?;
    }
    println!("{json}");
    Ok(())
}

async fn cmd_bench_convert(
    ctx: &Context,
    format: BenchFormat,
    input: &Path,
    corpus: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let outcome = match format {
        BenchFormat::Scifact => {
            let corpus = corpus.ok_or_else(|| {
                Failure::Config("--corpus is required for scifact conversion".to_string())
            })?;
            bench::convert::convert_scifact(input, corpus)?
        }
        BenchFormat::Healthver => bench::convert::convert_healthver(input)?,
        BenchFormat::Pubmedqa => {
            let gateway = ctx.gateway()?;
            let role = &ctx.config.roles.claimgen;
            bench::convert::convert_pubmedqa(&gateway, &role.model, role.temperature, input).await?
        }
        BenchFormat::Bioasq => {
            let gateway = ctx.gateway()?;
            let role = &ctx.config.roles.claimgen;
            let store = ctx.store()?;
            bench::convert::convert_bioasq(&gateway, &role.model, role.temperature, input, &store).await?
        }
        BenchFormat::Medaesqa => {
            let store = ctx.store()?;
            bench::convert::convert_medaesqa(input, &store)?
        }
    };
    bench::write_instances(out, &outcome.instances)?;
    println!(
        "wrote {} instances to {} ({} dropped)",
        outcome.instances.len(),
        out.display(),
        outcome.dropped_total()
    );
    for (reason, count) in &outcome.dropped {
        println!("  dropped {count}: {reason}");
    }
    Ok(())
}

fn cmd_bench_eval(
    ctx: &Context,
    predictions: &Path,
    instances: &Path,
    ci: bool,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let bootstrap = ci.then(|| ctx.bootstrap());
    let summary = bench::evaluate(predictions, instances, bootstrap)?;
    let json = serde_json::to_string_pretty(&summary).map_err(stage_failure)?;
    if let Some(out) = out {
        std::fs::write(out, json.clone() + "\n")
            .map_err(|err| Failure::Stage(format!("cannot write {}: {err}", out.display())))?;
    }
    println!("{json}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
async fn cmd_audit_citations(
    ctx: &Context,
    answers_dir: &Path,
    style: CitationStyle,
    matcher_url: Option<&str>,
    idconv_url: Option<&str>,
    metrics_out: Option<PathBuf>,
    records_out: Option<PathBuf>,
) -> Result<(), Failure> {
    let store = ctx.store()?;
    let gateway = ctx.gateway()?;
    let matcher = ctx.matcher(matcher_url)?;
    let idconv = ctx.idconv(idconv_url)?;
    let extractor = ctx.config.roles.extractor.clone();
    let verifier = ctx.config.roles.verifier.clone();

    let files = sorted_files(answers_dir, "txt")?;
    if files.is_empty() {
        return Err(Failure::Stage(format!(
            "no .txt answer files found in {}",
            answers_dir.display()
        )));
    }

    let mut answer_ids = Vec::with_capacity(files.len());
    let mut records: Vec<AuditRecord> = Vec::new();
    for file in &files {
        let answer_id = file
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default();
        let text = std::fs::read_to_string(file)
            .map_err(|err| Failure::Stage(format!("cannot read {}: {err}", file.display())))?;
        let answer_records = audit_answer(
            &answer_id, &text, style, &gateway, &extractor, &verifier, &matcher, &idconv, &store,
        )
        .await
        .map_err(|err| Failure::Stage(format!("answer {answer_id}: {err}")))?;
        records.extend(answer_records);
        answer_ids.push(answer_id);
    }

    let metrics = compute_metrics(&records, &answer_ids, Some(ctx.bootstrap()))
        .map_err(stage_failure)?;

    let records_path = match records_out {
        Some(path) => path,
        None => ctx.workdir_file("records.jsonl")?,
    };
    write_jsonl(&records_path, "citation-audit", &records).map_err(stage_failure)?;
    let metrics_path = match metrics_out {
        Some(path) => path,
        None => ctx.workdir_file("metrics.json")?,
    };
    write_json(&metrics_path, &metrics)?;

    println!(
        "audited {} answers, {} claim-citation records",
        answer_ids.len(),
        records.len()
    );
    println!("{}", serde_json::to_string_pretty(&metrics).map_err(stage_failure)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
async fn cmd_audit_guidelines(
    ctx: &Context,
    bioc_dir: &Path,
    out: Option<PathBuf>,
    summary_out: Option<PathBuf>,
    sample_n: usize,
    sample_out: Option<PathBuf>,
    citation_type: String,
    pmid_key: String,
) -> Result<(), Failure> {
    let store = ctx.store()?;
    let gateway = ctx.gateway()?;
    let filter_role = ctx.config.roles.filter.clone();
    let verifier_role = ctx.config.roles.verifier.clone();
    let bioc_config = BiocConfig {
        citation_type,
        pmid_key,
    };

    // 1. Extract single-citation statements from every document.
    let files = sorted_files(bioc_dir, "json")?;
    if files.is_empty() {
        return Err(Failure::Stage(format!(
            "no .json BioC files found in {}",
            bioc_dir.display()
        )));
    }
    let mut statements: Vec<CitationStatement> = Vec::new();
    let mut excluded = ExtractionCounts::default();
    let mut documents = 0u64;
    for file in &files {
        let collection = read_bioc(file).map_err(stage_failure)?;
        for doc in &collection.documents {
            documents += 1;
            let (found, counts) = extract_citation_statements(doc, &bioc_config);
            statements.extend(found);
            excluded.multi_citation_excluded += counts.multi_citation_excluded;
            excluded.missing_pmid_excluded += counts.missing_pmid_excluded;
        }
    }

    // 2. Keep only verification-worthy statements.
    let parallelism = ctx.config.gateway.parallelism;
    let worthiness_requests: Vec<_> = statements
        .iter()
        .map(|s| filter_role.request(&prompts::worthiness_check(&s.sentence)))
        .collect();
    let worthiness = gateway
        .complete_batch(&worthiness_requests, parallelism, None)
        .await
        .map_err(stage_failure)?;
    let mut worthy: Vec<&CitationStatement> = Vec::new();
    let (mut unworthy, mut unparseable, mut filter_errors) = (0u64, 0u64, 0u64);
    for (statement, result) in statements.iter().zip(worthiness) {
        match result {
            Ok(response) => match parse_worthiness(&response.content) {
                Ok(true) => worthy.push(statement),
                Ok(false) => unworthy += 1,
                Err(_) => unparseable += 1,
            },
            Err(_) => filter_errors += 1,
        }
    }

    // 3. Verify each worthy statement against its own cited article.
    let mut verifiable: Vec<&CitationStatement> = Vec::new();
    let mut missing_article = 0u64;
    for statement in worthy.iter().copied() {
        if store.contains(statement.cited_pmid) {
            verifiable.push(statement);
        } else {
            missing_article += 1;
        }
    }
    let verify_requests: Vec<_> = verifiable
        .iter()
        .map(|s| {
            let article = store.get(s.cited_pmid).expect("checked above");
            verifier_role.request(&prompts::verification_free(&s.sentence, &article.prompt_text()))
        })
        .collect();
    let verify_results = gateway
        .complete_batch(&verify_requests, parallelism, None)
        .await
        .map_err(stage_failure)?;
    let mut verdicts = Vec::new();
    let (mut unscorable, mut verify_errors) = (0u64, 0u64);
    for (statement, result) in verifiable.iter().zip(verify_results) {
        match result {
            Ok(response) => match parse_verification_output(&response.content) {
                Ok(report) => verdicts.push(((*statement).clone(), report)),
                Err(_) => unscorable += 1,
            },
            Err(_) => verify_errors += 1,
        }
    }

    // 4. Flag contradictions and summarize the verdict distribution.
    let (flagged, distribution) = flag_contradictions(&verdicts);
    let out_path = match out {
        Some(path) => path,
        None => ctx.workdir_file("flagged.jsonl")?,
    };
    write_jsonl(&out_path, "flagged", &flagged).map_err(stage_failure)?;

    // 5. Draw the stratified review sample when requested.
    let mut sample_summary = serde_json::json!(null);
    if let Some(sample_path) = sample_out {
        let (sample, warnings) = stratified_sample(&flagged, sample_n, ctx.config.seed);
        write_jsonl(&sample_path, "sample", &sample).map_err(stage_failure)?;
        for warning in &warnings {
            eprintln!("warning: {warning}");
        }
        sample_summary = serde_json::json!({
            "requested_per_stratum": sample_n,
            "drawn": sample.len(),
            "warnings": warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        });
    }

    let summary = serde_json::json!({
        "documents": documents,
        "statements": statements.len(),
        "excluded": {
            "multi_citation": excluded.multi_citation_excluded,
            "missing_pmid": excluded.missing_pmid_excluded,
        },
        "worthiness": {
            "worthy": worthy.len(),
            "unworthy": unworthy,
            "unparseable": unparseable,
            "errors": filter_errors,
        },
        "verification": {
            "verified": verdicts.len(),
            "missing_article": missing_article,
            "unscorable": unscorable,
            "errors": verify_errors,
        },
        "distribution": distribution,
        "flagged": flagged.len(),
        "sample": sample_summary,
    });
    let summary_path = match summary_out {
        Some(path) => path,
        None => ctx.workdir_file("summary.json")?,
    };
    write_json(&summary_path, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(stage_failure)?);
    Ok(())
}

async fn dispatch(cli: Cli) -> Result<(), Failure> {
    let ctx = Context::new(&cli)?;
    match cli.command {
        Command::GenerateClaims => run_synth_stage(&ctx, Stage::Claims).await,
        Command::Retrieve => run_synth_stage(&ctx, Stage::Retrieve).await,
        Command::Screen => run_synth_stage(&ctx, Stage::Screen).await,
        Command::Panel => run_synth_stage(&ctx, Stage::Panel).await,
        Command::Assemble => run_synth_stage(&ctx, Stage::Assemble).await,
        Command::Run => cmd_run(&ctx).await,
        Command::Stats => cmd_stats(&ctx),
        Command::BuildIndex { out } => cmd_build_index(&ctx, out).await,
        Command::Reward {
            predictions,
            gold,
            out,
        } => cmd_reward(&predictions, &gold, out.as_deref()),
        Command::Bench { command } => match command {
            BenchCommand::Convert {
                format,
                input,
                corpus,
                out,
            } => cmd_bench_convert(&ctx, format, &input, corpus.as_deref(), &out).await,
            BenchCommand::Eval {
                predictions,
                instances,
                ci,
                out,
            } => cmd_bench_eval(&ctx, &predictions, &instances, ci, out.as_deref()),
        },
        Command::AuditCitations {
            answers,
            style,
            matcher_url,
            idconv_url,
            metrics_out,
            records_out,
        } => {
            cmd_audit_citations(
                &ctx,
                &answers,
                style,
                matcher_url.as_deref(),
                idconv_url.as_deref(),
                metrics_out,
                records_out,
            )
            .await
        }
        Command::AuditGuidelines {
            bioc,
            out,
            summary,
            sample,
            sample_out,
            citation_type,
            pmid_key,
        } => {
            cmd_audit_guidelines(
                &ctx,
                &bioc,
                out,
                summary,
                sample,
                sample_out,
                citation_type,
                pmid_key,
            )
            .await
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    // Clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => err.exit(),
    };
    match dispatch(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
