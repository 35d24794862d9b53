//! The `explbench` command line.
//!
//! Each subcommand reads its inputs from flags or the run configuration
//! (flags win), writes artifacts under the output directory and prints a
//! short summary. Text reports start with a stamp line carrying the crate
//! version and the config hash. If a command fails, every file it wrote is
//! removed again.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::corpus::{
    parse_knowledge_base, parse_questions, parse_score_file, read_jsonl, to_jsonl, KnowledgeBase, Question,
    ScoreFile, Split,
};
use crate::expl_eval::{self, Aggregation, ExplReport, Explanation, OverrideRecord, Overrides};
use crate::rank_eval::{self, Gain, GoldSetting, RankOptions, RankReport, RankSummary};
use crate::ratings::{self, KappaWeighting, MergedRatings, RatingRecord};
use crate::schema::{self, SolutionCache};
use crate::service::{self, AnnotationService, AnnotationStore, AnnotationTask};
use crate::shortlist;
use crate::text_align::{self, Aligner, GeneratedOutput};

#[derive(Debug, Parser)]
#[command(name = "explbench", version, about = "Build and evaluate multi-fact explanations")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "EXPLBENCH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(subcommand)]
    pub command: Command,
}

/// Input files. Each overrides the matching `paths.*` config entry.
#[derive(Debug, Default, Args)]
pub struct Inputs {
    /// Directory of `<table>.tsv` files.
    #[arg(long, global = true)]
    pub kb: Option<PathBuf>,
    #[arg(long, global = true)]
    pub questions: Option<PathBuf>,
    /// Rating records (JSONL).
    #[arg(long, global = true)]
    pub ratings: Option<PathBuf>,
    /// Ranker score files (TSV); repeat or comma-separate.
    #[arg(long, global = true, value_delimiter = ',')]
    pub scores: Vec<PathBuf>,
    /// Generator output (JSONL `{question, raw}`).
    #[arg(long, global = true)]
    pub generated: Option<PathBuf>,
    /// Schema definitions.
    #[arg(long, global = true)]
    pub schemas: Option<PathBuf>,
    /// Manual judgements (JSONL).
    #[arg(long, global = true)]
    pub overrides: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the corpus, then summarize it.
    Ingest,
    /// Build rater shortlists from ranker scores plus gold facts.
    Shortlist {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Merge per-rater ratings into teacher ratings.
    Merge,
    /// Inter-rater agreement.
    Agreement {
        #[arg(long, value_enum, default_value_t = Weighting::Unweighted)]
        weighting: Weighting,
    },
    /// MAP and NDCG of ranker score files.
    RankEval(RankEvalArgs),
    /// Top-K explanations from ranker scores.
    Topk {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Align generated fact strings to knowledge-base facts.
    Align {
        #[arg(long, default_value = "t5")]
        model: String,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        separator: Option<String>,
    },
    /// Schema solving and schema-based explanations.
    #[command(subcommand)]
    Schema(SchemaCommand),
    /// Relevance, completeness and F1 of explanations.
    ExplEval(ExplEvalArgs),
    /// Union of several models' explanations, per question.
    Ensemble {
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        explanations: Vec<PathBuf>,
    },
    /// Run the annotation service.
    Serve {
        /// Explanations to collect completeness judgements for.
        #[arg(long, value_delimiter = ',')]
        explanations: Vec<PathBuf>,
    },
    /// Corpus, rating, ranking and explanation tables in one text report.
    Report {
        #[arg(long, value_delimiter = ',')]
        explanations: Vec<PathBuf>,
    },
    /// Everything: ingest, schema solve and explain, top-K, alignment,
    /// ensemble, explanation and ranking evaluation, report.
    Pipeline {
        /// Score file whose model drives schema scoring; the first by default.
        #[arg(long)]
        ranker: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weighting {
    Unweighted,
    Linear,
}

impl From<Weighting> for KappaWeighting {
    fn from(w: Weighting) -> Self {
        match w {
            Weighting::Unweighted => KappaWeighting::Unweighted,
            Weighting::Linear => KappaWeighting::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Map,
    Ndcg,
}

#[derive(Debug, Args)]
pub struct RankEvalArgs {
    #[arg(long)]
    pub setting: Option<GoldSetting>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "map,ndcg")]
    pub metric: Vec<Metric>,
    /// A previous rank report to compare against.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// NDCG depth; whole ranking when unset.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub gain: Option<Gain>,
}

#[derive(Debug, Args)]
pub struct ExplEvalArgs {
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub explanations: Vec<PathBuf>,
    #[arg(long)]
    pub agg: Option<Aggregation>,
}

#[derive(Debug, Subcommand)]
pub enum SchemaCommand {
    /// Solve every schema and write the solution cache.
    Solve,
    /// Per question, each schema's best solution score.
    Score(SchemaArgs),
    /// Schema-based explanations.
    Explain(SchemaArgs),
}

#[derive(Debug, Args)]
pub struct SchemaArgs {
    /// Solution cache; defaults to `solutions.jsonl` in the output directory.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Model whose scores are used; the first score file by default.
    #[arg(long)]
    pub ranker: Option<String>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub filter: Option<f64>,
    #[arg(long)]
    pub n_schemas: Option<usize>,
}

/// Files written by the current command.
struct Outputs {
    dir: PathBuf,
    stamp: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn data(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.path(name);
        self.written.push(path.clone());
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// A stamped text report.
    fn report(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let body = format!("{}{body}", self.stamp);
        self.data(name, &body)
    }

    fn discard(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    out: Outputs,
}

fn need<'a>(p: &'a Option<PathBuf>, what: &str, flag: &str, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| anyhow!("no {what} given (use --{flag} or paths.{key} in the config)"))
}

impl Ctx {
    fn kb(&self) -> Result<KnowledgeBase> {
        let dir = need(&self.cfg.paths.kb_dir, "knowledge base", "kb", "kb_dir")?;
        parse_knowledge_base(dir, &self.cfg.corpus).with_context(|| format!("loading {}", dir.display()))
    }

    fn questions(&self, kb: &KnowledgeBase) -> Result<Vec<Question>> {
        let p = need(&self.cfg.paths.questions, "questions", "questions", "questions")?;
        parse_questions(p, kb).with_context(|| format!("loading {}", p.display()))
    }

    fn ratings(&self) -> Result<Vec<RatingRecord>> {
        let p = need(&self.cfg.paths.ratings, "ratings", "ratings", "ratings")?;
        read_jsonl(p).with_context(|| format!("loading {}", p.display()))
    }

    fn merged(&self) -> Result<MergedRatings> {
        Ok(ratings::merge_ratings(&self.ratings()?)?)
    }

    fn scores(&self) -> Result<Vec<ScoreFile>> {
        if self.cfg.paths.scores.is_empty() {
            bail!("no score files given (use --scores or paths.scores in the config)");
        }
        self.cfg
            .paths
            .scores
            .iter()
            .map(|p| parse_score_file(p).with_context(|| format!("loading {}", p.display())))
            .collect()
    }

    fn overrides(&self) -> Result<Overrides> {
        match &self.cfg.paths.overrides {
            Some(p) => {
                let recs: Vec<OverrideRecord> = read_jsonl(p).with_context(|| format!("loading {}", p.display()))?;
                Ok(Overrides::from_records(recs))
            }
            None => Ok(Overrides::default()),
        }
    }

    fn pick_ranker<'s>(&self, scores: &'s [ScoreFile], name: Option<&str>) -> Result<&'s ScoreFile> {
        match name {
            None => scores.first().ok_or_else(|| anyhow!("no score files given")),
            Some(n) => scores
                .iter()
                .find(|s| s.model_name == n)
                .ok_or_else(|| anyhow!("no score file for model {n:?}")),
        }
    }
}

fn read_explanations(paths: &[PathBuf]) -> Result<Vec<Explanation>> {
    let mut out = Vec::new();
    for p in paths {
        let mut e: Vec<Explanation> = read_jsonl(p).with_context(|| format!("loading {}", p.display()))?;
        out.append(&mut e);
    }
    Ok(out)
}

/// Groups explanations by model, keeping first-seen model order.
fn by_model(expls: Vec<Explanation>) -> Vec<(String, Vec<Explanation>)> {
    let mut order: Vec<(String, Vec<Explanation>)> = Vec::new();
    for e in expls {
        match order.iter_mut().find(|(m, _)| *m == e.model_name) {
            Some((_, v)) => v.push(e),
            None => order.push((e.model_name.clone(), vec![e])),
        }
    }
    order
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.+".contains(c) { c } else { '_' })
        .collect()
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::discover(cli.config.as_deref())?;
    apply_flags(&cli, &mut cfg);
    cfg.validate()?;
    let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let mut ctx = Ctx {
        out: Outputs {
            dir: cfg.paths.output_dir.clone(),
            stamp: cfg.stamp(),
            written: Vec::new(),
        },
        cfg,
    };
    let result = pool.install(|| dispatch(&cli.command, &mut ctx));
    if result.is_err() {
        ctx.out.discard();
    }
    result
}

fn apply_flags(cli: &Cli, cfg: &mut RunConfig) {
    let i = &cli.inputs;
    let p = &mut cfg.paths;
    for (flag, slot) in [
        (&i.kb, &mut p.kb_dir),
        (&i.questions, &mut p.questions),
        (&i.ratings, &mut p.ratings),
        (&i.generated, &mut p.generated),
        (&i.schemas, &mut p.schemas),
        (&i.overrides, &mut p.overrides),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if !i.scores.is_empty() {
        p.scores = i.scores.clone();
    }
    if let Some(o) = &cli.out {
        p.output_dir = o.clone();
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    let t = &mut cfg.thresholds;
    match &cli.command {
        Command::Shortlist { k: Some(k) } => t.shortlist_k = *k,
        Command::Topk { k: Some(k) } => t.top_k = *k,
        Command::Align { threshold, separator, .. } => {
            if let Some(x) = threshold {
                t.rouge = *x;
            }
            if let Some(s) = separator {
                cfg.eval.separator = s.clone();
            }
        }
        Command::Schema(SchemaCommand::Score(a) | SchemaCommand::Explain(a)) => {
            if let Some(x) = a.clip {
                t.clip = x;
            }
            if let Some(x) = a.filter {
                t.filter = x;
            }
            if let Some(x) = a.n_schemas {
                t.n_schemas = x;
            }
        }
        Command::RankEval(a) => {
            if let Some(s) = a.setting {
                cfg.eval.setting = s;
            }
            if a.cutoff.is_some() {
                cfg.eval.ndcg_cutoff = a.cutoff;
            }
            if let Some(g) = a.gain {
                cfg.eval.gain = g;
            }
        }
        Command::ExplEval(a) => {
            if let Some(agg) = a.agg {
                cfg.eval.aggregation = agg;
            }
        }
        _ => {}
    }
}

fn dispatch(cmd: &Command, ctx: &mut Ctx) -> Result<()> {
    match cmd {
        Command::Ingest => {
            let text = ingest(ctx)?;
            print!("{text}");
        }
        Command::Shortlist { .. } => shortlist_cmd(ctx)?,
        Command::Merge => merge_cmd(ctx)?,
        Command::Agreement { weighting } => {
            let summary = ratings::agreement_summary(&ctx.ratings()?, (*weighting).into());
            ctx.out.report("agreement.tsv", &summary.to_tsv())?;
            print!("{}", summary.to_tsv());
        }
        Command::RankEval(args) => rank_eval_cmd(ctx, args)?,
        Command::Topk { .. } => {
            let kb = ctx.kb()?;
            let questions = ctx.questions(&kb)?;
            for s in ctx.scores()? {
                let expls = topk_all(&s, &questions, ctx.cfg.thresholds.top_k)?;
                let path = ctx.out.data(&format!("explanations-{}.jsonl", file_safe(&s.model_name)), &to_jsonl(&expls))?;
                println!("{}: {} explanations -> {}", s.model_name, expls.len(), path.display());
            }
        }
        Command::Align { model, .. } => {
            let kb = ctx.kb()?;
            let expls = align_cmd(ctx, &kb, model)?;
            println!("{model}: {} explanations", expls.len());
        }
        Command::Schema(sub) => schema_cmd(ctx, sub)?,
        Command::ExplEval(args) => {
            let kb = ctx.kb()?;
            let questions = ctx.questions(&kb)?;
            let reports = expl_eval_all(ctx, &questions, read_explanations(&args.explanations)?)?;
            print!("{}", expl_summary(&reports));
        }
        Command::Ensemble { explanations } => {
            let models: Vec<Vec<Explanation>> =
                by_model(read_explanations(explanations)?).into_iter().map(|(_, v)| v).collect();
            if models.len() < 2 {
                bail!("ensemble needs explanations from at least two models");
            }
            let merged = expl_eval::ensemble_models(&models)?;
            let name = merged.first().map(|e| e.model_name.clone()).unwrap_or_default();
            let path = ctx.out.data(&format!("explanations-{}.jsonl", file_safe(&name)), &to_jsonl(&merged))?;
            println!("{name}: {} explanations -> {}", merged.len(), path.display());
        }
        Command::Serve { explanations } => serve_cmd(ctx, explanations)?,
        Command::Report { explanations } => {
            let kb = ctx.kb()?;
            let questions = ctx.questions(&kb)?;
            let expls = read_explanations(explanations)?;
            let text = report(ctx, &kb, &questions, expls)?;
            print!("{text}");
        }
        Command::Pipeline { ranker } => pipeline(ctx, ranker.as_deref())?,
    }
    Ok(())
}

fn ingest(ctx: &mut Ctx) -> Result<String> {
    let kb = ctx.kb()?;
    let mut out = String::from("table\trows\tsynonymy\n");
    for t in kb.table_names() {
        let ids = kb.table(t).unwrap_or(&[]);
        let syn = ids.iter().filter(|id| kb.fact(id).is_some_and(|f| f.is_synonymy)).count();
        writeln!(out, "{t}\t{}\t{syn}", ids.len())?;
    }
    writeln!(out, "ALL\t{}\t{}", kb.len(), kb.facts().filter(|f| f.is_synonymy).count())?;
    if ctx.cfg.paths.questions.is_some() {
        let qs = ctx.questions(&kb)?;
        let count = |s: Split| qs.iter().filter(|q| q.split == s).count();
        writeln!(
            out,
            "questions\t{}\ttrain={} dev={} test={}",
            qs.len(),
            count(Split::Train),
            count(Split::Dev),
            count(Split::Test)
        )?;
    }
    writeln!(out, "fingerprint\t{}", kb.fingerprint())?;
    ctx.out.report("ingest.tsv", &out)?;
    Ok(out)
}

fn shortlist_cmd(ctx: &mut Ctx) -> Result<()> {
    let kb = ctx.kb()?;
    let questions = ctx.questions(&kb)?;
    let scores = ctx.scores()?;
    let lists = shortlist::build_shortlists(&questions, &scores, ctx.cfg.thresholds.shortlist_k, &kb)?;
    let path = ctx.out.data("shortlists.jsonl", &to_jsonl(&lists))?;
    let total: usize = lists.iter().map(|s| s.len()).sum();
    println!(
        "{} shortlists, {:.1} facts on average -> {}",
        lists.len(),
        total as f64 / lists.len().max(1) as f64,
        path.display()
    );
    Ok(())
}

fn merged_tsv(merged: &MergedRatings) -> String {
    let mut out = String::from("question\tfact\ttr\traters\n");
    for m in merged.iter() {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", m.question_id, m.fact_id, m.tr, m.rater_count);
    }
    out
}

fn merge_cmd(ctx: &mut Ctx) -> Result<()> {
    let merged = ctx.merged()?;
    ctx.out.report("merged.tsv", &merged_tsv(&merged))?;
    println!("{} merged ratings", merged.len());
    if ctx.cfg.paths.questions.is_some() {
        let kb = ctx.kb()?;
        let dist = ratings::rating_distribution(&merged, &ctx.questions(&kb)?);
        ctx.out.report("distribution.tsv", &dist.to_tsv())?;
        print!("{dist}");
    }
    Ok(())
}

fn rank_reports(ctx: &Ctx, questions: &[Question], merged: &MergedRatings, settings: &[GoldSetting]) -> Result<Vec<RankReport>> {
    let options = RankOptions {
        cutoff: ctx.cfg.eval.ndcg_cutoff,
        gain: ctx.cfg.eval.gain,
    };
    let mut out = Vec::new();
    for s in ctx.scores()? {
        for &setting in settings {
            out.push(rank_eval::evaluate_ranking(&s, questions, merged, setting, options)?);
        }
    }
    Ok(out)
}

fn select_columns(tsv: &str, metrics: &[Metric]) -> String {
    let keep: Vec<usize> = std::iter::once(0)
        .chain(metrics.contains(&Metric::Map).then_some(1))
        .chain(metrics.contains(&Metric::Ndcg).then_some(2))
        .collect();
    tsv.lines()
        .map(|l| {
            if l.starts_with('#') {
                return format!("{l}\n");
            }
            let cols: Vec<&str> = l.split('\t').collect();
            let kept: Vec<&str> = keep.iter().filter_map(|&i| cols.get(i).copied()).collect();
            format!("{}\n", kept.join("\t"))
        })
        .collect()
}

fn rank_eval_cmd(ctx: &mut Ctx, args: &RankEvalArgs) -> Result<()> {
    let kb = ctx.kb()?;
    let questions = ctx.questions(&kb)?;
    let merged = ctx.merged()?;
    let baseline = match &args.baseline {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(RankSummary::parse_tsv(&text)?)
        }
        None => None,
    };
    let metrics = if args.metric.is_empty() { vec![Metric::Map, Metric::Ndcg] } else { args.metric.clone() };
    for r in rank_reports(ctx, &questions, &merged, &[ctx.cfg.eval.setting])? {
        let stem = format!("rank-{}-{}", file_safe(&r.model_name), r.setting);
        ctx.out.report(&format!("{stem}.tsv"), &select_columns(&r.to_tsv(), &metrics))?;
        let text = r.summary_text(baseline.as_ref());
        ctx.out.report(&format!("{stem}.txt"), &text)?;
        print!("{text}");
    }
    Ok(())
}

fn topk_all(s: &ScoreFile, questions: &[Question], k: usize) -> Result<Vec<Explanation>> {
    questions
        .iter()
        .map(|q| expl_eval::topk_explanation(s, &q.id, k).map_err(Into::into))
        .collect()
}

fn align_cmd(ctx: &mut Ctx, kb: &KnowledgeBase, model: &str) -> Result<Vec<Explanation>> {
    let p = need(&ctx.cfg.paths.generated, "generator output", "generated", "generated")?;
    let sep = ctx.cfg.eval.separator.clone();
    let gens: Vec<GeneratedOutput> = read_jsonl::<GeneratedOutput>(p)
        .with_context(|| format!("loading {}", p.display()))?
        .into_iter()
        .map(|g| g.resplit(&sep))
        .collect();
    let aligner = Aligner::new(kb);
    let mut audit = Vec::new();
    let mut expls = Vec::new();
    for g in &gens {
        let al = aligner.align(g, ctx.cfg.thresholds.rouge);
        expls.push(text_align::alignments_to_explanation(&g.question_id, model, &al));
        audit.extend(al.into_iter().map(|a| (g.question_id.clone(), a)));
    }
    let name = file_safe(model);
    ctx.out.report(&format!("alignment-{name}.tsv"), &text_align::alignment_audit_tsv(&audit))?;
    ctx.out.data(&format!("explanations-{name}.jsonl"), &to_jsonl(&expls))?;
    Ok(expls)
}

fn cache_path(ctx: &Ctx, explicit: Option<&Path>) -> PathBuf {
    explicit.map_or_else(|| ctx.out.path("solutions.jsonl"), Path::to_path_buf)
}

fn schema_solve(ctx: &mut Ctx, kb: &KnowledgeBase) -> Result<SolutionCache> {
    let p = need(&ctx.cfg.paths.schemas, "schemas", "schemas", "schemas")?;
    let schemas = schema::parse_schema_file(p)?;
    let cache = SolutionCache::build(&schemas, kb)?;
    ctx.out.data("solutions.jsonl", &cache.to_jsonl())?;
    Ok(cache)
}

fn schema_explanations(ctx: &Ctx, cache: &SolutionCache, scores: &ScoreFile, questions: &[Question]) -> Vec<Explanation> {
    let scoring = ctx.cfg.schema_scoring();
    questions
        .iter()
        .map(|q| schema::build_schema_explanation(&q.id, cache, &scores.score_map(&q.id), &scoring))
        .collect()
}

fn schema_cmd(ctx: &mut Ctx, sub: &SchemaCommand) -> Result<()> {
    let kb = ctx.kb()?;
    match sub {
        SchemaCommand::Solve => {
            let cache = schema_solve(ctx, &kb)?;
            for (name, sols) in &cache.entries {
                println!("{name}\t{}", sols.len());
            }
            println!("{} solutions", cache.solution_count());
        }
        SchemaCommand::Score(a) | SchemaCommand::Explain(a) => {
            let cache = schema::load_cache(&cache_path(ctx, a.cache.as_deref()), &kb)?;
            let questions = ctx.questions(&kb)?;
            let all = ctx.scores()?;
            let scores = ctx.pick_ranker(&all, a.ranker.as_deref())?;
            if matches!(sub, SchemaCommand::Score(_)) {
                let mut out = String::from("question\trank\tschema\tscore\tfacts\n");
                for q in &questions {
                    let map = scores.score_map(&q.id);
                    for (i, sel) in schema::select_schemas(&cache, &map, ctx.cfg.thresholds.clip).iter().enumerate() {
                        writeln!(out, "{}\t{}\t{}\t{:.6}\t{}", q.id, i + 1, sel.schema, sel.score, sel.solution.facts().join(","))?;
                    }
                }
                ctx.out.report(&format!("schema-scores-{}.tsv", file_safe(&scores.model_name)), &out)?;
                println!("{} questions scored", questions.len());
            } else {
                let expls = schema_explanations(ctx, &cache, scores, &questions);
                let name = format!("schema-{}", ctx.cfg.thresholds.n_schemas);
                let path = ctx.out.data(&format!("explanations-{name}.jsonl"), &to_jsonl(&expls))?;
                println!("{name}: {} explanations -> {}", expls.len(), path.display());
            }
        }
    }
    Ok(())
}

fn expl_eval_all(ctx: &mut Ctx, questions: &[Question], expls: Vec<Explanation>) -> Result<Vec<ExplReport>> {
    let merged = ctx.merged()?;
    let overrides = ctx.overrides()?;
    let mut reports = Vec::new();
    for (model, list) in by_model(expls) {
        let r = expl_eval::evaluate_explanations(&list, questions, &merged, &overrides, ctx.cfg.eval.aggregation)?;
        ctx.out.report(&format!("expl-{}.tsv", file_safe(&model)), &r.to_tsv())?;
        reports.push(r);
    }
    ctx.out.report("expl-summary.txt", &expl_summary(&reports))?;
    Ok(reports)
}

fn expl_summary(reports: &[ExplReport]) -> String {
    let mut out = ExplReport::summary_header();
    out.push('\n');
    for r in reports {
        out.push_str(&r.summary_row());
        out.push('\n');
    }
    out
}

fn rank_table(reports: &[RankReport]) -> String {
    let mut out = format!("{:<24} {:<8} {:>7} {:>7}\n", "model", "setting", "MAP", "NDCG");
    for r in reports {
        let _ = writeln!(out, "{:<24} {:<8} {:>7.4} {:>7.4}", r.model_name, r.setting, r.map_score, r.ndcg_score);
    }
    out
}

/// Builds the combined report text and writes `report.txt`.
fn report(ctx: &mut Ctx, kb: &KnowledgeBase, questions: &[Question], expls: Vec<Explanation>) -> Result<String> {
    let records = ctx.ratings()?;
    let merged = ratings::merge_ratings(&records)?;
    let mut text = String::new();
    writeln!(text, "== corpus ==")?;
    writeln!(
        text,
        "{} facts in {} tables ({} synonymy), {} questions, fingerprint {}",
        kb.len(),
        kb.table_names().count(),
        kb.facts().filter(|f| f.is_synonymy).count(),
        questions.len(),
        &kb.fingerprint()[..16]
    )?;
    writeln!(text, "\n== rating distribution ==")?;
    write!(text, "{}", ratings::rating_distribution(&merged, questions).to_tsv())?;
    writeln!(text, "\n== agreement ==")?;
    write!(text, "{}", ratings::agreement_summary(&records, KappaWeighting::Unweighted).to_tsv())?;
    writeln!(text, "\n== ranking ==")?;
    let ranks = rank_reports(ctx, questions, &merged, &[GoldSetting::Wt2, GoldSetting::Tr1, GoldSetting::Tr2])?;
    write!(text, "{}", rank_table(&ranks))?;
    if !expls.is_empty() {
        writeln!(text, "\n== explanations ({}) ==", ctx.cfg.eval.aggregation)?;
        let reports = expl_eval_all(ctx, questions, expls)?;
        write!(text, "{}", expl_summary(&reports))?;
    }
    ctx.out.report("report.txt", &text)?;
    Ok(text)
}

fn pipeline(ctx: &mut Ctx, ranker: Option<&str>) -> Result<()> {
    ingest(ctx)?;
    let kb = ctx.kb()?;
    let questions = ctx.questions(&kb)?;
    let scores = ctx.scores()?;
    let merged = ctx.merged()?;
    ctx.out.report("merged.tsv", &merged_tsv(&merged))?;

    let mut expls = Vec::new();
    for s in &scores {
        let list = topk_all(s, &questions, ctx.cfg.thresholds.top_k)?;
        ctx.out.data(&format!("explanations-{}.jsonl", file_safe(&s.model_name)), &to_jsonl(&list))?;
        expls.push(list);
    }
    let mut combine = Vec::new();
    if ctx.cfg.paths.schemas.is_some() {
        let cache = schema_solve(ctx, &kb)?;
        let list = schema_explanations(ctx, &cache, ctx.pick_ranker(&scores, ranker)?, &questions);
        let name = format!("schema-{}", ctx.cfg.thresholds.n_schemas);
        ctx.out.data(&format!("explanations-{name}.jsonl"), &to_jsonl(&list))?;
        combine.push(list.clone());
        expls.push(list);
    }
    if ctx.cfg.paths.generated.is_some() {
        let list = align_cmd(ctx, &kb, "t5")?;
        combine.push(list.clone());
        expls.push(list);
    }
    if combine.len() == 2 {
        let list = expl_eval::ensemble_models(&combine)?;
        let name = list.first().map(|e| e.model_name.clone()).unwrap_or_default();
        ctx.out.data(&format!("explanations-{}.jsonl", file_safe(&name)), &to_jsonl(&list))?;
        expls.push(list);
    }
    for r in rank_reports(ctx, &questions, &merged, &[GoldSetting::Wt2, GoldSetting::Tr1, GoldSetting::Tr2])? {
        ctx.out.report(&format!("rank-{}-{}.tsv", file_safe(&r.model_name), r.setting), &r.to_tsv())?;
    }
    let text = report(ctx, &kb, &questions, expls.into_iter().flatten().collect())?;
    print!("{text}");
    Ok(())
}

/// Relevance tasks from shortlists (when scores are configured) followed by
/// completeness tasks for the given explanations.
pub fn build_tasks(
    kb: &KnowledgeBase,
    questions: &[Question],
    scores: &[ScoreFile],
    shortlist_k: usize,
    explanations: &[Explanation],
    merged: &MergedRatings,
) -> Result<Vec<AnnotationTask>> {
    let by_id: HashMap<&str, &Question> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut tasks = Vec::new();
    if !scores.is_empty() {
        for sl in shortlist::build_shortlists(questions, scores, shortlist_k, kb)? {
            tasks.push(service::relevance_task(&sl, by_id[sl.question_id.as_str()], kb));
        }
    }
    for e in explanations {
        let q = by_id
            .get(e.question_id.as_str())
            .ok_or_else(|| anyhow!("explanation for unknown question {}", e.question_id))?;
        tasks.push(service::completeness_task(e, q, kb, merged));
    }
    Ok(tasks)
}

fn serve_cmd(ctx: &mut Ctx, explanations: &[PathBuf]) -> Result<()> {
    let mut sc = ctx.cfg.serve.clone();
    sc.apply_env()?;
    if sc.raters.is_empty() {
        bail!("no raters configured (add a [serve.raters] table)");
    }
    let kb = ctx.kb()?;
    let questions = ctx.questions(&kb)?;
    let base = match ctx.cfg.paths.ratings {
        Some(_) => ctx.ratings()?,
        None => Vec::new(),
    };
    let merged = ratings::merge_ratings(&base)?;
    let scores = if ctx.cfg.paths.scores.is_empty() { Vec::new() } else { ctx.scores()? };
    let expls = read_explanations(explanations)?;
    let tasks = build_tasks(&kb, &questions, &scores, ctx.cfg.thresholds.shortlist_k, &expls, &merged)?;
    println!("{} tasks for {} raters", tasks.len(), sc.raters.len());
    let store = AnnotationStore::new(tasks, sc.raters.keys().cloned(), sc.coverage, &questions, base);
    let svc = AnnotationService::open(store, &sc.log_path(), sc.raters.clone(), Some(sc.snapshot_path()))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(service::serve(&sc, Arc::new(svc)))
}

/// Entry point for the binary: parses arguments, runs, maps errors to an
/// exit code.
pub fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            for cause in e.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            std::process::ExitCode::FAILURE
        }
    }
}
