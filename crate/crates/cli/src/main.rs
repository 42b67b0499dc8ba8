use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use insightgen_core::alignment::{read_pairs_jsonl, train, AlignmentModel, Variant};
use insightgen_core::genpipe::GenerationStyle;
use insightgen_core::harness::{
    annotate, import_worksheet, judge_records, load_run_tables, pairs_from_records, read_annotations, read_manifest,
    read_records, refilter_records, rescore_records, run_eval, run_pipeline, store_records, write_annotations,
    write_worksheet, Annotation, Config, EvalOptions, EvalWhich, InsightRecord, Services, ShotsSetting,
};
use insightgen_core::metrics::DiversityAggregation;
use insightgen_core::profile::{
    default_groupby_tree, load_training_csv, predict_groupby, profile_table, synthetic_groupby_corpus, train_tree,
    DecisionTree, TreeParams,
};
use insightgen_core::table::{parse_csv, CsvOptions};

#[derive(Parser)]
#[command(name = "insightgen", version, about = "Generate, filter and evaluate table insights")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use deterministic offline stand-ins for every model endpoint.
    #[arg(long, global = true)]
    mock: bool,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Qc,
    Cq,
    Q,
    C,
}

impl From<StyleArg> for GenerationStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Qc => GenerationStyle::QuestionThenCode,
            StyleArg::Cq => GenerationStyle::CodeThenQuestion,
            StyleArg::Q => GenerationStyle::QuestionOnly,
            StyleArg::C => GenerationStyle::CodeOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ShotsArg {
    Zero,
    One,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Concat,
    Joint,
    Cosine,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Concat => Variant::Concat,
            VariantArg::Joint => Variant::Joint,
            VariantArg::Cosine => Variant::CosineProjection,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichArg {
    Alignment,
    Diversity,
    Cost,
}

impl From<WhichArg> for EvalWhich {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::Alignment => EvalWhich::Alignment,
            WhichArg::Diversity => EvalWhich::Diversity,
            WhichArg::Cost => EvalWhich::Cost,
        }
    }
}

#[derive(Args)]
struct RecordsOut {
    /// Records file to update.
    records: PathBuf,
    /// Write here instead of updating in place.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print column profiles and groupby candidates as JSON.
    Profile {
        #[arg(required = true)]
        tables: Vec<PathBuf>,
        /// Decision tree JSON; the built-in tree otherwise.
        #[arg(long)]
        tree: Option<PathBuf>,
    },
    /// Run generation, filtering and scoring over tables.
    Generate {
        #[arg(long, value_enum)]
        style: Option<StyleArg>,
        #[arg(long, value_enum)]
        shots: Option<ShotsArg>,
        #[arg(long)]
        n: Option<usize>,
        /// Alignment model used to score executable insights.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(required = true)]
        tables: Vec<PathBuf>,
    },
    /// Re-execute every record's code against its table.
    Filter(RecordsOut),
    /// Train an alignment classifier from run records or labelled pairs.
    TrainAlign {
        #[arg(long, value_enum, default_value = "concat")]
        variant: VariantArg,
        /// Records whose executable pairs seed the training set.
        #[arg(long)]
        records: Vec<PathBuf>,
        /// Human labels overriding execution-derived ones.
        #[arg(long)]
        annotations: Vec<PathBuf>,
        /// Ready-made labelled pairs (JSONL).
        #[arg(long)]
        pairs: Vec<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score executable records with an alignment model.
    Score {
        #[command(flatten)]
        target: RecordsOut,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Ask the judge model about each executable record.
    Judge {
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a code-length stratified sample into an annotation worksheet.
    Annotate {
        #[arg(long)]
        sample: usize,
        #[arg(long)]
        strata: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        records: Vec<PathBuf>,
    },
    /// Convert a filled-in worksheet to annotations JSONL.
    ImportAnnotations {
        worksheet: PathBuf,
        #[arg(long, default_value = "human")]
        annotator: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one evaluation report.
    Eval {
        #[arg(long, value_enum)]
        which: WhichArg,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Write every evaluation report.
    Report {
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Train the groupby decision tree.
    TrainTree {
        /// Labelled feature CSV; a synthetic corpus otherwise.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        synthetic: usize,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    annotations: Vec<PathBuf>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
    /// Pool all code pairs across tables instead of averaging per table.
    #[arg(long)]
    pooled: bool,
    #[arg(required = true)]
    records: Vec<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let cfg = match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize + ?Sized>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn read_all_records(paths: &[PathBuf]) -> Result<Vec<InsightRecord>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_records(p).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(out)
}

fn read_all_annotations(paths: &[PathBuf]) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_annotations(p).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(out)
}

fn manifest_beside(records: &Path) -> PathBuf {
    records.with_file_name("manifest.json")
}

fn store(target: &RecordsOut, records: &[InsightRecord], threshold: f64) -> Result<()> {
    let path = target.out.as_ref().unwrap_or(&target.records);
    match store_records(path, records, threshold)? {
        Some(m) => print_json(&m.counts),
        None => {
            println!("wrote {} records to {}", records.len(), path.display());
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut cfg = load_config(cli.config.as_deref())?;
    let seed = cli.seed;

    match cli.command {
        Command::Profile { tables, tree } => {
            let tree = match tree {
                Some(p) => DecisionTree::from_json(&fs::read_to_string(&p)?)?,
                None => default_groupby_tree().clone(),
            };
            let mut out = Vec::new();
            for path in &tables {
                let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                let t = parse_csv(&bytes, CsvOptions::default())?.infer_types();
                let id = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                let profile = profile_table(&id, &t)?;
                let candidates = predict_groupby(&tree, &profile)?;
                out.push(serde_json::json!({ "profile": profile, "groupby_candidates": candidates }));
            }
            print_json(&out)
        }
        Command::Generate {
            style,
            shots,
            n,
            model,
            out_dir,
            tables,
        } => {
            if let Some(s) = style {
                cfg.generation.style = s.into();
            }
            if let Some(s) = shots {
                cfg.generation.shots = match s {
                    ShotsArg::Zero => ShotsSetting::Zero,
                    ShotsArg::One => ShotsSetting::One,
                };
            }
            if let Some(n) = n {
                cfg.generation.n_insights = n;
            }
            if model.is_some() {
                cfg.classifier.model_path = model;
            }
            if let Some(d) = out_dir {
                cfg.run.out_dir = d;
            }
            let services = Services::from_config(&cfg, cli.mock, seed)?;
            let out = run_pipeline(&cfg, &services, &tables, seed)?;
            eprintln!("{}", out.records_path.display());
            print_json(&out.manifest)
        }
        Command::Filter(target) => {
            let manifest = read_manifest(&manifest_beside(&target.records)).context("filter needs the run manifest")?;
            let tables = load_run_tables(&manifest, &cfg.dsl)?;
            let records = refilter_records(&read_records(&target.records)?, &tables, &cfg.dsl);
            store(&target, &records, manifest.threshold)
        }
        Command::TrainAlign {
            variant,
            records,
            annotations,
            pairs,
            epochs,
            out,
        } => {
            if records.is_empty() && pairs.is_empty() {
                bail!("give --records or --pairs");
            }
            let mut dataset = Vec::new();
            for p in &pairs {
                dataset.extend(read_pairs_jsonl(p).with_context(|| format!("reading {}", p.display()))?);
            }
            if !records.is_empty() {
                let human = read_all_annotations(&annotations)?;
                let scheme = cfg.classifier.swap;
                dataset.extend(pairs_from_records(&read_all_records(&records)?, &human, scheme, seed));
            }
            let mut tcfg = cfg.classifier.train.clone();
            tcfg.seed = seed;
            if let Some(e) = epochs {
                tcfg.epochs = e;
            }
            let services = Services::from_config(&cfg, cli.mock, seed)?;
            let (model, report) = train(variant.into(), &dataset, services.embeddings.as_ref(), &tcfg)?;
            model.save(&out)?;
            print_json(&report)
        }
        Command::Score { target, model } => {
            let path = model
                .or_else(|| cfg.classifier.model_path.clone())
                .context("score needs --model or classifier.model_path")?;
            let model = AlignmentModel::load(&path)?;
            let services = Services::from_config(&cfg, cli.mock, seed)?;
            if model.provider_id != services.embeddings.id() {
                log::warn!("model was trained on {} embeddings, scoring with {}", model.provider_id, services.embeddings.id());
            }
            let records = rescore_records(&read_records(&target.records)?, &model, services.embeddings.as_ref())?;
            store(&target, &records, model.threshold)
        }
        Command::Judge { records, out } => {
            let manifest = read_manifest(&manifest_beside(&records)).context("judge needs the run manifest")?;
            let tables = load_run_tables(&manifest, &cfg.dsl)?;
            let services = Services::from_config(&cfg, cli.mock, seed)?;
            let mut opts = cfg.gen_options(seed);
            opts.model = cfg.models.judge.clone();
            let verdicts = judge_records(&read_records(&records)?, services.judge.as_ref(), &tables, &opts)?;
            write_annotations(&out, &verdicts)?;
            println!("wrote {} verdicts to {}", verdicts.len(), out.display());
            Ok(())
        }
        Command::Annotate {
            sample,
            strata,
            out,
            records,
        } => {
            let rows = annotate(&read_all_records(&records)?, sample, strata.unwrap_or(cfg.report.strata), seed)?;
            write_worksheet(&out, &rows)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
            Ok(())
        }
        Command::ImportAnnotations { worksheet, annotator, out } => {
            let anns = import_worksheet(&worksheet, &annotator)?;
            write_annotations(&out, &anns)?;
            println!("wrote {} annotations to {}", anns.len(), out.display());
            Ok(())
        }
        Command::Eval { which, report } => eval(&cfg, &report, &[which.into()]),
        Command::Report { report } => eval(&cfg, &report, &EvalWhich::ALL),
        Command::TrainTree {
            corpus,
            synthetic,
            max_depth,
            out,
        } => {
            let data = match corpus {
                Some(p) => load_training_csv(&fs::read_to_string(&p)?)?.1,
                None => synthetic_groupby_corpus(synthetic, seed),
            };
            let mut params = TreeParams::default();
            if let Some(d) = max_depth {
                params.max_depth = d;
            }
            let cut = data.len() * 4 / 5;
            let tree = train_tree(&data[..cut], params)?;
            let held_out = if cut < data.len() { tree.accuracy(&data[cut..]) } else { f64::NAN };
            fs::write(&out, tree.to_json())?;
            print_json(&serde_json::json!({
                "train_accuracy": tree.accuracy(&data[..cut]),
                "held_out_accuracy": held_out,
                "depth": tree.depth(),
                "nodes": tree.nodes.len(),
            }))
        }
    }
}

fn eval(cfg: &Config, args: &ReportArgs, which: &[EvalWhich]) -> Result<()> {
    let annotations = read_all_annotations(&args.annotations)?;
    let threshold = args
        .records
        .first()
        .and_then(|r| read_manifest(&manifest_beside(r)).ok())
        .map_or(cfg.classifier.train.threshold, |m| m.threshold);
    for &w in which {
        let opts = EvalOptions {
            which: w,
            out_dir: args.out.clone(),
            annotations: annotations.clone(),
            threshold,
            report: cfg.report.clone(),
            aggregation: if args.pooled { DiversityAggregation::Pooled } else { DiversityAggregation::MeanOfMeans },
        };
        for p in run_eval(&args.records, &opts)? {
            println!("{}", p.display());
        }
    }
    Ok(())
}
