use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::Config;
use super::records::{
    read_manifest, write_manifest, write_records, Annotation, Counts, InsightRecord, RecordStatus, RunManifest, TableFailure, TableRef,
    RECORD_SCHEMA_VERSION,
};
use super::HarnessError;
use crate::alignment::{
    llm_judge, score_texts, swap_augment, AlignError, AlignmentModel, EmbeddingProvider, Label, LabeledPair,
    MockEmbeddingProvider, OpenAiEmbeddingProvider, Origin, SwapScheme, CachedEmbeddings,
};
use crate::dsl::{mask_constants, run as run_code, EvalLimits};
use crate::genpipe::{
    build_prompt, filter_executable, render_result, generate_insights, CachedClient, CandidateStatus, ChatClient, ExchangeKind,
    GenOptions, HttpConfig, InsightCandidate, MockChatClient, OpenAiChatClient, RetryPolicy, RetryingClient,
    ThreadSleeper, UsageLedger,
};
use crate::profile::{default_groupby_tree, predict_groupby, profile_table};
use crate::table::{parse_csv, sample_rows, serialize_csv, CsvOptions, Table};

/// Timestamp recorded by mock runs so their manifests are reproducible.
const MOCK_CREATED_AT: &str = "1970-01-01T00:00:00Z";

/// The endpoints a run talks to.
pub struct Services {
    pub chat: Box<dyn ChatClient>,
    pub judge: Box<dyn ChatClient>,
    pub embeddings: Box<dyn EmbeddingProvider>,
    pub model: Option<AlignmentModel>,
    pub mock: bool,
}

impl Services {
    /// Deterministic offline stand-ins for every endpoint.
    pub fn mock(cfg: &Config, seed: u64) -> Result<Services, HarnessError> {
        let s = Services {
            chat: Box::new(MockChatClient::new(seed)),
            judge: Box::new(MockChatClient::new(seed)),
            embeddings: Box::new(MockEmbeddingProvider::new(0, cfg.models.mock_embedding_dim)),
            model: None,
            mock: true,
        };
        s.with_configured_model(cfg)
    }

    /// OpenAI-compatible endpoints with retries and the response caches.
    pub fn live(cfg: &Config) -> Result<Services, HarnessError> {
        let e = &cfg.endpoints;
        let key = std::env::var(&e.api_key_env)
            .map_err(|_| HarnessError::Config(format!("environment variable {} is not set", e.api_key_env)))?;
        let http = |base: &str| HttpConfig {
            base_url: base.to_string(),
            api_key: key.clone(),
            timeout_ms: e.timeout_ms,
        };
        let policy = RetryPolicy {
            attempts: e.retry_attempts,
            base_delay_ms: e.retry_base_delay_ms,
            ..RetryPolicy::default()
        };
        let cache = |sub: &str| cfg.run.cache_dir.as_ref().map(|d| d.join(sub));
        let chat = || -> Result<Box<dyn ChatClient>, HarnessError> {
            let retrying = RetryingClient::new(OpenAiChatClient::new(http(&e.chat_base_url)), policy.clone(), Box::new(ThreadSleeper));
            Ok(Box::new(CachedClient::new(retrying, cache("chat"))?))
        };
        let embeddings = CachedEmbeddings::new(
            OpenAiEmbeddingProvider::new(http(&e.embedding_base_url), &cfg.models.embedding, cfg.models.embedding_dim),
            cache("embeddings"),
        )?;
        let s = Services {
            chat: chat()?,
            judge: chat()?,
            embeddings: Box::new(embeddings),
            model: None,
            mock: false,
        };
        s.with_configured_model(cfg)
    }

    pub fn from_config(cfg: &Config, mock: bool, seed: u64) -> Result<Services, HarnessError> {
        if mock {
            Services::mock(cfg, seed)
        } else {
            Services::live(cfg)
        }
    }

    fn with_configured_model(self, cfg: &Config) -> Result<Services, HarnessError> {
        match &cfg.classifier.model_path {
            Some(p) => self.with_model(AlignmentModel::load(p)?),
            None => Ok(self),
        }
    }

    pub fn with_model(mut self, model: AlignmentModel) -> Result<Services, HarnessError> {
        if model.embedding_dim != self.embeddings.dim() {
            return Err(HarnessError::Config(format!(
                "model expects {}-dimensional embeddings, provider gives {}",
                model.embedding_dim,
                self.embeddings.dim()
            )));
        }
        self.model = Some(model);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub records_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    pub records: Vec<InsightRecord>,
}

struct TableOutcome {
    records: Vec<InsightRecord>,
    ledger: UsageLedger,
    dropped: usize,
    truncated: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn masked(code: &str) -> String {
    mask_constants(code).unwrap_or_else(|_| code.trim().to_string())
}

fn load_table(bytes: &[u8], limits: &EvalLimits) -> Result<Table, crate::table::TableError> {
    let opts = CsvOptions {
        max_rows: limits.max_rows,
        ..CsvOptions::default()
    };
    Ok(parse_csv(bytes, opts)?.infer_types())
}

fn score_of(services: &Services, question: &str, code: &str) -> Option<f64> {
    let model = services.model.as_ref()?;
    match score_texts(model, question, code, services.embeddings.as_ref()) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("scoring failed: {e}");
            None
        }
    }
}

fn to_record(c: InsightCandidate, run_id: &str, columns: usize, cfg: &Config, services: &Services) -> InsightRecord {
    let (status, result_rendering, error_kind) = match &c.status {
        CandidateStatus::Pending => (RecordStatus::Pending, None, None),
        CandidateStatus::Executable { result } => (RecordStatus::Executable, Some(result.clone()), None),
        CandidateStatus::NonExecutable { kind, .. } => (RecordStatus::NonExecutable, None, Some(*kind)),
    };
    let alignment_score = if status == RecordStatus::Executable { score_of(services, &c.question, &c.code) } else { None };
    InsightRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        run_id: run_id.to_string(),
        table_id: c.table_id,
        table_columns: columns,
        style: cfg.generation.style,
        shots: cfg.generation.shots,
        index: c.index,
        masked_code: masked(&c.code),
        question: c.question,
        code: c.code,
        status,
        result_rendering,
        error_kind,
        alignment_score,
        usage: c.usage,
    }
}

fn process_table(
    cfg: &Config,
    services: &Services,
    run_id: &str,
    table_id: &str,
    t: &Table,
    opts: &GenOptions,
) -> Result<TableOutcome, HarnessError> {
    let profile = profile_table(table_id, t)?;
    let candidates = predict_groupby(default_groupby_tree(), &profile)?;
    let g = &cfg.generation;
    let spec = build_prompt(t, &profile, &candidates, g.style, &g.shots.mode(), g.n_insights, opts)?;
    let mut ledger = UsageLedger::new();
    let outcome = generate_insights(services.chat.as_ref(), table_id, t, &profile, &spec, opts, &mut ledger)?;
    let filtered = filter_executable(outcome.candidates, t, &cfg.dsl);
    let records = filtered
        .into_iter()
        .map(|c| to_record(c, run_id, t.column_count(), cfg, services))
        .collect();
    Ok(TableOutcome {
        records,
        ledger,
        dropped: outcome.dropped,
        truncated: outcome.truncated,
    })
}

fn table_ids(paths: &[PathBuf]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().map_or_else(|| "table".to_string(), |s| s.to_string_lossy().into_owned());
            let n = seen.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}-{n}")
            }
        })
        .collect()
}

/// Runs every stage for each table and writes `records.jsonl` and
/// `manifest.json` under `run.out_dir/<run_id>`. A table that fails is
/// recorded in the manifest and skipped.
pub fn run_pipeline(cfg: &Config, services: &Services, tables: &[PathBuf], seed: u64) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    if tables.is_empty() {
        return Err(HarnessError::Config("at least one table is required".into()));
    }
    let contents: Vec<Vec<u8>> = tables.iter().map(fs::read).collect::<Result<_, _>>()?;
    let ids = table_ids(tables);
    let config_hash = cfg.hash();

    let mut h = Sha256::new();
    h.update(config_hash.as_bytes());
    h.update(seed.to_le_bytes());
    h.update([services.mock as u8]);
    for (id, bytes) in ids.iter().zip(&contents) {
        h.update(id.as_bytes());
        h.update(Sha256::digest(bytes));
    }
    let run_id = hex::encode(h.finalize())[..16].to_string();
    let dir = cfg.run.out_dir.join(&run_id);
    fs::create_dir_all(&dir)?;

    let opts = cfg.gen_options(seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.parallel)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let outcomes: Vec<(TableRef, Result<TableOutcome, HarnessError>)> = pool.install(|| {
        ids.par_iter()
            .zip(contents.par_iter())
            .zip(tables.par_iter())
            .map(|((id, bytes), path)| {
                let table = load_table(bytes, &cfg.dsl);
                let (rows, columns) = table.as_ref().map_or((0, 0), |t| (t.row_count(), t.column_count()));
                let tref = TableRef {
                    table_id: id.clone(),
                    path: path.display().to_string(),
                    sha256: sha256_hex(bytes),
                    rows,
                    columns,
                };
                let outcome = match table {
                    Ok(t) => process_table(cfg, services, &run_id, id, &t, &opts),
                    Err(source) => Err(HarnessError::Table {
                        path: path.display().to_string(),
                        source,
                    }),
                };
                (tref, outcome)
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut ledger = UsageLedger::new();
    let mut refs = Vec::new();
    let mut failures = Vec::new();
    let mut truncated_tables = Vec::new();
    let mut dropped = 0;
    for (tref, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                records.extend(o.records);
                ledger.merge(o.ledger);
                dropped += o.dropped;
                if o.truncated {
                    truncated_tables.push(tref.table_id.clone());
                }
            }
            Err(e) => {
                log::warn!("table {} skipped: {e}", tref.table_id);
                failures.push(TableFailure {
                    table_id: tref.table_id.clone(),
                    error: e.to_string(),
                });
            }
        }
        refs.push(tref);
    }

    let threshold = services.model.as_ref().map_or(cfg.classifier.train.threshold, |m| m.threshold);
    let manifest = RunManifest {
        schema_version: RECORD_SCHEMA_VERSION,
        run_id: run_id.clone(),
        created_at: if services.mock {
            MOCK_CREATED_AT.to_string()
        } else {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        },
        config_hash,
        seed,
        mock: services.mock,
        table_ids: ids,
        tables: refs,
        style: cfg.generation.style,
        shots: cfg.generation.shots,
        n_insights: cfg.generation.n_insights,
        threshold,
        counts: Counts::from_records(&records, threshold),
        usage_totals: ledger.totals(),
        usage_generate: ledger.totals_for(ExchangeKind::Generate),
        usage_translate: ledger.totals_for(ExchangeKind::Translate),
        calls: vec![
            (ExchangeKind::Generate, ledger.calls(ExchangeKind::Generate)),
            (ExchangeKind::Translate, ledger.calls(ExchangeKind::Translate)),
        ],
        dropped,
        truncated_tables,
        failures,
    };
    manifest.check()?;
    let records_path = dir.join("records.jsonl");
    let manifest_path = dir.join("manifest.json");
    write_records(&records_path, &records)?;
    write_manifest(&manifest_path, &manifest)?;
    Ok(RunOutput {
        dir,
        records_path,
        manifest_path,
        manifest,
        records,
    })
}

/// Reads the tables a manifest points at, keyed by table id. Tables whose
/// contents changed since the run are rejected.
pub fn load_run_tables(manifest: &RunManifest, limits: &EvalLimits) -> Result<HashMap<String, Table>, HarnessError> {
    let mut out = HashMap::new();
    for r in &manifest.tables {
        let bytes = fs::read(&r.path)?;
        if sha256_hex(&bytes) != r.sha256 {
            return Err(HarnessError::Invariant(format!("{} changed since the run", r.path)));
        }
        let t = load_table(&bytes, limits).map_err(|source| HarnessError::Table {
            path: r.path.clone(),
            source,
        })?;
        out.insert(r.table_id.clone(), t);
    }
    Ok(out)
}

/// Executes every record's code again. Records whose table is missing
/// keep their previous status.
pub fn refilter_records(records: &[InsightRecord], tables: &HashMap<String, Table>, limits: &EvalLimits) -> Vec<InsightRecord> {
    records
        .par_iter()
        .map(|r| {
            let Some(t) = tables.get(&r.table_id) else { return r.clone() };
            let mut r = r.clone();
            match run_code(&r.code, t, limits) {
                Ok(v) => {
                    r.result_rendering = Some(render_result(&v));
                    r.status = RecordStatus::Executable;
                    r.error_kind = None;
                }
                Err(e) => {
                    r.status = RecordStatus::NonExecutable;
                    r.result_rendering = None;
                    r.error_kind = Some(e.kind);
                    r.alignment_score = None;
                }
            }
            r
        })
        .collect()
}

/// Scores every executable record with `model`; others lose any score.
pub fn rescore_records<P: EmbeddingProvider + ?Sized>(
    records: &[InsightRecord],
    model: &AlignmentModel,
    provider: &P,
) -> Result<Vec<InsightRecord>, HarnessError> {
    records
        .par_iter()
        .map(|r| {
            let mut r = r.clone();
            r.alignment_score = match r.status {
                RecordStatus::Executable => Some(score_texts(model, &r.question, &r.code, provider)?),
                _ => None,
            };
            Ok(r)
        })
        .collect()
}

/// Asks the judge about each executable record. Replies without a verdict
/// are logged and skipped.
pub fn judge_records(
    records: &[InsightRecord],
    client: &dyn ChatClient,
    tables: &HashMap<String, Table>,
    opts: &GenOptions,
) -> Result<Vec<Annotation>, HarnessError> {
    let mut samples: HashMap<&str, String> = HashMap::new();
    for (id, t) in tables {
        samples.insert(id.as_str(), serialize_csv(&sample_rows(t, opts.sample_rows, opts.seed)));
    }
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.status == RecordStatus::Executable) {
        let sample = samples.get(r.table_id.as_str()).map_or("", String::as_str);
        match llm_judge(client, &r.question, &r.code, sample, opts) {
            Ok(label) => out.push(Annotation {
                run_id: r.run_id.clone(),
                table_id: r.table_id.clone(),
                index: r.index,
                annotator: "judge".into(),
                label,
            }),
            Err(AlignError::UnparseableVerdict(reply)) => {
                log::warn!("no verdict for {}#{}: {reply:?}", r.table_id, r.index)
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Training pairs from a run: executable records count as aligned unless
/// a human label says otherwise, and code swaps among the aligned ones
/// supply further misaligned pairs.
pub fn pairs_from_records(
    records: &[InsightRecord],
    human: &[Annotation],
    scheme: SwapScheme,
    seed: u64,
) -> Vec<LabeledPair> {
    let labels: HashMap<(&str, &str, usize), Label> = human
        .iter()
        .map(|a| ((a.run_id.as_str(), a.table_id.as_str(), a.index), a.label))
        .collect();
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for r in records.iter().filter(|r| r.status == RecordStatus::Executable) {
        if !seen.insert((r.question.as_str(), r.code.as_str())) {
            continue;
        }
        let (label, origin) = match labels.get(&r.key()) {
            Some(l) => (*l, Origin::HumanAnnotated),
            None => (Label::Aligned, Origin::ExecutionDerived),
        };
        pairs.push(LabeledPair {
            question: r.question.clone(),
            code: r.code.clone(),
            label,
            origin,
        });
    }
    let aligned: Vec<LabeledPair> = pairs.iter().filter(|p| p.label == Label::Aligned).cloned().collect();
    let known: HashSet<(String, String)> = pairs.iter().map(|p| (p.question.clone(), p.code.clone())).collect();
    pairs.extend(
        swap_augment(&aligned, scheme, seed)
            .into_iter()
            .filter(|p| !known.contains(&(p.question.clone(), p.code.clone()))),
    );
    pairs
}

/// Writes `records` to `path`. When a `manifest.json` sits beside it, its
/// counts and threshold are brought up to date too.
pub fn store_records(path: &Path, records: &[InsightRecord], threshold: f64) -> Result<Option<RunManifest>, HarnessError> {
    write_records(path, records)?;
    let manifest_path = path.with_file_name("manifest.json");
    if !manifest_path.exists() {
        return Ok(None);
    }
    let mut m = read_manifest(&manifest_path)?;
    m.threshold = threshold;
    m.counts = Counts::from_records(records, threshold);
    m.check()?;
    write_manifest(&manifest_path, &m)?;
    Ok(Some(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{train, ModelShape, TrainConfig, Variant};
    use crate::genpipe::ScriptedClient;
    use crate::harness::records::read_records;

    fn fixture_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("snooker.csv"), crate::fixtures::SNOOKER_CSV).unwrap();
        fs::write(dir.path().join("players.csv"), crate::fixtures::PLAYERS_CSV).unwrap();
        fs::write(dir.path().join("transit.csv"), crate::fixtures::TRANSIT_CSV).unwrap();
        dir
    }

    fn config(out: &std::path::Path) -> Config {
        let mut cfg = Config::default();
        cfg.run.out_dir = out.to_path_buf();
        cfg
    }

    #[test]
    fn scripted_run_counts_by_construction() {
        let dir = fixture_dir();
        let mut cfg = config(&dir.path().join("runs"));
        cfg.generation.n_insights = 4;
        let reply = "Q1: How many finals?\nC1: len(table)\nQ2: Latest year?\nC2: table['Year'].max()\n\
                     Q3: Who won most?\nC3: table[table['Outcome'] == 'Winner']['Opponent in final'].value_counts().idxmax()\n\
                     Q4: Pivot?\nC4: table.pivot_table(index='Year')";
        let mut services = Services::mock(&cfg, 0).unwrap();
        services.chat = Box::new(ScriptedClient::constant(reply));
        let out = run_pipeline(&cfg, &services, &[dir.path().join("snooker.csv")], 1).unwrap();
        let c = out.manifest.counts;
        assert_eq!((c.generated, c.executable, c.non_executable), (4, 3, 1));
        assert_eq!(out.records[3].error_kind, Some(crate::dsl::ErrorKind::UnknownMethod));
        assert_eq!(out.records[0].result_rendering.as_deref(), Some("14"));
        assert_eq!(read_records(&out.records_path).unwrap(), out.records);
    }

    #[test]
    fn zero_tables_is_a_config_error() {
        let dir = fixture_dir();
        let cfg = config(dir.path());
        let services = Services::mock(&cfg, 0).unwrap();
        assert!(matches!(run_pipeline(&cfg, &services, &[], 0), Err(HarnessError::Config(_))));
    }

    #[test]
    fn mock_runs_are_byte_identical() {
        let dir = fixture_dir();
        let tables: Vec<PathBuf> = ["snooker", "players", "transit"].iter().map(|t| dir.path().join(format!("{t}.csv"))).collect();
        let cfg = config(&dir.path().join("runs"));
        let mut outs = Vec::new();
        for _ in 0..2 {
            let services = Services::mock(&cfg, 5).unwrap();
            let out = run_pipeline(&cfg, &services, &tables, 5).unwrap();
            outs.push((fs::read(&out.records_path).unwrap(), fs::read(&out.manifest_path).unwrap()));
        }
        assert_eq!(outs[0], outs[1]);
    }

    #[test]
    fn unreadable_table_is_recorded_and_skipped() {
        let dir = fixture_dir();
        fs::write(dir.path().join("binary.csv"), b"a,b\n\0\0").unwrap();
        let cfg = config(&dir.path().join("runs"));
        let services = Services::mock(&cfg, 0).unwrap();
        let out = run_pipeline(&cfg, &services, &[dir.path().join("binary.csv"), dir.path().join("snooker.csv")], 0).unwrap();
        assert_eq!(out.manifest.failures.len(), 1);
        assert_eq!(out.manifest.failures[0].table_id, "binary");
        assert!(out.records.iter().all(|r| r.table_id == "snooker"));
        assert_eq!(out.records.len(), 25);
    }

    #[test]
    fn train_score_and_judge_from_a_run() {
        let dir = fixture_dir();
        let tables: Vec<PathBuf> = ["snooker", "players", "transit"].iter().map(|t| dir.path().join(format!("{t}.csv"))).collect();
        let cfg = config(&dir.path().join("runs"));
        let services = Services::mock(&cfg, 2).unwrap();
        let out = run_pipeline(&cfg, &services, &tables, 2).unwrap();
        assert!(out.records.iter().all(|r| r.alignment_score.is_none()));

        let pairs = pairs_from_records(&out.records, &[], SwapScheme::AdjacentSwap, 0);
        assert!(pairs.iter().any(|p| p.label == Label::Misaligned));
        let tcfg = TrainConfig {
            epochs: 3,
            shape: ModelShape {
                hidden: vec![16],
                projection: 8,
            },
            ..TrainConfig::default()
        };
        let (model, _) = train(Variant::Concat, &pairs, services.embeddings.as_ref(), &tcfg).unwrap();
        let scored = rescore_records(&out.records, &model, services.embeddings.as_ref()).unwrap();
        for r in &scored {
            assert_eq!(r.alignment_score.is_some(), r.status == RecordStatus::Executable);
        }

        let manifest = crate::harness::read_manifest(&out.manifest_path).unwrap();
        let loaded = load_run_tables(&manifest, &cfg.dsl).unwrap();
        assert_eq!(refilter_records(&out.records, &loaded, &cfg.dsl), out.records);
        let verdicts = judge_records(&scored, services.judge.as_ref(), &loaded, &cfg.gen_options(0)).unwrap();
        assert_eq!(verdicts.len(), out.manifest.counts.executable);
        assert!(verdicts.iter().any(|a| a.label == Label::Misaligned));

        let m = store_records(&out.records_path, &scored, 0.5).unwrap().unwrap();
        assert_eq!(m.counts.aligned + m.counts.misaligned, m.counts.executable);
        assert_eq!(crate::harness::read_manifest(&out.manifest_path).unwrap(), m);
    }
}
