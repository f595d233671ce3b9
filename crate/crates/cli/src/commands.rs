use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use attlist::baselines::{bpr_train, itempop, mf_train};
use attlist::data::{
    generate_synthetic_with_topics, load_dataset, load_prepared, save_prepared, split_dataset, InteractionDataset,
    LoadOptions, Manifest, PrepareSettings, ProfileBuilder, Split,
};
use attlist::eval::{evaluate, rank_for_user, AttListScorer, CandidatePolicy, MetricsReport, OracleScorer, Scorer};
use attlist::model::{export_attention, forward, AblationVariant};
use attlist::training::{
    train_with, Checkpoint, EpochRecord, ModelState, Resume, TrainConfig, TrainOptions,
};
use clap::ArgMatches;
use serde::Serialize;

use crate::args::{
    AblateArgs, ConfigArgs, EvaluateArgs, ExportArgs, ModelKind, PrepareArgs, SplitArgs, SynthesizeArgs, TrainArgs,
};

pub const CONFIG_FILE: &str = "config.toml";
pub const EPOCH_LOG: &str = "epochs.jsonl";
pub const BEST_CHECKPOINT: &str = "best.json";
pub const LAST_CHECKPOINT: &str = "last.json";

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}

fn load_data(dir: &Path) -> Result<InteractionDataset> {
    let (ds, _) = load_prepared(dir).with_context(|| format!("loading prepared dataset {}", dir.display()))?;
    Ok(ds)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn config_toml(cfg: &TrainConfig) -> Result<String> {
    Ok(toml::to_string(cfg)?)
}

/// `base`, replaced wholesale by the config file if one is given, then
/// overridden by explicit flags.
fn resolve_config(base: TrainConfig, args: &ConfigArgs, m: &ArgMatches) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(path) => read_config(path)?,
        None => base,
    };
    args.overlay(&mut cfg, m);
    cfg.validate()?;
    Ok(cfg)
}

fn settings(split: &SplitArgs, seed: u64, load: LoadOptions) -> PrepareSettings {
    PrepareSettings {
        split_seed: seed,
        split_fractions: split.fractions(),
        max_profile_lists: split.max_lists,
        max_list_items: split.max_items,
        load,
    }
}

fn persist(ds: &InteractionDataset, out: &Path, settings: &PrepareSettings) -> Result<()> {
    let manifest = Manifest::describe(ds, settings);
    save_prepared(ds, out, &manifest)?;
    println!("{}", ds.summary());
    println!("manifest {}", manifest.hash()?);
    Ok(())
}

pub fn prepare(a: &PrepareArgs) -> Result<()> {
    require_file(&a.interactions)?;
    require_file(&a.containment)?;
    let load = LoadOptions {
        min_item_frequency: a.min_item_frequency,
        min_user_interactions: a.min_user_interactions,
    };
    let raw = load_dataset(&a.interactions, &a.containment, &load)?;
    let ds = split_dataset(&raw, a.split.fractions(), a.seed)?;
    persist(&ds, &a.out, &settings(&a.split, a.seed, load))
}

#[derive(Serialize)]
struct Topics<'a> {
    item_topics: &'a [usize],
    list_topics: &'a [usize],
    user_topics: &'a [Vec<usize>],
}

pub fn synthesize(a: &SynthesizeArgs) -> Result<()> {
    let spec = a.spec();
    let data = generate_synthetic_with_topics(&spec)?;
    let ds = split_dataset(&data.dataset, a.split.fractions(), a.seed)?;
    let load = LoadOptions {
        min_item_frequency: 0,
        min_user_interactions: 0,
    };
    persist(&ds, &a.out, &settings(&a.split, a.seed, load))?;
    write_json(&a.out.join("synthetic.json"), &spec)?;
    write_json(
        &a.out.join("topics.json"),
        &Topics {
            item_topics: &data.item_topics,
            list_topics: &data.list_topics,
            user_topics: &data.user_topics,
        },
    )
}

fn display_name(kind: &str) -> &'static str {
    match kind {
        "attlist" => "AttList",
        "itempop" => "ItemPop",
        "mf" => "MF",
        "bpr" => "BPR",
        _ => "Oracle",
    }
}

fn report_for(ck: &Checkpoint, ds: &InteractionDataset, split: Split) -> Result<MetricsReport> {
    let scorer = ck.scorer(ds)?;
    let mut report = evaluate(scorer.as_ref(), ds, split, ck.config.candidates, display_name(ck.kind()))?;
    report.config_hash = Some(ck.config_hash.clone());
    Ok(report)
}

fn write_reports(dir: &Path, stem: &str, reports: &[MetricsReport]) -> Result<()> {
    write_text(&dir.join(format!("{stem}.txt")), &MetricsReport::table(reports))?;
    write_json(&dir.join(format!("{stem}.json")), &reports)
}

struct EpochLog {
    file: BufWriter<File>,
    error: Option<io::Error>,
}

impl EpochLog {
    fn open(path: &Path, append: bool) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        Ok(EpochLog {
            file: BufWriter::new(file),
            error: None,
        })
    }

    fn record(&mut self, r: &EpochRecord) {
        if self.error.is_some() {
            return;
        }
        let line = serde_json::to_string(r).expect("epoch record serializes");
        if let Err(e) = writeln!(self.file, "{line}").and_then(|_| self.file.flush()) {
            self.error = Some(e);
        }
    }

    fn finish(mut self) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.file.flush()?;
        Ok(())
    }
}

pub fn train(a: &TrainArgs, m: &ArgMatches) -> Result<()> {
    let ds = load_data(&a.data)?;
    let resume = match &a.resume {
        Some(dir) => {
            let last = Checkpoint::load(&dir.join(LAST_CHECKPOINT))
                .with_context(|| format!("loading {}", dir.join(LAST_CHECKPOINT).display()))?;
            let best_path = dir.join(BEST_CHECKPOINT);
            let best = if best_path.is_file() {
                Some(Checkpoint::load(&best_path)?)
            } else {
                None
            };
            Some(Resume { last, best })
        }
        None => None,
    };
    let base = resume.as_ref().map_or_else(TrainConfig::default, |r| r.last.config.clone());
    let cfg = resolve_config(base, &a.config, m)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_text(&a.out.join(CONFIG_FILE), &config_toml(&cfg)?)?;

    let same_dir = a.resume.as_ref().is_some_and(|d| d == &a.out);
    let mut log = EpochLog::open(&a.out.join(EPOCH_LOG), same_dir)?;
    if resume.is_some() && a.model != ModelKind::Attlist {
        bail!("--resume is only supported for attlist");
    }
    let (best, last) = match a.model {
        ModelKind::Attlist => {
            let opts = TrainOptions {
                resume,
                force: a.force,
                inject_nan: a.inject_nan,
                on_epoch: Some(Box::new(|r: &EpochRecord| log.record(r))),
            };
            let out = train_with(&ds, &cfg, opts)?;
            (out.best, out.last)
        }
        ModelKind::Mf | ModelKind::Bpr => {
            let out = if a.model == ModelKind::Mf { mf_train(&ds, &cfg)? } else { bpr_train(&ds, &cfg)? };
            for r in &out.log {
                log.record(r);
            }
            (out.best, out.last)
        }
        ModelKind::Itempop => {
            let ck = Checkpoint::new(&cfg, ds.fingerprint(), ModelState::Itempop(itempop(&ds)));
            (ck.clone(), ck)
        }
        ModelKind::Oracle => bail!("the oracle ranker has nothing to train"),
    };
    log.finish()?;
    best.save(&a.out.join(BEST_CHECKPOINT))?;
    last.save(&a.out.join(LAST_CHECKPOINT))?;

    let report = report_for(&best, &ds, Split::Validation)?;
    write_reports(&a.out, "validation", std::slice::from_ref(&report))?;
    println!("best epoch {} of {}", best.best_epoch, last.epoch);
    print!("{}", report);
    Ok(())
}

pub fn evaluate_cmd(a: &EvaluateArgs, m: &ArgMatches) -> Result<()> {
    let ds = load_data(&a.data)?;
    let ck = match &a.checkpoint {
        Some(p) => Some(Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let kind = match (a.model, &ck) {
        (Some(k), _) => k,
        (None, Some(ck)) => match ck.kind() {
            "attlist" => ModelKind::Attlist,
            "itempop" => ModelKind::Itempop,
            "mf" => ModelKind::Mf,
            _ => ModelKind::Bpr,
        },
        (None, None) => bail!("either --checkpoint or --model is required"),
    };
    let base = ck.as_ref().map_or_else(TrainConfig::default, |c| c.config.clone());
    let cfg = resolve_config(base, &a.config, m)?;
    let split: Split = a.split.into();

    let trained = !matches!(kind, ModelKind::Oracle) && !(kind == ModelKind::Itempop && ck.is_none());
    let scorer: Box<dyn Scorer + '_>;
    let popularity;
    let oracle;
    if trained {
        let Some(ck) = &ck else {
            bail!("--checkpoint is required for {}", kind.name());
        };
        if ck.kind() != kind.name() {
            bail!("checkpoint holds a {} model, not {}", ck.kind(), kind.name());
        }
        ck.check_config(&cfg, a.force)?;
        ck.check_dataset(&ds.fingerprint(), a.force)?;
        scorer = ck.scorer(&ds)?;
    } else if kind == ModelKind::Itempop {
        popularity = itempop(&ds);
        scorer = Box::new(popularity);
    } else {
        oracle = OracleScorer::new(&ds, split);
        scorer = Box::new(oracle);
    }
    let mut report = evaluate(scorer.as_ref(), &ds, split, cfg.candidates, display_name(kind.name()))?;
    report.config_hash = Some(cfg.hash());
    print!("{}", report);
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        write_text(&out.join(CONFIG_FILE), &config_toml(&cfg)?)?;
        write_reports(out, "metrics", std::slice::from_ref(&report))?;
    }
    Ok(())
}

/// Directory name for a variant: `-SelfAttention` → `without-selfattention`.
fn slug(v: AblationVariant) -> String {
    let name = v.name();
    let body: String = name.trim_start_matches(['-', '+']).to_lowercase();
    match name.chars().next() {
        Some('-') => format!("without-{body}"),
        Some('+') => format!("with-{body}"),
        _ => "full".into(),
    }
}

#[derive(Debug, Serialize)]
struct AblationRow {
    variant: String,
    parameters: usize,
    best_epoch: u64,
    precision_at_10: f64,
    precision_change: f64,
    recall_at_10: f64,
    recall_change: f64,
    report: MetricsReport,
}

fn change(value: f64, full: f64) -> f64 {
    if full == 0.0 {
        0.0
    } else {
        100.0 * (value - full) / full
    }
}

fn ablation_table(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.variant.len()).max().unwrap_or(0).max(7);
    let mut s = format!(
        "{:<width$} {:>8} {:>8} {:>8} {:>8} {:>10}\n",
        "Variant", "P@10", "Change", "R@10", "Change", "Params"
    );
    for r in rows {
        s += &format!(
            "{:<width$} {:>8.3} {:>7.1}% {:>8.3} {:>7.1}% {:>10}\n",
            r.variant, r.precision_at_10, r.precision_change, r.recall_at_10, r.recall_change, r.parameters
        );
    }
    s
}

pub fn ablate(a: &AblateArgs, m: &ArgMatches) -> Result<()> {
    let ds = load_data(&a.data)?;
    let cfg = resolve_config(TrainConfig::default(), &a.config, m)?;
    let mut variants = vec![AblationVariant::Full];
    let requested: &[AblationVariant] = if a.variants.is_empty() { &AblationVariant::ALL } else { &a.variants };
    for &v in requested {
        if !variants.contains(&v) {
            variants.push(v);
        }
    }
    fs::create_dir_all(&a.out)?;
    write_text(&a.out.join(CONFIG_FILE), &config_toml(&cfg)?)?;

    let mut rows: Vec<AblationRow> = Vec::new();
    for v in variants {
        let mut c = cfg.clone();
        c.ablation = v.apply(cfg.ablation);
        let dir = a.out.join(slug(v));
        fs::create_dir_all(&dir)?;
        write_text(&dir.join(CONFIG_FILE), &config_toml(&c)?)?;
        log::info!("training {}", v.name());
        let mut log = EpochLog::open(&dir.join(EPOCH_LOG), false)?;
        let opts = TrainOptions {
            on_epoch: Some(Box::new(|r: &EpochRecord| log.record(r))),
            ..TrainOptions::default()
        };
        let out = train_with(&ds, &c, opts)?;
        log.finish()?;
        out.best.save(&dir.join(BEST_CHECKPOINT))?;
        let mut report = report_for(&out.best, &ds, Split::Test)?;
        report.model = v.name().to_string();
        write_reports(&dir, "metrics", std::slice::from_ref(&report))?;
        let (p_full, r_full) = rows
            .first()
            .map_or((report.precision_at_10, report.recall_at_10), |f| (f.precision_at_10, f.recall_at_10));
        rows.push(AblationRow {
            variant: v.name().to_string(),
            parameters: out.best_params().parameter_count(),
            best_epoch: out.best.best_epoch,
            precision_at_10: report.precision_at_10,
            precision_change: change(report.precision_at_10, p_full),
            recall_at_10: report.recall_at_10,
            recall_change: change(report.recall_at_10, r_full),
            report,
        });
    }
    let table = ablation_table(&rows);
    write_text(&a.out.join("ablation.txt"), &table)?;
    write_json(&a.out.join("ablation.json"), &rows)?;
    print!("{table}");
    Ok(())
}

fn lookup(ids: &[String], what: &str, index: impl Fn(&str) -> Option<usize>) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| index(id).with_context(|| format!("unknown {what} `{id}`")))
        .collect()
}

pub fn export(a: &ExportArgs) -> Result<()> {
    let ds = load_data(&a.data)?;
    let ck = Checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let ModelState::Attlist(params) = &ck.model else {
        bail!("export-attention needs an attlist checkpoint, got {}", ck.kind());
    };
    ck.check_dataset(&ds.fingerprint(), false)?;
    let users = lookup(&a.users, "user", |id| ds.user_index(id))?;
    let lists = lookup(&a.lists, "list", |id| ds.list_index(id))?;
    let builder = ProfileBuilder::new(&ds, params.config.max_lists, params.config.max_items);
    let scorer = AttListScorer::new(params, &ds)?;

    let mut sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for &user in &users {
        let targets = if lists.is_empty() {
            let ranked = rank_for_user(&scorer, &ds, user, Split::Test, CandidatePolicy::ExcludeSeen)?;
            ranked.lists.first().copied().into_iter().collect()
        } else {
            lists.clone()
        };
        for list in targets {
            let ex = builder.example_excluding(user, list, 0.0, None);
            let trace = forward(params, &ex, false, 0.0, 0)?;
            export_attention(&trace, &ds, &mut sink)?;
        }
    }
    sink.flush()?;
    Ok(())
}
