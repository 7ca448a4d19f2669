use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use behman::eval::{
    balanced_subset, build_sessions, classify_sessions, confusion_csv, parse_labels_csv,
    predictions_csv, reference_set, similarity_confusion, trajectory, trajectory_csv,
    ClassificationReport, Embedder, FoldPlan, RawFeatures, SessionRecord,
};
use behman::features::io::{
    list_feature_files, read_features, source_id_of, write_atomic, write_features, FEATURE_EXT,
};
use behman::features::{extract_features, AudioBuffer, FrameSequence};
use behman::model::{train, Checkpoint, TupleSet, Variant};
use behman::sampling::{format_tuple_manifest, parse_tuple_manifest, sample_triplet_tuples};
use behman::synth::{self, render_audio, state_track};
use behman::{Error, Exec};
use clap::Args;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::manifest::{sha256_hex, Recorder};
use crate::svg::trajectory_svg;
use crate::{Cli, Command};

const MANIFEST_NAME: &str = "run_manifest.json";

/// A required input path that does not exist.
#[derive(Debug)]
struct MissingInput(PathBuf);

impl std::fmt::Display for MissingInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "missing input: {}", self.0.display())
    }
}

impl std::error::Error for MissingInput {}

/// Error kind for the JSON report and the process exit code.
pub fn classify_error(e: &anyhow::Error) -> (&'static str, u8) {
    for cause in e.chain() {
        if cause.downcast_ref::<MissingInput>().is_some() {
            return ("missing_input", 1);
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Config(_) => ("config", 2),
                Error::InvalidFeatureFile(_) => ("invalid_feature_file", 1),
                Error::InvalidCheckpoint(_) => ("invalid_checkpoint", 1),
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => ("missing_input", 1),
                _ => ("runtime", 1),
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return ("missing_input", 1);
            }
        }
    }
    ("runtime", 1)
}

fn require(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(MissingInput(path.to_path_buf()).into());
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(String::from)
        .collect()
}

struct RunContext {
    cfg: PipelineConfig,
    config_bytes: Vec<u8>,
    exec: Exec,
}

impl RunContext {
    /// Config file bytes plus the effective settings, so flag overrides show
    /// up in the digest.
    fn recorder(&self, command: &str, seed: Option<u64>) -> Recorder {
        let mut digest_input = self.config_bytes.clone();
        digest_input.extend_from_slice(
            serde_json::to_string(&self.cfg)
                .unwrap_or_default()
                .as_bytes(),
        );
        Recorder::new(command, &digest_input, seed, self.exec.jobs())
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(path) = &cli.global.config {
        require(path)?;
    }
    let (cfg, config_bytes) = PipelineConfig::load(cli.global.config.as_deref())?;
    let exec = Exec::with_jobs(cli.global.jobs.unwrap_or(0))?;
    let mut ctx = RunContext {
        cfg,
        config_bytes,
        exec,
    };
    match &cli.command {
        Command::Extract(a) => extract(&mut ctx, a),
        Command::Sample(a) => sample(&mut ctx, a),
        Command::Train(a) => train_cmd(&mut ctx, a),
        Command::Embed(a) => embed(&mut ctx, a),
        Command::EvalKnn(a) => eval_knn(&mut ctx, a),
        Command::Trajectory(a) => trajectory_cmd(&mut ctx, a),
        Command::Confusion(a) => confusion(&mut ctx, a),
        Command::Synth(a) => synth_cmd(&mut ctx, a),
    }
}

// ---------------------------------------------------------------- extract

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// WAV file, directory of WAV files, or a text file listing WAV paths.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Analysis window, seconds.
    #[arg(long)]
    pub window: Option<f64>,
    /// Analysis shift, seconds.
    #[arg(long)]
    pub shift: Option<f64>,
}

fn wav_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    require(input)?;
    let is_wav = |p: &Path| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if input.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| is_wav(p))
            .collect();
        files.sort();
        return Ok(files);
    }
    if is_wav(input) {
        return Ok(vec![input.to_path_buf()]);
    }
    let base = input.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(input)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = base.join(l);
            require(&p)?;
            Ok(p)
        })
        .collect()
}

fn extract(ctx: &mut RunContext, a: &ExtractArgs) -> Result<()> {
    if let Some(w) = a.window {
        ctx.cfg.features.window_s = w;
    }
    if let Some(s) = a.shift {
        ctx.cfg.features.shift_s = s;
    }
    ctx.cfg.validate()?;
    let inputs = wav_inputs(&a.input)?;
    if inputs.is_empty() {
        bail!(MissingInput(a.input.clone()));
    }
    ensure_dir(&a.out)?;
    let mut rec = ctx.recorder("extract", None);
    rec.inputs(&inputs)?;
    let f = &ctx.cfg.features;
    let results = ctx.exec.map(&inputs, |path| -> Result<Option<FrameSequence>> {
        let audio = AudioBuffer::read_wav(path)?;
        match extract_features(&audio, &f.lld, f.window_s, f.shift_s, &source_id_of(path), &Exec::sequential()) {
            Ok(seq) => Ok(Some(seq)),
            Err(e @ Error::SessionTooShort { .. }) => {
                log::warn!("skipping {}: {e}", path.display());
                Ok(None)
            }
            Err(e) => Err(anyhow!(e).context(format!("extracting {}", path.display()))),
        }
    });
    for (path, r) in inputs.iter().zip(results) {
        match r? {
            Some(seq) => {
                let out = a.out.join(format!("{}.{FEATURE_EXT}", seq.source_id));
                write_features(&out, &seq)?;
                rec.output(&out);
            }
            None => rec.note(format!("skipped (shorter than one window): {}", path.display())),
        }
    }
    rec.finish(&a.out.join(MANIFEST_NAME))
}

// ---------------------------------------------------------------- sample

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Directory of feature files.
    #[arg(long)]
    pub features: PathBuf,
    /// Tuple manifest to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum context shift, seconds.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub n_context: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn read_corpus(dir: &Path, rec: &mut Recorder) -> Result<Vec<FrameSequence>> {
    require(dir)?;
    let paths = list_feature_files(dir)?;
    if paths.is_empty() {
        bail!(MissingInput(dir.join(format!("*.{FEATURE_EXT}"))));
    }
    rec.inputs(&paths)?;
    paths
        .iter()
        .map(|p| read_features(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{name}.manifest.json"))
}

fn ensure_parent(out: &Path) -> Result<()> {
    match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn sample(ctx: &mut RunContext, a: &SampleArgs) -> Result<()> {
    let s = &mut ctx.cfg.sampling;
    if let Some(k) = a.k {
        s.k_seconds = k;
    }
    if let Some(n) = a.n_context {
        s.n_context = n;
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    s.validate()?;
    let mut rec = ctx.recorder("sample", Some(ctx.cfg.sampling.seed));
    let corpus = read_corpus(&a.features, &mut rec)?;
    let sample = sample_triplet_tuples(&corpus, &ctx.cfg.sampling, &ctx.exec)?;
    for s in &sample.skipped {
        rec.note(format!("skipped {}: {}", s.source_id, s.reason));
    }
    ensure_parent(&a.out)?;
    write_atomic(&a.out, format_tuple_manifest(&sample.tuples).as_bytes())?;
    rec.output(&a.out);
    log::info!("{} tuples from {} files", sample.tuples.len(), corpus.len());
    rec.finish(&sibling_manifest(&a.out))
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Tuple manifest from `sample`.
    #[arg(long)]
    pub tuples: PathBuf,
    /// Directory of feature files the tuples refer to.
    #[arg(long)]
    pub features: PathBuf,
    /// dcn, triplet, te-autoencoder or te-dcn.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Comma-separated source ids used only for early stopping.
    #[arg(long)]
    pub val_files: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn train_cmd(ctx: &mut RunContext, a: &TrainArgs) -> Result<()> {
    let t = &mut ctx.cfg.train;
    if let Some(v) = a.variant {
        t.variant = v;
    }
    if let Some(v) = &a.val_files {
        t.val_files = split_list(v);
    }
    let p = &mut t.params;
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(if let Some(v) = a.$flag { p.$field = v; })*};
    }
    set!(seed => seed, epochs => max_epochs, batch_size => batch_size, patience => patience,
         lr => lr, margin => margin, l2 => l2_weight);
    p.validate()?;
    if t.val_files.is_empty() {
        return Err(Error::Config("no validation files: pass --val-files or set train.val_files".into()).into());
    }
    let mut rec = ctx.recorder("train", Some(ctx.cfg.train.params.seed));
    require(&a.tuples)?;
    rec.input(&a.tuples)?;
    let tuples = parse_tuple_manifest(&std::fs::read_to_string(&a.tuples)?)?;
    let corpus = read_corpus(&a.features, &mut rec)?;
    let (train_set, val_set) = TupleSet::split(&corpus, &tuples, &ctx.cfg.train.val_files)?;
    log::info!("{} training / {} validation tuples", train_set.len(), val_set.len());
    let ck = train(&train_set, &val_set, &ctx.cfg.train.params, ctx.cfg.train.variant, &ctx.exec)?;
    ensure_parent(&a.out)?;
    ck.save(&a.out)?;
    rec.output(&a.out);
    rec.note(format!(
        "best epoch {} validation loss {} (initial {})",
        ck.epoch,
        ck.best_val_loss(),
        ck.initial_val_loss
    ));
    rec.finish(&sibling_manifest(&a.out))
}

// ---------------------------------------------------------------- embed

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Directory for the embedding files.
    #[arg(long)]
    pub out: PathBuf,
}

fn load_checkpoint(path: &Path, rec: &mut Recorder) -> Result<Checkpoint> {
    require(path)?;
    rec.input(path)?;
    Ok(Checkpoint::load(path)?)
}

fn embed(ctx: &mut RunContext, a: &EmbedArgs) -> Result<()> {
    let mut rec = ctx.recorder("embed", None);
    let ck = load_checkpoint(&a.checkpoint, &mut rec)?;
    let corpus = read_corpus(&a.features, &mut rec)?;
    ensure_dir(&a.out)?;
    for seq in &corpus {
        let e = Embedder::embed(&ck, seq, &ctx.exec)?;
        let out = a.out.join(format!("{}.{FEATURE_EXT}", seq.source_id));
        write_features(&out, &e)?;
        rec.output(&out);
    }
    rec.finish(&a.out.join(MANIFEST_NAME))
}

// ---------------------------------------------------------------- eval-knn

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of feature (or embedding) files.
    #[arg(long)]
    pub features: PathBuf,
    /// CSV `session_id,group_id,code,label`.
    #[arg(long)]
    pub labels: PathBuf,
    /// Embed with this checkpoint first; otherwise frames are used as they are.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Behavior code to evaluate (repeatable); default: every code.
    #[arg(long = "code")]
    pub codes: Vec<String>,
    /// Evaluate on a class-balanced subset per code.
    #[arg(long)]
    pub balance: bool,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

struct Labeled {
    sessions: Vec<SessionRecord>,
    codes: Vec<String>,
    embedder: Box<dyn Embedder>,
    embedder_name: String,
}

fn load_labeled(
    ctx: &RunContext,
    features: &Path,
    labels: &Path,
    checkpoint: Option<&Path>,
    codes: &[String],
    rec: &mut Recorder,
) -> Result<Labeled> {
    require(labels)?;
    rec.input(labels)?;
    let rows = parse_labels_csv(&std::fs::read_to_string(labels)?)?;
    let corpus = read_corpus(features, rec)?;
    let sessions = build_sessions(corpus, &rows)?;
    let known: BTreeSet<String> = rows.iter().map(|r| r.code.clone()).collect();
    let codes: Vec<String> = if codes.is_empty() {
        if ctx.cfg.eval.codes.is_empty() {
            known.iter().cloned().collect()
        } else {
            ctx.cfg.eval.codes.clone()
        }
    } else {
        codes.to_vec()
    };
    if let Some(c) = codes.iter().find(|c| !known.contains(*c)) {
        return Err(Error::Config(format!("code {c:?} not present in {}", labels.display())).into());
    }
    let (embedder, embedder_name): (Box<dyn Embedder>, String) = match checkpoint {
        Some(p) => {
            let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
            (Box::new(load_checkpoint(p, rec)?), format!("checkpoint:{name}"))
        }
        None => (Box::new(RawFeatures), "raw".into()),
    };
    Ok(Labeled {
        sessions,
        codes,
        embedder,
        embedder_name,
    })
}

#[derive(Serialize)]
struct CodeAccuracy {
    code: String,
    n_sessions: usize,
    accuracy: f64,
}

#[derive(Serialize)]
struct AccuracyReport {
    embedder: String,
    balanced: bool,
    mean_accuracy: f64,
    codes: Vec<CodeAccuracy>,
}

fn eval_knn(ctx: &mut RunContext, a: &EvalArgs) -> Result<()> {
    let balance = a.balance || ctx.cfg.eval.balance;
    let per_class = a.per_class.or(ctx.cfg.eval.per_class);
    let seed = a.seed.or(ctx.cfg.seed).unwrap_or(0);
    let mut rec = ctx.recorder("eval-knn", Some(seed));
    let data = load_labeled(ctx, &a.features, &a.labels, a.checkpoint.as_deref(), &a.codes, &mut rec)?;
    let mut reports: Vec<ClassificationReport> = Vec::new();
    for code in &data.codes {
        let sessions: Vec<SessionRecord> = data
            .sessions
            .iter()
            .filter(|s| s.labels.contains_key(code))
            .cloned()
            .collect();
        let sessions = if balance {
            balanced_subset(&sessions, code, per_class, seed)?
        } else {
            sessions
        };
        let plan = FoldPlan::leave_one_group_out(&sessions);
        let report = classify_sessions(&sessions, code, data.embedder.as_ref(), &plan, &ctx.exec)?;
        log::info!("{code}: accuracy {:.3} over {} sessions", report.accuracy, report.n_sessions);
        reports.push(report);
    }
    ensure_dir(&a.out)?;
    let mut csv = String::new();
    for (i, r) in reports.iter().enumerate() {
        let part = predictions_csv(r);
        csv.push_str(if i == 0 { &part } else { part.split_once('\n').map_or("", |x| x.1) });
    }
    let pred_path = a.out.join("predictions.csv");
    write_atomic(&pred_path, csv.as_bytes())?;
    let summary = AccuracyReport {
        embedder: data.embedder_name,
        balanced: balance,
        mean_accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / reports.len().max(1) as f64,
        codes: reports
            .iter()
            .map(|r| CodeAccuracy {
                code: r.code.clone(),
                n_sessions: r.n_sessions,
                accuracy: r.accuracy,
            })
            .collect(),
    };
    let acc_path = a.out.join("accuracy.json");
    write_atomic(&acc_path, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    rec.output(&pred_path);
    rec.output(&acc_path);
    println!("{}", serde_json::to_string(&summary)?);
    rec.finish(&a.out.join(MANIFEST_NAME))
}

// ---------------------------------------------------------------- trajectory

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Session to trace; references are all sessions outside its group.
    #[arg(long)]
    pub session: String,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long = "code")]
    pub codes: Vec<String>,
    /// Neighbors per frame.
    #[arg(long)]
    pub n: Option<usize>,
    /// Output directory for trajectory.csv and trajectory.svg.
    #[arg(long)]
    pub out: PathBuf,
}

fn embed_all(sessions: &[SessionRecord], embedder: &dyn Embedder, exec: &Exec) -> Result<Vec<SessionRecord>> {
    sessions
        .iter()
        .map(|s| {
            Ok(SessionRecord {
                frames: embedder.embed(&s.frames, exec)?,
                ..s.clone()
            })
        })
        .collect()
}

fn trajectory_cmd(ctx: &mut RunContext, a: &TrajectoryArgs) -> Result<()> {
    let n = a.n.unwrap_or(ctx.cfg.eval.n);
    let mut rec = ctx.recorder("trajectory", None);
    let data = load_labeled(ctx, &a.features, &a.labels, a.checkpoint.as_deref(), &a.codes, &mut rec)?;
    let sessions = embed_all(&data.sessions, data.embedder.as_ref(), &ctx.exec)?;
    let target = sessions
        .iter()
        .find(|s| s.session_id == a.session)
        .ok_or_else(|| Error::Config(format!("session {:?} not found among labeled sessions", a.session)))?;
    let mut series = Vec::new();
    for code in &data.codes {
        let others: Vec<String> = sessions
            .iter()
            .filter(|s| s.group_id != target.group_id && s.labels.contains_key(code))
            .map(|s| s.group_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pool: Vec<SessionRecord> = sessions
            .iter()
            .filter(|s| s.labels.contains_key(code))
            .cloned()
            .collect();
        let (refs, labels) = reference_set(&pool, &others, code)?;
        series.push(trajectory(&target.frames, refs.view(), &labels, n, code, &ctx.exec)?);
    }
    ensure_dir(&a.out)?;
    let csv_path = a.out.join("trajectory.csv");
    let svg_path = a.out.join("trajectory.svg");
    write_atomic(&csv_path, trajectory_csv(&series).as_bytes())?;
    write_atomic(&svg_path, trajectory_svg(&a.session, &series).as_bytes())?;
    rec.output(&csv_path);
    rec.output(&svg_path);
    rec.finish(&a.out.join(MANIFEST_NAME))
}

// ---------------------------------------------------------------- confusion

#[derive(Args, Debug)]
pub struct ConfusionArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Comma-separated source ids to include; default: every file.
    #[arg(long)]
    pub files: Option<String>,
    /// CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn confusion(ctx: &mut RunContext, a: &ConfusionArgs) -> Result<()> {
    let mut rec = ctx.recorder("confusion", None);
    let mut corpus = read_corpus(&a.features, &mut rec)?;
    if let Some(list) = &a.files {
        let wanted = split_list(list);
        if let Some(w) = wanted.iter().find(|w| !corpus.iter().any(|f| &f.source_id == *w)) {
            return Err(MissingInput(a.features.join(format!("{w}.{FEATURE_EXT}"))).into());
        }
        corpus.retain(|f| wanted.contains(&f.source_id));
        corpus.sort_by_key(|f| wanted.iter().position(|w| *w == f.source_id));
    }
    let corpus = match &a.checkpoint {
        Some(p) => {
            let ck = load_checkpoint(p, &mut rec)?;
            corpus
                .iter()
                .map(|f| Embedder::embed(&ck, f, &ctx.exec))
                .collect::<behman::Result<Vec<_>>>()?
        }
        None => corpus,
    };
    let m = similarity_confusion(&corpus, &ctx.exec)?;
    ensure_parent(&a.out)?;
    write_atomic(&a.out, confusion_csv(&m).as_bytes())?;
    rec.output(&a.out);
    rec.finish(&sibling_manifest(&a.out))
}

// ---------------------------------------------------------------- synth

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory; receives `eval/` (labeled) and `train/` (unlabeled).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also render the labeled corpus as WAV audio under `audio/`.
    #[arg(long)]
    pub audio: bool,
}

fn synth_cmd(ctx: &mut RunContext, a: &SynthArgs) -> Result<()> {
    if let Some(seed) = a.seed {
        ctx.cfg.apply_seed(seed);
    }
    let bench = ctx.cfg.synth.clone();
    bench.validate()?;
    let mut rec = ctx.recorder("synth", Some(bench.corpus.seed));
    let (eval, unlabeled) = bench.generate(&ctx.exec)?;
    let eval_dir = a.out.join("eval");
    eval.write(&eval_dir)?;
    rec.output(&eval_dir);
    rec.note(format!("stationarity at 6 s: {:.4}", eval.stationarity(6)));
    if bench.train_n_files > 0 {
        let train_dir = a.out.join("train");
        ensure_dir(&train_dir)?;
        for f in &unlabeled.files {
            write_features(&train_dir.join(format!("{}.{FEATURE_EXT}", f.features.source_id)), &f.features)?;
        }
        write_atomic(&train_dir.join("states.csv"), unlabeled.states_csv().as_bytes())?;
        rec.output(&train_dir);
        rec.note(format!("validation files: {}", bench.val_sources().join(",")));
    }
    if a.audio {
        let audio_dir = a.out.join("audio");
        ensure_dir(&audio_dir)?;
        let ids: Vec<usize> = (0..bench.corpus.n_files).collect();
        let rendered = ctx.exec.map(&ids, |&i| -> behman::Result<(String, AudioBuffer)> {
            let track = state_track(&bench.corpus, i)?;
            let global = bench.corpus.file_offset + i;
            let id = synth::file_id(global);
            // speaker-like pitch offset derived from the file id
            let offset = (u64::from_str_radix(&sha256_hex(id.as_bytes())[..4], 16).unwrap_or(0) % 40) as f64 - 20.0;
            let audio = render_audio(&track, offset, 16_000, bench.corpus.seed ^ global as u64)?;
            Ok((id, audio))
        });
        for r in rendered {
            let (id, audio) = r?;
            let path = audio_dir.join(format!("{id}.wav"));
            audio.write_wav(&path)?;
            rec.output(&path);
        }
        write_atomic(
            &audio_dir.join("labels.csv"),
            std::fs::read(eval_dir.join("labels.csv"))?.as_slice(),
        )?;
    }
    ensure_dir(&a.out)?;
    rec.finish(&a.out.join(MANIFEST_NAME))
}
