use std::path::Path;

use patchecho::checkpoint::{config_digest, Checkpoint, Metadata, ModelKind};
use patchecho::data::{read_record, synth_generate, CsvSchema, Provenance, SplitSpec};
use patchecho::distill::{
    distill_student, evaluate, evaluate_classifier, train_teacher, write_epoch_log, EvalReport, TrainOutcome,
};
use patchecho::energy::{
    describe_echo, describe_mixer_student, describe_teacher, footprint_mb, profile as profile_desc, report, EesReport,
    ModelDesc, ModelMetrics,
};
use patchecho::{ChannelStats, LabeledWindow, MixerTeacher, PatchEchoClassifier, PatchMixerClassifier, Student};

use crate::config::{DistillRun, EesRun, EvalRun, IngestRun, ModelSpec, ProfileRun, Split, SynthRun, TeacherRun};
use crate::dataset::{self, Dataset, Manifest};
use crate::{write_json, CliError};

pub const CONFIG_FILE: &str = "config.json";
pub const EPOCH_LOG: &str = "epochs.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TEACHER_FILE: &str = "teacher.ckpt";
pub const STUDENT_FILE: &str = "student.ckpt";

fn mkdir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Write the resolved config next to the outputs and return its digest.
pub fn record_config<T: serde::Serialize>(dir: &Path, cfg: &T) -> Result<String, CliError> {
    mkdir(dir)?;
    let path = dir.join(CONFIG_FILE);
    write_json(&path, cfg)?;
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(config_digest(&bytes))
}

pub fn synth(cfg: &SynthRun) -> Result<Manifest, CliError> {
    let gen = |n: usize, offset: u64| synth_generate(cfg.classes, n, cfg.channels, cfg.window, cfg.seed.wrapping_add(offset));
    let train = gen(cfg.train_per_class, 0)?;
    let val = gen(cfg.val_per_class, 1)?;
    let test = gen(cfg.test_per_class, 2)?;
    let names: Vec<String> = (0..cfg.channels).map(|c| format!("ch{c}")).collect();
    dataset::write(&cfg.out_dir, &names, cfg.classes, [&train, &val, &test], Provenance::BySource)
}

pub fn ingest(cfg: &IngestRun) -> Result<Manifest, CliError> {
    let stride = cfg.stride.unwrap_or(cfg.window);
    let schema = CsvSchema {
        channels: cfg.channels.clone(),
        label: cfg.label.clone(),
        window: cfg.window,
        stride,
    };
    let record = read_record(&cfg.input, &schema)?;
    let (windows, starts): (Vec<LabeledWindow>, Vec<usize>) = record.windows(cfg.window, stride)?.into_iter().unzip();
    let split = SplitSpec::by_time(&starts, cfg.window, record.len(), cfg.train_fraction, cfg.val_fraction)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let seen = windows.iter().map(|w| w.label + 1).max().unwrap_or(0);
    let classes = cfg.classes.unwrap_or(seen);
    if classes < seen {
        return Err(CliError::Config(format!("classes = {classes} but labels reach {}", seen - 1)));
    }
    dataset::write(
        &cfg.out_dir,
        &cfg.channels,
        classes,
        [&windows[split.train.clone()], &windows[split.val.clone()], &windows[split.test.clone()]],
        Provenance::ByTime,
    )
}

struct Prepared {
    stats: ChannelStats,
    train: Vec<LabeledWindow>,
    val: Vec<LabeledWindow>,
    test: Vec<LabeledWindow>,
}

fn prepare(data: &Dataset, stats: Option<ChannelStats>) -> Prepared {
    let stats = stats.unwrap_or_else(|| ChannelStats::fit(data.split(Split::Train)));
    Prepared {
        train: stats.apply_all(data.split(Split::Train)),
        val: stats.apply_all(data.split(Split::Val)),
        test: stats.apply_all(data.split(Split::Test)),
        stats,
    }
}

fn metadata(outcome: &TrainOutcome, digest: String, stats: ChannelStats) -> Metadata {
    Metadata {
        epoch: Some(outcome.best_epoch),
        val_accuracy: Some(outcome.best_val_accuracy),
        config_digest: digest,
        normalization: Some(stats),
    }
}

fn finish(dir: &Path, outcome: &TrainOutcome, ck: &Checkpoint, file: &str, report: &EvalReport) -> Result<(), CliError> {
    mkdir(dir)?;
    write_epoch_log(&dir.join(EPOCH_LOG), &outcome.log)?;
    ck.save(&dir.join(file))?;
    write_json(&dir.join(REPORT_FILE), report)
}

pub fn train_teacher_cmd(cfg: &TeacherRun, config_digest: String) -> Result<EvalReport, CliError> {
    let data = dataset::load(&cfg.data)?;
    let m = &data.manifest;
    let mcfg = match cfg.model {
        ModelSpec::Teacher { .. } => cfg.model.mixer_config(m.channels.len(), m.window, m.classes, cfg.seed),
        _ => None,
    }
    .ok_or_else(|| CliError::Config("model.kind must be 'teacher'".into()))?;
    let p = prepare(&data, None);
    let mut teacher = MixerTeacher::new(mcfg)?;
    let outcome = train_teacher(&mut teacher, &p.train, &p.val, &cfg.train)?;
    let report = evaluate_classifier(&teacher, &p.test)?;
    let ck = Checkpoint::from_teacher(&teacher, &metadata(&outcome, config_digest, p.stats))?;
    finish(&cfg.out_dir, &outcome, &ck, TEACHER_FILE, &report)?;
    Ok(report)
}

fn distill_one<S: Student>(
    mut student: S,
    teacher: &MixerTeacher,
    p: &Prepared,
    cfg: &DistillRun,
    digest: String,
    to_ck: impl Fn(&S, &Metadata) -> Result<Checkpoint, patchecho::checkpoint::CheckpointError>,
) -> Result<EvalReport, CliError> {
    let outcome = distill_student(&mut student, teacher, &p.train, &p.val, &cfg.train)?;
    let report = evaluate(&student, &p.test)?;
    let ck = to_ck(&student, &metadata(&outcome, digest, p.stats.clone()))?;
    finish(&cfg.out_dir, &outcome, &ck, STUDENT_FILE, &report)?;
    Ok(report)
}

pub fn distill_cmd(cfg: &DistillRun, config_digest: String) -> Result<EvalReport, CliError> {
    let data = dataset::load(&cfg.data)?;
    let teacher_ck = Checkpoint::load(&cfg.teacher)?;
    let teacher = teacher_ck.to_teacher()?;
    // the teacher was trained on inputs standardized with these statistics
    let p = prepare(&data, teacher_ck.metadata()?.normalization);
    let m = &data.manifest;
    let (c, w, k) = (m.channels.len(), m.window, m.classes);
    match cfg.student {
        ModelSpec::Echo { .. } => {
            let ecfg = cfg.student.echo_config(c, w, k, cfg.seed).expect("echo spec");
            distill_one(PatchEchoClassifier::new(ecfg)?, &teacher, &p, cfg, config_digest, Checkpoint::from_echo)
        }
        ModelSpec::Mixer { .. } => {
            let mcfg = cfg.student.mixer_config(c, w, k, cfg.seed).expect("mixer spec");
            distill_one(PatchMixerClassifier::new(mcfg)?, &teacher, &p, cfg, config_digest, Checkpoint::from_mixer)
        }
        ModelSpec::Teacher { .. } => Err(CliError::Config("student.kind must be 'echo' or 'mixer'".into())),
    }
}

pub fn eval_cmd(cfg: &EvalRun) -> Result<EvalReport, CliError> {
    let data = dataset::load(&cfg.data)?;
    let ck = Checkpoint::load(&cfg.checkpoint)?;
    let stats = ck
        .metadata()?
        .normalization
        .unwrap_or_else(|| ChannelStats::identity(data.manifest.channels.len()));
    let windows = stats.apply_all(data.split(cfg.split));
    let report = match ck.kind {
        ModelKind::PatchEcho => evaluate(&ck.to_echo()?, &windows)?,
        ModelKind::PatchMixer => evaluate(&ck.to_mixer()?, &windows)?,
        ModelKind::MixerTeacher => evaluate_classifier(&ck.to_teacher()?, &windows)?,
    };
    if let Some(dir) = &cfg.out_dir {
        mkdir(dir)?;
        write_json(&dir.join(REPORT_FILE), &report)?;
    }
    Ok(report)
}

fn describe_checkpoint(ck: &Checkpoint) -> Result<(ModelDesc, [usize; 2]), CliError> {
    Ok(match ck.kind {
        ModelKind::PatchEcho => {
            let c: patchecho::EchoConfig = ck.config()?;
            (describe_echo(&c), [c.channels, c.window])
        }
        ModelKind::PatchMixer => {
            let c: patchecho::MixerConfig = ck.config()?;
            (describe_mixer_student(&c), [c.channels, c.window])
        }
        ModelKind::MixerTeacher => {
            let c: patchecho::MixerConfig = ck.config()?;
            (describe_teacher(&c), [c.channels, c.window])
        }
    })
}

pub fn describe_spec(spec: &ModelSpec, channels: usize, length: usize, classes: usize) -> ModelDesc {
    match spec {
        ModelSpec::Echo { .. } => describe_echo(&spec.echo_config(channels, length, classes, 0).expect("echo")),
        ModelSpec::Mixer { .. } => describe_mixer_student(&spec.mixer_config(channels, length, classes, 0).expect("mixer")),
        ModelSpec::Teacher { .. } => describe_teacher(&spec.mixer_config(channels, length, classes, 0).expect("teacher")),
    }
}

pub fn profile_cmd(cfg: &ProfileRun) -> Result<ModelMetrics, CliError> {
    let shape = [cfg.channels, cfg.length];
    let mut metrics = match (&cfg.checkpoint, &cfg.model) {
        (Some(path), None) => {
            let ck = Checkpoint::load(path)?;
            let (desc, _) = describe_checkpoint(&ck)?;
            let bytes = std::fs::metadata(path).map_err(|e| CliError::io(path, e))?.len() as usize;
            let acc = cfg.accuracy.or(ck.metadata()?.val_accuracy).unwrap_or(0.0);
            let mut m = profile_desc(&desc, cfg.batch, shape, cfg.mac_cost, acc)?;
            m.footprint_mb = footprint_mb(bytes);
            m
        }
        (None, Some(spec)) => {
            let desc = describe_spec(spec, cfg.channels, cfg.length, cfg.classes);
            profile_desc(&desc, cfg.batch, shape, cfg.mac_cost, cfg.accuracy.unwrap_or(0.0))?
        }
        _ => return Err(CliError::Config("exactly one of 'checkpoint' and 'model' is required".into())),
    };
    if let Some(name) = &cfg.name {
        metrics.name = name.clone();
    }
    if let Some(out) = &cfg.out {
        write_json(out, &metrics)?;
    }
    Ok(metrics)
}

pub fn load_metrics(path: &Path) -> Result<Vec<ModelMetrics>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let metrics: Vec<ModelMetrics> = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| CliError::Config(format!("{}: {}: {}", path.display(), e.path(), e.inner())))?;
    for m in &metrics {
        m.validate()?;
    }
    Ok(metrics)
}

pub fn ees_report_cmd(cfg: &EesRun) -> Result<Vec<EesReport>, CliError> {
    let metrics = load_metrics(&cfg.metrics)?;
    let reports = match cfg.weights {
        Some(w) => vec![report(&metrics, "custom", &w)?],
        None => cfg
            .presets
            .iter()
            .map(|p| report(&metrics, p.name(), &p.weights()))
            .collect::<Result<Vec<_>, _>>()?,
    };
    if let Some(dir) = &cfg.out_dir {
        mkdir(dir)?;
        let mut csv = String::new();
        let mut table = String::new();
        for (i, r) in reports.iter().enumerate() {
            let body = r.to_csv();
            csv.push_str(if i == 0 { &body } else { body.split_once('\n').map_or("", |(_, rest)| rest) });
            table.push_str(&r.to_table());
            table.push('\n');
        }
        let write = |name: &str, text: &str| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
        };
        write("ees_report.csv", &csv)?;
        write("ees_report.txt", &table)?;
    }
    Ok(reports)
}
