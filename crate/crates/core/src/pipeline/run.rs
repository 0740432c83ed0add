use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, InitMethod, PipelineConfig};
use super::profiles::profiles_from_session;
use crate::cluster::{
    assign_to_centroids, kmeans, spectral_cluster, xmeans, KMeansInit, XMeansConfig,
};
use crate::dec::{loss_csv, train_dec, Checkpoint, LossBreakdown};
use crate::error::{Error, Result};
use crate::io::{read_frames, read_json, write_json, write_text, Manifest};
use crate::prep::{aggregate_table, build_filter, fit_pca, smooth_with_scope, PcaWhitener};
use crate::rttm::{merge_short_silences, read_rttm_file, write_rttm};
use crate::scoring::{score, ScoreReport};
use crate::types::{
    stack_embeddings, ClusterModel, FrameMatrix, InitSource, SegmentEmbedding, SegmentTable,
    SpeakerProfiles,
};

/// In-memory inputs of one session.
#[derive(Debug, Clone)]
pub struct SessionInput {
    pub frames: FrameMatrix,
    /// Labeled oracle segmentation.
    pub reference: SegmentTable,
    pub num_speakers: usize,
}

/// Serializable summary of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub session_id: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub k_requested: usize,
    /// Number of clusters in the final model.
    pub k_found: usize,
    pub empty_clusters: usize,
    pub init_source: Option<InitSource>,
    pub warnings: Vec<String>,
    /// Scored on the collar-merged segments that were clustered.
    pub score: Option<ScoreReport>,
    /// Scored on the original segments, each taking the label of the
    /// clustered segment it overlaps most.
    pub unmerged_score: Option<ScoreReport>,
}

impl SessionResult {
    fn failed(session_id: String, k: usize, err: &Error) -> Self {
        Self {
            session_id,
            ok: false,
            error: Some(err.to_string()),
            k_requested: k,
            k_found: 0,
            empty_clusters: 0,
            init_source: None,
            warnings: Vec::new(),
            score: None,
            unmerged_score: None,
        }
    }
}

/// Full outcome of one session.
#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub result: SessionResult,
    /// Segments that were clustered.
    pub table: SegmentTable,
    pub labels: Vec<usize>,
    pub model: ClusterModel,
    /// Aggregated embeddings before any projection.
    pub embeddings: Vec<SegmentEmbedding>,
    pub loss_history: Option<Vec<LossBreakdown>>,
}

/// Duration-weighted totals over the successful sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub n_sessions: usize,
    pub n_failed: usize,
    pub total_speech: f64,
    pub correct: f64,
    pub recall_pct: f64,
    pub error_pct: f64,
    pub unmerged_recall_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub sessions: Vec<SessionResult>,
    pub aggregate: AggregateScore,
}

impl PipelineReport {
    pub fn from_sessions(config: PipelineConfig, sessions: Vec<SessionResult>) -> Self {
        let ok: Vec<&ScoreReport> = sessions.iter().filter_map(|s| s.score.as_ref()).collect();
        let um: Vec<&ScoreReport> = sessions.iter().filter_map(|s| s.unmerged_score.as_ref()).collect();
        let pool = |rs: &[&ScoreReport]| {
            let total: f64 = rs.iter().map(|r| r.total_speech).sum();
            let correct: f64 = rs.iter().map(|r| r.correct).sum();
            (total, correct, if total > 0.0 { 100.0 * correct / total } else { 0.0 })
        };
        let (total, correct, recall) = pool(&ok);
        let (_, _, unmerged) = pool(&um);
        let aggregate = AggregateScore {
            n_sessions: sessions.len(),
            n_failed: sessions.iter().filter(|s| !s.ok).count(),
            total_speech: total,
            correct,
            recall_pct: recall,
            error_pct: 100.0 - recall,
            unmerged_recall_pct: unmerged,
        };
        Self {
            config,
            sessions,
            aggregate,
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-session fixed-width summary.
    pub fn to_table(&self) -> String {
        let rows: Vec<crate::scoring::TableRow> = self
            .sessions
            .iter()
            .map(|s| crate::scoring::TableRow {
                label: s.session_id.clone(),
                values: vec![
                    Some(s.k_requested as f64),
                    s.ok.then_some(s.k_found as f64),
                    s.score.as_ref().map(|r| r.recall_pct),
                    s.score.as_ref().map(|r| r.error_pct),
                    s.unmerged_score.as_ref().map(|r| r.recall_pct),
                ],
            })
            .chain([crate::scoring::TableRow {
                label: "aggregate".into(),
                values: vec![
                    None,
                    None,
                    Some(self.aggregate.recall_pct),
                    Some(self.aggregate.error_pct),
                    Some(self.aggregate.unmerged_recall_pct),
                ],
            }])
            .collect();
        let cols: Vec<String> = ["k", "k found", "Recall", "Error", "Unmerged"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        crate::scoring::format_table(self.config.algorithm.name(), &cols, &rows)
    }
}

/// Labels of `fine` segments from the `coarse` segment each overlaps most.
fn transfer_labels(fine: &SegmentTable, coarse: &SegmentTable, labels: &[usize]) -> (SegmentTable, Vec<usize>) {
    let mut keep = Vec::with_capacity(fine.len());
    let mut out = Vec::new();
    let cs = coarse.segments();
    let mut j0 = 0;
    for seg in fine.segments() {
        while j0 < cs.len() && cs[j0].end <= seg.start {
            j0 += 1;
        }
        let mut best: Option<(f64, usize)> = None;
        for (j, c) in cs.iter().enumerate().skip(j0) {
            if c.start >= seg.end {
                break;
            }
            let ov = c.end.min(seg.end) - c.start.max(seg.start);
            if ov > 0.0 && best.is_none_or(|(b, _)| ov > b) {
                best = Some((ov, j));
            }
        }
        keep.push(best.is_some());
        if let Some((_, j)) = best {
            out.push(labels[j]);
        }
    }
    let mut it = keep.iter();
    (fine.filtered(|_| *it.next().expect("flag per segment")), out)
}

/// Scores a hypothesis RTTM against labeled reference segments after the
/// collar merge and duration filter of `cfg`. Each reference segment takes
/// the label of the hypothesis segment it overlaps most.
pub fn score_rttm(reference: &SegmentTable, hypothesis: &SegmentTable, cfg: &PipelineConfig) -> Result<ScoreReport> {
    let merged = if cfg.collar > 0.0 {
        merge_short_silences(reference, cfg.collar)?
    } else {
        reference.clone()
    };
    let table = merged.filtered(|s| s.duration() > cfg.min_duration);
    let names = hypothesis.speakers();
    let labels = hypothesis
        .segments()
        .iter()
        .map(|s| {
            let name = s.ref_speaker.as_ref().ok_or_else(|| Error::InvalidArgument(format!(
                "hypothesis segment at {} s has no label",
                s.start
            )))?;
            Ok(names.iter().position(|n| n == name).expect("listed"))
        })
        .collect::<Result<Vec<_>>>()?;
    let (covered, hyp) = transfer_labels(&table, hypothesis, &labels);
    if covered.len() < table.len() {
        return Err(Error::InvalidArgument(format!(
            "hypothesis leaves {} of {} reference segments uncovered",
            table.len() - covered.len(),
            table.len()
        )));
    }
    score(&covered, &hyp)
}

fn rows(x: ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

fn fit_projection(
    embeddings: &[SegmentEmbedding],
    x: ArrayView2<'_, f64>,
    cfg: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<Option<PcaWhitener>> {
    if cfg.pca_dim == 0 {
        return Ok(None);
    }
    let long: Vec<usize> = (0..embeddings.len())
        .filter(|&i| embeddings[i].duration >= cfg.pca_min_duration)
        .collect();
    let train = if long.len() >= 2 {
        rows(x, &long)
    } else {
        warnings.push(format!(
            "only {} segments last at least {} s; pca fitted on all segments",
            long.len(),
            cfg.pca_min_duration
        ));
        x.to_owned()
    };
    let dim = cfg.pca_dim.min(x.ncols()).min(train.nrows());
    if dim < cfg.pca_dim {
        warnings.push(format!("pca dimension lowered from {} to {dim}", cfg.pca_dim));
    }
    Ok(Some(fit_pca(train.view(), dim)?))
}

/// Collar merge, duration filter, smoothing and aggregation: the segments
/// that get clustered and one embedding for each.
pub fn prepare_session(
    input: &SessionInput,
    cfg: &PipelineConfig,
) -> Result<(SegmentTable, Vec<SegmentEmbedding>)> {
    let merged = if cfg.collar > 0.0 {
        merge_short_silences(&input.reference, cfg.collar)?
    } else {
        input.reference.clone()
    };
    let table = merged.filtered(|s| s.duration() > cfg.min_duration);
    if table.is_empty() {
        return Err(Error::NotEnoughSamples {
            msg: format!("no segments longer than {} s", cfg.min_duration),
        });
    }
    let frames = match cfg.filter_order {
        Some(order) => smooth_with_scope(&input.frames, &table, &build_filter(order), cfg.smoothing_scope),
        None => input.frames.clone(),
    };
    let embeddings = aggregate_table(&frames, &table, cfg.aggregation)?;
    Ok((table, embeddings))
}

/// Runs one session through smoothing, aggregation, projection, clustering
/// and scoring.
pub fn run_session(
    input: &SessionInput,
    cfg: &PipelineConfig,
    profiles: Option<&SpeakerProfiles>,
) -> Result<SessionOutcome> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let (table, embeddings) = prepare_session(input, cfg)?;
    let k = cfg.k.unwrap_or(input.num_speakers);
    if table.len() < k.max(1) {
        return Err(Error::NotEnoughSamples {
            msg: format!("{} segments for k = {k}", table.len()),
        });
    }
    let x = stack_embeddings(&embeddings)?;
    let n = x.nrows();
    let seed = cfg.seed;
    let mut loss_history = None;

    let (model, labels) = match cfg.algorithm {
        Algorithm::Kmeans => {
            let proj = fit_projection(&embeddings, x.view(), cfg, &mut warnings)?;
            let feats = match &proj {
                Some(p) => p.transform(x.view())?,
                None => x.clone(),
            };
            let mut fit_idx: Vec<usize> = (0..n).filter(|&i| embeddings[i].duration > cfg.fit_min_duration).collect();
            if fit_idx.len() < k {
                warnings.push(format!(
                    "only {} segments longer than {} s; centroids fitted on all segments",
                    fit_idx.len(),
                    cfg.fit_min_duration
                ));
                fit_idx = (0..n).collect();
            }
            let mut init = match cfg.init {
                InitMethod::Random => KMeansInit::Random,
                InitMethod::Plusplus | InitMethod::Profiles => KMeansInit::PlusPlus,
            };
            if cfg.init == InitMethod::Profiles {
                match profiles {
                    Some(p) if p.len() == k => {
                        let v = match &proj {
                            Some(w) => w.transform(p.vectors())?,
                            None => p.vectors().to_owned(),
                        };
                        init = KMeansInit::Profiles(SpeakerProfiles::new(p.labels().to_vec(), v)?);
                    }
                    Some(p) => warnings.push(format!(
                        "{} profiles for k = {k}; falling back to k-means++",
                        p.len()
                    )),
                    None => warnings.push("no profiles available; falling back to k-means++".into()),
                }
            }
            let fit_x = rows(feats.view(), &fit_idx);
            let fit = kmeans(fit_x.view(), &cfg.kmeans.config(k, seed).with_init(init))?;
            let mut model = fit.model;
            let labels = assign_to_centroids(&model, feats.view())?;
            model.assignments = labels.clone();
            (model, labels)
        }
        Algorithm::Xmeans => {
            let proj = fit_projection(&embeddings, x.view(), cfg, &mut warnings)?;
            let feats = match proj {
                Some(p) if cfg.xmeans_whiten => p.transform(x.view())?,
                Some(p) => p.projection_only().transform(x.view())?,
                None => x.clone(),
            };
            let xcfg = XMeansConfig {
                k_min: cfg.k_min.min(n),
                k_max: cfg.k_max.min(n),
                criterion: cfg.split_criterion,
                kmeans: cfg.kmeans,
            };
            let fit = xmeans(feats.view(), &xcfg, seed)?;
            let labels = fit.model.assignments.clone();
            (fit.model, labels)
        }
        Algorithm::Spectral if k < 2 => {
            let model = ClusterModel::new(
                x.mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0)),
                vec![0; n],
                InitSource::PlusplusInit,
                seed,
            )?;
            (model, vec![0; n])
        }
        Algorithm::Spectral => {
            let model = spectral_cluster(x.view(), k, seed, cfg.kmeans)?;
            let labels = model.assignments.clone();
            (model, labels)
        }
        Algorithm::DecOriginal | Algorithm::DecImproved => {
            let xs = standardize_global(x.view());
            let pretrained = match &cfg.pretrained_path {
                Some(path) => {
                    let ck = Checkpoint::load(path)?;
                    if ck.params.input_dim() != xs.ncols() {
                        return Err(Error::DimensionMismatch {
                            expected: xs.ncols(),
                            got: ck.params.input_dim(),
                        });
                    }
                    Some(ck.params)
                }
                None => None,
            };
            let fit = train_dec(xs.view(), k, &cfg.dec_config(), pretrained.as_ref(), seed)?;
            if fit.empty_clusters > 0 {
                warnings.push(format!("{} empty clusters after training", fit.empty_clusters));
            }
            loss_history = Some(fit.history);
            let labels = fit.model.assignments.clone();
            (fit.model, labels)
        }
    };

    let scored = score(&table, &labels)?;
    let fine = input.reference.filtered(|s| s.duration() > cfg.min_duration);
    let (fine, fine_labels) = transfer_labels(&fine, &table, &labels);
    let unmerged = if fine.is_empty() { None } else { Some(score(&fine, &fine_labels)?) };
    let result = SessionResult {
        session_id: input.frames.session_id().to_string(),
        ok: true,
        error: None,
        k_requested: k,
        k_found: model.k,
        empty_clusters: model.empty_clusters(),
        init_source: Some(model.source),
        warnings,
        score: Some(scored),
        unmerged_score: unmerged,
    };
    Ok(SessionOutcome {
        result,
        table,
        labels,
        model,
        embeddings,
        loss_history,
    })
}

/// The standardized segment embeddings DEC trains on.
pub fn dec_features(input: &SessionInput, cfg: &PipelineConfig) -> Result<Array2<f64>> {
    let (_, embeddings) = prepare_session(input, cfg)?;
    Ok(standardize_global(stack_embeddings(&embeddings)?.view()))
}

/// Centers every column and divides by one global standard deviation.
pub fn standardize_global(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let mut c = &x - &mean.insert_axis(Axis(0));
    let ms = c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64;
    if ms > 0.0 {
        c /= ms.sqrt();
    }
    c
}

fn cluster_label(j: usize) -> String {
    format!("c{j}")
}

/// Writes hypothesis RTTM, cluster JSON, session report and loss curve.
pub fn write_session_outputs(dir: &Path, outcome: &SessionOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let labels: Vec<String> = outcome.labels.iter().map(|&j| cluster_label(j)).collect();
    write_text(dir.join("hyp.rttm"), &write_rttm(&outcome.table, &labels)?)?;
    write_json(dir.join("clusters.json"), &outcome.model.to_json())?;
    write_json(dir.join("report.json"), &outcome.result)?;
    if let Some(h) = &outcome.loss_history {
        write_text(dir.join("loss.csv"), &loss_csv(h))?;
    }
    Ok(())
}

pub fn load_session(entry: &crate::io::SessionEntry) -> Result<SessionInput> {
    let frames = read_frames(&entry.frames_path)?;
    let reference = read_rttm_file(&entry.rttm_path)?;
    Ok(SessionInput {
        frames,
        reference,
        num_speakers: entry.num_speakers,
    })
}

/// Order-preserving parallel map over `0..n`.
fn par_map<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let v = f(i);
                slots.lock().expect("no poisoned workers")[i] = Some(v);
            });
        }
    });
    slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|v| v.expect("every slot filled"))
        .collect()
}

/// Runs every manifest session; failures are recorded and skipped. Writes
/// per-session outputs and the report under `out_dir` when given.
pub fn run_pipeline(manifest: &Manifest, cfg: &PipelineConfig, out_dir: Option<&Path>) -> Result<PipelineReport> {
    cfg.validate()?;
    let mut profiles = match &cfg.profiles_path {
        Some(p) => Some(SpeakerProfiles::from_json(&read_json::<serde_json::Value>(p)?)?),
        None => None,
    };
    let run_one = |i: usize, profiles: Option<&SpeakerProfiles>| -> (SessionResult, Option<SessionOutcome>) {
        let entry = &manifest.sessions[i];
        let attempt = load_session(entry).and_then(|input| {
            let out = run_session(&input, cfg, profiles)?;
            if let Some(dir) = out_dir {
                write_session_outputs(&session_dir(dir, &entry.session_id), &out)?;
            }
            Ok(out)
        });
        match attempt {
            Ok(o) => (o.result.clone(), Some(o)),
            Err(e) => (
                SessionResult::failed(entry.session_id.clone(), cfg.k.unwrap_or(entry.num_speakers), &e),
                None,
            ),
        }
    };
    let mut results = Vec::with_capacity(manifest.sessions.len());
    let mut start = 0;
    if cfg.profiles_from_first && profiles.is_none() && !manifest.sessions.is_empty() {
        let first_cfg = PipelineConfig {
            init: InitMethod::Plusplus,
            ..cfg.clone()
        };
        let entry = &manifest.sessions[0];
        let attempt = load_session(entry).and_then(|input| {
            let out = run_session(&input, &first_cfg, None)?;
            if let Some(dir) = out_dir {
                write_session_outputs(&session_dir(dir, &entry.session_id), &out)?;
            }
            Ok(out)
        });
        match attempt {
            Ok(o) => {
                let x = stack_embeddings(&o.embeddings)?;
                let (p, warn) = profiles_from_session(x.view(), &o.labels, o.model.k)?;
                let mut r = o.result;
                r.warnings.extend(warn);
                results.push(r);
                profiles = Some(p);
            }
            Err(e) => results.push(SessionResult::failed(entry.session_id.clone(), cfg.k.unwrap_or(entry.num_speakers), &e)),
        }
        start = 1;
    }
    let rest = par_map(manifest.sessions.len() - start, cfg.workers, |i| run_one(start + i, profiles.as_ref()).0);
    results.extend(rest);
    let report = PipelineReport::from_sessions(cfg.clone(), results);
    if let Some(dir) = out_dir {
        write_text(dir.join("report.json"), &report.to_json_string())?;
        write_text(dir.join("report.txt"), &report.to_table())?;
    }
    Ok(report)
}

pub fn session_dir(out: &Path, session_id: &str) -> PathBuf {
    out.join("sessions").join(session_id)
}
