use std::collections::BTreeMap;
use std::fs;

use diarcluster::io::Manifest;
use diarcluster::pipeline::{
    run_pipeline, run_session, run_sweep, Algorithm, InitMethod, PipelineConfig, SessionInput,
    SweepAxis,
};
use diarcluster::synth::{generate_session, generate_suite, suite_configs, write_suite, SynthConfig};
use diarcluster::types::InitSource;

fn input(s: &diarcluster::synth::SynthSession) -> SessionInput {
    SessionInput {
        frames: s.frames.clone(),
        reference: s.table.clone(),
        num_speakers: s.config.n_speakers,
    }
}

fn kmeans8() -> PipelineConfig {
    PipelineConfig {
        pca_dim: 8,
        ..PipelineConfig::default()
    }
}

/// Recall of hard labels against labeled segments, best mapping by
/// trying every injective cluster-to-speaker assignment.
fn brute_recall(table: &diarcluster::types::SegmentTable, labels: &[usize]) -> f64 {
    let speakers = table.speakers();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut time = vec![vec![0.0; speakers.len()]; k];
    for (seg, &l) in table.segments().iter().zip(labels) {
        let s = speakers
            .iter()
            .position(|x| Some(x) == seg.ref_speaker.as_ref())
            .unwrap();
        time[l][s] += seg.duration();
    }
    fn best(time: &[Vec<f64>], c: usize, used: &mut Vec<bool>) -> f64 {
        if c == time.len() {
            return 0.0;
        }
        let mut top = best(time, c + 1, used);
        for s in 0..used.len() {
            if !used[s] {
                used[s] = true;
                top = top.max(time[c][s] + best(time, c + 1, used));
                used[s] = false;
            }
        }
        top
    }
    let mut used = vec![false; speakers.len()];
    100.0 * best(&time, 0, &mut used) / table.total_duration()
}

#[test]
fn easy_session_with_kmeans() {
    let sessions = generate_suite("easy", 3).unwrap();
    let out = run_session(&input(&sessions[0]), &kmeans8(), None).unwrap();
    let r = &out.result;
    assert!(r.ok);
    assert_eq!(r.k_found, 4);
    assert_eq!(r.init_source, Some(InitSource::PlusplusInit));
    let score = r.score.as_ref().unwrap();
    assert!(score.recall_pct >= 99.0, "recall {}", score.recall_pct);
    let oracle = brute_recall(&out.table, &out.labels);
    assert!((oracle - score.recall_pct).abs() < 1e-9, "{oracle} vs {}", score.recall_pct);
}

#[test]
fn every_algorithm_runs_on_a_small_session() {
    let s = generate_session(&SynthConfig {
        n_speakers: 3,
        dim: 20,
        n_segments: 40,
        seed: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    for alg in Algorithm::ALL {
        let mut cfg = PipelineConfig {
            algorithm: alg,
            pca_dim: 5,
            ..PipelineConfig::default()
        };
        cfg.dec.pretrain.layer_sizes = vec![20, 16, 16, 3, 16, 16, 20];
        cfg.dec.pretrain.epochs = 10;
        cfg.dec.epochs = 10;
        let out = run_session(&input(&s), &cfg, None).unwrap();
        assert!(out.result.ok, "{alg:?}");
        assert_eq!(out.labels.len(), out.table.len());
        assert_eq!(out.loss_history.is_some(), matches!(alg, Algorithm::DecOriginal | Algorithm::DecImproved));
        let recall = out.result.score.unwrap().recall_pct;
        assert!(recall > 90.0, "{alg:?}: {recall}");
    }
}

#[test]
fn pipeline_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sessions: Vec<_> = generate_suite("easy", 1).unwrap().into_iter().take(2).collect();
    let manifest_path = write_suite(dir.path().join("data"), "easy", 1, &sessions).unwrap();
    let manifest = Manifest::load(&manifest_path).unwrap();
    let cfg = PipelineConfig {
        workers: 2,
        ..kmeans8()
    };
    let a = run_pipeline(&manifest, &cfg, Some(&dir.path().join("a"))).unwrap();
    let b = run_pipeline(&manifest, &cfg, Some(&dir.path().join("b"))).unwrap();
    assert_eq!(a, b);
    for rel in ["report.json", "report.txt"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(rel)).unwrap(),
            fs::read(dir.path().join("b").join(rel)).unwrap()
        );
    }
    for s in &manifest.sessions {
        for f in ["hyp.rttm", "clusters.json", "report.json"] {
            let p = |run: &str| dir.path().join(run).join("sessions").join(&s.session_id).join(f);
            assert_eq!(fs::read(p("a")).unwrap(), fs::read(p("b")).unwrap(), "{f}");
        }
    }
    assert_eq!(a.aggregate.n_sessions, 2);
    assert_eq!(a.aggregate.n_failed, 0);
}

#[test]
fn hypothesis_rttm_matches_labels() {
    let dir = tempfile::tempdir().unwrap();
    let sessions: Vec<_> = generate_suite("easy", 2).unwrap().into_iter().take(1).collect();
    let manifest = Manifest::load(write_suite(dir.path(), "easy", 2, &sessions).unwrap()).unwrap();
    run_pipeline(&manifest, &kmeans8(), Some(&dir.path().join("out"))).unwrap();
    let id = &manifest.sessions[0].session_id;
    let text = fs::read_to_string(dir.path().join("out/sessions").join(id).join("hyp.rttm")).unwrap();
    let out = run_session(&input(&sessions[0]), &kmeans8(), None).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("SPEAKER")).collect();
    assert_eq!(lines.len(), out.table.len());
    for ((line, seg), &l) in lines.iter().zip(out.table.segments()).zip(&out.labels) {
        let f: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(f[1], id);
        let start: f64 = f[3].parse().unwrap();
        assert!((start - seg.start).abs() < 1e-3);
        assert_eq!(f[7], format!("c{l}"));
    }
}

#[test]
fn broken_session_is_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let sessions: Vec<_> = generate_suite("easy", 5).unwrap().into_iter().take(2).collect();
    let path = write_suite(dir.path(), "easy", 5, &sessions).unwrap();
    let mut manifest = Manifest::load(&path).unwrap();
    fs::write(&manifest.sessions[1].frames_path, b"not frames").unwrap();
    manifest.sessions[1].session_id.push_str("-broken");
    let report = run_pipeline(&manifest, &kmeans8(), None).unwrap();
    assert_eq!(report.aggregate.n_failed, 1);
    assert!(report.sessions[0].ok);
    assert!(!report.sessions[1].ok);
    assert!(report.sessions[1].error.is_some());
    let only = report.sessions[0].score.as_ref().unwrap();
    assert!((report.aggregate.recall_pct - only.recall_pct).abs() < 1e-9);
}

#[test]
fn true_profiles_initialize_kmeans() {
    let dir = tempfile::tempdir().unwrap();
    let sessions: Vec<_> = generate_suite("noisy", 6).unwrap().into_iter().take(1).collect();
    let manifest = Manifest::load(write_suite(dir.path(), "noisy", 6, &sessions).unwrap()).unwrap();
    let id = &manifest.sessions[0].session_id;
    let cfg = PipelineConfig {
        init: InitMethod::Profiles,
        profiles_path: Some(dir.path().join(format!("{id}.profiles.json"))),
        ..kmeans8()
    };
    let with = run_pipeline(&manifest, &cfg, None).unwrap();
    let plain = run_pipeline(&manifest, &kmeans8(), None).unwrap();
    assert_eq!(with.sessions[0].init_source, Some(InitSource::ProfileInit));
    assert!(with.aggregate.recall_pct >= plain.aggregate.recall_pct - 1e-9);
}

#[test]
fn profiles_from_first_session_seed_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let sessions: Vec<_> = suite_configs("easy", 7)
        .unwrap()
        .into_iter()
        .take(3)
        .map(|c| generate_session(&SynthConfig { speaker_seed: Some(70), ..c }).unwrap())
        .collect();
    let manifest = Manifest::load(write_suite(dir.path(), "easy", 7, &sessions).unwrap()).unwrap();
    let cfg = PipelineConfig {
        init: InitMethod::Profiles,
        profiles_from_first: true,
        ..kmeans8()
    };
    let report = run_pipeline(&manifest, &cfg, None).unwrap();
    let sources: Vec<_> = report.sessions.iter().map(|s| s.init_source).collect();
    assert_eq!(
        sources,
        vec![
            Some(InitSource::PlusplusInit),
            Some(InitSource::ProfileInit),
            Some(InitSource::ProfileInit)
        ]
    );
    assert!(report.aggregate.recall_pct >= 99.0);
}

#[test]
fn profile_count_mismatch_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let sessions: Vec<_> = generate_suite("easy", 8).unwrap().into_iter().take(1).collect();
    let manifest = Manifest::load(write_suite(dir.path(), "easy", 8, &sessions).unwrap()).unwrap();
    let id = &manifest.sessions[0].session_id;
    let cfg = PipelineConfig {
        init: InitMethod::Profiles,
        profiles_path: Some(dir.path().join(format!("{id}.profiles.json"))),
        k: Some(3),
        ..kmeans8()
    };
    let report = run_pipeline(&manifest, &cfg, None).unwrap();
    let s = &report.sessions[0];
    assert!(s.ok);
    assert_eq!(s.init_source, Some(InitSource::PlusplusInit));
    assert!(s.warnings.iter().any(|w| w.contains("profile")));
}

#[test]
fn single_value_sweep_equals_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let sessions: Vec<_> = generate_suite("easy", 9).unwrap().into_iter().take(2).collect();
    let manifest = Manifest::load(write_suite(dir.path(), "easy", 9, &sessions).unwrap()).unwrap();
    let sweep = run_sweep(&manifest, &kmeans8(), SweepAxis::Aggregation, &["mean".to_string()], None).unwrap();
    let direct = run_pipeline(
        &manifest,
        &kmeans8().with_overrides(&["aggregation=mean"]).unwrap(),
        None,
    )
    .unwrap();
    assert_eq!(sweep.runs.len(), 1);
    assert_eq!(sweep.runs[0], direct);
    assert_eq!(sweep.recall("mean"), Some(direct.aggregate.recall_pct));
}

#[test]
fn min_duration_drops_short_segments() {
    let sessions = generate_suite("short_segments", 1).unwrap();
    let cfg = PipelineConfig {
        min_duration: 1.0,
        ..kmeans8()
    };
    let out = run_session(&input(&sessions[0]), &cfg, None).unwrap();
    assert!(out.table.segments().iter().all(|s| s.duration() > 1.0));
    let all = run_session(&input(&sessions[0]), &kmeans8(), None).unwrap();
    assert!(out.table.len() < all.table.len());
    // unmerged scoring still covers every reference segment
    let unmerged = all.result.unmerged_score.unwrap();
    assert_eq!(unmerged.n_segments, sessions[0].table.len());
}

#[test]
fn aggregate_is_duration_weighted() {
    let sessions: Vec<_> = generate_suite("noisy", 2).unwrap().into_iter().take(3).collect();
    let dir = tempfile::tempdir().unwrap();
    let manifest = Manifest::load(write_suite(dir.path(), "noisy", 2, &sessions).unwrap()).unwrap();
    let cfg = PipelineConfig {
        filter_order: None,
        aggregation: diarcluster::prep::Aggregation::Mean,
        ..kmeans8()
    };
    let report = run_pipeline(&manifest, &cfg, None).unwrap();
    let mut by: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for s in &report.sessions {
        let sc = s.score.as_ref().unwrap();
        by.insert(&s.session_id, (sc.correct, sc.total_speech));
    }
    let (c, t) = by.values().fold((0.0, 0.0), |(a, b), (c, t)| (a + c, b + t));
    assert!((report.aggregate.recall_pct - 100.0 * c / t).abs() < 1e-9);
}
