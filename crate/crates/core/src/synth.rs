//! Deterministic synthetic sessions: frame-level speaker embeddings with slow
//! drift, white noise and outlier frames, plus the oracle segmentation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_frames, write_json, Manifest, SessionEntry};
use crate::rng::{derive_seed, rng, Rng};
use crate::rttm::write_reference_rttm;
use crate::types::{FrameMatrix, Segment, SegmentTable, SpeakerProfiles};

/// Version tag of the named suite presets.
pub const SUITE_VERSION: &str = "v1";
pub const SUITES: [&str; 4] = ["easy", "noisy", "short_segments", "many_speakers"];

/// Segment lengths `min + (max - min) * u^shape`, `u` uniform; `shape > 1`
/// skews toward `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationDist {
    pub min: f64,
    pub max: f64,
    pub shape: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TurnProcess {
    RoundRobin,
    /// Keep the current speaker with probability `p_stay`, else switch to a
    /// uniformly chosen other speaker.
    Markov { p_stay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub session_id: String,
    pub n_speakers: usize,
    pub dim: usize,
    /// Pairwise distance between speaker means in units of `frame_noise_std`.
    pub speaker_separation: f64,
    pub frame_noise_std: f64,
    /// Per-dimension amplitude of the slow drift in units of `frame_noise_std`.
    pub drift_scale: f64,
    /// Width in seconds of the window each frame's speaker component is
    /// averaged over; silence counts as zero. Short turns then lean toward
    /// their neighbors.
    pub context: f64,
    pub outlier_rate: f64,
    /// Per-dimension std of outlier frames in units of `frame_noise_std`.
    pub outlier_scale: f64,
    pub durations: DurationDist,
    /// Silence between consecutive segments, seconds.
    pub gap: (f64, f64),
    pub n_segments: usize,
    pub turn_process: TurnProcess,
    /// Speaker `j` is picked with weight `(j + 1)^-dominance`; 0 is uniform.
    pub dominance: f64,
    pub frame_period: f64,
    pub seed: u64,
    /// Draws the speaker means from this seed instead of `seed`, so sessions
    /// can share speakers.
    pub speaker_seed: Option<u64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            session_id: "synth".into(),
            n_speakers: 4,
            dim: 200,
            speaker_separation: 20.0,
            frame_noise_std: 1.0,
            drift_scale: 0.5,
            context: 0.0,
            outlier_rate: 0.0,
            outlier_scale: 10.0,
            durations: DurationDist {
                min: 1.0,
                max: 4.0,
                shape: 1.0,
            },
            gap: (0.05, 0.5),
            n_segments: 200,
            turn_process: TurnProcess::Markov { p_stay: 0.2 },
            dominance: 0.0,
            frame_period: 0.01,
            seed: 0,
            speaker_seed: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_speakers == 0 || self.n_segments == 0 || self.dim == 0 {
            return bad("n_speakers, n_segments and dim must be positive".into());
        }
        if self.n_speakers > self.dim {
            return bad(format!(
                "{} equidistant speakers do not fit in {} dimensions",
                self.n_speakers, self.dim
            ));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return bad(format!("outlier_rate {} outside [0, 1)", self.outlier_rate));
        }
        let d = self.durations;
        if !(d.min > 0.0 && d.max >= d.min && d.shape > 0.0) {
            return bad(format!("bad duration distribution {d:?}"));
        }
        if !(self.gap.0 >= 0.0 && self.gap.1 >= self.gap.0) {
            return bad(format!("bad gap range {:?}", self.gap));
        }
        if !(self.dominance >= 0.0) {
            return bad(format!("dominance {} must be >= 0", self.dominance));
        }
        if !(self.context >= 0.0) {
            return bad(format!("context {} must be >= 0", self.context));
        }
        if !(self.frame_period > 0.0) || self.frame_noise_std < 0.0 || self.speaker_separation < 0.0 {
            return bad("frame_period > 0, noise >= 0 and separation >= 0 required".into());
        }
        if let TurnProcess::Markov { p_stay } = self.turn_process {
            if !(0.0..=1.0).contains(&p_stay) {
                return bad(format!("p_stay {p_stay} outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn unit(&self) -> f64 {
        if self.frame_noise_std > 0.0 { self.frame_noise_std } else { 1.0 }
    }
}

pub fn speaker_label(i: usize) -> String {
    format!("spk{i}")
}

/// One generated session.
#[derive(Debug, Clone)]
pub struct SynthSession {
    pub config: SynthConfig,
    pub frames: FrameMatrix,
    pub table: SegmentTable,
    /// True speaker means.
    pub profiles: SpeakerProfiles,
}

fn gaussian(r: &mut Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Vertices of a regular simplex centered at the origin with the given edge.
fn simplex_means(k: usize, dim: usize, edge: f64, r: &mut Rng) -> Array2<f64> {
    // Gram-Schmidt on gaussian vectors gives k random orthonormal vectors,
    // pairwise sqrt(2) apart
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v = Array1::from_shape_fn(dim, |_| gaussian(r));
        for b in &basis {
            let c = v.dot(b);
            v.scaled_add(-c, b);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            basis.push(v / norm);
        }
    }
    let mut m = Array2::zeros((k, dim));
    for (i, b) in basis.iter().enumerate() {
        m.row_mut(i).assign(b);
    }
    let center = m.mean_axis(ndarray::Axis(0)).expect("k >= 1");
    m -= &center;
    m * (edge / 2f64.sqrt())
}

/// Mean over rows `i - half ..= i + half`, truncated at the edges.
fn box_average(x: &Array2<f64>, half: usize) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut cum = Array2::<f64>::zeros((n + 1, d));
    for i in 0..n {
        let next = &cum.row(i) + &x.row(i);
        cum.row_mut(i + 1).assign(&next);
    }
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let m = (&cum.row(hi) - &cum.row(lo)) / (hi - lo) as f64;
        out.row_mut(i).assign(&m);
    }
    out
}

fn round_cs(t: f64) -> f64 {
    (t * 100.0).round() / 100.0
}

/// Generates one session.
pub fn generate_session(cfg: &SynthConfig) -> Result<SynthSession> {
    cfg.validate()?;
    let mut r = rng(cfg.seed);
    let k = cfg.n_speakers;
    let unit = cfg.unit();
    let means = match cfg.speaker_seed {
        Some(s) => simplex_means(k, cfg.dim, cfg.speaker_separation * unit, &mut rng(s)),
        None => simplex_means(k, cfg.dim, cfg.speaker_separation * unit, &mut r),
    };

    let mut speakers = Vec::with_capacity(cfg.n_segments);
    let weights: Vec<f64> = (0..k).map(|j| ((j + 1) as f64).powf(-cfg.dominance)).collect();
    // weighted draw over speakers other than `skip`
    let draw = |r: &mut Rng, skip: Option<usize>| -> usize {
        let total: f64 = (0..k).filter(|&j| Some(j) != skip).map(|j| weights[j]).sum();
        let mut target = r.random::<f64>() * total;
        let mut last = 0;
        for j in (0..k).filter(|&j| Some(j) != skip) {
            last = j;
            target -= weights[j];
            if target < 0.0 {
                break;
            }
        }
        last
    };
    let mut current = draw(&mut r, None);
    for i in 0..cfg.n_segments {
        if i > 0 && k > 1 {
            current = match cfg.turn_process {
                TurnProcess::RoundRobin => (current + 1) % k,
                TurnProcess::Markov { p_stay } => {
                    if r.random::<f64>() < p_stay {
                        current
                    } else {
                        draw(&mut r, Some(current))
                    }
                }
            };
        }
        speakers.push(current);
    }

    let d = cfg.durations;
    let gap = |r: &mut Rng| round_cs(cfg.gap.0 + (cfg.gap.1 - cfg.gap.0) * r.random::<f64>());
    let mut t = gap(&mut r);
    let mut segments = Vec::with_capacity(cfg.n_segments);
    for &s in &speakers {
        let u: f64 = r.random();
        let dur = round_cs(d.min + (d.max - d.min) * u.powf(d.shape)).max(0.01);
        let end = round_cs(t + dur);
        segments.push(Segment::labeled(t, end, &speaker_label(s))?);
        t = round_cs(end + gap(&mut r));
    }
    let n_frames = (t / cfg.frame_period).ceil() as usize;
    let sigma = cfg.frame_noise_std;
    let mut x = Array2::from_shape_fn((n_frames, cfg.dim), |_| sigma * gaussian(&mut r));
    let table = SegmentTable::new(cfg.session_id.clone(), segments)?;
    let empty = FrameMatrix::new(cfg.session_id.clone(), Array2::zeros((n_frames, 1)), cfg.frame_period, 0.0)?;

    let mut track = Array2::<f64>::zeros((n_frames, cfg.dim));
    for (seg, &s) in table.segments().iter().zip(&speakers) {
        if let Some((first, last)) = empty.frame_range(seg.start, seg.end) {
            for f in first..=last {
                track.row_mut(f).assign(&means.row(s));
            }
        }
    }
    let half = (0.5 * cfg.context / cfg.frame_period).round() as usize;
    if half > 0 {
        track = box_average(&track, half);
    }

    for seg in table.segments() {
        let Some((first, last)) = empty.frame_range(seg.start, seg.end) else {
            continue;
        };
        // two slow sinusoids per segment along random directions
        let waves: Vec<(Array1<f64>, f64, f64)> = (0..2)
            .map(|_| {
                let dir = Array1::from_shape_fn(cfg.dim, |_| cfg.drift_scale * sigma * gaussian(&mut r));
                let period = 0.2 + 0.8 * r.random::<f64>();
                let phase = 2.0 * PI * r.random::<f64>();
                (dir, period, phase)
            })
            .collect();
        for f in first..=last {
            let time = f as f64 * cfg.frame_period;
            let mut row = x.row_mut(f);
            if cfg.outlier_rate > 0.0 && r.random::<f64>() < cfg.outlier_rate {
                for v in row.iter_mut() {
                    *v = cfg.outlier_scale * sigma * gaussian(&mut r);
                }
            }
            row += &track.row(f);
            for (dir, period, phase) in &waves {
                row.scaled_add((2.0 * PI * time / period + phase).sin(), dir);
            }
        }
    }
    let frames = FrameMatrix::new(cfg.session_id.clone(), x, cfg.frame_period, 0.0)?;
    let profiles = SpeakerProfiles::new((0..k).map(speaker_label).collect(), means)?;
    Ok(SynthSession {
        config: cfg.clone(),
        frames,
        table,
        profiles,
    })
}

/// Configurations of a named suite; session `i` is seeded with
/// `derive_seed(seed, i)`.
pub fn suite_configs(name: &str, seed: u64) -> Result<Vec<SynthConfig>> {
    let base = SynthConfig::default();
    let (count, speakers, cfg): (usize, &[usize], SynthConfig) = match name {
        "easy" => (
            5,
            &[4],
            SynthConfig {
                drift_scale: 0.25,
                durations: DurationDist {
                    min: 2.0,
                    max: 2.5,
                    shape: 1.0,
                },
                gap: (0.3, 0.6),
                ..base
            },
        ),
        "noisy" => (
            5,
            &[4],
            SynthConfig {
                speaker_separation: 6.0,
                outlier_rate: 0.2,
                outlier_scale: 50.0,
                ..base
            },
        ),
        "short_segments" => (
            5,
            &[4],
            SynthConfig {
                speaker_separation: 3.0,
                context: 1.0,
                n_segments: 300,
                durations: DurationDist {
                    min: 0.3,
                    max: 3.0,
                    shape: 4.0,
                },
                ..base
            },
        ),
        "many_speakers" => (
            4,
            &[6, 8],
            SynthConfig {
                speaker_separation: 3.0,
                dominance: 2.0,
                n_segments: 160,
                ..base
            },
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}; expected one of {SUITES:?}"
            )))
        }
    };
    Ok((0..count)
        .map(|i| SynthConfig {
            session_id: format!("{name}-{seed}-{i:02}"),
            n_speakers: speakers[i % speakers.len()],
            seed: derive_seed(seed, i as u64),
            ..cfg.clone()
        })
        .collect())
}

pub fn generate_suite(name: &str, seed: u64) -> Result<Vec<SynthSession>> {
    suite_configs(name, seed)?.iter().map(generate_session).collect()
}

/// Writes frames, reference RTTM and true profiles of each session under
/// `dir`, plus `manifest.json`; returns the manifest path.
pub fn write_suite(dir: impl AsRef<Path>, name: &str, seed: u64, sessions: &[SynthSession]) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(sessions.len());
    for s in sessions {
        let id = s.frames.session_id().to_string();
        let frames_path = dir.join(format!("{id}.frames"));
        let rttm_path = dir.join(format!("{id}.rttm"));
        write_frames(&frames_path, &s.frames)?;
        crate::io::write_text(&rttm_path, &write_reference_rttm(&s.table))?;
        write_json(dir.join(format!("{id}.profiles.json")), &s.profiles.to_json())?;
        entries.push(SessionEntry {
            session_id: id.clone(),
            frames_path: PathBuf::from(format!("{id}.frames")),
            rttm_path: PathBuf::from(format!("{id}.rttm")),
            num_speakers: s.config.n_speakers,
        });
    }
    let manifest = Manifest {
        suite: Some(name.to_string()),
        version: Some(SUITE_VERSION.to_string()),
        seed: Some(seed),
        sessions: entries,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            dim: 12,
            n_segments: 20,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn simplex_is_equidistant() {
        let m = simplex_means(5, 9, 3.0, &mut rng(1));
        for i in 0..5 {
            for j in 0..i {
                let d = (&m.row(i) - &m.row(j)).mapv(|v| v * v).sum().sqrt();
                assert!((d - 3.0).abs() < 1e-9);
            }
        }
        let c = m.mean_axis(ndarray::Axis(0)).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn box_average_by_hand() {
        let x = ndarray::array![[0.0], [3.0], [6.0], [9.0]];
        let y = box_average(&x, 1);
        assert_eq!(y, ndarray::array![[1.5], [3.0], [6.0], [7.5]]);
    }

    #[test]
    fn context_blends_neighbors() {
        let cfg = SynthConfig {
            frame_noise_std: 0.0,
            context: 0.5,
            gap: (0.0, 0.0),
            turn_process: TurnProcess::RoundRobin,
            ..small(4)
        };
        let s = generate_session(&cfg).unwrap();
        let seg = &s.table.segments()[1];
        let (a, _) = s.frames.frame_range(seg.start, seg.end).unwrap();
        let who: usize = seg.ref_speaker.as_ref().unwrap()[3..].parse().unwrap();
        // first frame of a turn averages 25 frames back into the previous turn
        let frames = s.frames.frames();
        let row = frames.row(a);
        let own = s.profiles.vector(who);
        assert!((&row - &own).mapv(f64::abs).sum() > 1e-6);
    }

    #[test]
    fn dominance_skews_turns() {
        let cfg = SynthConfig {
            dominance: 3.0,
            n_segments: 400,
            turn_process: TurnProcess::Markov { p_stay: 0.0 },
            ..small(5)
        };
        let s = generate_session(&cfg).unwrap();
        let count = |l: &str| s.table.segments().iter().filter(|g| g.ref_speaker.as_deref() == Some(l)).count();
        assert!(count("spk0") > 2 * count("spk3"));
        assert!(count("spk3") > 0);
        let bad = SynthConfig { dominance: -1.0, ..small(5) };
        assert!(generate_session(&bad).is_err());
    }

    #[test]
    fn noiseless_frames_equal_means() {
        let cfg = SynthConfig {
            frame_noise_std: 0.0,
            ..small(3)
        };
        let s = generate_session(&cfg).unwrap();
        for seg in s.table.segments() {
            let (a, b) = s.frames.frame_range(seg.start, seg.end).unwrap();
            let who: usize = seg.ref_speaker.as_ref().unwrap()[3..].parse().unwrap();
            for f in a..=b {
                assert_eq!(s.frames.frames().row(f), s.profiles.vector(who));
            }
        }
    }

    #[test]
    fn seeded() {
        let a = generate_session(&small(5)).unwrap();
        let b = generate_session(&small(5)).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.table, b.table);
        let c = generate_session(&small(6)).unwrap();
        assert_ne!(a.frames, c.frames);
    }

    #[test]
    fn shared_speakers() {
        let a = generate_session(&SynthConfig { speaker_seed: Some(4), ..small(1) }).unwrap();
        let b = generate_session(&SynthConfig { speaker_seed: Some(4), ..small(2) }).unwrap();
        assert_eq!(a.profiles, b.profiles);
        assert_ne!(a.frames, b.frames);
    }

    #[test]
    fn infeasible_geometry() {
        let cfg = SynthConfig {
            n_speakers: 13,
            ..small(0)
        };
        assert!(generate_session(&cfg).is_err());
    }

    #[test]
    fn round_robin_cycles() {
        let cfg = SynthConfig {
            turn_process: TurnProcess::RoundRobin,
            n_speakers: 3,
            ..small(1)
        };
        let s = generate_session(&cfg).unwrap();
        let labels: Vec<_> = s.table.segments().iter().map(|g| g.ref_speaker.clone().unwrap()).collect();
        for w in labels.windows(4) {
            assert_eq!(w[0], w[3]);
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn suite_presets() {
        let easy = suite_configs("easy", 7).unwrap();
        assert_eq!(easy.len(), 5);
        assert!(easy.iter().all(|c| c.n_speakers == 4));
        let many = suite_configs("many_speakers", 7).unwrap();
        let ks: Vec<_> = many.iter().map(|c| c.n_speakers).collect();
        assert!(ks.contains(&6) && ks.contains(&8));
        let noisy = &suite_configs("noisy", 7).unwrap()[0];
        assert_eq!((noisy.outlier_rate, noisy.outlier_scale), (0.2, 50.0));
        assert!(suite_configs("hard", 7).is_err());
    }
}
