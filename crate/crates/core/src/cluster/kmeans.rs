use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng, Rng};
use crate::types::{ClusterModel, InitSource, SpeakerProfiles};

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Initial centroid strategy.
#[derive(Debug, Clone, PartialEq)]
pub enum KMeansInit {
    /// k-means++ seeding.
    PlusPlus,
    /// k distinct samples chosen uniformly.
    Random,
    /// Known speakers' centroids; `k` must equal the number of profiles.
    Profiles(SpeakerProfiles),
    /// Explicit `k x d` centroids.
    Given(Array2<f64>),
}

impl KMeansInit {
    fn source(&self) -> InitSource {
        match self {
            KMeansInit::PlusPlus => InitSource::PlusplusInit,
            KMeansInit::Random => InitSource::RandomInit,
            KMeansInit::Profiles(_) => InitSource::ProfileInit,
            KMeansInit::Given(_) => InitSource::GivenInit,
        }
    }

    fn is_random(&self) -> bool {
        matches!(self, KMeansInit::PlusPlus | KMeansInit::Random)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub init: KMeansInit,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Independent restarts for random initializers; the lowest objective wins.
    pub n_init: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            init: KMeansInit::PlusPlus,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            n_init: 1,
        }
    }

    pub fn with_init(mut self, init: KMeansInit) -> Self {
        self.init = init;
        self
    }

    pub fn with_restarts(mut self, n_init: usize) -> Self {
        self.n_init = n_init.max(1);
        self
    }
}

/// Knobs of the k-Means runs nested inside other algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            n_init: 10,
        }
    }
}

impl KMeansParams {
    pub fn config(&self, k: usize, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k,
            init: KMeansInit::PlusPlus,
            seed,
            max_iter: self.max_iter,
            tol: self.tol,
            n_init: self.n_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub model: ClusterModel,
    /// Sum of squared distances to assigned centroids.
    pub objective: f64,
    /// Objective after every Lloyd iteration of the winning run.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Empty clusters re-seeded during the winning run.
    pub reseeded: usize,
}

pub(crate) fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid and its squared distance; ties go to the
/// lowest index.
pub(crate) fn nearest(x: ArrayView1<'_, f64>, centroids: ArrayView2<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_all(x: ArrayView2<'_, f64>, centroids: ArrayView2<'_, f64>) -> (Vec<usize>, f64) {
    let mut total = 0.0;
    let labels = x
        .rows()
        .into_iter()
        .map(|r| {
            let (j, d) = nearest(r, centroids);
            total += d;
            j
        })
        .collect();
    (labels, total)
}

/// Nearest-centroid labels for new samples.
pub fn assign_to_centroids(model: &ClusterModel, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if x.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.ncols(),
        });
    }
    Ok(assign_all(x, model.centroids.view()).0)
}

/// Within-cluster sum of squares for the given labels and centroids.
pub fn kmeans_objective(
    x: ArrayView2<'_, f64>,
    centroids: ArrayView2<'_, f64>,
    labels: &[usize],
) -> f64 {
    x.rows()
        .into_iter()
        .zip(labels)
        .map(|(r, &j)| sq_dist(r, centroids.row(j)))
        .sum()
}

/// Index drawn with probability proportional to `w`; uniform if all zero.
fn weighted_pick(w: &[f64], total: f64, rng: &mut Rng) -> usize {
    if !(total > 0.0) {
        return rng.random_range(0..w.len());
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = None;
    for (i, &v) in w.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        acc += v;
        chosen = Some(i);
        if acc > target {
            break;
        }
    }
    chosen.expect("positive total weight")
}

/// Greedy k-means++: each new seed is the best of `2 + ln k` candidates
/// drawn by squared distance, judged by the resulting potential.
fn plusplus(x: ArrayView2<'_, f64>, k: usize, rng: &mut Rng) -> Array2<f64> {
    let n = x.nrows();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = x.rows().into_iter().map(|r| sq_dist(r, x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let mut best: Option<(f64, Vec<f64>, usize)> = None;
        for _ in 0..trials {
            let cand = weighted_pick(&d2, total, rng);
            let nd: Vec<f64> = x
                .rows()
                .into_iter()
                .zip(&d2)
                .map(|(r, &old)| old.min(sq_dist(r, x.row(cand))))
                .collect();
            let pot: f64 = nd.iter().sum();
            if best.as_ref().is_none_or(|b| pot < b.0) {
                best = Some((pot, nd, cand));
            }
        }
        let (_, nd, pick) = best.expect("at least two trials");
        centroids.row_mut(c).assign(&x.row(pick));
        d2 = nd;
    }
    centroids
}

fn forgy(x: ArrayView2<'_, f64>, k: usize, rng: &mut Rng) -> Array2<f64> {
    let idx = rand::seq::index::sample(rng, x.nrows(), k).into_vec();
    x.select(ndarray::Axis(0), &idx)
}

fn initial_centroids(
    x: ArrayView2<'_, f64>,
    cfg: &KMeansConfig,
    run_seed: u64,
) -> Result<Array2<f64>> {
    let d = x.ncols();
    let check = |c: ArrayView2<'_, f64>| -> Result<Array2<f64>> {
        if c.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.ncols(),
            });
        }
        if c.nrows() != cfg.k {
            return Err(Error::InvalidArgument(format!(
                "k = {} but {} initial centroids supplied",
                cfg.k,
                c.nrows()
            )));
        }
        Ok(c.to_owned())
    };
    match &cfg.init {
        KMeansInit::PlusPlus => Ok(plusplus(x, cfg.k, &mut rng(run_seed))),
        KMeansInit::Random => Ok(forgy(x, cfg.k, &mut rng(run_seed))),
        KMeansInit::Profiles(p) => check(p.vectors()),
        KMeansInit::Given(c) => check(c.view()),
    }
}

struct Run {
    centroids: Array2<f64>,
    labels: Vec<usize>,
    objective: f64,
    history: Vec<f64>,
    iterations: usize,
    reseeded: usize,
}

fn lloyd(x: ArrayView2<'_, f64>, mut centroids: Array2<f64>, max_iter: usize, tol: f64) -> Run {
    let (n, d) = x.dim();
    let k = centroids.nrows();
    let (mut labels, mut objective) = assign_all(x, centroids.view());
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut reseeded = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (r, &j) in x.rows().into_iter().zip(&labels) {
            sums.row_mut(j).scaled_add(1.0, &r);
            counts[j] += 1;
        }
        let mut next = centroids.clone();
        for (j, &c) in counts.iter().enumerate() {
            if c > 0 {
                next.row_mut(j).assign(&(&sums.row(j) / c as f64));
            }
        }
        // Empty clusters move to the samples farthest from their centroids.
        let empties: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
        if !empties.is_empty() {
            let mut far: Vec<f64> = x
                .rows()
                .into_iter()
                .zip(&labels)
                .map(|(r, &j)| sq_dist(r, next.row(j)))
                .collect();
            for j in empties {
                let (idx, _) = far
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
                next.row_mut(j).assign(&x.row(idx));
                far[idx] = f64::NEG_INFINITY;
                reseeded += 1;
            }
        }
        let shift = centroids
            .rows()
            .into_iter()
            .zip(next.rows())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        let (new_labels, obj) = assign_all(x, centroids.view());
        let unchanged = new_labels == labels;
        labels = new_labels;
        objective = obj;
        history.push(obj);
        if shift < tol || (unchanged && shift == 0.0) {
            break;
        }
    }
    debug_assert_eq!(labels.len(), n);
    Run {
        centroids,
        labels,
        objective,
        history,
        iterations,
        reseeded,
    }
}

/// Lloyd's k-Means.
///
/// Each iteration recomputes centroids as member means and re-assigns every
/// sample to its nearest centroid, so the objective never increases. Runs
/// stop once no centroid moves by `tol` or more. The returned labels are
/// always the nearest-centroid labels of the returned centroids.
pub fn kmeans(x: ArrayView2<'_, f64>, cfg: &KMeansConfig) -> Result<KMeansFit> {
    let n = x.nrows();
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if cfg.k > n {
        return Err(Error::NotEnoughSamples {
            msg: format!("k = {} exceeds the {n} samples", cfg.k),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    let runs = if cfg.init.is_random() { cfg.n_init.max(1) } else { 1 };
    let mut best: Option<Run> = None;
    for r in 0..runs {
        let run_seed = if r == 0 { cfg.seed } else { derive_seed(cfg.seed, r as u64) };
        let init = initial_centroids(x, cfg, run_seed)?;
        let run = lloyd(x, init, cfg.max_iter, cfg.tol);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one run");
    Ok(KMeansFit {
        model: ClusterModel::new(run.centroids, run.labels, cfg.init.source(), cfg.seed)?,
        objective: run.objective,
        history: run.history,
        iterations: run.iterations,
        reseeded: run.reseeded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn two_clouds(seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut r = rng(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Array2::zeros((40, 3));
        let mut truth = vec![];
        for i in 0..40 {
            let c = if i < 20 { 10.0 } else { -10.0 };
            x[[i, 0]] = c + noise.sample(&mut r);
            x[[i, 1]] = noise.sample(&mut r);
            x[[i, 2]] = noise.sample(&mut r);
            truth.push(usize::from(i >= 20));
        }
        (x, truth)
    }

    fn scatter(x: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
        let mut total = 0.0;
        for j in 0..k {
            let members: Vec<_> = (0..x.nrows()).filter(|&i| labels[i] == j).collect();
            if members.is_empty() {
                continue;
            }
            let mean = x.select(ndarray::Axis(0), &members).mean_axis(ndarray::Axis(0)).unwrap();
            for &i in &members {
                total += sq_dist(x.row(i), mean.view());
            }
        }
        total
    }

    #[test]
    fn separates_two_clouds_optimally() {
        let (x, truth) = two_clouds(1);
        let fit = kmeans(x.view(), &KMeansConfig::new(2, 3)).unwrap();
        let l = &fit.model.assignments;
        let agree = l.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert!(agree == 40 || agree == 0);
        // both labelings of the two clouds give the same scatter
        assert!((fit.objective - scatter(&x, &truth, 2)).abs() < 1e-9);
        let swapped: Vec<usize> = truth.iter().map(|t| 1 - t).collect();
        assert!((fit.objective - scatter(&x, &swapped, 2)).abs() < 1e-9);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let (x, _) = two_clouds(2);
        let fit = kmeans(x.view(), &KMeansConfig::new(1, 0)).unwrap();
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        for (a, b) in fit.model.centroids.row(0).iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((fit.objective - scatter(&x, &vec![0; 40], 1)).abs() < 1e-9);
    }

    #[test]
    fn k_equals_n_has_zero_objective() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [-3.0, 2.0]];
        let fit = kmeans(x.view(), &KMeansConfig::new(4, 11)).unwrap();
        assert_eq!(fit.objective, 0.0);
        let mut l = fit.model.assignments.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let x = array![[0.0], [1.0]];
        assert!(kmeans(x.view(), &KMeansConfig::new(3, 0)).is_err());
        assert!(kmeans(x.view(), &KMeansConfig::new(0, 0)).is_err());
    }

    #[test]
    fn profile_init_uses_profiles() {
        let (x, _) = two_clouds(3);
        let profiles = SpeakerProfiles::new(
            vec!["a".into(), "b".into()],
            array![[-10.0, 0.0, 0.0], [10.0, 0.0, 0.0]],
        )
        .unwrap();
        let cfg = KMeansConfig::new(2, 0).with_init(KMeansInit::Profiles(profiles));
        let fit = kmeans(x.view(), &cfg).unwrap();
        assert_eq!(fit.model.source, InitSource::ProfileInit);
        // profile order fixes label order: the +10 cloud is cluster 1
        assert_eq!(fit.model.assignments[0], 1);
        assert_eq!(fit.model.assignments[39], 0);
    }

    #[test]
    fn empty_cluster_is_reseeded_at_farthest_point() {
        let x = array![[0.0], [0.1], [0.2], [10.0]];
        // nobody is closest to 100, so that centroid jumps to the sample
        // farthest from its own centroid, which is 10
        let cfg = KMeansConfig::new(2, 0).with_init(KMeansInit::Given(array![[0.1], [100.0]]));
        let fit = kmeans(x.view(), &cfg).unwrap();
        assert_eq!(fit.reseeded, 1);
        assert_eq!(fit.model.assignments, vec![0, 0, 0, 1]);
        assert_eq!(fit.model.centroids[[1, 0]], 10.0);
        // duplicate centroids: the loser of the tie is empty and re-seeded
        let cfg = KMeansConfig::new(3, 0)
            .with_init(KMeansInit::Given(array![[0.1], [10.0], [10.0]]));
        let fit = kmeans(x.view(), &cfg).unwrap();
        assert!(fit.reseeded >= 1);
        assert_eq!(fit.model.empty_clusters(), 0);
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let m = ClusterModel::new(array![[-1.0], [1.0], [0.0]], vec![], InitSource::GivenInit, 0).unwrap();
        assert_eq!(assign_to_centroids(&m, array![[0.0], [-1.0], [0.5]].view()).unwrap(), vec![2, 0, 1]);
        let m = ClusterModel::new(array![[-1.0], [1.0]], vec![], InitSource::GivenInit, 0).unwrap();
        assert_eq!(assign_to_centroids(&m, array![[0.0]].view()).unwrap(), vec![0]);
        assert!(assign_to_centroids(&m, array![[0.0, 1.0]].view()).is_err());
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let (x, _) = two_clouds(5);
        let cfg = KMeansConfig::new(3, 42).with_restarts(4);
        assert_eq!(kmeans(x.view(), &cfg).unwrap(), kmeans(x.view(), &cfg).unwrap());
    }

    proptest! {
        #[test]
        fn objective_never_increases_and_labels_are_a_fixed_point(
            pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 6..60),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let x = Array2::from_shape_fn((pts.len(), 2), |(i, j)| if j == 0 { pts[i].0 } else { pts[i].1 });
            let fit = kmeans(x.view(), &KMeansConfig::new(k.min(pts.len()), seed)).unwrap();
            for w in fit.history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
            }
            let again = assign_to_centroids(&fit.model, x.view()).unwrap();
            prop_assert_eq!(&again, &fit.model.assignments);
            let obj = kmeans_objective(x.view(), fit.model.centroids.view(), &again);
            prop_assert!((obj - fit.objective).abs() <= 1e-9 * obj.max(1.0));
        }
    }
}
