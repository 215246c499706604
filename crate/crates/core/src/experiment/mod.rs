//! 1:1 verification protocol over every ordered (authorized, impostor) pair.
//!
//! For each pair the authorized subject's training split is the positive
//! class, every measurement of the remaining subjects is the negative class,
//! and the held-out impostor is only ever seen at test time.

mod report;
mod table;

pub use report::{ConditionRecord, DetPoint, GridReport, ReportMetadata, ScoreBlock};

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bc::{rank_bc_pairs, BcConfig, BcPair};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{roc_points, EvalReport, RocCurve, ScoreSet};
use crate::svm::{fit_calibrated, DEFAULT_C, DEFAULT_TOL};
use crate::Feature;

use table::{Blend, DistanceTable, TableSpace};

pub const DEFAULT_R_GRID: [f64; 11] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const DEFAULT_NBC_GRID: [usize; 7] = [9, 45, 90, 450, 900, 4500, 9000];
/// Authorized-training by unauthorized-training pair count at full scale (6 x 1,500).
pub const REFERENCE_BC_CAPACITY: usize = 9000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// The first `n_auth_train` measurements train, the rest test.
    FirstK,
    /// A per-subject permutation seeded by `rng_seed ^ hash(subject_id)`.
    SeededShuffle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_auth_train: usize,
    pub n_auth_test: usize,
    pub r_grid: Vec<f64>,
    pub nbc_grid: Vec<usize>,
    /// Rescale `nbc_grid` by the dataset's BC capacity relative to 9,000.
    pub scale_nbc: bool,
    pub rng_seed: u64,
    pub split_policy: SplitPolicy,
    pub c: f64,
    pub tol: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_auth_train: 6,
            n_auth_test: 24,
            r_grid: DEFAULT_R_GRID.to_vec(),
            nbc_grid: DEFAULT_NBC_GRID.to_vec(),
            scale_nbc: true,
            rng_seed: 1,
            split_policy: SplitPolicy::FirstK,
            c: DEFAULT_C,
            tol: DEFAULT_TOL,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.n_auth_train == 0 || self.n_auth_test == 0 {
            return fail("train and test splits must be non-empty".into());
        }
        if self.r_grid.is_empty() || self.nbc_grid.is_empty() {
            return fail("grids must be non-empty".into());
        }
        if let Some(r) = self.r_grid.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return fail(format!("BC ratio {r} outside (0, 1)"));
        }
        if !(self.c > 0.0 && self.c.is_finite() && self.tol > 0.0 && self.tol.is_finite()) {
            return fail(format!("C ({}) and tol ({}) must be positive", self.c, self.tol));
        }
        Ok(())
    }

    pub fn per_subject(&self) -> usize {
        self.n_auth_train + self.n_auth_test
    }
}

/// Scales an N_BC value given for 52 subjects to a dataset with `capacity` BC pairs.
pub fn scale_nbc(n_bc: usize, capacity: usize) -> usize {
    let scaled = (n_bc as f64 * capacity as f64 / REFERENCE_BC_CAPACITY as f64).round() as usize;
    if n_bc == 0 {
        0
    } else {
        scaled.max(1)
    }
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn subject_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Measurement positions `(train, test)` for one subject.
pub fn split_indices(
    subject_id: &str,
    n_measurements: usize,
    cfg: &ProtocolConfig,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_measurements != cfg.per_subject() {
        return Err(Error::Dataset(format!(
            "subject {subject_id} has {n_measurements} measurements, expected {}",
            cfg.per_subject()
        )));
    }
    let mut order: Vec<usize> = (0..n_measurements).collect();
    if cfg.split_policy == SplitPolicy::SeededShuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ subject_hash(subject_id));
        order.shuffle(&mut rng);
    }
    let test = order.split_off(cfg.n_auth_train);
    Ok((order, test))
}

pub fn split_subject(
    measurements: &[Feature],
    cfg: &ProtocolConfig,
) -> Result<(Vec<Feature>, Vec<Feature>)> {
    let id = measurements.first().map_or("", |m| m.subject_id.as_str());
    let (train, test) = split_indices(id, measurements.len(), cfg)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| measurements[i].clone()).collect();
    Ok((pick(train), pick(test)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub auth_id: String,
    pub impostor_id: String,
    /// Posteriors of the authorized subject's test measurements.
    pub genuine_scores: Vec<f64>,
    /// Posteriors of every measurement of the held-out impostor.
    pub impostor_scores: Vec<f64>,
}

/// Execution knobs that do not affect results.
#[derive(Default)]
pub struct RunOptions<'a> {
    pub parallel: bool,
    /// Called with (completed pairs, total pairs).
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

/// A dataset prepared for the protocol: splits and the distance table.
pub struct Protocol<'d> {
    dataset: &'d Dataset,
    cfg: ProtocolConfig,
    points: Vec<&'d [f64]>,
    table: DistanceTable,
    /// Global point indices per subject.
    train: Vec<Vec<usize>>,
    test: Vec<Vec<usize>>,
    all: Vec<Vec<usize>>,
}

impl<'d> Protocol<'d> {
    pub fn new(dataset: &'d Dataset, cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let subjects = dataset.subjects();
        if subjects.len() < 3 {
            return Err(Error::Dataset(format!(
                "protocol needs at least 3 subjects, got {}",
                subjects.len()
            )));
        }
        let mut points = Vec::new();
        let (mut train, mut test, mut all) = (Vec::new(), Vec::new(), Vec::new());
        for s in subjects {
            let base = points.len();
            let (tr, te) = split_indices(&s.id, s.measurements.len(), cfg)?;
            train.push(tr.into_iter().map(|i| base + i).collect());
            test.push(te.into_iter().map(|i| base + i).collect());
            all.push((base..base + s.measurements.len()).collect());
            points.extend(s.measurements.iter().map(|m| m.values.as_slice()));
        }
        let table = DistanceTable::new(&points);
        Ok(Self {
            dataset,
            cfg: cfg.clone(),
            points,
            table,
            train,
            test,
            all,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn n_subjects(&self) -> usize {
        self.train.len()
    }

    /// Ordered (authorized, impostor) subject index pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_subjects();
        (0..n)
            .flat_map(|a| (0..n).filter(move |&i| i != a).map(move |i| (a, i)))
            .collect()
    }

    /// Number of (authorized, unauthorized) training pairs available for BC.
    pub fn bc_capacity(&self) -> usize {
        self.cfg.n_auth_train * (self.n_subjects() - 2) * self.cfg.per_subject()
    }

    /// The N_BC grid after optional capacity scaling, deduplicated in order.
    pub fn effective_nbc_grid(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &n in &self.cfg.nbc_grid {
            let v = if self.cfg.scale_nbc {
                scale_nbc(n, self.bc_capacity())
            } else {
                n
            };
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    fn others(&self, auth: usize, imp: usize) -> Vec<usize> {
        (0..self.n_subjects())
            .filter(|&s| s != auth && s != imp)
            .flat_map(|s| self.all[s].iter().copied())
            .collect()
    }

    fn check_pair(&self, auth: usize, imp: usize) -> Result<()> {
        let n = self.n_subjects();
        if auth >= n || imp >= n {
            return Err(Error::InvalidArgument(format!(
                "subject index out of range ({auth}, {imp}) for {n} subjects"
            )));
        }
        if auth == imp {
            return Err(Error::InvalidArgument(
                "authorized user and impostor must differ".into(),
            ));
        }
        Ok(())
    }

    // BC parents ranked once per pair; every condition uses a prefix.
    fn ranking(&self, auth: usize, others: &[usize], n_max: usize) -> Result<Vec<BcPair<f64>>> {
        let a: Vec<&[f64]> = self.train[auth].iter().map(|&p| self.points[p]).collect();
        let o: Vec<&[f64]> = others.iter().map(|&p| self.points[p]).collect();
        rank_bc_pairs(&a, &o, n_max)
    }

    fn train_and_score(
        &self,
        auth: usize,
        imp: usize,
        others: &[usize],
        bc: Option<(f64, &[BcPair<f64>])>,
    ) -> Result<PairResult> {
        let auth_train = &self.train[auth];
        let mut rows: Vec<Blend> = auth_train.iter().map(|&p| Blend::point(p)).collect();
        rows.extend(others.iter().map(|&p| Blend::point(p)));
        if let Some((r, pairs)) = bc {
            rows.extend(
                pairs
                    .iter()
                    .map(|p| Blend::mix(&self.table, auth_train[p.auth], others[p.imp], r)),
            );
        }
        let mut positive = vec![false; rows.len()];
        positive[..auth_train.len()].fill(true);

        let gamma = self.table.default_gamma(&rows);
        let space = TableSpace::new(&self.table, gamma);
        let (model, platt) = fit_calibrated(&space, &rows, &positive, self.cfg.c, self.cfg.tol)?;
        let score = |p: &usize| platt.probability(model.decision(&space, Blend::point(*p)));

        let subjects = self.dataset.subjects();
        Ok(PairResult {
            auth_id: subjects[auth].id.clone(),
            impostor_id: subjects[imp].id.clone(),
            genuine_scores: self.test[auth].iter().map(score).collect(),
            impostor_scores: self.all[imp].iter().map(score).collect(),
        })
    }

    /// Trains and scores one pair, with or without BC augmentation.
    pub fn run_pair(&self, auth: usize, imp: usize, bc: Option<&BcConfig<f64>>) -> Result<PairResult> {
        self.check_pair(auth, imp)?;
        let others = self.others(auth, imp);
        match bc {
            None => self.train_and_score(auth, imp, &others, None),
            Some(cfg) => {
                let ranking = self.ranking(auth, &others, cfg.n_bc())?;
                self.train_and_score(auth, imp, &others, Some((cfg.r(), &ranking)))
            }
        }
    }

    /// Runs every ordered pair under one condition and pools the scores.
    pub fn run(&self, bc: Option<&BcConfig<f64>>, opts: &RunOptions) -> Result<Vec<PairResult>> {
        let pairs = self.pairs();
        let done = AtomicUsize::new(0);
        let job = |&(a, i): &(usize, usize)| {
            let out = self.run_pair(a, i, bc);
            tick(&done, pairs.len(), opts);
            out
        };
        if opts.parallel {
            pairs.par_iter().map(job).collect()
        } else {
            pairs.iter().map(job).collect()
        }
    }
}

fn tick(done: &AtomicUsize, total: usize, opts: &RunOptions) {
    let n = done.fetch_add(1, Ordering::Relaxed) + 1;
    if let Some(cb) = opts.progress {
        cb(n, total);
    }
}

/// Concatenates every pair's scores in pair order.
pub fn pool_scores(results: &[PairResult]) -> Result<ScoreSet<f64>> {
    let genuine = results.iter().flat_map(|r| r.genuine_scores.iter().copied()).collect();
    let impostor = results.iter().flat_map(|r| r.impostor_scores.iter().copied()).collect();
    ScoreSet::new(genuine, impostor)
}

/// Runs all ordered pairs and evaluates the pooled scores.
pub fn run_protocol(
    dataset: &Dataset,
    bc: Option<&BcConfig<f64>>,
    cfg: &ProtocolConfig,
) -> Result<EvalReport> {
    let protocol = Protocol::new(dataset, cfg)?;
    let results = protocol.run(
        bc,
        &RunOptions {
            parallel: true,
            progress: None,
        },
    )?;
    Ok(EvalReport::from_scores(&pool_scores(&results)?))
}

#[derive(Debug, Clone)]
pub struct ConditionResult {
    pub r: f64,
    pub n_bc: usize,
    pub report: EvalReport,
    pub curve: RocCurve<f64>,
    pub star: bool,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub baseline: EvalReport,
    pub baseline_curve: RocCurve<f64>,
    pub conditions: Vec<ConditionResult>,
    pub warnings: Vec<String>,
    pub n_pairs: usize,
    /// The N_BC values actually evaluated, after scaling.
    pub nbc_grid: Vec<usize>,
}

/// Baseline plus every feasible (r, N_BC) condition, ordered by (r, N_BC).
pub fn grid_search(dataset: &Dataset, cfg: &ProtocolConfig, opts: &RunOptions) -> Result<GridResult> {
    let protocol = Protocol::new(dataset, cfg)?;
    let capacity = protocol.bc_capacity();
    let nbc_grid = protocol.effective_nbc_grid();

    let mut warnings = Vec::new();
    let mut feasible = Vec::new();
    for &n in &nbc_grid {
        if n > capacity {
            warnings.push(format!(
                "N_BC={n} skipped: only {capacity} (authorized, unauthorized) training pairs exist"
            ));
        } else {
            feasible.push(n);
        }
    }
    let mut r_grid = cfg.r_grid.clone();
    r_grid.sort_by(f64::total_cmp);
    r_grid.dedup();
    feasible.sort_unstable();
    let conditions: Vec<(f64, usize)> = r_grid
        .iter()
        .flat_map(|&r| feasible.iter().map(move |&n| (r, n)))
        .collect();
    let mut result = evaluate_conditions(&protocol, &conditions, opts)?;
    result.warnings = warnings;
    result.nbc_grid = nbc_grid;
    Ok(result)
}

/// The baseline alone, without any BC condition.
pub fn baseline_only(dataset: &Dataset, cfg: &ProtocolConfig, opts: &RunOptions) -> Result<GridResult> {
    let protocol = Protocol::new(dataset, cfg)?;
    evaluate_conditions(&protocol, &[], opts)
}

fn evaluate_conditions(
    protocol: &Protocol,
    conditions: &[(f64, usize)],
    opts: &RunOptions,
) -> Result<GridResult> {
    let n_max = conditions.iter().map(|c| c.1).max().unwrap_or(0);

    // Per pair: baseline scores followed by one entry per condition.
    let pairs = protocol.pairs();
    let done = AtomicUsize::new(0);
    let job = |&(a, i): &(usize, usize)| -> Result<Vec<PairResult>> {
        let others = protocol.others(a, i);
        let ranking = protocol.ranking(a, &others, n_max)?;
        let mut out = Vec::with_capacity(conditions.len() + 1);
        out.push(protocol.train_and_score(a, i, &others, None)?);
        for &(r, n) in conditions {
            out.push(protocol.train_and_score(a, i, &others, Some((r, &ranking[..n])))?);
        }
        tick(&done, pairs.len(), opts);
        Ok(out)
    };
    let per_pair: Vec<Vec<PairResult>> = if opts.parallel {
        pairs.par_iter().map(job).collect::<Result<_>>()?
    } else {
        pairs.iter().map(job).collect::<Result<_>>()?
    };

    let evaluate = |k: usize| -> Result<(EvalReport, RocCurve<f64>)> {
        let column: Vec<PairResult> = per_pair.iter().map(|p| p[k].clone()).collect();
        let curve = roc_points(&pool_scores(&column)?);
        Ok((EvalReport::from_curve(&curve), curve))
    };
    let (baseline, baseline_curve) = evaluate(0)?;
    let conditions = conditions
        .iter()
        .enumerate()
        .map(|(k, &(r, n_bc))| {
            let (report, curve) = evaluate(k + 1)?;
            Ok(ConditionResult {
                r,
                n_bc,
                star: report.beats(&baseline),
                report,
                curve,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GridResult {
        baseline,
        baseline_curve,
        conditions,
        warnings: Vec::new(),
        n_pairs: pairs.len(),
        nbc_grid: Vec::new(),
    })
}
