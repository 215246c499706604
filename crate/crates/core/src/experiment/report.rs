use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{EvalReport, FrrAtFar, RocCurve};

use super::{GridResult, ProtocolConfig, SplitPolicy};

/// Minimum move, in decades of FAR or FRR, between stored DET points.
const DET_STEP_DECADES: f64 = 0.01;
const DET_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    /// `None` for the reject-all sentinel.
    pub threshold: Option<f64>,
    pub far: f64,
    pub frr: f64,
    pub tar: f64,
}

/// Thins a curve for storage, keeping both endpoints and every point that
/// moves FAR or FRR by at least a hundredth of a decade.
pub fn decimate(curve: &RocCurve<f64>) -> Vec<DetPoint> {
    let pts = curve.points();
    let log = |v: f64| v.max(DET_FLOOR).log10();
    let mut out: Vec<DetPoint> = Vec::new();
    let mut last = (f64::NAN, f64::NAN);
    for (k, p) in pts.iter().enumerate() {
        let (u, v) = (log(p.far), log(p.frr));
        let keep = k == 0
            || k + 1 == pts.len()
            || (u - last.0).abs() >= DET_STEP_DECADES
            || (v - last.1).abs() >= DET_STEP_DECADES;
        if keep {
            last = (u, v);
            out.push(DetPoint {
                threshold: p.threshold.is_finite().then_some(p.threshold),
                far: p.far,
                frr: p.frr,
                tar: p.tar,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBlock {
    pub auc: f64,
    pub eer_pct: f64,
    pub eer_threshold: f64,
    pub frr_at_far_pct: FrrAtFar,
    pub det: Vec<DetPoint>,
}

impl ScoreBlock {
    fn new(report: &EvalReport, curve: &RocCurve<f64>) -> Self {
        Self {
            auc: report.auc,
            eer_pct: report.eer_pct,
            eer_threshold: report.eer_threshold,
            frr_at_far_pct: report.frr_at_far_pct,
            det: decimate(curve),
        }
    }

    pub fn report(&self) -> EvalReport {
        EvalReport {
            auc: self.auc,
            eer_pct: self.eer_pct,
            eer_threshold: self.eer_threshold,
            frr_at_far_pct: self.frr_at_far_pct,
        }
    }

    /// Writes the stored DET points as `threshold,far,frr,tar`.
    pub fn write_det_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "far", "frr", "tar"])?;
        for p in &self.det {
            let thr = p.threshold.map_or_else(|| "inf".to_string(), |t| t.to_string());
            w.write_record([thr, p.far.to_string(), p.frr.to_string(), p.tar.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub r: f64,
    pub n_bc: usize,
    pub star: bool,
    #[serde(flatten)]
    pub scores: ScoreBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub dataset_sha256: String,
    pub n_subjects: usize,
    pub n_pairs: usize,
    pub rng_seed: u64,
    pub split_policy: SplitPolicy,
    pub n_auth_train: usize,
    pub n_auth_test: usize,
    pub c: f64,
    pub tol: f64,
    pub r_grid: Vec<f64>,
    /// N_BC values as requested.
    pub nbc_grid: Vec<usize>,
    pub scale_nbc: bool,
    /// N_BC values after scaling, before feasibility filtering.
    pub nbc_evaluated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub metadata: ReportMetadata,
    pub baseline: ScoreBlock,
    pub conditions: Vec<ConditionRecord>,
    pub warnings: Vec<String>,
}

impl GridReport {
    pub fn new(
        grid: &GridResult,
        cfg: &ProtocolConfig,
        dataset_sha256: String,
        n_subjects: usize,
    ) -> Self {
        Self {
            metadata: ReportMetadata {
                dataset_sha256,
                n_subjects,
                n_pairs: grid.n_pairs,
                rng_seed: cfg.rng_seed,
                split_policy: cfg.split_policy,
                n_auth_train: cfg.n_auth_train,
                n_auth_test: cfg.n_auth_test,
                c: cfg.c,
                tol: cfg.tol,
                r_grid: cfg.r_grid.clone(),
                nbc_grid: cfg.nbc_grid.clone(),
                scale_nbc: cfg.scale_nbc,
                nbc_evaluated: grid.nbc_grid.clone(),
            },
            baseline: ScoreBlock::new(&grid.baseline, &grid.baseline_curve),
            conditions: grid
                .conditions
                .iter()
                .map(|c| ConditionRecord {
                    r: c.r,
                    n_bc: c.n_bc,
                    star: c.star,
                    scores: ScoreBlock::new(&c.report, &c.curve),
                })
                .collect(),
            warnings: grid.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per condition in the column order of the results table.
    pub fn write_conditions_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "r",
            "n_bc",
            "auc",
            "eer_pct",
            "frr_at_far_0.01",
            "frr_at_far_0.1",
            "frr_at_far_1",
            "star",
        ])?;
        for c in &self.conditions {
            let f = &c.scores.frr_at_far_pct;
            w.write_record([
                c.r.to_string(),
                c.n_bc.to_string(),
                c.scores.auc.to_string(),
                c.scores.eer_pct.to_string(),
                f.far_0_01.to_string(),
                f.far_0_1.to_string(),
                f.far_1.to_string(),
                c.star.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
