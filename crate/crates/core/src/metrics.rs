//! FAR/FRR curves, EER, AUC and FRR at fixed FAR.
//!
//! A sample is accepted when its score is at least the threshold. FAR is
//! normalized by impostor attempts and FRR by genuine attempts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Real};

/// FAR operating points reported alongside EER, as fractions.
pub const REPORT_FARS: [f64; 3] = [0.0001, 0.001, 0.01];

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet<T> {
    genuine: Vec<T>,
    impostor: Vec<T>,
}

impl<T: Real> ScoreSet<T> {
    pub fn new(genuine: Vec<T>, impostor: Vec<T>) -> Result<Self> {
        if genuine.is_empty() || impostor.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "need genuine and impostor scores (got {} and {})",
                genuine.len(),
                impostor.len()
            )));
        }
        if !all_finite(&genuine) || !all_finite(&impostor) {
            return Err(Error::NonFinite("scores"));
        }
        Ok(Self { genuine, impostor })
    }

    pub fn genuine(&self) -> &[T] {
        &self.genuine
    }

    pub fn impostor(&self) -> &[T] {
        &self.impostor
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint<T> {
    /// `+inf` for the reject-all sentinel.
    pub threshold: T,
    pub far: T,
    pub frr: T,
    pub tar: T,
}

/// Operating points in ascending threshold order. The first point accepts
/// everything (FAR 1, FRR 0) and the last is the reject-all sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<T> {
    points: Vec<RocPoint<T>>,
}

impl<T: Real> RocCurve<T> {
    /// Builds a curve from explicit `(threshold, far, frr)` points, checking
    /// ordering, monotonicity and the two endpoints.
    pub fn from_points(points: &[(T, T, T)]) -> Result<Self> {
        let pts: Vec<RocPoint<T>> = points
            .iter()
            .map(|&(threshold, far, frr)| RocPoint {
                threshold,
                far,
                frr,
                tar: T::one() - frr,
            })
            .collect();
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("invalid curve: {msg}")));
        let (Some(first), Some(last)) = (pts.first(), pts.last()) else {
            return bad("no points");
        };
        if first.far != T::one() || first.frr != T::zero() {
            return bad("must start at FAR 1, FRR 0");
        }
        if last.far != T::zero() || last.frr != T::one() {
            return bad("must end at FAR 0, FRR 1");
        }
        for w in pts.windows(2) {
            if !(w[0].threshold < w[1].threshold && w[1].far <= w[0].far && w[1].frr >= w[0].frr) {
                return bad("points must be monotone in threshold");
            }
        }
        Ok(Self { points: pts })
    }

    pub fn points(&self) -> &[RocPoint<T>] {
        &self.points
    }
}

fn sorted<T: Real>(v: &[T]) -> Vec<T> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    s
}

pub fn roc_points<T: Real>(scores: &ScoreSet<T>) -> RocCurve<T> {
    let gen = sorted(&scores.genuine);
    let imp = sorted(&scores.impostor);
    let (ng, ni) = (T::from_count(gen.len()), T::from_count(imp.len()));

    let mut thresholds: Vec<T> = gen.iter().chain(&imp).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    thresholds.dedup();

    // Number of scores strictly below the threshold, advanced monotonically.
    let (mut g_below, mut i_below) = (0usize, 0usize);
    let mut points = Vec::with_capacity(thresholds.len() + 1);
    for &t in &thresholds {
        while g_below < gen.len() && gen[g_below] < t {
            g_below += 1;
        }
        while i_below < imp.len() && imp[i_below] < t {
            i_below += 1;
        }
        let frr = T::from_count(g_below) / ng;
        points.push(RocPoint {
            threshold: t,
            far: T::from_count(imp.len() - i_below) / ni,
            frr,
            tar: T::one() - frr,
        });
    }
    points.push(RocPoint {
        threshold: T::infinity(),
        far: T::zero(),
        frr: T::one(),
        tar: T::zero(),
    });
    RocCurve { points }
}

/// Equal error rate in percent, with the threshold at which it occurs.
///
/// The threshold is interpolated like the rates; when the crossing reaches
/// the reject-all sentinel the last finite threshold is reported.
pub fn eer_with_threshold<T: Real>(curve: &RocCurve<T>) -> (T, T) {
    let p = &curve.points;
    let hundred = T::lit(100.0);
    let k = p
        .iter()
        .position(|q| q.far - q.frr <= T::zero())
        .expect("curve ends at FAR 0, FRR 1");
    let (a, b) = (p[k - 1], p[k]);
    let da = a.far - a.frr;
    let db = b.far - b.frr;
    if db == T::zero() {
        return (b.far * hundred, if b.threshold.is_finite() { b.threshold } else { a.threshold });
    }
    let t = da / (da - db);
    let rate = a.far + t * (b.far - a.far);
    let threshold = if b.threshold.is_finite() {
        a.threshold + t * (b.threshold - a.threshold)
    } else {
        a.threshold
    };
    (rate * hundred, threshold)
}

pub fn eer<T: Real>(curve: &RocCurve<T>) -> T {
    eer_with_threshold(curve).0
}

/// Trapezoidal area under TAR versus FAR.
pub fn auc<T: Real>(curve: &RocCurve<T>) -> T {
    curve
        .points
        .windows(2)
        .map(|w| (w[0].far - w[1].far) * (w[0].tar + w[1].tar) / T::lit(2.0))
        .sum()
}

/// FRR in percent at `target_far` (a fraction), interpolated linearly in FAR.
pub fn frr_at_far<T: Real>(curve: &RocCurve<T>, target_far: T) -> Result<T> {
    if !(target_far > T::zero() && target_far < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "target FAR {target_far} must lie in (0, 1)"
        )));
    }
    let p = &curve.points;
    let k = p
        .iter()
        .position(|q| q.far <= target_far)
        .expect("curve ends at FAR 0");
    let b = p[k];
    let frr = if b.far == target_far {
        b.frr
    } else {
        let a = p[k - 1];
        a.frr + (target_far - a.far) * (b.frr - a.frr) / (b.far - a.far)
    };
    Ok(frr * T::lit(100.0))
}

/// FRR percentages at the three reporting FARs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrrAtFar {
    #[serde(rename = "0.01")]
    pub far_0_01: f64,
    #[serde(rename = "0.1")]
    pub far_0_1: f64,
    #[serde(rename = "1")]
    pub far_1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub eer_pct: f64,
    pub eer_threshold: f64,
    pub frr_at_far_pct: FrrAtFar,
}

impl EvalReport {
    pub fn from_curve<T: Real>(curve: &RocCurve<T>) -> Self {
        let (e, thr) = eer_with_threshold(curve);
        let at = |f: f64| {
            frr_at_far(curve, T::lit(f))
                .expect("reporting FARs are in range")
                .as_f64()
        };
        Self {
            auc: auc(curve).as_f64(),
            eer_pct: e.as_f64(),
            eer_threshold: thr.as_f64(),
            frr_at_far_pct: FrrAtFar {
                far_0_01: at(REPORT_FARS[0]),
                far_0_1: at(REPORT_FARS[1]),
                far_1: at(REPORT_FARS[2]),
            },
        }
    }

    pub fn from_scores<T: Real>(scores: &ScoreSet<T>) -> Self {
        Self::from_curve(&roc_points(scores))
    }

    /// True when this report improves on `baseline` in all five indexes.
    pub fn beats(&self, baseline: &EvalReport) -> bool {
        self.auc > baseline.auc
            && self.eer_pct < baseline.eer_pct
            && self.frr_at_far_pct.far_0_01 < baseline.frr_at_far_pct.far_0_01
            && self.frr_at_far_pct.far_0_1 < baseline.frr_at_far_pct.far_0_1
            && self.frr_at_far_pct.far_1 < baseline.frr_at_far_pct.far_1
    }
}

/// Writes `threshold,far,frr,tar` rows; the sentinel threshold is `inf`.
pub fn write_det_csv<T: Real, W: Write>(curve: &RocCurve<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "far", "frr", "tar"])?;
    for p in &curve.points {
        let thr = if p.threshold.is_finite() {
            p.threshold.to_string()
        } else {
            "inf".to_string()
        };
        w.write_record([thr, p.far.to_string(), p.frr.to_string(), p.tar.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(g: &[f64], i: &[f64]) -> RocCurve<f64> {
        roc_points(&ScoreSet::new(g.to_vec(), i.to_vec()).unwrap())
    }

    #[test]
    fn three_by_three_example() {
        let c = curve(&[0.9, 0.8, 0.3], &[0.7, 0.2, 0.1]);
        let at = c.points().iter().find(|p| p.threshold == 0.7).unwrap();
        assert_eq!((at.far, at.frr), (1.0 / 3.0, 1.0 / 3.0));
        assert!((eer(&c) - 100.0 / 3.0).abs() < 1e-9);
        assert!((auc(&c) - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_separation() {
        let c = curve(&[0.9, 0.8], &[0.1, 0.2]);
        assert!(c.points().iter().any(|p| p.far == 0.0 && p.frr == 0.0));
        assert_eq!(eer(&c), 0.0);
        assert_eq!(auc(&c), 1.0);
        for t in REPORT_FARS {
            assert_eq!(frr_at_far(&c, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn identical_distributions() {
        let s = [0.1, 0.4, 0.4, 0.8];
        let c = curve(&s, &s);
        assert_eq!(eer(&c), 50.0);
        assert_eq!(auc(&c), 0.5);
        for p in c.points() {
            assert_eq!(p.far, 1.0 - p.frr);
        }
    }

    #[test]
    fn frr_interpolates_in_far() {
        let c = RocCurve::from_points(&[
            (0.0, 1.0, 0.0),
            (0.3, 0.2, 0.1),
            (0.6, 0.05, 0.3),
            (f64::INFINITY, 0.0, 1.0),
        ])
        .unwrap();
        assert!((frr_at_far(&c, 0.1).unwrap() - 70.0 / 3.0).abs() < 1e-9);
        assert!((frr_at_far(&c, 0.2).unwrap() - 10.0).abs() < 1e-12);
        // Below the smallest non-zero FAR: toward the far=0 endpoint.
        assert!((frr_at_far(&c, 0.025).unwrap() - 65.0).abs() < 1e-9);
        assert!(frr_at_far(&c, 0.0).is_err());
    }

    #[test]
    fn exact_far_picks_lowest_frr() {
        let c = curve(&[0.5, 0.6, 0.9, 0.95], &[0.1, 0.2, 0.3, 0.7]);
        // FAR 0.25 holds for thresholds 0.5 and 0.6 and 0.7.
        assert_eq!(frr_at_far(&c, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn from_points_validates() {
        assert!(RocCurve::<f64>::from_points(&[]).is_err());
        assert!(RocCurve::from_points(&[(0.0, 1.0, 0.0), (1.0, 0.5, 0.5)]).is_err());
        assert!(RocCurve::from_points(&[(0.0, 1.0, 0.0), (1.0, 0.0, 0.2), (2.0, 0.0, 1.0)]).is_ok());
        assert!(RocCurve::from_points(&[(1.0, 1.0, 0.0), (0.0, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn empty_or_nan_scores_rejected() {
        assert!(ScoreSet::<f64>::new(vec![], vec![0.1]).is_err());
        assert!(ScoreSet::new(vec![f64::NAN], vec![0.1]).is_err());
    }

    #[test]
    fn det_csv_marks_sentinel() {
        let c = curve(&[0.9], &[0.1]);
        let mut buf = Vec::new();
        write_det_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "threshold,far,frr,tar\n0.1,1,0,1\n0.9,0,0,1\ninf,0,1,0\n"
        );
    }

    #[test]
    fn star_needs_all_five() {
        let base = EvalReport {
            auc: 0.99,
            eer_pct: 2.0,
            eer_threshold: 0.5,
            frr_at_far_pct: FrrAtFar {
                far_0_01: 30.0,
                far_0_1: 20.0,
                far_1: 5.0,
            },
        };
        let mut better = base;
        better.auc = 0.995;
        better.eer_pct = 1.5;
        better.frr_at_far_pct = FrrAtFar {
            far_0_01: 29.0,
            far_0_1: 19.0,
            far_1: 4.0,
        };
        assert!(better.beats(&base));
        let mut tie = better;
        tie.frr_at_far_pct.far_0_01 = 30.0;
        assert!(!tie.beats(&base));
        assert!(!base.beats(&base));
    }
}
