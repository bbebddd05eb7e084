//! Matching predictions to ground truth, detection and error metrics, and
//! hyperparameter grid search.

use std::fmt::Write as _;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::config::{Grid, RunConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{haversine_distance, GeoPoint};
use crate::pipeline::{ObjectInstance, PreparedSurvey};
use crate::survey::Survey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub class: String,
    pub position: GeoPoint,
    /// Meters above reference ground.
    pub elevation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Match {
    pub prediction: usize,
    pub truth: usize,
    pub distance: f64,
}

/// Detection and error statistics. Errors are averaged over matched pairs
/// and are 0 when nothing matched.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tp_radius: f64,
    pub predictions: usize,
    pub ground_truth: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Mean and median match distance, meters.
    pub position_error_mean: f64,
    pub position_error_median: f64,
    /// Mean absolute error of the per-object mean and median elevations.
    pub height_error_mean: f64,
    pub height_error_median: f64,
    /// Mean per-object height standard deviation.
    pub height_std_mean: f64,
    pub matches: Vec<Match>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn average(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Greedy one-to-one matching, nearest pair first, within `tp_radius` and
/// between equal classes.
pub fn match_and_score(predictions: &[ObjectInstance], truth: &[GroundTruth], tp_radius: f64) -> EvalReport {
    let mut candidates = Vec::new();
    for (p, pred) in predictions.iter().enumerate() {
        for (t, gt) in truth.iter().enumerate() {
            if pred.class != gt.class {
                continue;
            }
            let distance = haversine_distance(pred.position, gt.position);
            if distance <= tp_radius {
                candidates.push(Match {
                    prediction: p,
                    truth: t,
                    distance,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then((a.prediction, a.truth).cmp(&(b.prediction, b.truth)))
    });
    let mut used_p = vec![false; predictions.len()];
    let mut used_t = vec![false; truth.len()];
    let mut matches = Vec::new();
    for m in candidates {
        if !used_p[m.prediction] && !used_t[m.truth] {
            used_p[m.prediction] = true;
            used_t[m.truth] = true;
            matches.push(m);
        }
    }

    let precision = ratio(matches.len(), predictions.len());
    let recall = ratio(matches.len(), truth.len());
    let distances: Vec<f64> = matches.iter().map(|m| m.distance).collect();
    let err = |f: fn(&ObjectInstance) -> f64| -> Vec<f64> {
        matches
            .iter()
            .map(|m| (f(&predictions[m.prediction]) - truth[m.truth].elevation).abs())
            .collect()
    };
    let stds: Vec<f64> = matches.iter().map(|m| predictions[m.prediction].height.std).collect();
    EvalReport {
        tp_radius,
        predictions: predictions.len(),
        ground_truth: truth.len(),
        precision,
        recall,
        f_score: f_score(precision, recall),
        position_error_mean: average(&distances),
        position_error_median: median(&distances),
        height_error_mean: average(&err(|o| o.height.mean)),
        height_error_median: average(&err(|o| o.height.median)),
        height_std_mean: average(&stds),
        matches,
    }
}

/// One report per class present in either input, then the overall report.
pub fn per_class_reports(
    predictions: &[ObjectInstance],
    truth: &[GroundTruth],
    tp_radius: f64,
) -> Vec<(String, EvalReport)> {
    let mut classes: Vec<String> = predictions
        .iter()
        .map(|p| p.class.clone())
        .chain(truth.iter().map(|t| t.class.clone()))
        .collect();
    classes.sort();
    classes.dedup();
    let mut out: Vec<(String, EvalReport)> = classes
        .into_iter()
        .map(|c| {
            let p: Vec<ObjectInstance> = predictions.iter().filter(|o| o.class == c).cloned().collect();
            let t: Vec<GroundTruth> = truth.iter().filter(|o| o.class == c).cloned().collect();
            let report = match_and_score(&p, &t, tp_radius);
            (c, report)
        })
        .collect();
    out.push(("all".into(), match_and_score(predictions, truth, tp_radius)));
    out
}

/// Fixed-width table with one row per class.
pub fn format_table(rows: &[(String, EvalReport)]) -> String {
    let mut s = String::new();
    let radius = rows.first().map_or(0.0, |(_, r)| r.tp_radius);
    let _ = writeln!(s, "true positive radius: {radius:.3} m");
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>6} {:>9} {:>7} {:>8} {:>10} {:>12} {:>11} {:>13} {:>10}",
        "class", "pred", "truth", "precision", "recall", "f-score", "error mean", "error median",
        "height mean", "height median", "height std"
    );
    for (class, r) in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>6} {:>9.3} {:>7.3} {:>8.3} {:>10.3} {:>12.3} {:>11.3} {:>13.3} {:>10.3}",
            class,
            r.predictions,
            r.ground_truth,
            r.precision,
            r.recall,
            r.f_score,
            r.position_error_mean,
            r.position_error_median,
            r.height_error_mean,
            r.height_error_median,
            r.height_std_mean
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Latitude,
    Longitude,
}

/// Partition of the survey area at a coordinate threshold: the validation
/// half lies below it, the test half at or above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub axis: Axis,
    pub threshold: f64,
}

impl Split {
    /// Threshold at the median truth coordinate along `axis`.
    pub fn at_median(axis: Axis, truth: &[GroundTruth]) -> Self {
        let coords: Vec<f64> = truth.iter().map(|t| Self::coord(axis, t.position)).collect();
        Self {
            axis,
            threshold: median(&coords),
        }
    }

    fn coord(axis: Axis, p: GeoPoint) -> f64 {
        match axis {
            Axis::Latitude => p.lat,
            Axis::Longitude => p.lon,
        }
    }

    pub fn is_validation(&self, p: GeoPoint) -> bool {
        Self::coord(self.axis, p) < self.threshold
    }

    /// Predictions and truth restricted to one half.
    pub fn half(
        &self,
        validation: bool,
        predictions: &[ObjectInstance],
        truth: &[GroundTruth],
    ) -> (Vec<ObjectInstance>, Vec<GroundTruth>) {
        (
            predictions
                .iter()
                .filter(|o| self.is_validation(o.position) == validation)
                .cloned()
                .collect(),
            truth
                .iter()
                .filter(|o| self.is_validation(o.position) == validation)
                .cloned()
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub config: RunConfig,
    /// Report on the data the configuration was selected on.
    pub selection: EvalReport,
    /// Report on the held-out half when a split was used.
    pub test: Option<EvalReport>,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Exhaustive search over `grid`, keeping the configuration with the best
/// f-score, then the lower mean position error, then the earliest
/// combination in (α, β, λ, cutoff) order. With a split, selection uses the
/// validation half only.
pub fn grid_search(
    survey: &Survey,
    truth: &[GroundTruth],
    grid: &Grid,
    base: &RunConfig,
    split: Option<Split>,
) -> Result<TuneResult> {
    base.validate()?;
    let mut candidates = Vec::new();
    let mut skipped = 0;
    for [alpha, beta, lambda, linkage_cutoff] in grid.combinations() {
        let config = RunConfig {
            alpha,
            beta,
            lambda,
            linkage_cutoff,
            ..base.clone()
        };
        match config.validate() {
            Ok(()) => candidates.push(config),
            Err(e) => {
                debug!("skipping α={alpha} β={beta} λ={lambda} cutoff={linkage_cutoff}: {e}");
                skipped += 1;
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::Config(vec!["every grid combination is invalid".into()]));
    }
    if skipped > 0 {
        warn!("skipped {skipped} grid combinations with α + β + λ > 1 or invalid values");
    }

    let prepared = PreparedSurvey::new(survey, base);
    let score = |predictions: &[ObjectInstance], validation: bool| match split {
        Some(s) => {
            let (p, t) = s.half(validation, predictions, truth);
            match_and_score(&p, &t, base.tp_radius)
        }
        None => match_and_score(predictions, truth, base.tp_radius),
    };
    let results = exec::map(base.execution, &candidates, |config| {
        let inner = RunConfig {
            execution: crate::exec::Execution::Sequential,
            ..config.clone()
        };
        prepared.run(&inner).map(|out| (score(&out.instances, true), out.instances))
    });

    let mut best: Option<(usize, EvalReport, Vec<ObjectInstance>)> = None;
    let mut evaluated = 0;
    for (k, result) in results.into_iter().enumerate() {
        let (report, instances) = match result {
            Ok(r) => r,
            Err(e) => {
                warn!("combination {k} failed: {e}");
                skipped += 1;
                continue;
            }
        };
        evaluated += 1;
        let better = best.as_ref().is_none_or(|(_, b, _)| {
            report.f_score > b.f_score
                || (report.f_score == b.f_score && report.position_error_mean < b.position_error_mean)
        });
        if better {
            best = Some((k, report, instances));
        }
    }
    let Some((k, selection, instances)) = best else {
        return Err(Error::Config(vec!["no grid combination could be evaluated".into()]));
    };
    let test = split.map(|_| score(&instances, false));
    Ok(TuneResult {
        config: candidates[k].clone(),
        selection,
        test,
        evaluated,
        skipped,
    })
}
