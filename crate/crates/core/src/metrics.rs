//! Evaluation metrics for positioning and change detection.
//!
//! Positioning quality is summarized by the empirical CDF of location errors
//! ([`EcdfCurve`]), the spread of an estimate cloud ([`dispersiveness`]), and
//! its closest approach to the truth ([`bias`]). Parameter sweeps are
//! summarized by the half-power (3 dB) bandwidth of their response curve
//! ([`bandwidth_3db`]). Detection quality uses the standard confusion matrix
//! ([`ConfusionMatrix`]) and threshold-free ROC analysis ([`roc_auc`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Empirical cumulative distribution of location errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    sorted_errors_m: Vec<f64>,
}

impl EcdfCurve {
    /// Builds the curve from raw errors (any order).
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] when `errors` is empty or contains a
    /// negative or non-finite value.
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::invalid("an ECDF requires at least one error"));
        }
        if errors.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid("ECDF errors must be finite and non-negative"));
        }
        let mut sorted_errors_m = errors.to_vec();
        sorted_errors_m.sort_unstable_by(f64::total_cmp);
        Ok(EcdfCurve { sorted_errors_m })
    }

    /// Fraction of errors at most `radius_m` (inclusive).
    #[must_use]
    pub fn accuracy_at(&self, radius_m: f64) -> f64 {
        let within = self.sorted_errors_m.partition_point(|e| *e <= radius_m);
        within as f64 / self.sorted_errors_m.len() as f64
    }

    /// Smallest error with at least fraction `q` of the mass at or below it.
    #[must_use]
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.sorted_errors_m.len();
        let rank = (q.clamp(0.0, 1.0) * n as f64).ceil() as usize;
        self.sorted_errors_m[rank.saturating_sub(1).min(n - 1)]
    }

    /// Mean error.
    #[must_use]
    pub fn mean(&self) -> f64 {
        self.sorted_errors_m.iter().sum::<f64>() / self.sorted_errors_m.len() as f64
    }

    /// The `(error, cumulative fraction)` staircase, ascending.
    #[must_use]
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted_errors_m.len() as f64;
        self.sorted_errors_m
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, (i + 1) as f64 / n))
            .collect()
    }

    /// Number of errors behind the curve.
    #[must_use]
    pub fn len(&self) -> usize {
        self.sorted_errors_m.len()
    }

    /// Whether the curve is empty (never true for a constructed curve).
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.sorted_errors_m.is_empty()
    }
}

/// Convenience wrapper: fraction of `errors` at most `radius_m`.
///
/// # Errors
/// See [`EcdfCurve::from_errors`].
pub fn ecdf_accuracy(errors: &[f64], radius_m: f64) -> Result<f64> {
    Ok(EcdfCurve::from_errors(errors)?.accuracy_at(radius_m))
}

/// Area of the scaled covariance ellipse of a location cloud (m²):
/// `pi * scale² * sqrt(lambda1 * lambda2)` over the sample covariance
/// eigenvalues. A single location has zero dispersion.
///
/// # Errors
/// Returns [`Error::InvalidInput`] when `locations` is empty or `scale` is
/// not positive.
pub fn dispersiveness(locations: &[[f64; 2]], scale: f64) -> Result<f64> {
    if locations.is_empty() {
        return Err(Error::invalid("dispersiveness requires at least one location"));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid("dispersiveness scale must be finite and > 0"));
    }
    let n = locations.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mean_x = locations.iter().map(|l| l[0]).sum::<f64>() / n as f64;
    let mean_y = locations.iter().map(|l| l[1]).sum::<f64>() / n as f64;
    let denom = (n - 1) as f64;
    let mut cov_xx = 0.0;
    let mut cov_yy = 0.0;
    let mut cov_xy = 0.0;
    for location in locations {
        let dx = location[0] - mean_x;
        let dy = location[1] - mean_y;
        cov_xx += dx * dx;
        cov_yy += dy * dy;
        cov_xy += dx * dy;
    }
    cov_xx /= denom;
    cov_yy /= denom;
    cov_xy /= denom;
    // Closed-form eigenvalues of the symmetric 2x2 covariance.
    let half_trace = 0.5 * (cov_xx + cov_yy);
    let det = cov_xx * cov_yy - cov_xy * cov_xy;
    let gap = (half_trace * half_trace - det).max(0.0).sqrt();
    let lambda1 = (half_trace + gap).max(0.0);
    let lambda2 = (half_trace - gap).max(0.0);
    Ok(std::f64::consts::PI * scale * scale * (lambda1 * lambda2).sqrt())
}

/// Distance from the truth to the nearest location of the cloud (m).
///
/// # Errors
/// Returns [`Error::InvalidInput`] when `locations` is empty.
pub fn bias(locations: &[[f64; 2]], truth: [f64; 2]) -> Result<f64> {
    locations
        .iter()
        .map(|l| {
            let dx = l[0] - truth[0];
            let dy = l[1] - truth[1];
            (dx * dx + dy * dy).sqrt()
        })
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::invalid("bias requires at least one location"))
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// The swept parameter value.
    pub parameter: f64,
    /// The response at that parameter.
    pub value: f64,
}

/// The half-power plateau of a sweep response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth3Db {
    /// Smallest parameter still within the plateau.
    pub lower: f64,
    /// Parameter of the response minimum (first minimum on ties).
    pub best: f64,
    /// Largest parameter still within the plateau.
    pub upper: f64,
}

impl Bandwidth3Db {
    /// Plateau width in parameter units.
    #[must_use]
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Finds the response minimum and walks outward while the response stays
/// within a factor sqrt(2) of it (the 3 dB analogy). The walk stops at the
/// first point outside the band, so the plateau is always contiguous.
///
/// # Errors
/// Returns [`Error::InvalidInput`] when `points` is empty, unsorted by
/// parameter, or contains non-finite values.
pub fn bandwidth_3db(points: &[SweepPoint]) -> Result<Bandwidth3Db> {
    if points.is_empty() {
        return Err(Error::invalid("bandwidth requires at least one sweep point"));
    }
    for pair in points.windows(2) {
        if !(pair[0].parameter < pair[1].parameter) {
            return Err(Error::invalid("sweep points must be strictly ascending in parameter"));
        }
    }
    if points.iter().any(|p| !(p.parameter.is_finite() && p.value.is_finite())) {
        return Err(Error::invalid("sweep points must be finite"));
    }
    let best_index = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty by the guard above");
    let ceiling = std::f64::consts::SQRT_2 * points[best_index].value;
    let mut lower_index = best_index;
    while lower_index > 0 && points[lower_index - 1].value <= ceiling {
        lower_index -= 1;
    }
    let mut upper_index = best_index;
    while upper_index + 1 < points.len() && points[upper_index + 1].value <= ceiling {
        upper_index += 1;
    }
    Ok(Bandwidth3Db {
        lower: points[lower_index].parameter,
        best: points[best_index].parameter,
        upper: points[upper_index].parameter,
    })
}

/// Binary detection counts; positives are changed features.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Changed features predicted changed.
    pub true_positives: usize,
    /// Stable features predicted changed.
    pub false_positives: usize,
    /// Stable features predicted stable.
    pub true_negatives: usize,
    /// Changed features predicted stable.
    pub false_negatives: usize,
}

impl ConfusionMatrix {
    /// Total number of scored features.
    #[must_use]
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    /// Fraction of correct predictions.
    #[must_use]
    pub fn accuracy(&self) -> f64 {
        Self::ratio(self.true_positives + self.true_negatives, self.total())
    }

    /// Fraction of predicted positives that are real.
    #[must_use]
    pub fn precision(&self) -> f64 {
        Self::ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    /// Fraction of real positives that were found (true-positive rate).
    #[must_use]
    pub fn recall(&self) -> f64 {
        Self::ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    /// Fraction of real negatives wrongly flagged.
    #[must_use]
    pub fn false_positive_rate(&self) -> f64 {
        Self::ratio(self.false_positives, self.false_positives + self.true_negatives)
    }

    /// Harmonic mean of precision and recall.
    #[must_use]
    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Accumulates counts from another matrix.
    pub fn absorb(&mut self, other: &ConfusionMatrix) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.true_negatives += other.true_negatives;
        self.false_negatives += other.false_negatives;
    }
}

/// Counts `(predicted_changed, actually_changed)` pairs.
#[must_use]
pub fn confusion<I: IntoIterator<Item = (bool, bool)>>(pairs: I) -> ConfusionMatrix {
    let mut matrix = ConfusionMatrix::default();
    for (predicted, actual) in pairs {
        match (predicted, actual) {
            (true, true) => matrix.true_positives += 1,
            (true, false) => matrix.false_positives += 1,
            (false, false) => matrix.true_negatives += 1,
            (false, true) => matrix.false_negatives += 1,
        }
    }
    matrix
}

/// Thresholds `(score, actually_changed)` pairs at `threshold` (predicted
/// changed when the score reaches it) and counts the outcomes.
#[must_use]
pub fn confusion_from_scores(scores: &[(f64, bool)], threshold: f64) -> ConfusionMatrix {
    confusion(scores.iter().map(|&(score, actual)| (score >= threshold, actual)))
}

/// One operating point of a ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Decision threshold producing this point (`+inf` anchors the origin).
    pub threshold: f64,
    /// False-positive rate at the threshold.
    pub false_positive_rate: f64,
    /// True-positive rate at the threshold.
    pub true_positive_rate: f64,
}

/// A ROC curve with its area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Operating points from the origin to (1, 1).
    pub points: Vec<RocPoint>,
    /// Trapezoidal area under the curve.
    pub auc: f64,
}

/// Sweeps the decision threshold over `(score, actually_changed)` pairs and
/// returns the ROC curve with its trapezoidal area. Scores must lie in
/// `[0, 1]`; the thresholds are the distinct scores plus the anchors 0, 1,
/// and `+inf`, descending, so the curve always spans (0, 0) to (1, 1).
///
/// # Errors
/// Returns [`Error::InvalidInput`] when `scores` is empty, has a score
/// outside `[0, 1]`, or lacks one of the classes (the area is undefined
/// without both).
pub fn roc_auc(scores: &[(f64, bool)]) -> Result<RocCurve> {
    if scores.is_empty() {
        return Err(Error::invalid("a ROC curve requires at least one score"));
    }
    if scores.iter().any(|&(s, _)| !(0.0..=1.0).contains(&s)) {
        return Err(Error::invalid("ROC scores must lie in [0, 1]"));
    }
    let positives = scores.iter().filter(|&&(_, actual)| actual).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("a ROC curve requires both classes"));
    }
    let mut thresholds: Vec<f64> = scores.iter().map(|&(s, _)| s).collect();
    thresholds.push(0.0);
    thresholds.push(1.0);
    thresholds.sort_unstable_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        false_positive_rate: 0.0,
        true_positive_rate: 0.0,
    }];
    for threshold in thresholds {
        let matrix = confusion_from_scores(scores, threshold);
        points.push(RocPoint {
            threshold,
            false_positive_rate: matrix.false_positive_rate(),
            true_positive_rate: matrix.recall(),
        });
    }
    let auc = points
        .windows(2)
        .map(|pair| {
            let dx = pair[1].false_positive_rate - pair[0].false_positive_rate;
            let avg_y = 0.5 * (pair[0].true_positive_rate + pair[1].true_positive_rate);
            dx * avg_y
        })
        .sum();
    Ok(RocCurve { points, auc })
}
