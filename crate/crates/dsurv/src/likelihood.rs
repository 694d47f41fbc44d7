//! Survival curves, the interval log-likelihood, and losses.
//!
//! The model predicts, per interval, the conditional probability of
//! surviving that interval (`1 - h_j`). Cumulative survival through the end
//! of interval `j` is the running product of those conditionals. The
//! training loss is the negative log-likelihood of the encoded targets; a
//! squared-error loss in the style of earlier discrete-time network models
//! is provided for comparison only, since its minimizer differs from the
//! likelihood's once covariates enter.

use crate::error::{Error, Result};
use crate::timegrid::{EncodedTarget, TimeGrid};
use ndarray::Array1;

/// Numerical-stability epsilon: conditional survival probabilities are
/// clamped to `[EPS, 1 - EPS]` before any logarithm.
pub const EPS: f64 = 1e-7;

/// Clamp a conditional survival probability into `[EPS, 1 - EPS]`.
#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Per-interval conditional survival plus its running product.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    /// Conditional probability of surviving each interval, clamped.
    pub cond_surv: Array1<f64>,
    /// Probability of surviving through the end of each interval.
    pub cum_surv: Array1<f64>,
}

/// Build a survival curve from conditional survival probabilities.
///
/// Entries are clamped into `[EPS, 1 - EPS]` first; the cumulative curve is
/// the running product of the clamped entries.
pub fn survival_curve(cond_surv: &[f64]) -> Result<SurvivalCurve> {
    if cond_surv.is_empty() {
        return Err(Error::invalid("survival curve needs at least one interval"));
    }
    if cond_surv.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("conditional survival must be finite"));
    }
    let cond: Array1<f64> = cond_surv.iter().map(|&p| clamp_prob(p)).collect();
    let mut running = 1.0;
    let cum = cond.mapv(|c| {
        running *= c;
        running
    });
    Ok(SurvivalCurve {
        cond_surv: cond,
        cum_surv: cum,
    })
}

impl SurvivalCurve {
    pub fn len(&self) -> usize {
        self.cond_surv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cond_surv.is_empty()
    }

    /// Survival probability at an arbitrary time `t <= t_n`, by linear
    /// interpolation of the cumulative curve between interval boundaries,
    /// with `S(0) = 1`.
    ///
    /// The model carries no information past the last boundary, so times
    /// beyond it are an error rather than an extrapolation.
    pub fn survival_at(&self, grid: &TimeGrid, t: f64) -> Result<f64> {
        if grid.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "curve has {} intervals but grid has {}",
                self.len(),
                grid.len()
            )));
        }
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
        }
        if t > grid.horizon() {
            return Err(Error::OutOfHorizon {
                t,
                horizon: grid.horizon(),
            });
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        // t lies in (t_{j-1}, t_j]; j < n because t <= horizon.
        let j = grid.uppers().partition_point(|&upper| upper < t);
        let lo_t = grid.lower(j);
        let lo_s = if j == 0 { 1.0 } else { self.cum_surv[j - 1] };
        let hi_t = grid.uppers()[j];
        let hi_s = self.cum_surv[j];
        Ok(lo_s + (hi_s - lo_s) * (t - lo_t) / (hi_t - lo_t))
    }
}

fn check_lengths(curve: &SurvivalCurve, target: &EncodedTarget) -> Result<()> {
    if curve.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "curve has {} intervals but target has {}",
            curve.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Log-likelihood of one subject's encoded target under a predicted curve:
/// `sum_i ln(1 + surv_s(i) * (c_i - 1)) + ln(1 - surv_f(i) * c_i)`.
///
/// For uncensored subjects this is `ln(h_j) + sum_{i<j} ln(1 - h_i)`; for
/// censored subjects it is the sum of `ln(1 - h_i)` over credited intervals.
pub fn loglik(curve: &SurvivalCurve, target: &EncodedTarget) -> Result<f64> {
    check_lengths(curve, target)?;
    let mut total = 0.0;
    for i in 0..curve.len() {
        let c = curve.cond_surv[i];
        total += (1.0 + target.surv_s[i] * (c - 1.0)).ln();
        total += (1.0 - target.surv_f[i] * c).ln();
    }
    Ok(total)
}

/// Mean negative log-likelihood over a batch.
///
/// The mean (rather than sum) reduction keeps the learning rate invariant to
/// batch size; the summed likelihood for model comparison is available by
/// multiplying back.
pub fn batch_loss(curves: &[SurvivalCurve], targets: &[EncodedTarget]) -> Result<f64> {
    if curves.is_empty() {
        return Err(Error::invalid("batch loss needs a nonempty batch"));
    }
    if curves.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} curves vs {} targets",
            curves.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (curve, target) in curves.iter().zip(targets) {
        total -= loglik(curve, target)?;
    }
    Ok(total / curves.len() as f64)
}

/// Gradient of one subject's negative log-likelihood with respect to each
/// conditional survival entry, evaluated on the clamped curve.
pub fn loss_grad(curve: &SurvivalCurve, target: &EncodedTarget) -> Result<Array1<f64>> {
    check_lengths(curve, target)?;
    let n = curve.len();
    let mut grad = Array1::zeros(n);
    for i in 0..n {
        let c = curve.cond_surv[i];
        let s = target.surv_s[i];
        let f = target.surv_f[i];
        grad[i] = -s / (1.0 + s * (c - 1.0)) + f / (1.0 - f * c);
    }
    Ok(grad)
}

/// Squared-error comparison loss: per interval, `½(1 - h)²` for each failure
/// plus `½ h²` for each survivor, summed over the batch.
///
/// A subject counts as a failure in interval `j` when `surv_f(j) = 1` and as
/// a survivor when `surv_s(j) = 1`.
pub fn brown_loss(curves: &[SurvivalCurve], targets: &[EncodedTarget]) -> Result<f64> {
    if curves.is_empty() {
        return Err(Error::invalid("loss needs a nonempty batch"));
    }
    if curves.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} curves vs {} targets",
            curves.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (curve, target) in curves.iter().zip(targets) {
        check_lengths(curve, target)?;
        for i in 0..curve.len() {
            let h = 1.0 - curve.cond_surv[i];
            if target.surv_f[i] == 1.0 {
                total += 0.5 * (1.0 - h) * (1.0 - h);
            }
            if target.surv_s[i] == 1.0 {
                total += 0.5 * h * h;
            }
        }
    }
    Ok(total)
}
