//! Censoring-aware evaluation: Harrell's C-index, the censored Brier score
//! with inverse-probability-of-censoring weights, and quantile-binned
//! calibration tables.

use crate::baselines::kaplan_meier;
use crate::error::{Error, Result};

fn check_metric_inputs(len: usize, times: &[f64], events: &[bool]) -> Result<()> {
    if len != times.len() || len != events.len() {
        return Err(Error::ShapeMismatch(format!(
            "{len} predictions vs {} times vs {} event flags",
            times.len(),
            events.len()
        )));
    }
    if len == 0 {
        return Err(Error::invalid("metrics need a nonempty cohort"));
    }
    Ok(())
}

/// Harrell's concordance index over comparable pairs.
///
/// A pair is comparable when the smaller time carries an event, or the times
/// are tied with exactly one event (the event is taken as the shorter life).
/// Concordance credits 1 when the higher risk score goes with the shorter
/// time, 0.5 on tied risk, 0 otherwise. Rank neural-model subjects by
/// `1 - S(365)` to match the usual one-year convention.
pub fn c_index(risk: &[f64], times: &[f64], events: &[bool]) -> Result<f64> {
    check_metric_inputs(risk.len(), times, events)?;
    let n = risk.len();
    let mut credit = 0.0;
    let mut comparable = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            // Orient the pair so `short` is the subject whose event makes
            // the comparison informative.
            let (short, long) = if times[i] < times[j] {
                (i, j)
            } else if times[j] < times[i] {
                (j, i)
            } else {
                // Tied times: comparable only when exactly one has an event.
                if events[i] == events[j] {
                    continue;
                }
                if events[i] {
                    (i, j)
                } else {
                    (j, i)
                }
            };
            if !events[short] {
                continue;
            }
            comparable += 1;
            if risk[short] > risk[long] {
                credit += 1.0;
            } else if risk[short] == risk[long] {
                credit += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(Error::UndefinedMetric(
            "no comparable pairs for the concordance index".into(),
        ));
    }
    Ok(credit / comparable as f64)
}

/// Censored Brier score at time `t` with inverse-probability-of-censoring
/// weights.
///
/// `G` is the Kaplan-Meier estimate of the censoring distribution (event
/// indicator flipped); failures before `t` are weighted by `1/G(T⁻)` and
/// subjects still at risk by `1/G(t)`. Subjects censored at or before `t`
/// contribute nothing but still count in the denominator.
pub fn brier_censored(
    pred_surv_at_t: &[f64],
    times: &[f64],
    events: &[bool],
    t: f64,
) -> Result<f64> {
    check_metric_inputs(pred_surv_at_t.len(), times, events)?;
    if !(t >= 0.0) {
        return Err(Error::invalid("evaluation time must be nonnegative"));
    }
    let flipped: Vec<bool> = events.iter().map(|&e| !e).collect();
    let censor_surv = kaplan_meier(times, &flipped)?;

    let n = times.len() as f64;
    let g_at_t = censor_surv.eval(t);
    let mut total = 0.0;
    for i in 0..times.len() {
        let s = pred_surv_at_t[i];
        if times[i] <= t && events[i] {
            let g = censor_surv.eval_left(times[i]);
            if g <= 0.0 {
                return Err(Error::UndefinedMetric(format!(
                    "censoring survival is zero just before time {}",
                    times[i]
                )));
            }
            total += s * s / g;
        } else if times[i] > t {
            if g_at_t <= 0.0 {
                return Err(Error::UndefinedMetric(format!(
                    "censoring survival is zero at evaluation time {t}"
                )));
            }
            total += (1.0 - s) * (1.0 - s) / g_at_t;
        }
        // Censored at or before t: weight zero.
    }
    Ok(total / n)
}

/// One calibration bin: subjects grouped by predicted survival.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    /// Zero-based bin index, lowest predicted survival first.
    pub bin: usize,
    pub mean_predicted: f64,
    /// Kaplan-Meier survival of the bin at the evaluation time; `None` when
    /// the time lies beyond the bin's last observed follow-up.
    pub actual: Option<f64>,
    pub count: usize,
}

/// Quantile-binned calibration at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    pub time: f64,
    pub rows: Vec<CalibrationRow>,
}

/// Group subjects into `groups` near-equal bins by predicted survival
/// (stable order breaks ties) and compare the bin means against bin-level
/// Kaplan-Meier estimates at `t`.
pub fn calibration_table(
    pred_surv_at_t: &[f64],
    times: &[f64],
    events: &[bool],
    t: f64,
    groups: usize,
) -> Result<CalibrationTable> {
    check_metric_inputs(pred_surv_at_t.len(), times, events)?;
    if groups == 0 {
        return Err(Error::invalid("need at least one calibration group"));
    }
    let n = pred_surv_at_t.len();
    if n < groups {
        return Err(Error::invalid(format!(
            "cohort of {n} is smaller than {groups} groups"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pred_surv_at_t[a].total_cmp(&pred_surv_at_t[b]).then(a.cmp(&b)));

    let mut rows = Vec::with_capacity(groups);
    let base = n / groups;
    let remainder = n % groups;
    let mut start = 0;
    for bin in 0..groups {
        let size = base + usize::from(bin < remainder);
        let members = &order[start..start + size];
        start += size;

        let mean_predicted =
            members.iter().map(|&i| pred_surv_at_t[i]).sum::<f64>() / size as f64;
        let bin_times: Vec<f64> = members.iter().map(|&i| times[i]).collect();
        let bin_events: Vec<bool> = members.iter().map(|&i| events[i]).collect();
        let max_time = bin_times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let km = kaplan_meier(&bin_times, &bin_events)?;
        // Beyond the bin's follow-up the estimate exists only if the curve
        // already reached zero; otherwise the remaining mass is unresolved.
        let actual = if t > max_time && km.eval(max_time) > 0.0 {
            None
        } else {
            Some(km.eval(t))
        };
        rows.push(CalibrationRow {
            bin,
            mean_predicted,
            actual,
            count: size,
        });
    }
    Ok(CalibrationTable { time: t, rows })
}
