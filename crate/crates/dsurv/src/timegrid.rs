//! Follow-up time grids and target encoding.
//!
//! Follow-up time is divided into `n` left-closed right-open intervals
//! `[t_{j-1}, t_j)` with an implicit `t_0 = 0`. A `(time, event)` observation
//! is encoded into two indicator vectors: `surv_s` marks the intervals the
//! subject survived through, `surv_f` marks the interval of failure (all
//! zeros when censored). Censoring times in the second half of an interval
//! earn survival credit for that interval; without the half-interval rule
//! the survival estimates would be biased downward.

use crate::error::{Error, Result};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

/// Grids beyond this are almost certainly an argument typo.
const MAX_INTERVALS: usize = 10_000_000;

/// Ordered interval upper limits `t_1 .. t_n`, in days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    uppers: Vec<f64>,
}

impl TimeGrid {
    /// Build a grid from explicit boundaries. Boundaries must be finite,
    /// strictly increasing, and positive.
    pub fn from_boundaries(uppers: Vec<f64>) -> Result<Self> {
        if uppers.is_empty() {
            return Err(Error::invalid("a time grid needs at least one boundary"));
        }
        if uppers.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("grid boundaries must be finite"));
        }
        if uppers[0] <= 0.0 {
            return Err(Error::invalid("the first grid boundary must be positive"));
        }
        if uppers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "grid boundaries must be strictly increasing (duplicates rejected)",
            ));
        }
        Ok(TimeGrid { uppers })
    }

    /// Uniform grid of the given interval width covering `horizon`:
    /// boundaries `width, 2*width, ..., ceil(horizon/width)*width`.
    pub fn uniform(width: f64, horizon: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::invalid("interval width must be positive"));
        }
        if !(horizon >= width) || !horizon.is_finite() {
            return Err(Error::invalid("horizon must be at least one interval wide"));
        }
        let ratio = (horizon / width).ceil();
        if ratio > MAX_INTERVALS as f64 {
            return Err(Error::invalid(format!(
                "horizon / width yields {ratio} intervals; the limit is {MAX_INTERVALS}"
            )));
        }
        let mut count = ratio as usize;
        if (count as f64) * width < horizon {
            count += 1;
        }
        let uppers = (1..=count).map(|k| k as f64 * width).collect();
        TimeGrid::from_boundaries(uppers)
    }

    /// Grid whose interval widths grow with follow-up time, parameterized by
    /// a half-life: boundary `k` (zero-based) sits at
    /// `-ln(1 - x_k) * halflife / ln 2` with `x_k = (k+1)/(count+1)`.
    ///
    /// At `count = 19` the quantile points are `0.05, 0.10, ..., 0.95`.
    pub fn halflife(halflife: f64, count: usize) -> Result<Self> {
        if !(halflife > 0.0) || !halflife.is_finite() {
            return Err(Error::invalid("half-life must be positive"));
        }
        if count < 1 {
            return Err(Error::invalid("interval count must be at least 1"));
        }
        if count > MAX_INTERVALS {
            return Err(Error::invalid(format!(
                "{count} intervals requested; the limit is {MAX_INTERVALS}"
            )));
        }
        let denom = (count + 1) as f64;
        let uppers = (0..count)
            .map(|k| {
                let x = (k + 1) as f64 / denom;
                if x >= 1.0 {
                    return Err(Error::invalid(format!(
                        "quantile point {x} for boundary {k} is not below 1"
                    )));
                }
                Ok(-(1.0 - x).ln() * halflife / std::f64::consts::LN_2)
            })
            .collect::<Result<Vec<_>>>()?;
        TimeGrid::from_boundaries(uppers)
    }

    /// Half-life grid whose last boundary lands on `horizon`: the half-life
    /// is solved from the outermost quantile point, then the grid is nudged
    /// up a final rounding step if needed so the horizon is always covered.
    pub fn halflife_spanning(horizon: f64, count: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid("horizon must be positive"));
        }
        if count < 1 {
            return Err(Error::invalid("interval count must be at least 1"));
        }
        let x_max = count as f64 / (count + 1) as f64;
        let mut halflife = horizon * std::f64::consts::LN_2 / -(1.0 - x_max).ln();
        let mut grid = TimeGrid::halflife(halflife, count)?;
        if grid.horizon() < horizon {
            halflife *= 1.0 + 1e-12;
            grid = TimeGrid::halflife(halflife, count)?;
        }
        Ok(grid)
    }

    /// Interval upper limits `t_1 .. t_n`.
    pub fn uppers(&self) -> &[f64] {
        &self.uppers
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.uppers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uppers.is_empty()
    }

    /// The last boundary `t_n`; no predictions exist past it.
    pub fn horizon(&self) -> f64 {
        *self.uppers.last().unwrap()
    }

    /// Lower limit of interval `j` (zero-based); `t_0 = 0`.
    pub fn lower(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.uppers[j - 1]
        }
    }

    /// Zero-based index of the interval containing `t`, or `None` when
    /// `t >= t_n` falls beyond the grid.
    pub fn interval_index(&self, t: f64) -> Result<Option<usize>> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
        }
        let j = self.uppers.partition_point(|&upper| upper <= t);
        Ok(if j < self.uppers.len() { Some(j) } else { None })
    }

    /// Encode one observation into the paired indicator vectors.
    ///
    /// Uncensored times at or beyond the last boundary are encoded as
    /// censored at `t_n`; see [`encode_dataset`] for the per-dataset count
    /// of such records.
    pub fn encode(&self, record: &SurvivalRecord) -> Result<EncodedTarget> {
        let n = self.len();
        let t = record.time;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!(
                "record time must be nonnegative and finite, got {t}"
            )));
        }
        let mut surv_s = Array1::zeros(n);
        let mut surv_f = Array1::zeros(n);
        match self.interval_index(t)? {
            Some(j) if record.event => {
                for i in 0..j {
                    surv_s[i] = 1.0;
                }
                surv_f[j] = 1.0;
            }
            _ => {
                // Censored, or an event at/past t_n truncated to censoring at
                // t_n. Credit for interval j requires surviving past its
                // midpoint.
                for j in 0..n {
                    if t >= 0.5 * (self.lower(j) + self.uppers[j]) {
                        surv_s[j] = 1.0;
                    }
                }
            }
        }
        Ok(EncodedTarget { surv_s, surv_f })
    }

    /// True when the record is an event at or beyond the last boundary,
    /// which `encode` truncates to censoring at `t_n`.
    fn truncates(&self, record: &SurvivalRecord) -> bool {
        record.event && record.time >= self.horizon()
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(uppers: Vec<f64>) -> Result<Self> {
        TimeGrid::from_boundaries(uppers)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(grid: TimeGrid) -> Vec<f64> {
        grid.uppers
    }
}

/// One subject: follow-up time in days, event indicator, covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub time: f64,
    /// `true` when the failure was observed, `false` when censored.
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        SurvivalRecord {
            time,
            event,
            covariates,
        }
    }
}

/// Paired indicator vectors for one subject.
///
/// `surv_s` is a prefix of ones for uncensored subjects and a
/// midpoint-credited indicator for censored ones; `surv_f` has a single one
/// at the failure interval, or none.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTarget {
    pub surv_s: Array1<f64>,
    pub surv_f: Array1<f64>,
}

impl EncodedTarget {
    pub fn len(&self) -> usize {
        self.surv_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surv_s.is_empty()
    }

    /// Zero-based failure interval, if any.
    pub fn failure_interval(&self) -> Option<usize> {
        self.surv_f.iter().position(|&v| v == 1.0)
    }
}

/// Summary of a dataset encoding pass.
#[derive(Debug, Clone, Default)]
pub struct EncodeReport {
    /// Events at or beyond the last boundary, encoded as censored at `t_n`.
    pub events_beyond_horizon: usize,
}

/// Encode a dataset, counting events beyond the grid horizon.
///
/// Such events are encoded as censored at `t_n` (survival credit for every
/// interval, no failure flag): the information that a failure occurred past
/// the horizon is lost, but no failure is fabricated inside the grid. A
/// warning with the count is logged because the fix is usually to extend the
/// last interval.
pub fn encode_dataset(records: &[SurvivalRecord], grid: &TimeGrid) -> Result<(Vec<EncodedTarget>, EncodeReport)> {
    let mut targets = Vec::with_capacity(records.len());
    let mut report = EncodeReport::default();
    for record in records {
        if grid.truncates(record) {
            report.events_beyond_horizon += 1;
        }
        targets.push(grid.encode(record)?);
    }
    if report.events_beyond_horizon > 0 {
        log::warn!(
            "{} event(s) at or beyond the last grid boundary ({} days) were encoded as censored there; extend the last interval to keep them",
            report.events_beyond_horizon,
            grid.horizon()
        );
    }
    Ok((targets, report))
}
