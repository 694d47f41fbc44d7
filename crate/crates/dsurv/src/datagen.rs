//! Seeded synthetic survival datasets.
//!
//! Subjects are split into groups by fixed fractions; each group draws a
//! latent survival time from its distribution by inverse-transform sampling
//! (`-b·ln U` for the exponential, `scale·(-ln U)^{1/shape}` for the
//! Weibull), optionally raced against an exponential censoring time. The
//! uniform stream is the counter generator in [`crate::rng`], with subject
//! `i` consuming counters `2i` (survival) and `2i + 1` (censoring), so
//! datasets are bit-reproducible from the seed alone.

use crate::error::{Error, Result};
use crate::rng::counter_uniform;
use crate::timegrid::SurvivalRecord;

/// Latent survival distribution of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupDist {
    /// Exponential given by its median in days (scale = median / ln 2).
    Exponential { median_days: f64 },
    /// Weibull with scale in days and dimensionless shape.
    Weibull { scale_days: f64, shape: f64 },
}

impl GroupDist {
    fn validate(&self) -> Result<()> {
        match *self {
            GroupDist::Exponential { median_days } => {
                if !(median_days > 0.0) {
                    return Err(Error::invalid("exponential median must be positive"));
                }
            }
            GroupDist::Weibull { scale_days, shape } => {
                if !(scale_days > 0.0) || !(shape > 0.0) {
                    return Err(Error::invalid("Weibull scale and shape must be positive"));
                }
            }
        }
        Ok(())
    }

    fn draw(&self, u: f64) -> f64 {
        match *self {
            GroupDist::Exponential { median_days } => {
                let scale = median_days / std::f64::consts::LN_2;
                -scale * u.ln()
            }
            GroupDist::Weibull { scale_days, shape } => scale_days * (-u.ln()).powf(1.0 / shape),
        }
    }
}

/// Simulation design: group mix, survival distributions, censoring.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub n_subjects: usize,
    /// Group fractions, summing to 1. The group id is the subject's single
    /// covariate.
    pub group_fractions: Vec<f64>,
    pub group_dists: Vec<GroupDist>,
    /// Exponential censoring half-life in days, or `None` for no censoring.
    pub censor_halflife: Option<f64>,
    pub rng_seed: u64,
}

impl SimSpec {
    /// Two equal groups distinguished by a binary covariate.
    pub fn two_group(
        n_subjects: usize,
        dist0: GroupDist,
        dist1: GroupDist,
        censor_halflife: Option<f64>,
        rng_seed: u64,
    ) -> Self {
        SimSpec {
            n_subjects,
            group_fractions: vec![0.5, 0.5],
            group_dists: vec![dist0, dist1],
            censor_halflife,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::invalid("simulation needs at least one subject"));
        }
        if self.group_fractions.is_empty()
            || self.group_fractions.len() != self.group_dists.len()
        {
            return Err(Error::invalid(
                "group fractions and distributions must pair up",
            ));
        }
        if self.group_fractions.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::invalid("group fractions must be positive"));
        }
        let sum: f64 = self.group_fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "group fractions must sum to 1, got {sum}"
            )));
        }
        for dist in &self.group_dists {
            dist.validate()?;
        }
        if let Some(h) = self.censor_halflife {
            if !(h > 0.0) {
                return Err(Error::invalid("censoring half-life must be positive"));
            }
        }
        Ok(())
    }
}

/// Generate a dataset: observed time is `min(T, C)`, the event flag is
/// `T <= C`, and the single covariate is the group id.
///
/// Group sizes are the rounded cumulative fractions, so the mix is exact up
/// to integer rounding and independent of the seed.
pub fn simulate(spec: &SimSpec) -> Result<Vec<SurvivalRecord>> {
    spec.validate()?;
    let n = spec.n_subjects;

    // Subject i belongs to the group whose cumulative share covers i.
    let mut boundaries = Vec::with_capacity(spec.group_fractions.len());
    let mut cum = 0.0;
    for &f in &spec.group_fractions {
        cum += f;
        boundaries.push((cum * n as f64).round() as usize);
    }
    *boundaries.last_mut().unwrap() = n;

    let mut records = Vec::with_capacity(n);
    let mut group = 0usize;
    for i in 0..n {
        while i >= boundaries[group] {
            group += 1;
        }
        let u_surv = counter_uniform(spec.rng_seed, 2 * i as u64);
        let latent = spec.group_dists[group].draw(u_surv);
        let (time, event) = match spec.censor_halflife {
            Some(halflife) => {
                let u_cens = counter_uniform(spec.rng_seed, 2 * i as u64 + 1);
                let censor = -(halflife / std::f64::consts::LN_2) * u_cens.ln();
                if latent <= censor {
                    (latent, true)
                } else {
                    (censor, false)
                }
            }
            None => (latent, true),
        };
        records.push(SurvivalRecord::new(time, event, vec![group as f64]));
    }
    Ok(records)
}

/// Draw `target_n` records uniformly with replacement; index `k` of the
/// output uses counter `k` of the seed's stream.
pub fn bootstrap_resample(
    records: &[SurvivalRecord],
    target_n: usize,
    seed: u64,
) -> Result<Vec<SurvivalRecord>> {
    if records.is_empty() {
        return Err(Error::invalid("cannot resample an empty dataset"));
    }
    let n = records.len() as u64;
    Ok((0..target_n)
        .map(|k| records[(crate::rng::counter_u64(seed, k as u64) % n) as usize].clone())
        .collect())
}
