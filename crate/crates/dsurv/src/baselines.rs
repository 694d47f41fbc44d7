//! Classical estimators: Kaplan-Meier, Cox proportional hazards, Breslow
//! baseline hazard.
//!
//! The Cox fit maximizes the Breslow-approximation partial likelihood by
//! Newton-Raphson with step-halving. Breslow tie handling (not Efron) is
//! used throughout so the partial likelihood pairs with the Breslow
//! baseline; some statistical packages default to Efron and will disagree
//! slightly on tied data. Deaths are processed before censorings at tied
//! times.

use crate::error::{Error, Result};
use crate::timegrid::SurvivalRecord;
use ndarray::{Array1, Array2};

/// Right-continuous survival step function with `S(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSurvival {
    /// Ascending event times where the curve drops.
    pub event_times: Vec<f64>,
    /// Survival value from each event time onward.
    pub surv_values: Vec<f64>,
}

impl StepSurvival {
    /// Value at `t` (right-continuous).
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.event_times.partition_point(|&x| x <= t);
        if k == 0 {
            1.0
        } else {
            self.surv_values[k - 1]
        }
    }

    /// Left-continuous value `S(t⁻)`, the value just before `t`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.event_times.partition_point(|&x| x < t);
        if k == 0 {
            1.0
        } else {
            self.surv_values[k - 1]
        }
    }

    /// First time the curve reaches 0.5 or below.
    pub fn median(&self) -> Option<f64> {
        self.surv_values
            .iter()
            .position(|&s| s <= 0.5)
            .map(|k| self.event_times[k])
    }
}

/// Kaplan-Meier product-limit estimate.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<StepSurvival> {
    if times.is_empty() {
        return Err(Error::invalid("Kaplan-Meier needs a nonempty sample"));
    }
    if times.len() != events.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} times vs {} event flags",
            times.len(),
            events.len()
        )));
    }
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::invalid("times must be nonnegative and finite"));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut event_times = Vec::new();
    let mut surv_values = Vec::new();
    let mut surv = 1.0;
    let mut at_risk = times.len();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0usize;
        let mut leaving = 0usize;
        while i < order.len() && times[order[i]] == t {
            if events[order[i]] {
                deaths += 1;
            }
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            event_times.push(t);
            surv_values.push(surv);
        }
        at_risk -= leaving;
    }
    Ok(StepSurvival {
        event_times,
        surv_values,
    })
}

/// Fitted Cox proportional-hazards model.
#[derive(Debug, Clone)]
pub struct CoxFit {
    pub beta: Array1<f64>,
    /// Partial log-likelihood after each Newton iteration.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
}

impl CoxFit {
    /// A fit with fixed coefficients, for baseline computations that bypass
    /// estimation (e.g. the null model `β = 0`).
    pub fn with_beta(beta: Array1<f64>) -> Self {
        CoxFit {
            beta,
            loglik_trace: Vec::new(),
            converged: true,
        }
    }
}

const COX_MAX_ITER: usize = 100;
const COX_TOL: f64 = 1e-8;
const COX_BETA_BOUND: f64 = 50.0;

struct PartialLik<'a> {
    records: &'a [SurvivalRecord],
    /// Indices sorted by descending time; ties keep input order.
    desc: Vec<usize>,
}

impl<'a> PartialLik<'a> {
    fn new(records: &'a [SurvivalRecord]) -> Self {
        let mut desc: Vec<usize> = (0..records.len()).collect();
        desc.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time));
        PartialLik { records, desc }
    }

    /// Breslow partial log-likelihood, its gradient, and the negative
    /// Hessian (observed information), accumulated over descending times so
    /// the risk set grows incrementally.
    fn evaluate(&self, beta: &Array1<f64>) -> (f64, Array1<f64>, Array2<f64>) {
        let d = beta.len();
        let mut loglik = 0.0;
        let mut grad: Array1<f64> = Array1::zeros(d);
        let mut info: Array2<f64> = Array2::zeros((d, d));

        // Running risk-set sums of e^η, x e^η, and x xᵀ e^η.
        let mut s0 = 0.0;
        let mut s1: Array1<f64> = Array1::zeros(d);
        let mut s2: Array2<f64> = Array2::zeros((d, d));

        let mut i = 0;
        while i < self.desc.len() {
            let t = self.records[self.desc[i]].time;
            // Everyone tied at t (events and censorings) enters the risk set
            // before the deaths at t are scored.
            let start = i;
            while i < self.desc.len() && self.records[self.desc[i]].time == t {
                let rec = &self.records[self.desc[i]];
                let eta: f64 = rec
                    .covariates
                    .iter()
                    .zip(beta.iter())
                    .map(|(x, b)| x * b)
                    .sum();
                let w = eta.exp();
                s0 += w;
                for (k, &x) in rec.covariates.iter().enumerate() {
                    s1[k] += x * w;
                    for (l, &y) in rec.covariates.iter().enumerate() {
                        s2[[k, l]] += x * y * w;
                    }
                }
                i += 1;
            }
            for &idx in &self.desc[start..i] {
                let rec = &self.records[idx];
                if !rec.event {
                    continue;
                }
                let eta: f64 = rec
                    .covariates
                    .iter()
                    .zip(beta.iter())
                    .map(|(x, b)| x * b)
                    .sum();
                loglik += eta - s0.ln();
                for k in 0..d {
                    let mean_k = s1[k] / s0;
                    grad[k] += rec.covariates[k] - mean_k;
                    for l in 0..d {
                        info[[k, l]] += s2[[k, l]] / s0 - mean_k * s1[l] / s0;
                    }
                }
            }
        }
        (loglik, grad, info)
    }

    fn loglik(&self, beta: &Array1<f64>) -> f64 {
        self.evaluate(beta).0
    }
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting; `A` is the
/// (small) observed information matrix.
fn solve_linear(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = b.len();
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        // Only an exact zero pivot is fatal here: a uniformly tiny information
        // matrix (flat likelihood far from the optimum) still yields a
        // well-scaled Newton direction, and the line search catches the rest.
        if m[[pivot, col]] == 0.0 {
            return Err(Error::invalid(
                "information matrix is singular; covariates may be collinear",
            ));
        }
        if pivot != col {
            for k in 0..n {
                m.swap([pivot, k], [col, k]);
            }
            rhs.swap(pivot, col);
        }
        for row in col + 1..n {
            let factor = m[[row, col]] / m[[col, col]];
            for k in col..n {
                m[[row, k]] -= factor * m[[col, k]];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[[row, k]] * x[k];
        }
        x[row] = acc / m[[row, row]];
    }
    Ok(x)
}

/// Fit a Cox model by Newton-Raphson with step-halving.
///
/// Converges when the log-likelihood improves by less than `1e-8` or after
/// 100 iterations. Any coefficient passing 50 in magnitude triggers a
/// separation error (the partial likelihood is monotone in that direction).
pub fn cox_fit(records: &[SurvivalRecord]) -> Result<CoxFit> {
    if records.is_empty() {
        return Err(Error::invalid("Cox fit needs a nonempty dataset"));
    }
    let d = records[0].covariates.len();
    if d == 0 {
        return Err(Error::invalid("Cox fit needs at least one covariate"));
    }
    if records.iter().any(|r| r.covariates.len() != d) {
        return Err(Error::invalid(
            "covariate dimension must be constant across the dataset",
        ));
    }
    if !records.iter().any(|r| r.event) {
        return Err(Error::invalid("Cox fit needs at least one event"));
    }
    for k in 0..d {
        let first = records[0].covariates[k];
        if records.iter().all(|r| r.covariates[k] == first) {
            return Err(Error::DegenerateCovariate(format!("column {k}")));
        }
    }

    let lik = PartialLik::new(records);
    let mut beta = Array1::zeros(d);
    let (mut current, mut grad, mut info) = lik.evaluate(&beta);
    let mut trace = vec![current];
    let mut converged = false;

    for _ in 0..COX_MAX_ITER {
        let direction = solve_linear(&info, &grad)?;
        let mut step = 1.0;
        let mut candidate = &beta + &(step * &direction);
        let mut cand_loglik = lik.loglik(&candidate);
        // Step-halving keeps every iteration an ascent.
        let mut halvings = 0;
        while (!cand_loglik.is_finite() || cand_loglik < current) && halvings < 60 {
            step *= 0.5;
            candidate = &beta + &(step * &direction);
            cand_loglik = lik.loglik(&candidate);
            halvings += 1;
        }
        if !cand_loglik.is_finite() || cand_loglik < current {
            return Err(Error::InvalidState(
                "Newton line search made no progress; information matrix may be near-singular".into(),
            ));
        }
        if let Some(index) = candidate.iter().position(|b| b.abs() > COX_BETA_BOUND) {
            return Err(Error::Separation {
                index,
                bound: COX_BETA_BOUND,
            });
        }
        let improvement = cand_loglik - current;
        beta = candidate;
        current = cand_loglik;
        trace.push(current);
        if improvement.abs() < COX_TOL {
            // A monotone likelihood flattens out in value while the Newton
            // step stays macroscopic, so a stalled log-likelihood alone is
            // not convergence. Probe far along the step direction, past the
            // coefficient bound: a concave likelihood with an interior
            // maximum must fall off out there; a monotone one does not.
            let max_dir = direction.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            if max_dir < 1e-3 {
                converged = true;
                break;
            }
            let max_beta = beta.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            let reach = (1.1 * COX_BETA_BOUND + max_beta) / max_dir;
            let far = &beta + &(reach * &direction);
            let far_loglik = lik.loglik(&far);
            if far_loglik.is_finite() && far_loglik >= current - 1e-10 {
                let index = far
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                return Err(Error::Separation {
                    index,
                    bound: COX_BETA_BOUND,
                });
            }
        }
        let (_, g, h) = lik.evaluate(&beta);
        grad = g;
        info = h;
    }

    Ok(CoxFit {
        beta,
        loglik_trace: trace,
        converged,
    })
}

/// Breslow cumulative baseline hazard: at each event time,
/// `d_k / Σ_{at risk} exp(xᵀβ)` accumulates into `H₀(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BreslowBaseline {
    pub event_times: Vec<f64>,
    pub cum_hazard: Vec<f64>,
}

impl BreslowBaseline {
    /// `H₀(t)`, right-continuous with `H₀(0) = 0`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.event_times.partition_point(|&x| x <= t);
        if k == 0 {
            0.0
        } else {
            self.cum_hazard[k - 1]
        }
    }
}

/// Estimate the Breslow baseline from a fit and the dataset it was fit on.
pub fn breslow_baseline(fit: &CoxFit, records: &[SurvivalRecord]) -> Result<BreslowBaseline> {
    if !fit.converged {
        return Err(Error::InvalidState(
            "Breslow baseline needs a converged fit".into(),
        ));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time));

    let mut s0 = 0.0;
    let mut event_times = Vec::new();
    let mut increments = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = records[order[i]].time;
        let start = i;
        while i < order.len() && records[order[i]].time == t {
            let rec = &records[order[i]];
            let eta: f64 = rec
                .covariates
                .iter()
                .zip(fit.beta.iter())
                .map(|(x, b)| x * b)
                .sum();
            s0 += eta.exp();
            i += 1;
        }
        let deaths = order[start..i]
            .iter()
            .filter(|&&idx| records[idx].event)
            .count();
        if deaths > 0 {
            event_times.push(t);
            increments.push(deaths as f64 / s0);
        }
    }
    event_times.reverse();
    increments.reverse();
    let mut cum = 0.0;
    let cum_hazard = increments
        .into_iter()
        .map(|inc| {
            cum += inc;
            cum
        })
        .collect();
    Ok(BreslowBaseline {
        event_times,
        cum_hazard,
    })
}

/// `S(t | x) = exp(-H₀(t) · exp(xᵀβ))`.
pub fn cox_predict(fit: &CoxFit, baseline: &BreslowBaseline, covariates: &[f64], t: f64) -> Result<f64> {
    if !fit.converged {
        return Err(Error::InvalidState("prediction needs a converged fit".into()));
    }
    if covariates.len() != fit.beta.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} covariates vs {} coefficients",
            covariates.len(),
            fit.beta.len()
        )));
    }
    let eta: f64 = covariates
        .iter()
        .zip(fit.beta.iter())
        .map(|(x, b)| x * b)
        .sum();
    Ok((-baseline.eval(t) * eta.exp()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rec(time: f64, event: bool, x: Vec<f64>) -> SurvivalRecord {
        SurvivalRecord::new(time, event, x)
    }

    #[test]
    fn km_single_death_among_four() {
        let surv = kaplan_meier(&[10.0, 12.0, 15.0, 20.0], &[true, false, false, false]).unwrap();
        assert_eq!(surv.event_times, vec![10.0]);
        assert_relative_eq!(surv.eval(10.0), 0.75, epsilon = 1e-12);
        assert_relative_eq!(surv.eval(9.9), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn km_hand_product() {
        let surv = kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap();
        assert_relative_eq!(surv.eval(1.0), 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(surv.eval(3.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn km_all_censored_stays_at_one() {
        let surv = kaplan_meier(&[5.0, 6.0, 7.0], &[false, false, false]).unwrap();
        assert!(surv.event_times.is_empty());
        assert_eq!(surv.eval(100.0), 1.0);
    }

    #[test]
    fn km_no_censoring_equals_empirical_survival() {
        let times = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let events = [true; 8];
        let surv = kaplan_meier(&times, &events).unwrap();
        for &t in &times {
            let empirical = times.iter().filter(|&&x| x > t).count() as f64 / times.len() as f64;
            assert_relative_eq!(surv.eval(t), empirical, epsilon = 1e-12);
        }
    }

    #[test]
    fn km_deaths_precede_censorings_at_ties() {
        // Censored subject at t=2 is still at risk for the death at t=2.
        let surv = kaplan_meier(&[2.0, 2.0, 3.0], &[true, false, false]).unwrap();
        assert_relative_eq!(surv.eval(2.0), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn km_left_eval_and_median() {
        let surv = kaplan_meier(&[1.0, 2.0, 3.0, 4.0], &[true, true, true, true]).unwrap();
        assert_relative_eq!(surv.eval_left(2.0), 0.75, epsilon = 1e-12);
        assert_relative_eq!(surv.eval(2.0), 0.5, epsilon = 1e-12);
        assert_eq!(surv.median(), Some(2.0));
    }

    #[test]
    fn km_rejects_empty() {
        assert!(kaplan_meier(&[], &[]).is_err());
    }

    #[test]
    fn cox_rejects_constant_covariate() {
        let records = vec![
            rec(1.0, true, vec![2.0]),
            rec(2.0, true, vec![2.0]),
            rec(3.0, false, vec![2.0]),
        ];
        assert!(matches!(
            cox_fit(&records),
            Err(Error::DegenerateCovariate(_))
        ));
    }

    #[test]
    fn cox_matches_grid_search() {
        let records = vec![
            rec(1.0, true, vec![1.0]),
            rec(2.0, true, vec![0.0]),
            rec(3.0, true, vec![1.0]),
            rec(4.0, true, vec![0.0]),
        ];
        let fit = cox_fit(&records).unwrap();
        assert!(fit.converged);

        let lik = PartialLik::new(&records);
        let mut best_beta = 0.0;
        let mut best = f64::NEG_INFINITY;
        let mut b = -5.0;
        while b <= 5.0 {
            let l = lik.loglik(&Array1::from(vec![b]));
            if l > best {
                best = l;
                best_beta = b;
            }
            b += 1e-4;
        }
        assert!(
            (fit.beta[0] - best_beta).abs() < 1e-4 + 1e-9,
            "newton {} vs grid {best_beta}",
            fit.beta[0]
        );
    }

    #[test]
    fn cox_two_covariates_match_grid_search() {
        // Staged grid search: coarse sweep, then two refinements around the
        // best point, ending well below the comparison tolerance.
        for seed in [2u64, 5, 11, 23, 37] {
            let mut rng = crate::rng::CounterRng::new(seed);
            let n = 12 + rng.index(8);
            let records: Vec<SurvivalRecord> = (0..n)
                .map(|_| {
                    rec(
                        1.0 + 60.0 * rng.uniform(),
                        rng.uniform() < 0.75,
                        vec![rng.uniform_symmetric(1.0), rng.uniform_symmetric(1.0)],
                    )
                })
                .collect();
            let fit = match cox_fit(&records) {
                Ok(fit) if fit.converged => fit,
                _ => continue,
            };
            let lik = PartialLik::new(&records);
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
            let mut span = 4.0;
            let mut step = 0.1;
            let (mut cx, mut cy) = (0.0, 0.0);
            for _ in 0..3 {
                let mut b0 = cx - span;
                while b0 <= cx + span {
                    let mut b1 = cy - span;
                    while b1 <= cy + span {
                        let ll = lik.loglik(&Array1::from(vec![b0, b1]));
                        if ll > best.0 {
                            best = (ll, b0, b1);
                        }
                        b1 += step;
                    }
                    b0 += step;
                }
                cx = best.1;
                cy = best.2;
                span = 2.0 * step;
                step /= 25.0;
            }
            assert!(
                (fit.beta[0] - best.1).abs() < 1e-3 && (fit.beta[1] - best.2).abs() < 1e-3,
                "seed {seed}: newton ({}, {}) vs grid ({}, {})",
                fit.beta[0],
                fit.beta[1],
                best.1,
                best.2
            );
        }
    }

    #[test]
    fn cox_ascends_monotonically() {
        let times = [3.0, 1.0, 4.0, 2.0, 5.0, 9.0, 2.0, 6.0, 5.0, 4.0];
        let events = [true, true, false, true, true, false, true, true, true, false];
        let x0 = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let x1 = [0.5, -0.3, 0.8, 0.1, -0.9, 0.2, 0.4, -0.5, 0.7, -0.2];
        let records: Vec<SurvivalRecord> = (0..10)
            .map(|i| rec(times[i], events[i], vec![x0[i], x1[i]]))
            .collect();
        let fit = cox_fit(&records).unwrap();
        assert!(fit.converged);
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn cox_detects_separation() {
        // Perfectly ordered: likelihood is monotone in beta.
        let records = vec![rec(1.0, true, vec![1.0]), rec(2.0, true, vec![0.0])];
        assert!(matches!(cox_fit(&records), Err(Error::Separation { .. })));
    }

    #[test]
    fn breslow_hand_value() {
        // Single event at t=5 among 2 at risk, beta = 0.
        let records = vec![rec(5.0, true, vec![0.3]), rec(7.0, false, vec![-0.4])];
        let fit = CoxFit::with_beta(Array1::zeros(1));
        let base = breslow_baseline(&fit, &records).unwrap();
        assert_relative_eq!(base.eval(5.0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(base.eval(4.9), 0.0, epsilon = 1e-12);
        let s = cox_predict(&fit, &base, &[0.0], 5.0).unwrap();
        assert_relative_eq!(s, (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn breslow_at_zero_beta_equals_nelson_aalen() {
        let times = [1.0, 2.0, 2.0, 3.0, 5.0, 8.0];
        let events = [true, true, false, true, false, true];
        let records: Vec<SurvivalRecord> = times
            .iter()
            .zip(&events)
            .map(|(&t, &e)| rec(t, e, vec![t * 0.1]))
            .collect();
        let fit = CoxFit::with_beta(Array1::zeros(1));
        let base = breslow_baseline(&fit, &records).unwrap();

        // Nelson-Aalen by hand: sum of d_k / r_k over event times <= t.
        let mut expected = 0.0;
        for (&t, &e) in times.iter().zip(&events) {
            if e {
                let r = times.iter().filter(|&&x| x >= t).count() as f64;
                expected += 1.0 / r;
                assert_eq!(base.eval(t), expected);
            }
        }
        // And survival is exp(-H) exactly for any covariate value.
        let s = cox_predict(&fit, &base, &[3.0], 8.0).unwrap();
        assert_eq!(s, (-base.eval(8.0)).exp());
    }

    #[test]
    fn breslow_requires_convergence() {
        let fit = CoxFit {
            beta: Array1::zeros(1),
            loglik_trace: vec![],
            converged: false,
        };
        let records = vec![rec(1.0, true, vec![0.0])];
        assert!(matches!(
            breslow_baseline(&fit, &records),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn cox_predict_is_monotone() {
        let records: Vec<SurvivalRecord> = (0..20)
            .map(|i| {
                let x = (i % 4) as f64;
                rec(20.0 - i as f64 + 0.3 * x, i % 5 != 0, vec![x])
            })
            .collect();
        let fit = cox_fit(&records).unwrap();
        let base = breslow_baseline(&fit, &records).unwrap();
        // Nonincreasing in t.
        let mut last = 1.0;
        for k in 0..40 {
            let s = cox_predict(&fit, &base, &[1.0], k as f64 * 0.5).unwrap();
            assert!(s <= last + 1e-12);
            last = s;
        }
        // Positive coefficient: higher covariate, lower survival.
        if fit.beta[0] > 0.0 {
            let lo = cox_predict(&fit, &base, &[0.0], 10.0).unwrap();
            let hi = cox_predict(&fit, &base, &[2.0], 10.0).unwrap();
            assert!(hi < lo);
        }
    }
}
