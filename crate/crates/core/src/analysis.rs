//! Generic estimators for inspecting agent internals and traces: subset
//! entropy, risk direction and projection, Fisher separability, confidence
//! dynamics regression, and temperature fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EpisodeTrace;
use crate::optimize::{golden_section_min, log_sum_exp};

pub const TEMPERATURE_RANGE: (f64, f64) = (0.05, 20.0);
pub const TEMPERATURE_TOL: f64 = 1e-3;
pub const MIN_TEMPERATURE_OBSERVATIONS: usize = 50;
pub const MIN_DYNAMICS_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVectors {
    pub vectors: Vec<Vec<f64>>,
    /// True for the high-risk class.
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsFit {
    pub slope_on_error: f64,
    pub intercept: f64,
    pub residual_std: f64,
}

/// Shannon entropy in nats of the weights renormalised over the mask.
pub fn subset_entropy(wv: &WeightVector) -> Result<f64> {
    if wv.weights.len() != wv.mask.len() {
        return Err(Error::validation("mask", "length differs from weights"));
    }
    if let Some(i) = wv.weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::validation(format!("weights[{i}]"), "must be finite and >= 0"));
    }
    let selected: Vec<f64> = wv.weights.iter().zip(&wv.mask).filter(|(_, m)| **m).map(|(w, _)| *w).collect();
    let total: f64 = selected.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Estimation("masked-in weights have zero mass".into()));
    }
    Ok(selected
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0))
}

fn check_dimensions(data: &LabeledVectors) -> Result<usize> {
    if data.vectors.len() != data.labels.len() {
        return Err(Error::validation("labels", "length differs from vectors"));
    }
    let dim = data.vectors.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::validation("vectors", "need at least one vector of dimension >= 1"));
    }
    if let Some(i) = data.vectors.iter().position(|v| v.len() != dim) {
        return Err(Error::validation(format!("vectors[{i}]"), format!("expected dimension {dim}")));
    }
    Ok(dim)
}

/// Unit vector along `mean(high-risk) - mean(low-risk)`.
pub fn risk_direction(data: &LabeledVectors) -> Result<Vec<f64>> {
    let dim = check_dimensions(data)?;
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for (v, &high) in data.vectors.iter().zip(&data.labels) {
        let k = usize::from(high);
        counts[k] += 1;
        for (s, x) in sums[k].iter_mut().zip(v) {
            *s += x;
        }
    }
    if counts.contains(&0) {
        return Err(Error::Estimation("both classes need at least one vector".into()));
    }
    let diff: Vec<f64> = (0..dim)
        .map(|i| sums[1][i] / counts[1] as f64 - sums[0][i] / counts[0] as f64)
        .collect();
    let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateDirection("class means coincide".into()));
    }
    Ok(diff.into_iter().map(|d| d / norm).collect())
}

pub fn risk_projection(vector: &[f64], direction: &[f64]) -> Result<f64> {
    if vector.len() != direction.len() {
        return Err(Error::validation(
            "direction",
            format!("dimension {} differs from vector dimension {}", direction.len(), vector.len()),
        ));
    }
    Ok(vector.iter().zip(direction).map(|(a, b)| a * b).sum())
}

fn mean_and_population_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// `(mean_a - mean_b)^2 / (var_a + var_b)` with population variances.
pub fn fisher_ratio(group_a: &[f64], group_b: &[f64]) -> Result<f64> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(Error::Estimation("each group needs at least 2 samples".into()));
    }
    let (ma, va) = mean_and_population_var(group_a);
    let (mb, vb) = mean_and_population_var(group_b);
    let gap = (ma - mb).powi(2);
    if gap == 0.0 {
        return Ok(0.0);
    }
    let spread = va + vb;
    if spread == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(gap / spread)
}

/// OLS of `confidence(t+1) - confidence(t)` on the loss-event indicator at `t`.
pub fn confidence_dynamics_fit(trace: &EpisodeTrace) -> Result<DynamicsFit> {
    confidence_dynamics_fit_pooled(std::slice::from_ref(trace))
}

/// Same regression with transitions pooled over several traces; no
/// transition crosses a trace boundary.
pub fn confidence_dynamics_fit_pooled(traces: &[EpisodeTrace]) -> Result<DynamicsFit> {
    let len: usize = traces.iter().map(|t| t.steps.len()).sum();
    if len < MIN_DYNAMICS_LEN {
        return Err(Error::Estimation(format!("trace has {len} steps, need at least {MIN_DYNAMICS_LEN}")));
    }
    let pairs: Vec<(f64, f64)> = traces
        .iter()
        .flat_map(|t| t.steps.windows(2))
        .map(|w| (if w[0].is_loss_event() { 1.0 } else { 0.0 }, w[1].confidence - w[0].confidence))
        .collect();
    let errors = pairs.iter().filter(|(x, _)| *x == 1.0).count();
    if errors < 2 || pairs.len() - errors < 2 {
        return Err(Error::Estimation(format!(
            "need at least 2 error and 2 non-error steps, found {errors} and {}",
            pairs.len() - errors
        )));
    }
    let mean_of = |want: f64| {
        let ys: Vec<f64> = pairs.iter().filter(|(x, _)| *x == want).map(|(_, y)| *y).collect();
        ys.iter().sum::<f64>() / ys.len() as f64
    };
    // with a binary regressor the OLS line passes through both group means
    let intercept = mean_of(0.0);
    let slope = mean_of(1.0) - intercept;
    let sse: f64 = pairs.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let residual_std = (sse / (pairs.len() - 2) as f64).sqrt();
    Ok(DynamicsFit {
        slope_on_error: slope,
        intercept,
        residual_std,
    })
}

/// Scores over labels and the index of the observed label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredObservation {
    pub scores: Vec<f64>,
    pub label: usize,
}

/// Mean negative log-likelihood of the observed labels under `softmax(scores / T)`.
pub fn temperature_nll(data: &[ScoredObservation], temperature: f64) -> f64 {
    let total: f64 = data
        .iter()
        .map(|o| {
            let z: Vec<f64> = o.scores.iter().map(|s| s / temperature).collect();
            log_sum_exp(&z) - z[o.label]
        })
        .sum();
    total / data.len() as f64
}

pub fn fit_temperature(data: &[ScoredObservation]) -> Result<f64> {
    if data.len() < MIN_TEMPERATURE_OBSERVATIONS {
        return Err(Error::Estimation(format!(
            "{} observations, need at least {MIN_TEMPERATURE_OBSERVATIONS}",
            data.len()
        )));
    }
    for (i, o) in data.iter().enumerate() {
        if o.scores.len() < 2 {
            return Err(Error::Estimation(format!("observation {i} has fewer than 2 labels")));
        }
        if o.label >= o.scores.len() {
            return Err(Error::validation(format!("observations[{i}].label"), "index out of range"));
        }
    }
    Ok(golden_section_min(
        |t| temperature_nll(data, t),
        TEMPERATURE_RANGE.0,
        TEMPERATURE_RANGE.1,
        TEMPERATURE_TOL,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::EpisodeStep;
    use crate::optimize::softmax;
    use crate::rng::RngState;
    use proptest::prelude::*;

    fn wv(weights: &[f64], mask: &[bool]) -> WeightVector {
        WeightVector {
            weights: weights.to_vec(),
            mask: mask.to_vec(),
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(subset_entropy(&wv(&[0.0, 3.0, 0.0], &[true, true, true])).unwrap(), 0.0);
        let uniform = subset_entropy(&wv(&[1.0; 4], &[true; 4])).unwrap();
        assert!((uniform - 4f64.ln()).abs() < 1e-12);
        let renorm = subset_entropy(&wv(&[2.0, 2.0, 0.0, 0.0], &[true, true, false, false])).unwrap();
        assert!((renorm - 2f64.ln()).abs() < 1e-12);
        assert!(matches!(
            subset_entropy(&wv(&[0.0, 1.0], &[true, false])),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn direction_examples() {
        let one_d = LabeledVectors {
            vectors: vec![vec![1.0], vec![0.0]],
            labels: vec![true, false],
        };
        assert_eq!(risk_direction(&one_d).unwrap(), vec![1.0]);
        let same = LabeledVectors {
            vectors: vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            labels: vec![true, false],
        };
        assert!(matches!(risk_direction(&same), Err(Error::DegenerateDirection(_))));
    }

    #[test]
    fn direction_recovers_axis_gap() {
        let mut rng = RngState::new(8);
        let gauss = |rng: &mut RngState| {
            let (u1, u2) = (rng.next_unit().max(1e-300), rng.next_unit());
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let mut data = LabeledVectors {
            vectors: vec![],
            labels: vec![],
        };
        for i in 0..1000 {
            let high = i % 2 == 0;
            let gap = if high { 2.0 } else { 0.0 };
            data.vectors.push(vec![gap + gauss(&mut rng), gauss(&mut rng)]);
            data.labels.push(high);
        }
        let d = risk_direction(&data).unwrap();
        let angle = d[1].atan2(d[0]).abs().to_degrees();
        assert!(angle < 5.0, "{angle}");
    }

    #[test]
    fn projection_examples() {
        assert_eq!(risk_projection(&[3.0, 4.0], &[0.6, 0.8]).unwrap(), 5.0);
        assert_eq!(risk_projection(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!((risk_projection(&[0.6, 0.8], &[0.6, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(risk_projection(&[1.0], &[1.0, 0.0]), Err(Error::Validation { .. })));
    }

    #[test]
    fn fisher_examples() {
        assert_eq!(fisher_ratio(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(fisher_ratio(&[0.0, 1.0], &[4.0, 5.0]).unwrap(), 32.0);
        assert_eq!(fisher_ratio(&[10.0, 11.0], &[14.0, 15.0]).unwrap(), 32.0);
        assert_eq!(fisher_ratio(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), f64::INFINITY);
        assert!(matches!(fisher_ratio(&[1.0], &[2.0, 3.0]), Err(Error::Estimation(_))));
    }

    fn trace_from(deltas_on_error: impl Fn(usize, bool) -> f64, len: usize, error_at: impl Fn(usize) -> bool) -> EpisodeTrace {
        let mut c = 0.5;
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            let e = error_at(t);
            steps.push(EpisodeStep {
                risk: 0.5,
                confidence: c,
                error: e,
                feedback_negative: e,
            });
            c += deltas_on_error(t, e);
        }
        EpisodeTrace::new(steps)
    }

    #[test]
    fn dynamics_noiseless() {
        let trace = trace_from(|_, e| if e { -0.05 } else { 0.0 }, 20, |t| t % 3 == 0);
        let fit = confidence_dynamics_fit(&trace).unwrap();
        assert!((fit.slope_on_error + 0.05).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        let flat = trace_from(|_, _| 0.0, 20, |t| t % 2 == 0);
        assert_eq!(confidence_dynamics_fit(&flat).unwrap().slope_on_error, 0.0);
    }

    #[test]
    fn dynamics_needs_variation() {
        let all_errors = trace_from(|_, _| 0.0, 20, |_| true);
        assert!(matches!(confidence_dynamics_fit(&all_errors), Err(Error::Estimation(_))));
        let short = trace_from(|_, _| 0.0, 5, |t| t % 2 == 0);
        assert!(confidence_dynamics_fit(&short).is_err());
    }

    #[test]
    fn temperature_needs_data() {
        let one = [ScoredObservation {
            scores: vec![0.0, 1.0],
            label: 1,
        }];
        assert!(matches!(fit_temperature(&one), Err(Error::Estimation(_))));
    }

    #[test]
    fn temperature_is_locally_optimal() {
        let mut rng = RngState::new(3);
        let data: Vec<_> = (0..500)
            .map(|_| {
                let scores: Vec<f64> = (0..3).map(|_| 4.0 * rng.next_unit() - 2.0).collect();
                let p = softmax(&scores.iter().map(|s| s / 1.5).collect::<Vec<_>>());
                let u = rng.next_unit();
                let mut acc = 0.0;
                let label = p.iter().position(|pi| {
                    acc += pi;
                    u < acc
                });
                ScoredObservation {
                    scores,
                    label: label.unwrap_or(2),
                }
            })
            .collect();
        let t = fit_temperature(&data).unwrap();
        let at = temperature_nll(&data, t);
        assert!(at <= temperature_nll(&data, t * 1.01));
        assert!(at <= temperature_nll(&data, t / 1.01));
    }

    proptest! {
        #[test]
        fn entropy_bounded_by_log_count(weights in proptest::collection::vec(0.0f64..10.0, 1..8)) {
            prop_assume!(weights.iter().sum::<f64>() > 0.0);
            let h = subset_entropy(&wv(&weights, &vec![true; weights.len()])).unwrap();
            prop_assert!(h <= (weights.len() as f64).ln() + 1e-12);
            prop_assert!(h >= 0.0);
        }

        #[test]
        fn fisher_affine_invariant(
            a in proptest::collection::vec(-5.0f64..5.0, 2..10),
            b in proptest::collection::vec(-5.0f64..5.0, 2..10),
            scale in prop_oneof![-4.0f64..-0.25, 0.25f64..4.0],
            shift in -10.0f64..10.0,
        ) {
            let r = fisher_ratio(&a, &b).unwrap();
            prop_assume!(r.is_finite());
            let map = |xs: &[f64]| xs.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
            let r2 = fisher_ratio(&map(&a), &map(&b)).unwrap();
            prop_assert!((r - r2).abs() <= 1e-6 * (1.0 + r.abs()));
        }

        #[test]
        fn projection_is_linear(
            u in proptest::collection::vec(-5.0f64..5.0, 3),
            v in proptest::collection::vec(-5.0f64..5.0, 3),
            k in -3.0f64..3.0,
        ) {
            let d = [0.48, 0.6, 0.64];
            let combo: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + k * b).collect();
            let lhs = risk_projection(&combo, &d).unwrap();
            let rhs = risk_projection(&u, &d).unwrap() + k * risk_projection(&v, &d).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
