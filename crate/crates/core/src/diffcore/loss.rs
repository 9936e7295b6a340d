use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1]` before logs and powers.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    CrossEntropy,
    /// Generalized cross-entropy `(1 - p^q) / q`; `q = 0` is the
    /// cross-entropy limit.
    GeneralizedCrossEntropy { q: f64 },
    ZeroOne,
}

impl LossSpec {
    pub fn gce(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::config("gce_q", format!("{q} is outside [0, 1)")));
        }
        Ok(LossSpec::GeneralizedCrossEntropy { q })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::CrossEntropy => "cross-entropy",
            LossSpec::GeneralizedCrossEntropy { .. } => "generalized-cross-entropy",
            LossSpec::ZeroOne => "zero-one",
        }
    }

    pub(crate) fn value(&self, probs: &[f64], label: usize) -> f64 {
        let p = probs[label].clamp(PROB_FLOOR, 1.0);
        match *self {
            LossSpec::CrossEntropy => -p.ln(),
            LossSpec::GeneralizedCrossEntropy { q: 0.0 } => -p.ln(),
            LossSpec::GeneralizedCrossEntropy { q } => (1.0 - p.powf(q)) / q,
            LossSpec::ZeroOne => {
                if super::argmax(probs) == label {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Scale applied to `p - onehot(label)` to get the derivative of the loss
    /// with respect to the logits.
    pub(crate) fn logit_scale(&self, probs: &[f64], label: usize) -> Result<f64> {
        match *self {
            LossSpec::CrossEntropy => Ok(1.0),
            LossSpec::GeneralizedCrossEntropy { q } => {
                Ok(probs[label].clamp(PROB_FLOOR, 1.0).powf(q))
            }
            LossSpec::ZeroOne => Err(Error::UnsupportedLoss("zero-one")),
        }
    }
}

pub fn loss(probs: &[f64], label: usize, spec: LossSpec) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(spec.value(probs, label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gce_of_certain_prediction_is_zero() {
        for q in [0.1, 0.5, 0.9] {
            assert_eq!(loss(&[0.0, 1.0], 1, LossSpec::gce(q).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn gce_small_q_approaches_cross_entropy() {
        let v = loss(&[0.5, 0.5], 0, LossSpec::gce(1e-6).unwrap()).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-6, "{v}");
        for i in 1..=100 {
            let p = 0.01 * i as f64;
            let gce = loss(&[p, 1.0 - p], 0, LossSpec::gce(1e-8).unwrap()).unwrap();
            assert!((gce + p.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn gce_at_q_point_seven() {
        // (1 - 0.5^0.7) / 0.7 evaluated independently: 0.5^0.7 = exp(-0.7 ln 2)
        let expected = (1.0 - (-0.7f64 * 2f64.ln()).exp()) / 0.7;
        let v = loss(&[0.5, 0.5], 1, LossSpec::gce(0.7).unwrap()).unwrap();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.54918).abs() < 1e-5);
    }

    #[test]
    fn cross_entropy_is_finite_at_zero_probability() {
        let v = loss(&[1.0, 0.0], 1, LossSpec::CrossEntropy).unwrap();
        assert!((v - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn zero_one_breaks_ties_toward_lowest_label() {
        assert_eq!(loss(&[0.5, 0.5], 0, LossSpec::ZeroOne).unwrap(), 0.0);
        assert_eq!(loss(&[0.5, 0.5], 1, LossSpec::ZeroOne).unwrap(), 1.0);
    }

    #[test]
    fn gce_q_range_is_checked() {
        assert!(LossSpec::gce(1.0).is_err());
        assert!(LossSpec::gce(-0.1).is_err());
        assert!(LossSpec::gce(0.0).is_ok());
    }
}
