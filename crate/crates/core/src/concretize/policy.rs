//! Step distributions over the neighbors of a state, registered by name.

use std::fmt;

use super::ConcretizeError;

/// Turns the step costs of a state's neighbors into selection weights.
/// Every weight must be strictly positive.
pub trait StepPolicy: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn weights(&self, costs: &[f64]) -> Vec<f64>;
}

/// `weight ∝ exp(−bias · cost)`.
#[derive(Clone, Debug)]
pub struct ExpCost {
    pub bias: f64,
}

impl StepPolicy for ExpCost {
    fn name(&self) -> &'static str {
        "exp-cost"
    }

    fn weights(&self, costs: &[f64]) -> Vec<f64> {
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        costs.iter().map(|c| (-self.bias * (c - min)).exp().max(f64::MIN_POSITIVE)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Uniform;

impl StepPolicy for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn weights(&self, costs: &[f64]) -> Vec<f64> {
        vec![1.0; costs.len()]
    }
}

pub const POLICIES: [&str; 2] = ["exp-cost", "uniform"];

pub fn policy(name: &str, bias: f64) -> Result<Box<dyn StepPolicy>, ConcretizeError> {
    match name {
        "exp-cost" if bias >= 0.0 && bias.is_finite() => Ok(Box::new(ExpCost { bias })),
        "exp-cost" => {
            Err(ConcretizeError::InvalidConfig(format!("simplicity bias must be finite and >= 0, got {bias}")))
        }
        "uniform" => Ok(Box::new(Uniform)),
        other => Err(ConcretizeError::InvalidConfig(format!("unknown step policy {other:?}"))),
    }
}

/// Normalised step probabilities for candidates with the given costs.
pub fn step_distribution(costs: &[f64], policy: &dyn StepPolicy) -> Vec<f64> {
    let w = policy.weights(costs);
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_bias_is_uniform() {
        let p = step_distribution(&[1.0, 5.0, 2.0], &ExpCost { bias: 0.0 });
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn ln2_bias_halves_per_unit_cost() {
        let p = step_distribution(&[1.0, 2.0], &ExpCost { bias: 2f64.ln() });
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn always_positive() {
        let p = step_distribution(&[0.0, 1e6], &ExpCost { bias: 50.0 });
        assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn registry() {
        assert_eq!(policy("uniform", 3.0).unwrap().name(), "uniform");
        assert!(policy("greedy", 0.0).is_err());
        assert!(policy("exp-cost", -1.0).is_err());
    }
}
