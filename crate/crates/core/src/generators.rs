//! Seeded random graph and matrix models and their limit P-variables.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::measures::{DiscreteMeasure, PROB_TOL};
use crate::pvariable::StepPVariable;
use crate::seed;

/// A named model. Sampled models draw an `n × n` matrix; limit models are
/// single-cell P-variables and ignore `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Generator {
    /// `G(n, p)`: symmetric, zero diagonal.
    Er { p: f64 },
    /// Complete graph with probability `p`, otherwise empty.
    OnOff { p: f64 },
    /// Symmetric, zero diagonal; colour `s` with probability `probs[s]`.
    Colored { probs: Vec<f64> },
    /// i.i.d. entries, `−1` with probability `p`, else `+1`.
    PmOne { p: f64 },
    /// i.i.d. standard normal entries.
    GaussProbit,
    /// `(1 − p) δ_0 + p δ_1`.
    Indicator { p: f64 },
    /// `Σ_s probs[s] δ_s`.
    ColoredLimit { probs: Vec<f64> },
    /// `p δ_{−1} + (1 − p) δ_1`.
    PmLimit { p: f64 },
    /// Standard normal discretized to `levels` equal-mass quantiles.
    ProbitLimit { levels: usize },
    /// `δ_value`.
    Constant { value: f64 },
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("probability {p} outside [0, 1]")))
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(invalid("empty probability vector"));
    }
    for &p in probs {
        check_p(p)?;
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::NotProbability { mass: total });
    }
    Ok(())
}

/// `Φ^{-1}((i + ½) / levels)`, each with weight `1 / levels`.
pub fn probit_law(levels: usize) -> Result<DiscreteMeasure> {
    if levels == 0 {
        return Err(invalid("probit discretization needs at least one level"));
    }
    let normal = Normal::standard();
    let m = levels as f64;
    let pairs: Vec<(f64, f64)> = (0..levels)
        .map(|i| (normal.inverse_cdf((i as f64 + 0.5) / m), 1.0 / m))
        .collect();
    DiscreteMeasure::from_pairs(&pairs)
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Generator::Er { p } | Generator::OnOff { p } | Generator::PmOne { p } => check_p(*p),
            Generator::Indicator { p } | Generator::PmLimit { p } => check_p(*p),
            Generator::Colored { probs } | Generator::ColoredLimit { probs } => check_probs(probs),
            Generator::ProbitLimit { levels } if *levels == 0 => Err(invalid("probit_limit needs levels ≥ 1")),
            Generator::Constant { value } if !value.is_finite() => Err(invalid("constant must be finite")),
            _ => Ok(()),
        }
    }

    pub fn is_limit(&self) -> bool {
        matches!(
            self,
            Generator::Indicator { .. }
                | Generator::ColoredLimit { .. }
                | Generator::PmLimit { .. }
                | Generator::ProbitLimit { .. }
                | Generator::Constant { .. }
        )
    }

    /// Limit law of the cell, for limit models and for sampled models with
    /// independent entries.
    pub fn limit_law(&self) -> Result<DiscreteMeasure> {
        self.validate()?;
        match self {
            Generator::Er { p } | Generator::Indicator { p } | Generator::OnOff { p } => {
                DiscreteMeasure::from_pairs(&[(0.0, 1.0 - p), (1.0, *p)])
            }
            Generator::PmOne { p } | Generator::PmLimit { p } => {
                DiscreteMeasure::from_pairs(&[(-1.0, *p), (1.0, 1.0 - p)])
            }
            Generator::Colored { probs } | Generator::ColoredLimit { probs } => {
                let pairs: Vec<(f64, f64)> = probs.iter().enumerate().map(|(s, &p)| (s as f64, p)).collect();
                DiscreteMeasure::from_pairs(&pairs)
            }
            Generator::GaussProbit => probit_law(DEFAULT_PROBIT_LEVELS),
            Generator::ProbitLimit { levels } => probit_law(*levels),
            Generator::Constant { value } => Ok(DiscreteMeasure::dirac(&[*value])),
        }
    }

    /// Draws an `n × n` matrix. Limit models sample their own cell law with
    /// the symmetric zero-diagonal convention.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        if n == 0 {
            return Err(invalid("sample size must be positive"));
        }
        match self {
            Generator::Er { .. } | Generator::Colored { .. } => {
                StepPVariable::constant(1, self.limit_law()?)?.sample_matrix(n, seed, true)
            }
            Generator::OnOff { p } => {
                let on = seed::rng(seed).random::<f64>() < *p;
                let v = if on { 1.0 } else { 0.0 };
                Ok((0..n)
                    .map(|i| (0..n).map(|j| if i == j { 0.0 } else { v }).collect())
                    .collect())
            }
            Generator::PmOne { p } => {
                let mut rng = seed::rng(seed);
                Ok((0..n)
                    .map(|_| {
                        (0..n)
                            .map(|_| if rng.random::<f64>() < *p { -1.0 } else { 1.0 })
                            .collect()
                    })
                    .collect())
            }
            Generator::GaussProbit => {
                let normal = Normal::standard();
                let mut rng = seed::rng(seed);
                Ok((0..n)
                    .map(|_| (0..n).map(|_| normal.inverse_cdf(rng.sample(Open01))).collect())
                    .collect())
            }
            _ => StepPVariable::constant(1, self.limit_law()?)?.sample_matrix(n, seed, true),
        }
    }

    /// The model as a P-variable: the sampled matrix, or the limit itself.
    pub fn generate(&self, n: usize, seed: u64) -> Result<StepPVariable> {
        if self.is_limit() {
            StepPVariable::constant(1, self.limit_law()?)
        } else {
            StepPVariable::from_matrix(&self.sample(n, seed)?)
        }
    }
}

/// Quantiles used when a normal law must be represented by finitely many atoms.
pub const DEFAULT_PROBIT_LEVELS: usize = 32;

fn list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Er { p } => write!(f, "er({p})"),
            Generator::OnOff { p } => write!(f, "onoff({p})"),
            Generator::Colored { probs } => write!(f, "colored({})", list(probs)),
            Generator::PmOne { p } => write!(f, "pm_one({p})"),
            Generator::GaussProbit => write!(f, "gauss_probit"),
            Generator::Indicator { p } => write!(f, "indicator({p})"),
            Generator::ColoredLimit { probs } => write!(f, "colored_limit({})", list(probs)),
            Generator::PmLimit { p } => write!(f, "pm_limit({p})"),
            Generator::ProbitLimit { levels } => write!(f, "probit_limit({levels})"),
            Generator::Constant { value } => write!(f, "constant({value})"),
        }
    }
}

/// Parses `name` or `name(a,b,…)`.
impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((name, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| invalid(format!("unbalanced parentheses in {s:?}")))?;
                let args = inner
                    .split(',')
                    .map(|a| a.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<f64>, _>>()
                    .map_err(|e| invalid(format!("bad argument in {s:?}: {e}")))?;
                (name.trim(), args)
            }
            None => (s, Vec::new()),
        };
        let one = || match args.as_slice() {
            [x] => Ok(*x),
            _ => Err(invalid(format!("{name} takes exactly one argument"))),
        };
        let g = match name {
            "er" => Generator::Er { p: one()? },
            "onoff" => Generator::OnOff { p: one()? },
            "colored" => Generator::Colored { probs: args.clone() },
            "pm_one" => Generator::PmOne { p: one()? },
            "gauss_probit" if args.is_empty() => Generator::GaussProbit,
            "indicator" => Generator::Indicator { p: one()? },
            "colored_limit" => Generator::ColoredLimit { probs: args.clone() },
            "pm_limit" => Generator::PmLimit { p: one()? },
            "probit_limit" => {
                let l = one()?;
                if !(l >= 1.0 && l.fract() == 0.0) {
                    return Err(invalid("probit_limit takes a positive integer"));
                }
                Generator::ProbitLimit { levels: l as usize }
            }
            "constant" => Generator::Constant { value: one()? },
            _ => return Err(invalid(format!("unknown generator {s:?}"))),
        };
        g.validate()?;
        Ok(g)
    }
}

impl TryFrom<String> for Generator {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Generator> for String {
    fn from(g: Generator) -> String {
        g.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_examples() {
        let half = "indicator(0.5)".parse::<Generator>().unwrap().generate(7, 0).unwrap();
        assert_eq!(half.n(), 1);
        assert_eq!(
            half.cell(0, 0),
            &DiscreteMeasure::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]).unwrap()
        );

        let pm = Generator::PmLimit { p: 0.3 }.generate(1, 0).unwrap();
        assert_eq!(
            pm.cell(0, 0),
            &DiscreteMeasure::from_pairs(&[(-1.0, 0.3), (1.0, 0.7)]).unwrap()
        );
    }

    #[test]
    fn onoff_is_complete_or_empty() {
        let g = Generator::OnOff { p: 0.5 };
        let mut seen = [false; 2];
        for seed in 0..32 {
            let a = g.sample(4, seed).unwrap();
            let edges: f64 = a.iter().flatten().sum();
            assert!(edges == 0.0 || edges == 12.0);
            seen[(edges > 0.0) as usize] = true;
            assert!((0..4).all(|i| a[i][i] == 0.0));
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn er_matches_indicator_sampler() {
        let a = Generator::Er { p: 0.3 }.sample(9, 5).unwrap();
        let b = Generator::Indicator { p: 0.3 }
            .generate(1, 0)
            .unwrap()
            .sample_matrix(9, 5, true)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parse_round_trip() {
        for s in [
            "er(0.5)",
            "colored(0.5,0.25,0.25)",
            "gauss_probit",
            "probit_limit(8)",
            "constant(0.5)",
        ] {
            let g: Generator = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        assert!("colored(0.5,0.2)".parse::<Generator>().is_err());
        assert!("er(1.5)".parse::<Generator>().is_err());
        assert!("er".parse::<Generator>().is_err());
        assert!("probit_limit(2.5)".parse::<Generator>().is_err());
    }

    #[test]
    fn probit_law_is_symmetric() {
        let law = probit_law(10).unwrap();
        assert!(law.is_probability());
        assert!(law.integrate(|z| z[0]).abs() < 1e-12);
        let g = Generator::GaussProbit.sample(5, 1).unwrap();
        assert!(g.iter().flatten().all(|v| v.is_finite()));
    }
}
