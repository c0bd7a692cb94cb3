//! Risk measures over discrete travel-time distributions.
//!
//! Every measure here is monotonic with first-order stochastic dominance,
//! which is what the search relies on for dominance pruning.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDistribution;
use crate::error::{Error, Result};

/// Strictly increasing disutility of travel time. A convex choice makes the
/// expected-utility criterion risk-averse over durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UtilityFunction {
    /// u(x) = x
    Linear,
    /// u(x) = (exp(beta x) - 1) / beta, beta > 0 (convex, risk-averse)
    Exponential { beta: f64 },
    /// Piecewise-linear interpolation through strictly increasing points,
    /// extrapolated linearly beyond the ends.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl UtilityFunction {
    pub fn exponential(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "exponential utility needs beta > 0, got {beta}"
            )));
        }
        Ok(UtilityFunction::Exponential { beta })
    }

    pub fn piecewise_linear(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter(
                "piecewise-linear utility needs at least two points".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::InvalidParameter(
                    "piecewise-linear utility must be strictly increasing".into(),
                ));
            }
        }
        Ok(UtilityFunction::PiecewiseLinear { points })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            UtilityFunction::Linear => x,
            UtilityFunction::Exponential { beta } => ((beta * x).exp() - 1.0) / beta,
            UtilityFunction::PiecewiseLinear { points } => {
                let segment = |a: &(f64, f64), b: &(f64, f64)| {
                    a.1 + (x - a.0) * (b.1 - a.1) / (b.0 - a.0)
                };
                if x <= points[0].0 {
                    return segment(&points[0], &points[1]);
                }
                for w in points.windows(2) {
                    if x <= w[1].0 {
                        return segment(&w[0], &w[1]);
                    }
                }
                let n = points.len();
                segment(&points[n - 2], &points[n - 1])
            }
        }
    }
}

/// The risk criterion evaluated by a routing query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RiskSpec {
    Expectation,
    /// alpha-quantile of the cost.
    ValueAtRisk { alpha: f64 },
    /// Expected cost conditional on cost >= VaR_alpha. alpha = 0 is the
    /// plain expectation.
    ConditionalValueAtRisk { alpha: f64 },
    ExpectedUtility(UtilityFunction),
}

impl RiskSpec {
    pub fn var(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "VaR level {alpha} outside (0, 1)"
            )));
        }
        Ok(RiskSpec::ValueAtRisk { alpha })
    }

    pub fn cvar(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "CVaR level {alpha} outside [0, 1)"
            )));
        }
        Ok(RiskSpec::ConditionalValueAtRisk { alpha })
    }

    pub fn evaluate(&self, d: &DiscreteDistribution) -> Result<f64> {
        match self {
            RiskSpec::Expectation => Ok(d.mean()),
            RiskSpec::ValueAtRisk { alpha } => d.quantile(*alpha),
            RiskSpec::ConditionalValueAtRisk { alpha } => {
                if *alpha <= 0.0 {
                    return Ok(d.mean());
                }
                // Tail average over the worst (1 - alpha) of the mass. The
                // VaR atom is split so exactly 1 - alpha mass contributes,
                // which keeps the measure monotone under stochastic
                // dominance on discrete distributions.
                let var = d.quantile(*alpha)?;
                let mut acc = 0.0;
                let mut tail = 0.0;
                for (x, p) in d.support() {
                    if x > var + 1e-9 {
                        acc += x * p;
                        tail += p;
                    }
                }
                let at_var = (1.0 - tail - alpha).max(0.0);
                Ok((acc + var * at_var) / (1.0 - alpha))
            }
            RiskSpec::ExpectedUtility(u) => {
                Ok(d.support().map(|(x, p)| p * u.eval(x)).sum())
            }
        }
    }

    /// Whether `mean(D)` is guaranteed to lower-bound `evaluate(self, D)`.
    /// Holds for the expectation itself and for CVaR (CVaR_alpha >= CVaR_0 =
    /// mean), but not for VaR or a general utility; the expectation-based
    /// pruning rule in the search is only applied when this returns true.
    pub fn mean_is_lower_bound(&self) -> bool {
        matches!(
            self,
            RiskSpec::Expectation | RiskSpec::ConditionalValueAtRisk { .. }
        )
    }
}

impl fmt::Display for RiskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskSpec::Expectation => write!(f, "expectation"),
            RiskSpec::ValueAtRisk { alpha } => write!(f, "var:{alpha}"),
            RiskSpec::ConditionalValueAtRisk { alpha } => write!(f, "cvar:{alpha}"),
            RiskSpec::ExpectedUtility(UtilityFunction::Linear) => write!(f, "eu:linear"),
            RiskSpec::ExpectedUtility(UtilityFunction::Exponential { beta }) => {
                write!(f, "eu:exp:{beta}")
            }
            RiskSpec::ExpectedUtility(UtilityFunction::PiecewiseLinear { .. }) => {
                write!(f, "eu:pwl")
            }
        }
    }
}

impl FromStr for RiskSpec {
    type Err = Error;

    /// Accepts `expectation`, `var:0.95`, `cvar:0.9`, `eu:linear`,
    /// `eu:exp:0.01`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::parse(format!("risk spec '{s}'"), msg);
        let mut parts = s.split(':');
        match parts.next() {
            Some("expectation") => Ok(RiskSpec::Expectation),
            Some("var") => {
                let alpha: f64 = parts
                    .next()
                    .ok_or_else(|| bad("missing alpha"))?
                    .parse()
                    .map_err(|e| bad(&format!("bad alpha: {e}")))?;
                RiskSpec::var(alpha)
            }
            Some("cvar") => {
                let alpha: f64 = parts
                    .next()
                    .ok_or_else(|| bad("missing alpha"))?
                    .parse()
                    .map_err(|e| bad(&format!("bad alpha: {e}")))?;
                RiskSpec::cvar(alpha)
            }
            Some("eu") => match parts.next() {
                Some("linear") => Ok(RiskSpec::ExpectedUtility(UtilityFunction::Linear)),
                Some("exp") => {
                    let beta: f64 = parts
                        .next()
                        .ok_or_else(|| bad("missing beta"))?
                        .parse()
                        .map_err(|e| bad(&format!("bad beta: {e}")))?;
                    Ok(RiskSpec::ExpectedUtility(UtilityFunction::exponential(beta)?))
                }
                _ => Err(bad("unknown utility family")),
            },
            _ => Err(bad("unknown risk measure")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::tests::arb_dist;
    use crate::dist::FsdOrdering;
    use proptest::prelude::*;

    fn all_specs() -> Vec<RiskSpec> {
        vec![
            RiskSpec::Expectation,
            RiskSpec::var(0.9).unwrap(),
            RiskSpec::cvar(0.9).unwrap(),
            RiskSpec::ExpectedUtility(UtilityFunction::exponential(0.3).unwrap()),
        ]
    }

    #[test]
    fn cvar_of_point_mass_is_the_point() {
        let d = DiscreteDistribution::point_mass(1.0, 42.0).unwrap();
        for alpha in [0.0, 0.5, 0.99] {
            assert_eq!(RiskSpec::cvar(alpha).unwrap().evaluate(&d).unwrap(), 42.0);
        }
    }

    #[test]
    fn var_table1_concatenated_alt_branch() {
        let alt = DiscreteDistribution::from_support(1.0, &[(0.0, 0.9), (2.0, 0.1)]).unwrap();
        let nd = DiscreteDistribution::from_support(1.0, &[(0.0, 0.8), (1.0, 0.1), (2.0, 0.1)])
            .unwrap();
        let d = alt.convolve(&nd).unwrap();
        assert_eq!(RiskSpec::var(0.95).unwrap().evaluate(&d).unwrap(), 2.0);
    }

    #[test]
    fn cvar_tail_atom() {
        let d = DiscreteDistribution::from_support(1.0, &[(0.0, 0.9), (10.0, 0.1)]).unwrap();
        assert!((RiskSpec::cvar(0.9).unwrap().evaluate(&d).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn linear_eu_is_the_mean() {
        let d = DiscreteDistribution::from_support(1.0, &[(0.0, 0.25), (3.0, 0.75)]).unwrap();
        let eu = RiskSpec::ExpectedUtility(UtilityFunction::Linear);
        assert!((eu.evaluate(&d).unwrap() - d.mean()).abs() < 1e-12);
    }

    #[test]
    fn parse_round_trips() {
        for s in ["expectation", "var:0.95", "cvar:0.9", "eu:exp:0.01", "eu:linear"] {
            let spec: RiskSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("var:1.5".parse::<RiskSpec>().is_err());
        assert!("var".parse::<RiskSpec>().is_err());
        assert!("quantile:0.5".parse::<RiskSpec>().is_err());
    }

    #[test]
    fn piecewise_linear_utility() {
        let u = UtilityFunction::piecewise_linear(vec![(0.0, 0.0), (10.0, 5.0), (20.0, 30.0)])
            .unwrap();
        assert_eq!(u.eval(0.0), 0.0);
        assert_eq!(u.eval(5.0), 2.5);
        assert_eq!(u.eval(15.0), 17.5);
        assert_eq!(u.eval(30.0), 55.0); // linear extrapolation
        assert!(UtilityFunction::piecewise_linear(vec![(0.0, 0.0), (1.0, 0.0)]).is_err());
    }

    proptest! {
        // FSD monotonicity: a dominating (stochastically larger) cost never
        // scores better under any of the measures.
        #[test]
        fn fsd_monotonicity(x in arb_dist(5, 8), y in arb_dist(5, 8)) {
            if x.fsd_compare(&y).unwrap() == FsdOrdering::FirstDominates {
                for spec in all_specs() {
                    let rx = spec.evaluate(&x).unwrap();
                    let ry = spec.evaluate(&y).unwrap();
                    prop_assert!(rx >= ry - 1e-9, "{spec}: {rx} < {ry}");
                }
            }
        }

        // INC: adding a non-negative cost cannot decrease the measure.
        #[test]
        fn inc_property(x in arb_dist(5, 8), c in arb_dist(5, 8)) {
            let xc = x.convolve(&c).unwrap();
            for spec in all_specs() {
                prop_assert!(spec.evaluate(&xc).unwrap() >= spec.evaluate(&x).unwrap() - 1e-9);
            }
        }

        // Corollary 1: dominance survives adding a common cost, in rho terms.
        #[test]
        fn corollary1(x in arb_dist(5, 8), y in arb_dist(5, 8), z in arb_dist(5, 8)) {
            if x.fsd_compare(&y).unwrap() == FsdOrdering::FirstDominates {
                let xz = x.convolve(&z).unwrap();
                let yz = y.convolve(&z).unwrap();
                for spec in all_specs() {
                    prop_assert!(spec.evaluate(&xz).unwrap() >= spec.evaluate(&yz).unwrap() - 1e-9);
                }
            }
        }

        #[test]
        fn var_le_cvar_and_cvar_monotone_in_alpha(d in arb_dist(5, 8)) {
            let mut prev = d.mean();
            for alpha in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
                let var = RiskSpec::var(alpha).unwrap().evaluate(&d).unwrap();
                let cvar = RiskSpec::cvar(alpha).unwrap().evaluate(&d).unwrap();
                prop_assert!(var <= cvar + 1e-9);
                prop_assert!(cvar >= prev - 1e-9);
                prev = cvar;
            }
        }

        #[test]
        fn cvar_zero_is_mean(d in arb_dist(5, 8)) {
            let c0 = RiskSpec::cvar(0.0).unwrap().evaluate(&d).unwrap();
            prop_assert!((c0 - d.mean()).abs() < 1e-9);
        }
    }
}
