//! Value-at-Risk and Conditional Value-at-Risk on discrete scenario losses,
//! plus the linear machinery that embeds CVaR into a planning MILP.
//!
//! For a discrete distribution CVaR is
//!
//! ```text
//! CVaR_α = min_ζ  ζ + 1/(1-α) · Σ_s p_s · max(0, loss_s - ζ)
//! ```
//!
//! which [`cvar`] evaluates in closed form by averaging the upper `1-α`
//! probability mass of the sorted losses, splitting the boundary atom
//! fractionally. [`emit_risk_terms`] writes the same minimisation as LP rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::{LinExpr, MilpProblem, Sense, VarId};

const PROB_TOL: f64 = 1e-9;
const CDF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LossDistribution {
    losses: Vec<f64>,
    probs: Vec<f64>,
}

impl LossDistribution {
    pub fn new(losses: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::Domain("empty loss distribution".into()));
        }
        if losses.len() != probs.len() {
            return Err(Error::Domain(format!(
                "{} losses but {} probabilities",
                losses.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("probabilities must be finite and nonnegative".into()));
        }
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::Domain("losses must be finite".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { losses, probs })
    }

    /// Equally likely losses.
    pub fn uniform(losses: Vec<f64>) -> Result<Self> {
        let n = losses.len();
        if n == 0 {
            return Err(Error::Domain("empty loss distribution".into()));
        }
        Self::new(losses, vec![1.0 / n as f64; n])
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.losses.iter().zip(&self.probs).map(|(l, p)| l * p).sum()
    }

    fn sorted_ascending(&self) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = self.losses.iter().copied().zip(self.probs.iter().copied()).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms
    }
}

/// Confidence level `alpha` and risk weight `beta` of the objective
/// `IC + (1-β)·E[loss] + β·CVaR_α[loss]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl RiskConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let cfg = Self { alpha, beta };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha = {} outside [0, 1)", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Domain(format!("beta = {} outside [0, 1]", self.beta)));
        }
        Ok(())
    }

    /// Risk-neutral expected-cost objective.
    pub fn neutral() -> Self {
        Self { alpha: 0.0, beta: 0.0 }
    }
}

/// Smallest realised loss whose cumulative probability reaches `alpha`.
pub fn empirical_var(dist: &LossDistribution, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    let atoms = dist.sorted_ascending();
    let mut cdf = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        // equal losses form a single atom of the CDF
        let level = atoms[i].0;
        while i < atoms.len() && atoms[i].0 == level {
            cdf += atoms[i].1;
            i += 1;
        }
        if cdf >= alpha - CDF_TOL {
            return Ok(level);
        }
    }
    Ok(atoms.last().map(|a| a.0).unwrap_or_default())
}

/// Conditional Value-at-Risk at confidence `alpha`.
pub fn cvar(dist: &LossDistribution, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1)")));
    }
    let tail = 1.0 - alpha;
    let mut remaining = tail;
    let mut acc = 0.0;
    for &(loss, p) in dist.sorted_ascending().iter().rev() {
        if remaining <= 0.0 {
            break;
        }
        let w = p.min(remaining);
        acc += w * loss;
        remaining -= w;
    }
    // `remaining` can only stay positive through rounding of the probability sum
    if remaining > 0.0 {
        let max = dist.losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        acc += remaining * max;
    }
    Ok(acc / tail)
}

/// `ζ + 1/(1-α) Σ p_s max(0, loss_s - ζ)` at a given threshold.
pub fn cvar_objective_at(dist: &LossDistribution, alpha: f64, zeta: f64) -> f64 {
    zeta + dist
        .losses
        .iter()
        .zip(&dist.probs)
        .map(|(l, p)| p * (l - zeta).max(0.0))
        .sum::<f64>()
        / (1.0 - alpha)
}

/// Handles and coefficients of the CVaR block written into a MILP.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTerms {
    pub zeta: VarId,
    pub excess: Vec<VarId>,
    /// Row indices of `excess_s + ζ - loss_s >= 0`.
    pub rows: Vec<usize>,
    pub zeta_coef: f64,
    pub excess_coefs: Vec<f64>,
    pub loss_coefs: Vec<f64>,
}

/// Adds `ζ`, one excess variable per scenario, the rows
/// `excess_s >= loss_s - ζ`, and the objective
/// `(1-β) Σ p_s loss_s + β (ζ + Σ p_s excess_s / (1-α))`.
pub fn emit_risk_terms(
    problem: &mut MilpProblem,
    scenario_losses: &[LinExpr],
    probs: &[f64],
    risk: RiskConfig,
) -> Result<RiskTerms> {
    risk.check()?;
    if scenario_losses.len() != probs.len() {
        return Err(Error::Domain(format!(
            "{} loss expressions but {} probabilities",
            scenario_losses.len(),
            probs.len()
        )));
    }
    if scenario_losses.is_empty() {
        return Err(Error::Domain("no scenarios".into()));
    }
    let RiskConfig { alpha, beta } = risk;
    let zeta = problem.add_continuous("zeta", f64::NEG_INFINITY, f64::INFINITY);
    let zeta_coef = beta;
    problem.add_objective(&(zeta * zeta_coef));

    let mut excess = Vec::with_capacity(probs.len());
    let mut rows = Vec::with_capacity(probs.len());
    let mut excess_coefs = Vec::with_capacity(probs.len());
    let mut loss_coefs = Vec::with_capacity(probs.len());
    for (s, (loss, &p)) in scenario_losses.iter().zip(probs).enumerate() {
        let e = problem.add_continuous(format!("excess_s{s}"), 0.0, f64::INFINITY);
        let mut row = LinExpr::from(e) + LinExpr::from(zeta);
        row += loss.scaled(-1.0);
        rows.push(problem.add_constraint("risk.excess", row, Sense::Ge, 0.0));
        let ec = beta * p / (1.0 - alpha);
        problem.add_objective(&(e * ec));
        let lc = (1.0 - beta) * p;
        problem.add_objective(&loss.scaled(lc));
        excess.push(e);
        excess_coefs.push(ec);
        loss_coefs.push(lc);
    }
    Ok(RiskTerms {
        zeta,
        excess,
        rows,
        zeta_coef,
        excess_coefs,
        loss_coefs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn four() -> LossDistribution {
        LossDistribution::uniform(vec![10.0, 20.0, 30.0, 40.0]).unwrap()
    }

    /// Minimum of the CVaR objective over every realised loss; the
    /// piecewise-linear objective attains its minimum at one of them.
    fn brute_cvar(d: &LossDistribution, alpha: f64) -> f64 {
        d.losses()
            .iter()
            .map(|&z| cvar_objective_at(d, alpha, z))
            .fold(f64::INFINITY, f64::min)
    }

    fn brute_var(d: &LossDistribution, alpha: f64) -> f64 {
        let mut candidates: Vec<f64> = d.losses().to_vec();
        candidates.sort_by(f64::total_cmp);
        for z in candidates {
            let cdf: f64 = d
                .losses()
                .iter()
                .zip(d.probs())
                .filter(|(l, _)| **l <= z)
                .map(|(_, p)| p)
                .sum();
            if cdf >= alpha - 1e-12 {
                return z;
            }
        }
        unreachable!()
    }

    #[test]
    fn var_four_atoms() {
        assert_eq!(empirical_var(&four(), 0.75).unwrap(), 30.0);
        assert_eq!(empirical_var(&four(), 0.9).unwrap(), 40.0);
        let single = LossDistribution::new(vec![7.5], vec![1.0]).unwrap();
        for a in [0.0, 0.3, 0.99] {
            assert_eq!(empirical_var(&single, a).unwrap(), 7.5);
        }
    }

    #[test]
    fn cvar_four_atoms() {
        assert_eq!(cvar(&four(), 0.75).unwrap(), 40.0);
        assert_eq!(cvar(&four(), 0.5).unwrap(), 35.0);
        assert_eq!(cvar(&four(), 0.0).unwrap(), 25.0);
    }

    #[test]
    fn cvar_rejects_alpha_one() {
        assert!(matches!(cvar(&four(), 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn empty_distribution_is_rejected() {
        assert!(LossDistribution::new(vec![], vec![]).is_err());
        assert!(LossDistribution::new(vec![1.0], vec![0.5]).is_err());
    }

    #[test]
    fn alpha_past_last_breakpoint_gives_max() {
        let d = LossDistribution::new(vec![1.0, 5.0, 3.0], vec![0.5, 0.1, 0.4]).unwrap();
        assert!((cvar(&d, 0.95).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn risk_terms_census_and_beta_zero() {
        let mut p = MilpProblem::new();
        let losses: Vec<LinExpr> = (0..5)
            .map(|s| LinExpr::from(p.add_continuous(format!("l{s}"), 0.0, 1.0)))
            .collect();
        let before = p.num_constraints();
        let terms = emit_risk_terms(&mut p, &losses, &[0.2; 5], RiskConfig::new(0.9, 0.0).unwrap()).unwrap();
        assert_eq!(terms.excess.len(), 5);
        assert_eq!(p.num_constraints() - before, 5);
        assert_eq!(p.objective[terms.zeta.0], 0.0);
        assert!(terms.excess.iter().all(|e| p.objective[e.0] == 0.0));
        assert!(terms.excess.iter().all(|e| p.vars[e.0].lower == 0.0));
    }

    #[test]
    fn risk_terms_length_mismatch() {
        let mut p = MilpProblem::new();
        let l = vec![LinExpr::constant(1.0)];
        assert!(emit_risk_terms(&mut p, &l, &[0.5, 0.5], RiskConfig::neutral()).is_err());
    }

    #[test]
    fn risk_objective_at_optimal_excess_matches_closed_form() {
        // losses fixed as constants; ζ at VaR and excess at max(0, l-ζ)
        let losses = [10.0, 20.0, 30.0, 40.0];
        let risk = RiskConfig::new(0.75, 1.0).unwrap();
        let mut p = MilpProblem::new();
        let exprs: Vec<LinExpr> = losses.iter().map(|&l| LinExpr::constant(l)).collect();
        let terms = emit_risk_terms(&mut p, &exprs, &[0.25; 4], risk).unwrap();
        let d = four();
        let zeta = empirical_var(&d, risk.alpha).unwrap();
        let mut x = vec![0.0; p.num_vars()];
        x[terms.zeta.0] = zeta;
        for (e, l) in terms.excess.iter().zip(losses) {
            x[e.0] = (l - zeta).max(0.0);
        }
        assert_eq!(p.max_violation(&x), 0.0);
        assert!((p.objective_value(&x) - 40.0).abs() < 1e-12);
    }

    fn dist_strategy() -> impl Strategy<Value = LossDistribution> {
        prop::collection::vec((0.0f64..1e4, 0.01f64..1.0), 1..12).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let (l, p): (Vec<f64>, Vec<f64>) = atoms.into_iter().map(|(l, p)| (l, p / total)).unzip();
            LossDistribution::new(l, p).unwrap()
        })
    }

    proptest! {
        #[test]
        fn cvar_matches_brute_minimum(d in dist_strategy(), alpha in 0.0f64..0.999) {
            let c = cvar(&d, alpha).unwrap();
            let b = brute_cvar(&d, alpha);
            prop_assert!((c - b).abs() <= 1e-9 * b.abs().max(1.0));
        }

        #[test]
        fn var_matches_brute_cdf(d in dist_strategy(), alpha in 0.0f64..1.0) {
            prop_assert_eq!(empirical_var(&d, alpha).unwrap(), brute_var(&d, alpha));
        }

        #[test]
        fn cvar_dominates_var_and_is_monotone(d in dist_strategy(), a in 0.0f64..0.99, b in 0.0f64..0.99) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let scale = d.losses().iter().fold(1.0f64, |m, l| m.max(l.abs()));
            prop_assert!(cvar(&d, lo).unwrap() <= cvar(&d, hi).unwrap() + 1e-9 * scale);
            prop_assert!(cvar(&d, lo).unwrap() >= empirical_var(&d, lo).unwrap() - 1e-9 * scale);
        }
    }
}
