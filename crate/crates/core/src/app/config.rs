//! Run configuration: one flat key set, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{default_catalog, CasePreset, Catalog, MarketParams};
use crate::risk::RiskConfig;
use crate::scenarios::FeatureOptions;
use crate::solve::{BendersOptions, SolveOptions};

use super::synth::{SynthProfile, DEFAULT_PROFILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    Backward,
    Kmeans,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Monolithic,
    Benders,
    Oracle,
}

/// Every knob of a run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Hourly year CSV; a synthetic year is generated when absent.
    pub year_path: Option<PathBuf>,
    pub synth_seed: u64,
    pub synth_profile: String,
    pub price_valley: f64,
    pub price_peak: f64,
    /// Candidate catalog TOML; the bundled catalog when absent.
    pub catalog_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub steps_per_day: usize,

    pub alpha: f64,
    pub beta: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,

    pub reduction_method: ReductionMethod,
    pub reduction_target: usize,
    pub reduction_seed: u64,
    pub ladder_targets: Vec<usize>,
    /// Min-max scale each channel before distances; raw units when false.
    pub normalize_features: bool,

    pub solve_method: SolveMethod,
    pub gap: f64,
    pub time_limit: Option<f64>,
    pub max_iter: usize,

    pub case: CasePreset,
    pub gas_price_rmb_per_m3: f64,
    pub gas_heating_value_kwh_per_m3: f64,
    pub discount_rate: f64,
    pub lifetime_converter: Option<f64>,
    pub lifetime_ess: Option<f64>,
    pub lifetime_res: Option<f64>,
    pub res_penetration_cap: f64,
    pub shed_cost_e: f64,
    pub shed_cost_h: f64,
    pub shed_cost_c: f64,
    pub dt_hours: f64,
    pub days_per_year: f64,
    pub max_modules: Option<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tariff = SynthProfile::industrial_park_default();
        let market = MarketParams::default();
        Self {
            year_path: None,
            synth_seed: 2024,
            synth_profile: DEFAULT_PROFILE.into(),
            price_valley: tariff.price_valley,
            price_peak: tariff.price_peak,
            catalog_path: None,
            output_dir: PathBuf::from("out"),
            steps_per_day: 24,
            alpha: 0.95,
            beta: 0.5,
            alphas: vec![0.9, 0.95, 0.99],
            betas: vec![0.1, 0.5, 0.9],
            reduction_method: ReductionMethod::Backward,
            reduction_target: 30,
            reduction_seed: 7,
            ladder_targets: vec![10, 30, 50, 100],
            normalize_features: true,
            solve_method: SolveMethod::Benders,
            gap: 1e-4,
            time_limit: None,
            max_iter: 200,
            case: CasePreset::Case4,
            gas_price_rmb_per_m3: 3.4,
            gas_heating_value_kwh_per_m3: 10.0,
            discount_rate: market.discount_rate,
            lifetime_converter: None,
            lifetime_ess: None,
            lifetime_res: None,
            res_penetration_cap: market.res_penetration_cap,
            shed_cost_e: market.shed_cost[0],
            shed_cost_h: market.shed_cost[1],
            shed_cost_c: market.shed_cost[2],
            dt_hours: market.dt_hours,
            days_per_year: market.days_per_year,
            max_modules: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks ranges and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for p in [&self.year_path, &self.catalog_path].into_iter().flatten() {
            if !p.is_file() {
                return bad(format!("file not found: {}", p.display()));
            }
        }
        for (a, b) in std::iter::once((self.alpha, self.beta))
            .chain(self.alphas.iter().map(|a| (*a, 0.0)))
            .chain(self.betas.iter().map(|b| (0.5, *b)))
        {
            RiskConfig::new(a, b).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.year_path.is_none() {
            SynthProfile::named(&self.synth_profile)?;
        }
        if self.steps_per_day == 0 || self.reduction_target == 0 || self.max_iter == 0 {
            return bad("steps_per_day, reduction_target and max_iter must be positive".into());
        }
        if self.ladder_targets.contains(&0) {
            return bad("ladder targets must be positive".into());
        }
        if !(self.gap > 0.0 && self.gap < 1.0) {
            return bad(format!("gap {} outside (0, 1)", self.gap));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return bad("time_limit must be positive".into());
        }
        if !(self.discount_rate > 0.0 && self.discount_rate < 1.0) {
            return bad(format!("discount_rate {} outside (0, 1)", self.discount_rate));
        }
        if !(0.0..=1.0).contains(&self.res_penetration_cap) {
            return bad(format!(
                "res_penetration_cap {} outside [0, 1]",
                self.res_penetration_cap
            ));
        }
        if !(self.dt_hours > 0.0 && self.days_per_year > 0.0) {
            return bad("dt_hours and days_per_year must be positive".into());
        }
        if [self.shed_cost_e, self.shed_cost_h, self.shed_cost_c]
            .iter()
            .any(|c| !(*c >= 0.0))
        {
            return bad("shedding costs must be nonnegative".into());
        }
        if [self.lifetime_converter, self.lifetime_ess, self.lifetime_res]
            .iter()
            .flatten()
            .any(|l| !(*l > 0.0))
        {
            return bad("lifetimes must be positive".into());
        }
        self.market()?;
        Ok(())
    }

    pub fn risk(&self) -> Result<RiskConfig> {
        RiskConfig::new(self.alpha, self.beta).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn market(&self) -> Result<MarketParams> {
        Ok(MarketParams {
            gas_price: MarketParams::gas_price_per_mwh(self.gas_price_rmb_per_m3, self.gas_heating_value_kwh_per_m3)?,
            shed_cost: [self.shed_cost_e, self.shed_cost_h, self.shed_cost_c],
            res_penetration_cap: self.res_penetration_cap,
            discount_rate: self.discount_rate,
            dt_hours: self.dt_hours,
            days_per_year: self.days_per_year,
        })
    }

    pub fn synth_profile(&self) -> Result<SynthProfile> {
        let mut p = SynthProfile::named(&self.synth_profile)?;
        p.price_valley = self.price_valley;
        p.price_peak = self.price_peak;
        Ok(p)
    }

    /// Catalog with overrides applied, before any case restriction.
    pub fn base_catalog(&self) -> Result<Catalog> {
        let mut cat = match &self.catalog_path {
            Some(p) => Catalog::load(p)?,
            None => default_catalog(),
        };
        if let Some(l) = self.lifetime_converter {
            cat.devices.iter_mut().for_each(|d| d.lifetime_years = l);
        }
        if let Some(l) = self.lifetime_ess {
            cat.ess_options.iter_mut().for_each(|e| e.lifetime_years = l);
        }
        if let Some(l) = self.lifetime_res {
            cat.res_options.iter_mut().for_each(|r| r.lifetime_years = l);
        }
        if let Some(cap) = self.max_modules {
            cat = cat.with_max_modules(cap);
        }
        cat.validate()?;
        Ok(cat)
    }

    pub fn catalog(&self, case: CasePreset) -> Result<Catalog> {
        Ok(self.base_catalog()?.for_case(case))
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            normalize: self.normalize_features,
            ..FeatureOptions::default()
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            mip_rel_gap: self.gap,
            time_limit: self.time_limit,
        }
    }

    pub fn benders_options(&self) -> BendersOptions {
        BendersOptions {
            gap: self.gap,
            max_iter: self.max_iter,
            ..BendersOptions::default()
        }
    }
}
