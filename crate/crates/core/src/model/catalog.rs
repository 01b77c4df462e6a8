//! Candidate option catalogs and instance assembly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeviceOption, EhInstance, EssModuleSpec, ResModuleSpec, Scenario};

const DEFAULT_CATALOG: &str = include_str!("../../data/default_catalog.toml");

/// Every candidate option a planner may choose from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(default)]
    pub devices: Vec<DeviceOption>,
    #[serde(default)]
    pub res_options: Vec<ResModuleSpec>,
    #[serde(default)]
    pub ess_options: Vec<EssModuleSpec>,
}

/// Candidate subsets compared in the coupling study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CasePreset {
    /// Converters only.
    Case1,
    /// Converters and renewables.
    Case2,
    /// Converters and storage.
    Case3,
    /// Everything.
    Case4,
    /// The catalog as given.
    Custom,
}

impl CasePreset {
    pub const STUDY: [CasePreset; 4] = [
        CasePreset::Case1,
        CasePreset::Case2,
        CasePreset::Case3,
        CasePreset::Case4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CasePreset::Case1 => "case1",
            CasePreset::Case2 => "case2",
            CasePreset::Case3 => "case3",
            CasePreset::Case4 => "case4",
            CasePreset::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "case1" => Ok(CasePreset::Case1),
            "case2" => Ok(CasePreset::Case2),
            "case3" => Ok(CasePreset::Case3),
            "case4" => Ok(CasePreset::Case4),
            "custom" => Ok(CasePreset::Custom),
            _ => Err(Error::Config(format!("unknown case preset '{s}'"))),
        }
    }

    fn keeps_res(self) -> bool {
        matches!(self, CasePreset::Case2 | CasePreset::Case4 | CasePreset::Custom)
    }

    fn keeps_ess(self) -> bool {
        matches!(self, CasePreset::Case3 | CasePreset::Case4 | CasePreset::Custom)
    }
}

impl Catalog {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cat: Catalog = toml::from_str(text).map_err(|e| Error::Config(format!("catalog: {e}")))?;
        cat.validate()?;
        Ok(cat)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read catalog {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("catalog: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.devices.iter().try_for_each(DeviceOption::validate)?;
        self.res_options.iter().try_for_each(ResModuleSpec::validate)?;
        self.ess_options.iter().try_for_each(EssModuleSpec::validate)
    }

    /// Subset of options allowed by a case preset.
    pub fn for_case(&self, case: CasePreset) -> Catalog {
        Catalog {
            devices: self.devices.clone(),
            res_options: if case.keeps_res() {
                self.res_options.clone()
            } else {
                Vec::new()
            },
            ess_options: if case.keeps_ess() {
                self.ess_options.clone()
            } else {
                Vec::new()
            },
        }
    }

    /// Overrides lifetimes per option class.
    pub fn with_lifetimes(mut self, converters: f64, ess: f64, res: f64) -> Self {
        self.devices.iter_mut().for_each(|d| d.lifetime_years = converters);
        self.ess_options.iter_mut().for_each(|e| e.lifetime_years = ess);
        self.res_options.iter_mut().for_each(|r| r.lifetime_years = res);
        self
    }

    /// Overrides the module cap of every RES and ESS option.
    pub fn with_max_modules(mut self, cap: u32) -> Self {
        self.ess_options.iter_mut().for_each(|e| e.max_modules = cap);
        self.res_options.iter_mut().for_each(|r| r.max_modules = cap);
        self
    }

    pub fn instance(&self, scenarios: Vec<Scenario>, market: &MarketParams) -> EhInstance {
        EhInstance {
            devices: self.devices.clone(),
            res_options: self.res_options.clone(),
            ess_options: self.ess_options.clone(),
            scenarios,
            gas_price: market.gas_price,
            shed_cost: market.shed_cost,
            res_penetration_cap: market.res_penetration_cap,
            discount_rate: market.discount_rate,
            dt_hours: market.dt_hours,
            days_per_year: market.days_per_year,
        }
    }
}

/// The shipped catalog.
pub fn default_catalog() -> Catalog {
    Catalog::from_toml_str(DEFAULT_CATALOG).expect("bundled catalog is valid")
}

/// Scalar economic parameters of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// RMB per MWh of gas.
    pub gas_price: f64,
    pub shed_cost: [f64; 3],
    pub res_penetration_cap: f64,
    pub discount_rate: f64,
    pub dt_hours: f64,
    pub days_per_year: f64,
}

impl MarketParams {
    /// Gas price per MWh from a volumetric price and heating value.
    pub fn gas_price_per_mwh(rmb_per_m3: f64, heating_value_kwh_per_m3: f64) -> Result<f64> {
        if !(heating_value_kwh_per_m3 > 0.0) || !(rmb_per_m3 >= 0.0) {
            return Err(Error::Config("gas price and heating value must be positive".into()));
        }
        Ok(rmb_per_m3 / heating_value_kwh_per_m3 * 1000.0)
    }
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            gas_price: 340.0,
            shed_cost: [2000.0, 1800.0, 1800.0],
            res_penetration_cap: 0.5,
            discount_rate: 0.08,
            dt_hours: 1.0,
            days_per_year: 365.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DeviceKind, EssKind, ResKind};

    #[test]
    fn bundled_catalog_shape() {
        let cat = default_catalog();
        for kind in DeviceKind::ALL {
            assert_eq!(cat.devices.iter().filter(|d| d.kind == kind).count(), 5, "{kind}");
        }
        assert_eq!(cat.res_options.len(), 2);
        assert_eq!(cat.ess_options.len(), 3);
        let wt = cat.res_options.iter().find(|r| r.kind() == ResKind::Wt).unwrap();
        assert!((wt.rated_power - 1.6807169).abs() < 1e-6);
        assert!((wt.invest_cost - 350e4 * wt.rated_power).abs() < 1e-3);
        let pv = cat.res_options.iter().find(|r| r.kind() == ResKind::Pv).unwrap();
        assert!((pv.rated_power - 0.152874).abs() < 1e-6);
        let bess = cat.ess_options.iter().find(|e| e.kind == EssKind::Bess).unwrap();
        assert_eq!(bess.invest_cost, 90e4);
        assert_eq!(bess.max_charge_power, 0.5 * bess.energy_per_module);
    }

    #[test]
    fn catalog_round_trips_through_toml() {
        let cat = default_catalog();
        let text = cat.to_toml_string().unwrap();
        assert_eq!(Catalog::from_toml_str(&text).unwrap(), cat);
    }

    #[test]
    fn case_presets_nest() {
        let cat = default_catalog();
        let c1 = cat.for_case(CasePreset::Case1);
        assert!(c1.res_options.is_empty() && c1.ess_options.is_empty());
        let c2 = cat.for_case(CasePreset::Case2);
        assert!(!c2.res_options.is_empty() && c2.ess_options.is_empty());
        let c3 = cat.for_case(CasePreset::Case3);
        assert!(c3.res_options.is_empty() && !c3.ess_options.is_empty());
        assert_eq!(cat.for_case(CasePreset::Case4), cat);
        assert_eq!(CasePreset::parse("case3").unwrap(), CasePreset::Case3);
        assert!(CasePreset::parse("case9").is_err());
    }

    #[test]
    fn gas_conversion() {
        assert!((MarketParams::gas_price_per_mwh(3.4, 10.0).unwrap() - 340.0).abs() < 1e-9);
        assert!(MarketParams::gas_price_per_mwh(3.4, 0.0).is_err());
    }

    #[test]
    fn malformed_catalog_is_config_error() {
        assert!(matches!(Catalog::from_toml_str("devices = 3"), Err(Error::Config(_))));
    }
}
