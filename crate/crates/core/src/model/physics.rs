//! Amortisation and renewable output curves.

use crate::error::{Error, Result};
use crate::model::{ResModuleSpec, ResTech};

/// Capital recovery factor `dr(1+dr)^T / ((1+dr)^T - 1)`.
///
/// Evaluated through `ln_1p`/`exp_m1` so that it stays accurate as the
/// rate approaches zero, where the factor tends to `1/T`.
pub fn annualization_coefficient(discount_rate: f64, lifetime_years: f64) -> Result<f64> {
    if !(discount_rate > 0.0) || !discount_rate.is_finite() {
        return Err(Error::Domain(format!("discount rate {discount_rate} must be positive")));
    }
    if !(lifetime_years >= 1.0) || !lifetime_years.is_finite() {
        return Err(Error::Domain(format!(
            "lifetime {lifetime_years} must be at least one year"
        )));
    }
    let growth_log = lifetime_years * discount_rate.ln_1p();
    Ok(discount_rate * growth_log.exp() / growth_log.exp_m1())
}

/// Available wind output of one turbine module, MW.
pub fn wind_power_max(spec: &ResModuleSpec, wind_speed: f64) -> Result<f64> {
    let ResTech::Wind(w) = &spec.tech else {
        return Err(Error::KindMismatch {
            expected: "WT".into(),
            got: spec.kind().to_string(),
        });
    };
    if !(wind_speed >= 0.0) {
        return Err(Error::Domain(format!("wind speed {wind_speed} must be nonnegative")));
    }
    if wind_speed <= w.cut_in || wind_speed >= w.cut_out {
        return Ok(0.0);
    }
    let v = wind_speed.min(w.rated_speed);
    Ok(0.5 * w.air_density * v.powi(3) * w.swept_area * w.conversion_eff * 1e-6)
}

/// Available PV output of one panel module, MW, for irradiance in W/m².
pub fn pv_power_max(spec: &ResModuleSpec, irradiance: f64) -> Result<f64> {
    let ResTech::Pv(p) = &spec.tech else {
        return Err(Error::KindMismatch {
            expected: "PV".into(),
            got: spec.kind().to_string(),
        });
    };
    if !(irradiance >= 0.0) {
        return Err(Error::Domain(format!("irradiance {irradiance} must be nonnegative")));
    }
    let out = irradiance * p.tilt_deg.to_radians().cos() * p.panel_area * p.mppt_eff * p.panel_eff * 1e-6;
    Ok(out.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PvParams, WindParams};

    fn table_wt() -> ResModuleSpec {
        ResModuleSpec::wind(
            "WT",
            WindParams {
                cut_in: 2.5,
                rated_speed: 12.0,
                cut_out: 25.0,
                swept_area: std::f64::consts::PI * 40.0 * 40.0,
                conversion_eff: 0.3,
                air_density: 1.29,
            },
        )
    }

    fn pv(area: f64, tilt: f64) -> ResModuleSpec {
        ResModuleSpec::pv(
            "PV",
            PvParams {
                panel_area: area,
                panel_eff: 0.2,
                mppt_eff: 0.97,
                tilt_deg: tilt,
            },
        )
    }

    #[test]
    fn annualization_examples() {
        assert!((annualization_coefficient(0.08, 20.0).unwrap() - 0.101852).abs() < 1e-6);
        assert!((annualization_coefficient(1e-9, 10.0).unwrap() - 0.1).abs() < 1e-6);
        assert!((annualization_coefficient(0.08, 1.0).unwrap() - 1.08).abs() < 1e-9);
    }

    #[test]
    fn annualization_domain() {
        assert!(annualization_coefficient(0.0, 10.0).is_err());
        assert!(annualization_coefficient(-0.1, 10.0).is_err());
        assert!(annualization_coefficient(0.08, 0.0).is_err());
    }

    #[test]
    fn annualization_range() {
        for dr in [0.01, 0.05, 0.08, 0.2] {
            for t in [1.0, 2.0, 10.0, 40.0] {
                let k = annualization_coefficient(dr, t).unwrap();
                assert!(k > dr && k <= 1.0 + dr + 1e-12, "dr={dr} T={t} k={k}");
            }
        }
    }

    #[test]
    fn wind_curve() {
        let wt = table_wt();
        assert_eq!(wind_power_max(&wt, 1.0).unwrap(), 0.0);
        assert_eq!(wind_power_max(&wt, 30.0).unwrap(), 0.0);
        assert_eq!(wind_power_max(&wt, 25.0).unwrap(), 0.0);
        let rated = wind_power_max(&wt, 12.0).unwrap();
        assert!((rated - 1.6807).abs() < 1e-3);
        assert_eq!(wind_power_max(&wt, 18.0).unwrap(), rated);
        assert!(wind_power_max(&wt, 6.0).unwrap() < rated);
    }

    #[test]
    fn pv_curve() {
        let p = pv(10.0, 38.0);
        assert_eq!(pv_power_max(&p, 0.0).unwrap(), 0.0);
        assert!((pv_power_max(&p, 1000.0).unwrap() - 1.5287e-3).abs() < 1e-6);
        assert!(pv_power_max(&pv(10.0, 90.0), 800.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kind_mismatch() {
        assert!(matches!(
            wind_power_max(&pv(10.0, 38.0), 5.0),
            Err(Error::KindMismatch { .. })
        ));
        assert!(matches!(
            pv_power_max(&table_wt(), 500.0),
            Err(Error::KindMismatch { .. })
        ));
    }
}
