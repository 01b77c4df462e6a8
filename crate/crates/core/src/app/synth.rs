//! Seeded synthetic year for a mid-latitude industrial park.
//!
//! Loads combine a seasonal sinusoid, a daily shape and autocorrelated
//! noise, with a few heavy days per year. Irradiance follows clear-sky
//! solar geometry scaled by a daily clearness index; wind speed is an
//! AR(1) process around a seasonal mean. The tariff has two tiers with the
//! valley from 23:00 to 07:00.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::YearSeries;

pub const DEFAULT_PROFILE: &str = "industrial-park-default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub latitude_deg: f64,
    pub days: usize,
    /// Mean electric, heat and cooling loads in MW.
    pub base_e: f64,
    pub winter_heat: f64,
    pub summer_cool: f64,
    pub base_heat: f64,
    pub base_cool: f64,
    /// Share of days with an elevated daytime load, and its factor.
    pub heavy_day_share: f64,
    pub heavy_day_factor: f64,
    pub wind_mean: f64,
    pub price_valley: f64,
    pub price_peak: f64,
}

impl SynthProfile {
    pub fn industrial_park_default() -> Self {
        Self {
            latitude_deg: 38.5,
            days: 365,
            base_e: 6.0,
            winter_heat: 5.0,
            summer_cool: 7.0,
            base_heat: 1.0,
            base_cool: 0.5,
            heavy_day_share: 0.05,
            heavy_day_factor: 1.3,
            wind_mean: 5.5,
            price_valley: 350.0,
            price_peak: 1000.0,
        }
    }

    pub fn named(profile: &str) -> Result<Self> {
        match profile {
            DEFAULT_PROFILE => Ok(Self::industrial_park_default()),
            _ => Err(Error::Config(format!("unknown synthetic profile '{profile}'"))),
        }
    }
}

/// Sine of the solar elevation at the middle of `hour` on 0-based `day`.
pub fn solar_elevation_sin(latitude_deg: f64, day: usize, hour: usize) -> f64 {
    let decl = 23.45_f64.to_radians() * (2.0 * std::f64::consts::PI * (284.0 + day as f64 + 1.0) / 365.0).sin();
    let omega = (15.0 * (hour as f64 + 0.5 - 12.0)).to_radians();
    let phi = latitude_deg.to_radians();
    phi.sin() * decl.sin() + phi.cos() * decl.cos() * omega.cos()
}

pub fn is_valley_hour(hour: usize) -> bool {
    !(7..23).contains(&hour)
}

fn electric_shape(h: usize) -> f64 {
    match h {
        0..=5 => 0.65,
        6..=7 => 0.8,
        8..=18 => 1.0,
        19..=22 => 0.85,
        _ => 0.7,
    }
}

fn heat_shape(h: usize) -> f64 {
    match h {
        6..=9 => 1.15,
        10..=17 => 0.95,
        _ => 1.0,
    }
}

fn cool_shape(h: usize) -> f64 {
    0.55 + 0.45 * (std::f64::consts::PI * (h as f64 - 9.0) / 12.0).sin().max(0.0)
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Synthetic year for `profile` (only [`DEFAULT_PROFILE`] is defined).
pub fn synth_year(seed: u64, profile: &str) -> Result<YearSeries> {
    Ok(synth_year_with(seed, &SynthProfile::named(profile)?))
}

pub fn synth_year_with(seed: u64, p: &SynthProfile) -> YearSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut year = YearSeries::default();
    let (mut ne, mut nh, mut nc) = (0.0, 0.0, 0.0);
    let mut wind = p.wind_mean;
    for day in 0..p.days {
        let season = (2.0 * std::f64::consts::PI * (day as f64 - 200.0) / 365.0).cos();
        let (summer, winter) = (season.max(0.0), (-season).max(0.0));
        let day_level = 1.0 + 0.06 * unit.sample(&mut rng);
        let heavy = rng.gen_bool(p.heavy_day_share);
        let clearness = rng.gen_range(0.3..1.0);
        let wind_mean = p.wind_mean * (1.0 + 0.2 * winter);
        for h in 0..24 {
            ne = 0.8 * ne + 0.03 * unit.sample(&mut rng);
            nh = 0.8 * nh + 0.03 * unit.sample(&mut rng);
            nc = 0.8 * nc + 0.03 * unit.sample(&mut rng);
            let heavy_factor = if heavy && (9..=20).contains(&h) {
                p.heavy_day_factor
            } else {
                1.0
            };
            let load_e = p.base_e * (1.0 + 0.15 * summer) * electric_shape(h) * day_level * heavy_factor * (1.0 + ne);
            let load_h = (p.base_heat + p.winter_heat * winter) * heat_shape(h) * day_level * (1.0 + nh);
            let load_c = (p.base_cool + p.summer_cool * summer * cool_shape(h)) * day_level * heavy_factor * (1.0 + nc);
            wind = wind_mean + 0.85 * (wind - wind_mean) + 1.1 * unit.sample(&mut rng);
            let sin_el = solar_elevation_sin(p.latitude_deg, day, h);
            let irr = if sin_el > 0.0 {
                1000.0 * sin_el.powf(1.2) * clearness
            } else {
                0.0
            };
            let price = if is_valley_hour(h) {
                p.price_valley
            } else {
                p.price_peak
            };
            year.push([
                round4(load_e.max(0.0)),
                round4(load_h.max(0.0)),
                round4(load_c.max(0.0)),
                round4(wind.max(0.0)),
                round4(irr),
                price,
            ]);
        }
    }
    year
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        let write = |seed| {
            let mut buf = Vec::new();
            synth_year(seed, DEFAULT_PROFILE).unwrap().write_csv(&mut buf).unwrap();
            buf
        };
        assert_eq!(write(11), write(11));
        assert_ne!(write(11), write(12));
    }

    #[test]
    fn dark_hours_have_no_irradiance() {
        let p = SynthProfile::industrial_park_default();
        let y = synth_year(5, DEFAULT_PROFILE).unwrap();
        assert_eq!(y.len(), 8760);
        for i in 0..y.len() {
            if solar_elevation_sin(p.latitude_deg, i / 24, i % 24) <= 0.0 {
                assert_eq!(y.irradiance[i], 0.0, "hour {i}");
            }
        }
        assert!(y.irradiance.iter().any(|v| *v > 500.0));
    }

    #[test]
    fn round_trip_validates() {
        let y = synth_year(9, DEFAULT_PROFILE).unwrap();
        let mut buf = Vec::new();
        y.write_csv(&mut buf).unwrap();
        let back = YearSeries::from_csv_reader(buf.as_slice(), 24).unwrap();
        assert_eq!(back, y);
    }

    #[test]
    fn tariff_tiers() {
        let y = synth_year(1, DEFAULT_PROFILE).unwrap();
        assert_eq!(y.price_e[23], 350.0);
        assert_eq!(y.price_e[6], 350.0);
        assert_eq!(y.price_e[7], 1000.0);
        assert!(synth_year(1, "desert").is_err());
    }
}
