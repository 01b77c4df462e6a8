//! Daily scenarios from a year of hourly data, and their reduction.
//!
//! A year is cut into calendar days of equal probability. Two reductions
//! shrink the set: a greedy backward elimination that keeps original days
//! and moves each removed day's probability to its nearest survivor, and a
//! k-means baseline whose output days are cluster centroids.
//!
//! Both methods compare days on a concatenated feature vector of loads,
//! weather and (when it varies between days) price. Each channel is
//! min-max scaled over the whole set so that irradiance in W/m² does not
//! swamp wind speed in m/s.

mod reduce;
mod year;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostBreakdown, Scenario};

pub use reduce::{
    backward_reduce, backward_reduce_features, kantorovich_matrix, kmeans_features, kmeans_reduce, KmeansFit,
    ReductionTrace, TraceStep,
};
pub use year::{YearSeries, YEAR_HEADER};

/// Where a scenario came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Original day, by 0-based index in the year.
    Day(usize),
    /// Centroid of k-means cluster `k`.
    Centroid(usize),
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::Day(d) => write!(f, "day{d}"),
            Origin::Centroid(k) => write!(f, "centroid{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub origin: Vec<Origin>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn total_prob(&self) -> f64 {
        self.scenarios.iter().map(|s| s.prob).sum()
    }
}

/// Cuts the year into days of `steps_per_day` records with equal probability.
pub fn slice_days(year: &YearSeries, steps_per_day: usize) -> Result<ScenarioSet> {
    year.validate(steps_per_day)?;
    let days = year.len() / steps_per_day;
    let p = 1.0 / days as f64;
    let mut scenarios = Vec::with_capacity(days);
    for d in 0..days {
        let r = d * steps_per_day..(d + 1) * steps_per_day;
        scenarios.push(Scenario {
            prob: p,
            load_e: year.load_e[r.clone()].to_vec(),
            load_h: year.load_h[r.clone()].to_vec(),
            load_c: year.load_c[r.clone()].to_vec(),
            wind_speed: year.wind_speed[r.clone()].to_vec(),
            irradiance: year.irradiance[r.clone()].to_vec(),
            price_e: year.price_e[r].to_vec(),
        });
    }
    Ok(ScenarioSet {
        scenarios,
        origin: (0..days).map(Origin::Day).collect(),
    })
}

/// How days are turned into feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Min-max scale each channel over the whole set.
    pub normalize: bool,
    /// `None` includes price only when it differs between days.
    pub include_price: Option<bool>,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            normalize: true,
            include_price: None,
        }
    }
}

fn channels(s: &Scenario) -> [&[f64]; 6] {
    [
        &s.load_e,
        &s.load_h,
        &s.load_c,
        &s.wind_speed,
        &s.irradiance,
        &s.price_e,
    ]
}

/// Concatenated per-day feature vectors.
pub fn features(set: &ScenarioSet, opts: FeatureOptions) -> Result<Vec<Vec<f64>>> {
    let Some(first) = set.scenarios.first() else {
        return Err(Error::Domain("empty scenario set".into()));
    };
    let steps = first.steps();
    if set.scenarios.iter().any(|s| s.steps() != steps) {
        return Err(Error::Domain("scenarios differ in step count".into()));
    }
    let price_varies = set.scenarios.iter().any(|s| s.price_e != first.price_e);
    let n_ch = if opts.include_price.unwrap_or(price_varies) {
        6
    } else {
        5
    };
    let mut scale = vec![(0.0, 1.0); n_ch];
    if opts.normalize {
        for (c, sc) in scale.iter_mut().enumerate() {
            let vals = set.scenarios.iter().flat_map(|s| channels(s)[c].iter().copied());
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            // a constant channel carries no information
            *sc = if hi > lo { (lo, 1.0 / (hi - lo)) } else { (lo, 0.0) };
        }
    }
    Ok(set
        .scenarios
        .iter()
        .map(|s| {
            let ch = channels(s);
            (0..n_ch)
                .flat_map(|c| {
                    let (lo, k) = scale[c];
                    ch[c].iter().map(move |v| (v - lo) * k)
                })
                .collect()
        })
        .collect())
}

/// Relative change of each cost component from a full-set solve to a
/// reduced-set solve. `None` marks components whose full value is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub ic: Option<f64>,
    pub tc: Option<f64>,
    pub mc: Option<f64>,
    pub lc: Option<f64>,
    pub cvar: Option<f64>,
    pub total: Option<f64>,
}

impl DeviationReport {
    /// Signed percentage with two decimals, or `n/a`.
    pub fn format(v: Option<f64>) -> String {
        match v {
            Some(x) => format!("{:+.2}%", 100.0 * x),
            None => "n/a".into(),
        }
    }

    pub fn entries(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("ic", self.ic),
            ("tc", self.tc),
            ("mc", self.mc),
            ("lc", self.lc),
            ("cvar", self.cvar),
            ("total", self.total),
        ]
    }
}

/// `(reduced - full) / full` per component; positive means the reduced
/// set overstates the cost.
pub fn deviation_report(full: &CostBreakdown, reduced: &CostBreakdown) -> DeviationReport {
    let rel = |f: f64, r: f64| if f == 0.0 { None } else { Some((r - f) / f) };
    DeviationReport {
        ic: rel(full.ic, reduced.ic),
        tc: rel(full.tc_expected, reduced.tc_expected),
        mc: rel(full.mc_expected, reduced.mc_expected),
        lc: rel(full.lc_expected, reduced.lc_expected),
        cvar: rel(full.cvar_alpha, reduced.cvar_alpha),
        total: rel(full.objective, reduced.objective),
    }
}
