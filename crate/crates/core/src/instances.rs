//! Ready-made instances for tests and examples.
//!
//! [`tiny_random`] instances are small enough for exhaustive enumeration;
//! [`medium_random`] instances use a full day of hourly steps.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{default_catalog, Catalog, DeviceKind, EhInstance, EssKind, MarketParams, ResKind, Scenario};

fn pick(cat: &Catalog, kind: DeviceKind, capacity_id: &str) -> crate::model::DeviceOption {
    cat.devices
        .iter()
        .find(|d| d.kind == kind && d.capacity_id == capacity_id)
        .cloned()
        .expect("option present in bundled catalog")
}

/// Fixed two-scenario, three-step instance with one option of every
/// converter kind, a wind module and a battery.
pub fn small_instance() -> EhInstance {
    let cat = default_catalog();
    let devices = vec![
        pick(&cat, DeviceKind::Cchp, "cchp1"),
        pick(&cat, DeviceKind::Gb, "gb1"),
        pick(&cat, DeviceKind::Ac, "ac1"),
        pick(&cat, DeviceKind::Tx, "tx2"),
    ];
    let wt = cat
        .res_options
        .iter()
        .find(|r| r.kind() == ResKind::Wt)
        .cloned()
        .unwrap();
    let bess = cat
        .ess_options
        .iter()
        .find(|e| e.kind == EssKind::Bess)
        .cloned()
        .unwrap();
    let catalog = Catalog {
        devices,
        res_options: vec![wt],
        ess_options: vec![bess],
    };
    let mut a = Scenario::flat(0.5, 3, [2.0, 1.0, 1.0], 8.0, 0.0, 400.0);
    a.price_e = vec![350.0, 1000.0, 700.0];
    let mut b = Scenario::flat(0.5, 3, [3.0, 1.5, 0.5], 13.0, 0.0, 600.0);
    b.load_e = vec![2.5, 3.0, 3.5];
    catalog.instance(vec![a, b], &MarketParams::default())
}

/// Instance whose loads are all zero, built on the given catalog.
pub fn zero_load_instance(catalog: &Catalog, scenarios: usize, steps: usize) -> EhInstance {
    let p = 1.0 / scenarios as f64;
    let days = (0..scenarios)
        .map(|_| Scenario::flat(p, steps, [0.0; 3], 9.0, 500.0, 600.0))
        .collect();
    catalog.instance(days, &MarketParams::default())
}

/// Seeded instance with at most two scenarios of at most six steps, one or
/// two CCHP and TX options, at most one GB and AC option and at most one
/// storage and one renewable option with at most two modules each.
pub fn tiny_random(seed: u64) -> EhInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cat = default_catalog();
    let mut devices = Vec::new();
    for (kind, lo, hi) in [
        (DeviceKind::Cchp, 1, 2),
        (DeviceKind::Tx, 1, 2),
        (DeviceKind::Gb, 0, 1),
        (DeviceKind::Ac, 0, 1),
    ] {
        let mut ladder: Vec<_> = cat.devices.iter().filter(|d| d.kind == kind).cloned().collect();
        let count = rng.gen_range(lo..=hi);
        for _ in 0..count {
            let i = rng.gen_range(0..ladder.len());
            devices.push(ladder.swap_remove(i));
        }
    }
    let mut res_options = Vec::new();
    if rng.gen_bool(0.5) {
        let mut r = cat.res_options[rng.gen_range(0..cat.res_options.len())].clone();
        r.max_modules = rng.gen_range(1..=2);
        res_options.push(r);
    }
    let mut ess_options = Vec::new();
    if rng.gen_bool(0.6) {
        let mut e = cat.ess_options[rng.gen_range(0..cat.ess_options.len())].clone();
        e.max_modules = rng.gen_range(1..=2);
        ess_options.push(e);
    }
    let n_scen = rng.gen_range(1..=2);
    let steps = rng.gen_range(3..=6);
    let mut probs: Vec<f64> = (0..n_scen).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    if n_scen == 2 {
        probs[1] = 1.0 - probs[0];
    }
    let scenarios = probs
        .into_iter()
        .map(|prob| {
            let mut series = |lo: f64, hi: f64| (0..steps).map(|_| rng.gen_range(lo..hi)).collect::<Vec<f64>>();
            Scenario {
                prob,
                load_e: series(0.3, 3.0),
                load_h: series(0.0, 2.0),
                load_c: series(0.0, 2.0),
                wind_speed: series(0.0, 16.0),
                irradiance: series(0.0, 900.0),
                price_e: series(300.0, 1100.0),
            }
        })
        .collect();
    Catalog {
        devices,
        res_options,
        ess_options,
    }
    .instance(scenarios, &MarketParams::default())
}

/// A shaped random day: loads follow a daytime bump, irradiance a
/// half-sine, prices a valley/peak tariff.
pub fn random_day(rng: &mut impl Rng, prob: f64, steps: usize) -> Scenario {
    let scale_e = rng.gen_range(3.0..6.0);
    let scale_h = rng.gen_range(0.5..4.0);
    let scale_c = rng.gen_range(0.5..4.0);
    let wind_base = rng.gen_range(2.0..11.0);
    let sun = rng.gen_range(200.0..950.0);
    let mut sc = Scenario::flat(prob, steps, [0.0; 3], 0.0, 0.0, 0.0);
    for t in 0..steps {
        let hour = t as f64 * 24.0 / steps as f64;
        let day = (PI * (hour - 6.0) / 14.0).sin().max(0.0);
        let noise = |rng: &mut dyn rand::RngCore| 1.0 + 0.1 * (rng.gen::<f64>() - 0.5);
        sc.load_e[t] = scale_e * (0.6 + 0.4 * day) * noise(rng);
        sc.load_h[t] = scale_h * (1.0 - 0.5 * day) * noise(rng);
        sc.load_c[t] = scale_c * (0.3 + 0.7 * day) * noise(rng);
        sc.wind_speed[t] = (wind_base + rng.gen_range(-2.0..2.0_f64)).max(0.0);
        sc.irradiance[t] = sun * (PI * (hour - 6.0) / 12.0).sin().max(0.0);
        sc.price_e[t] = if !(7.0..23.0).contains(&hour) { 350.0 } else { 1000.0 };
    }
    sc
}

/// Seeded instance with ten 24-step scenarios, two capacities per
/// converter kind, both renewables and all three storage kinds.
pub fn medium_random(seed: u64) -> EhInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cat = default_catalog();
    let mut devices = Vec::new();
    for kind in DeviceKind::ALL {
        let ladder: Vec<_> = cat.devices.iter().filter(|d| d.kind == kind).cloned().collect();
        let first = rng.gen_range(1..ladder.len() - 1);
        devices.push(ladder[first].clone());
        devices.push(ladder[first + 1].clone());
    }
    let catalog = Catalog {
        devices,
        res_options: cat.res_options.clone(),
        ess_options: cat.ess_options.clone(),
    }
    .with_max_modules(20);
    let scenarios = (0..10).map(|_| random_day(&mut rng, 0.1, 24)).collect();
    catalog.instance(scenarios, &MarketParams::default())
}
