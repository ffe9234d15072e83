//! WebAssembly exports for the demo page in `www/`. Each export returns a
//! flat series of numbers ready to plot.

use pentropy_core::limits::default_interval_sets;
use pentropy_core::refine::{join_over_progression, IntervalPartition};
use pentropy_core::systems::{RankOne, RankOneRecipe};
use pentropy_core::{Dynamics, Error, Iet, Result};
use wasm_bindgen::prelude::*;

/// Elementary-interval cap for browser runs.
const DEMO_CAP: usize = 2_000_000;

/// `h_j` for `j = 1..=j_max` with `L(j) = j` for the rotation by `alpha`
/// and the dyadic partition of the given depth.
pub fn entropy_profile(alpha: f64, depth: u32, j_max: u32) -> Result<Vec<f64>> {
    if !(1..=8).contains(&depth) || !(1..=2000).contains(&j_max) {
        return Err(Error::Validation("depth must be in 1..=8 and j_max in 1..=2000".into()));
    }
    let t = Iet::rotation(alpha)?;
    let xi = IntervalPartition::<f64>::dyadic(depth);
    (1..=j_max as u64)
        .map(|j| Ok(join_over_progression(&t, &xi, j, j as usize, DEMO_CAP)?.entropy() / j as f64))
        .collect()
}

/// For `m = 1..=m_max`, the worst ratio `μ(T^m B ∩ B) / μ(B)` over the
/// first `sets` dyadic test intervals of the rotation by `alpha`.
pub fn rigidity_series(alpha: f64, sets: usize, m_max: u32) -> Result<Vec<f64>> {
    let family = default_interval_sets::<f64>();
    if !(1..=family.len()).contains(&sets) || !(1..=100_000).contains(&m_max) {
        return Err(Error::Validation(format!("sets must be in 1..={} and m_max in 1..=100000", family.len())));
    }
    let t = Iet::rotation(alpha)?;
    let used = &family[..sets];
    let mut orbits: Vec<_> = used.iter().map(|b| t.orbit(b, 1)).collect();
    Ok((1..=m_max)
        .map(|_| {
            orbits
                .iter_mut()
                .zip(used)
                .map(|(o, b)| t.measure(&t.intersect(&o.next().expect("orbits are infinite"), b)) / b.measure())
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// `μ(T^{h_n} A ∩ A) / μ(A)` for `n = 1..=stages`, where `A` is the union
/// of levels `from..to` of Chacon tower `tower`.
pub fn chacon_ratios(stages: usize, tower: usize, from: usize, to: usize) -> Result<Vec<f64>> {
    if !(1..=12).contains(&stages) || tower == 0 || tower > stages + 1 {
        return Err(Error::Validation("stages must be in 1..=12 and tower in 1..=stages+1".into()));
    }
    let recipe = RankOneRecipe::chacon(stages);
    let heights = recipe.heights()?;
    let system = RankOne::new(recipe)?;
    let base = system.tower(tower)?;
    if from >= to || to as u64 > base.height {
        return Err(Error::InvalidSet(format!("levels {from}..{to} outside a tower of height {}", base.height)));
    }
    let a = base.level_union(from..to);
    let mu = system.measure(&a);
    Ok(heights.iter().map(|&h| system.correlation(&a, &a, h as i64) / mu).collect())
}

fn js(r: Result<Vec<f64>>) -> std::result::Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = entropyProfile)]
pub fn entropy_profile_js(alpha: f64, depth: u32, j_max: u32) -> std::result::Result<Vec<f64>, JsError> {
    js(entropy_profile(alpha, depth, j_max))
}

#[wasm_bindgen(js_name = rigiditySeries)]
pub fn rigidity_series_js(alpha: f64, sets: usize, m_max: u32) -> std::result::Result<Vec<f64>, JsError> {
    js(rigidity_series(alpha, sets, m_max))
}

#[wasm_bindgen(js_name = chaconRatios)]
pub fn chacon_ratios_js(stages: usize, tower: usize, from: usize, to: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(chacon_ratios(stages, tower, from, to))
}
