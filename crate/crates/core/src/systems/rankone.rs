//! Rank-one cutting and stacking.
//!
//! Stage `n` of a recipe cuts the current tower into `r_n` columns of equal
//! width, places `s_{n,k}` fresh spacer levels on top of column `k`, and
//! stacks column `k + 1` on top of that. Heights obey
//! `h_{n+1} = r_n h_n + Σ_k s_{n,k}` with `h_1 = 1`.
//!
//! Towers are laid out inside `[0, 1)`: the base of the first tower is
//! `[0, w_1)`, spacers of each stage take the next free space to the right,
//! and `w_1` is chosen so that the last stage of the recipe fills `[0, 1)`.
//! Earlier towers therefore leave a residual of later spacer mass.

use std::ops::Range;

use super::set::MeasurableSet;
use crate::error::{Error, Result};

/// Largest tower that will be materialized level by level.
pub const DEFAULT_LEVEL_CAP: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Stage {
    #[serde(rename = "r")]
    pub cuts: usize,
    pub spacers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankOneRecipe {
    stages: Vec<Stage>,
}

impl RankOneRecipe {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidRecipe("a recipe needs at least one stage".into()));
        }
        for (n, stage) in stages.iter().enumerate() {
            if stage.cuts < 2 {
                return Err(Error::InvalidRecipe(format!("stage {} has r = {}, need r >= 2", n + 1, stage.cuts)));
            }
            if stage.spacers.len() != stage.cuts {
                return Err(Error::InvalidRecipe(format!(
                    "stage {} lists {} spacer counts for {} columns",
                    n + 1,
                    stage.spacers.len(),
                    stage.cuts
                )));
            }
        }
        Ok(RankOneRecipe { stages })
    }

    /// Three columns, one spacer over the middle one, repeated.
    pub fn chacon(stages: usize) -> Self {
        Self::new(vec![Stage { cuts: 3, spacers: vec![0, 1, 0] }; stages.max(1)]).expect("Chacon stages are valid")
    }

    /// Halving with no spacers (dyadic odometer).
    pub fn odometer(stages: usize) -> Self {
        Self::new(vec![Stage { cuts: 2, spacers: vec![0, 0] }; stages.max(1)]).expect("odometer stages are valid")
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Number of towers the recipe defines (stages + 1).
    pub fn tower_count(&self) -> usize {
        self.stages.len() + 1
    }

    /// `h_1, ..., h_{stages+1}` in exact integer arithmetic.
    pub fn heights(&self) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(self.tower_count());
        let mut h: u64 = 1;
        out.push(h);
        for stage in &self.stages {
            let spacers: u64 = stage.spacers.iter().map(|&s| s as u64).sum();
            h = h
                .checked_mul(stage.cuts as u64)
                .and_then(|x| x.checked_add(spacers))
                .ok_or_else(|| Error::InvalidRecipe("tower height overflows u64".into()))?;
            out.push(h);
        }
        Ok(out)
    }

    /// Total mass of tower `n` when the first tower has unit width.
    fn raw_masses(&self) -> Vec<f64> {
        let mut masses = vec![1.0];
        let (mut width, mut mass) = (1.0f64, 1.0f64);
        for stage in &self.stages {
            width /= stage.cuts as f64;
            mass += width * stage.spacers.iter().sum::<usize>() as f64;
            masses.push(mass);
        }
        masses
    }
}

/// Tower `n` of a recipe, laid out in `[0, 1)`.
#[derive(Clone, Debug)]
pub struct Tower {
    pub stage: usize,
    pub height: u64,
    pub level_width: f64,
    /// Left endpoints of the levels, bottom to top.
    levels: Vec<f64>,
    pub residual_mass: f64,
    /// Level starts sorted by position, with level indices.
    by_position: Vec<(f64, u32)>,
}

/// Builds tower `n` (1-based); needs `n - 1` stages of the recipe.
pub fn build_tower(recipe: &RankOneRecipe, n: usize) -> Result<Tower> {
    build_tower_capped(recipe, n, DEFAULT_LEVEL_CAP)
}

pub fn build_tower_capped(recipe: &RankOneRecipe, n: usize, cap: usize) -> Result<Tower> {
    if n == 0 || n > recipe.tower_count() {
        return Err(Error::InvalidRecipe(format!(
            "tower {n} requested, recipe defines towers 1..={}",
            recipe.tower_count()
        )));
    }
    let heights = recipe.heights()?;
    let height = heights[n - 1];
    if height > cap as u64 {
        return Err(Error::SizeCap { count: height as usize, cap });
    }
    let total = *recipe.raw_masses().last().expect("non-empty");
    let scale = 1.0 / total;

    let mut width = scale;
    let mut levels = vec![0.0f64];
    let mut cursor = scale;
    for stage in &recipe.stages[..n - 1] {
        let next_width = width / stage.cuts as f64;
        let mut next = Vec::with_capacity(levels.len() * stage.cuts + stage.spacers.iter().sum::<usize>());
        for (col, &spacers) in stage.spacers.iter().enumerate() {
            let shift = col as f64 * next_width;
            next.extend(levels.iter().map(|s| s + shift));
            for _ in 0..spacers {
                next.push(cursor);
                cursor += next_width;
            }
        }
        levels = next;
        width = next_width;
    }
    debug_assert_eq!(levels.len() as u64, height);

    let residual_mass = (1.0 - height as f64 * width).max(0.0);
    let mut by_position: Vec<(f64, u32)> = levels.iter().enumerate().map(|(i, &s)| (s, i as u32)).collect();
    by_position.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Tower { stage: n, height, level_width: width, levels, residual_mass, by_position })
}

impl Tower {
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> (f64, f64) {
        (self.levels[i], self.levels[i] + self.level_width)
    }

    /// Mass carried by the tower, `height × width`.
    pub fn mass(&self) -> f64 {
        self.height as f64 * self.level_width
    }

    /// Union of the levels with indices in `range`.
    pub fn level_union(&self, range: Range<usize>) -> MeasurableSet<f64> {
        MeasurableSet::normalized(range.map(|i| self.level(i)).collect())
    }

    /// Index of the level containing `x`, if any.
    pub fn level_of(&self, x: f64) -> Option<usize> {
        let idx = self.by_position.partition_point(|(s, _)| *s <= x);
        let (start, level) = *self.by_position.get(idx.checked_sub(1)?)?;
        (x < start + self.level_width).then_some(level as usize)
    }

    /// The tower map: level `i` moves onto level `i + 1`. Undefined on the
    /// top level and off the tower.
    pub fn apply(&self, x: f64) -> Option<f64> {
        self.apply_power(x, 1)
    }

    pub fn apply_power(&self, x: f64, m: i64) -> Option<f64> {
        let i = self.level_of(x)?;
        let target = i as i64 + m;
        if target < 0 || target >= self.height as i64 {
            return None;
        }
        Some(x - self.levels[i] + self.levels[target as usize])
    }

    /// `T^m(A)` restricted to where the partial map is defined.
    pub fn push(&self, set: &MeasurableSet<f64>, m: i64) -> MeasurableSet<f64> {
        let h = self.height as i64;
        let lo = m.clamp(-h, h).min(0).unsigned_abs() as usize;
        let hi = (h - m.max(0)).max(0) as usize;
        let mut out = Vec::new();
        for i in lo..hi {
            let (a, b) = self.level(i);
            let target = self.levels[(i as i64 + m) as usize];
            let shift = target - a;
            out.extend(set.clip(&a, &b).map(|(x, y)| (x + shift, y + shift)));
        }
        MeasurableSet::normalized(out)
    }

    /// Mass on which `T^m` is not defined at this stage.
    pub fn undefined_mass(&self, m: i64) -> f64 {
        let rows = m.unsigned_abs().min(self.height) as f64;
        (self.residual_mass + rows * self.level_width).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odometer_heights_double() {
        assert_eq!(RankOneRecipe::odometer(5).heights().unwrap(), vec![1, 2, 4, 8, 16, 32]);
    }

    #[test]
    fn chacon_heights_follow_recurrence() {
        assert_eq!(RankOneRecipe::chacon(3).heights().unwrap(), vec![1, 4, 13, 40]);
    }

    #[test]
    fn rejects_single_cut() {
        let bad = RankOneRecipe::new(vec![Stage { cuts: 1, spacers: vec![0] }]);
        assert!(matches!(bad, Err(Error::InvalidRecipe(_))));
        let mismatched = RankOneRecipe::new(vec![Stage { cuts: 3, spacers: vec![0, 1] }]);
        assert!(mismatched.is_err());
    }

    #[test]
    fn final_chacon_tower_fills_unit_interval() {
        let recipe = RankOneRecipe::chacon(4);
        let top = build_tower(&recipe, 5).unwrap();
        assert_eq!(top.height, 121);
        assert!(top.residual_mass < 1e-12);
        let first = build_tower(&recipe, 1).unwrap();
        // w_1 = 1 / (1 + 1/3 + 1/9 + 1/27 + 1/81)
        let expected = 1.0 / (1.0 + 1.0 / 3.0 + 1.0 / 9.0 + 1.0 / 27.0 + 1.0 / 81.0);
        assert!((first.level_width - expected).abs() < 1e-15);
    }

    #[test]
    fn levels_are_disjoint_and_equal_width() {
        let tower = build_tower(&RankOneRecipe::chacon(4), 4).unwrap();
        let mut sorted: Vec<f64> = tower.levels().to_vec();
        sorted.sort_by(f64::total_cmp);
        for pair in sorted.windows(2) {
            assert!(pair[1] - pair[0] >= tower.level_width - 1e-15);
        }
        assert!(tower.mass() <= 1.0 + 1e-12);
        assert!((tower.mass() + tower.residual_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tower_map_climbs_levels() {
        let tower = build_tower(&RankOneRecipe::chacon(3), 4).unwrap();
        let (a, _) = tower.level(5);
        let x = a + tower.level_width / 3.0;
        let y = tower.apply(x).unwrap();
        assert_eq!(tower.level_of(y), Some(6));
        assert!((y - tower.level(6).0 - tower.level_width / 3.0).abs() < 1e-15);
        let (top, _) = tower.level(tower.height as usize - 1);
        assert_eq!(tower.apply(top), None);
    }

    #[test]
    fn push_preserves_measure_on_domain() {
        let tower = build_tower(&RankOneRecipe::chacon(4), 5).unwrap();
        let a = tower.level_union(10..30);
        let pushed = tower.push(&a, 7);
        assert!((pushed.measure() - a.measure()).abs() < 1e-12);
        let clipped = tower.push(&a, 100);
        assert!(clipped.measure() < a.measure());
    }

    #[test]
    fn tower_size_cap() {
        let err = build_tower_capped(&RankOneRecipe::chacon(6), 7, 100).unwrap_err();
        assert!(matches!(err, Error::SizeCap { .. }));
    }
}
