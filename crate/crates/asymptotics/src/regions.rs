use core_params::SystemParams;
use rayon::prelude::*;
use serde::Serialize;
use series_engine::hol_conditions;

use crate::CaseLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// `μ1 = μ2 = 1`, `λj = ϱj`.
    EqualMu,
    /// `λ1 = λ2 = 1`, `μj = 1/ϱj`.
    EqualLambda,
}

impl GridMode {
    pub fn params(&self, rho1: f64, rho2: f64) -> Option<SystemParams> {
        match self {
            GridMode::EqualMu => SystemParams::new(rho1, rho2, 1.0, 1.0).ok(),
            GridMode::EqualLambda => SystemParams::new(1.0, 1.0, 1.0 / rho1, 1.0 / rho2).ok(),
        }
    }

    /// Closed-form boundary: `(I+)` holds iff `ϱ1 ≥ boundary(ϱ2)`.
    pub fn boundary(&self, x: f64) -> f64 {
        match self {
            GridMode::EqualMu => boundary_f(x),
            GridMode::EqualLambda => boundary_g(x),
        }
    }
}

/// `f(x) = √x(1 − √x)`.
pub fn boundary_f(x: f64) -> f64 {
    let r = x.sqrt();
    r * (1.0 - r)
}

/// `g(x) = x(1 − √x)/(1 + 2x − 2√x)`.
pub fn boundary_g(x: f64) -> f64 {
    let r = x.sqrt();
    x * (1.0 - r) / (1.0 + 2.0 * x - 2.0 * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionCell {
    pub row: usize,
    pub col: usize,
    pub rho1: f64,
    pub rho2: f64,
    pub case_label: CaseLabel,
    pub margin_i: f64,
    pub margin_ii: f64,
}

/// Cell-centre classification of the stable triangle `ϱ1 + ϱ2 < 1`; `cells[row][col]` has
/// `ϱ1 = (col + ½)/n`, `ϱ2 = (row + ½)/n` and is `None` outside the triangle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid {
    pub mode: GridMode,
    pub resolution: usize,
    pub cells: Vec<Vec<Option<RegionCell>>>,
}

impl RegionGrid {
    pub fn iter(&self) -> impl Iterator<Item = &RegionCell> {
        self.cells.iter().flatten().flatten()
    }

    pub fn find(&self, label: CaseLabel) -> Option<&RegionCell> {
        self.iter().find(|c| c.case_label == label)
    }

    /// Horizontally or vertically adjacent pairs whose `(I±)` labels differ.
    pub fn boundary_pairs_i(&self) -> Vec<(RegionCell, RegionCell)> {
        self.adjacent_pairs(|a, b| (a.margin_i >= 0.0) != (b.margin_i >= 0.0))
    }

    pub fn boundary_pairs_ii(&self) -> Vec<(RegionCell, RegionCell)> {
        self.adjacent_pairs(|a, b| (a.margin_ii >= 0.0) != (b.margin_ii >= 0.0))
    }

    fn adjacent_pairs<F: Fn(&RegionCell, &RegionCell) -> bool>(&self, differ: F) -> Vec<(RegionCell, RegionCell)> {
        let mut out = Vec::new();
        for (r, row) in self.cells.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let Some(a) = cell else { continue };
                let right = row.get(c + 1).copied().flatten();
                let up = self.cells.get(r + 1).and_then(|x| x.get(c).copied().flatten());
                for b in [right, up].into_iter().flatten() {
                    if differ(a, &b) {
                        out.push((*a, b));
                    }
                }
            }
        }
        out
    }
}

pub fn region_grid(mode: GridMode, resolution: usize) -> RegionGrid {
    let n = resolution.max(2);
    let cells = (0..n)
        .into_par_iter()
        .map(|row| {
            (0..n)
                .map(|col| {
                    let rho1 = (col as f64 + 0.5) / n as f64;
                    let rho2 = (row as f64 + 0.5) / n as f64;
                    let p = mode.params(rho1, rho2)?;
                    let hc = hol_conditions(&p);
                    Some(RegionCell {
                        row,
                        col,
                        rho1,
                        rho2,
                        case_label: CaseLabel::from_conditions(hc.i_plus(), hc.ii_plus()),
                        margin_i: hc.margin_i,
                        margin_ii: hc.margin_ii,
                    })
                })
                .collect()
        })
        .collect();
    RegionGrid {
        mode,
        resolution: n,
        cells,
    }
}
