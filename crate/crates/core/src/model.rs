//! Per-region linear models fitted over a sliding window of coding results:
//! rate against mad/qs and distortion against qs. A two-parameter least
//! squares fit is kept only when its slope is statistically significant;
//! windows whose trend drowns in their own scatter fall back to a
//! proportional line through the window centroid, whose single slope stays
//! positive and stable, so the allocator always sees monotone predictions.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::region::{DiffMap, RegionLabel, RegionMap};

pub const MODEL_WINDOW_DEFAULT: usize = 20;

/// `rate = a * mad / qs + b`, `dist = c * qs + d` for one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionModel {
    pub region: RegionLabel,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RegionModel {
    /// Starting point before any coded frame: rate slope scaled by the
    /// target bits per pixel so the first solve has a sensible shape.
    pub fn initial(region: RegionLabel, bpp_target: f64) -> Self {
        RegionModel {
            region,
            a: 2000.0 * bpp_target,
            b: 0.0,
            c: 4.0,
            d: 0.0,
        }
    }
}

/// One coded frame's outcome for one region, in per-macroblock units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionObservation {
    pub frame: usize,
    pub region: RegionLabel,
    pub qs: f64,
    pub mad: f64,
    pub rate: f64,
    pub dist: f64,
}

/// Bounded FIFO of the most recent observations for one region.
#[derive(Debug, Clone)]
pub struct ModelWindow {
    capacity: usize,
    obs: VecDeque<RegionObservation>,
}

impl ModelWindow {
    pub fn new(capacity: usize) -> Self {
        ModelWindow {
            capacity: capacity.max(1),
            obs: VecDeque::new(),
        }
    }

    pub fn push(&mut self, obs: RegionObservation) {
        if self.obs.len() == self.capacity {
            self.obs.pop_front();
        }
        self.obs.push_back(obs);
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RegionObservation> {
        self.obs.iter()
    }
}

/// Mean of the per-macroblock differences belonging to `region`; zero when
/// the region is empty.
pub fn region_mad(diff: &DiffMap, map: &RegionMap, region: RegionLabel) -> f64 {
    let n = map.counts[region.index()];
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = diff
        .diff
        .iter()
        .zip(&map.labels)
        .filter(|(_, &l)| l == region)
        .map(|(&d, _)| d)
        .sum();
    sum / n as f64
}

/// Predicted bits per macroblock, floored at zero. `qs` must be positive.
pub fn predict_rate(model: &RegionModel, mad: f64, qs: f64) -> Result<f64> {
    if !(qs > 0.0) {
        return Err(Error::domain(format!("qs {qs} must be positive")));
    }
    Ok((model.a * mad / qs + model.b).max(0.0))
}

/// Predicted mean squared error per macroblock, floored at zero.
pub fn predict_dist(model: &RegionModel, qs: f64) -> f64 {
    (model.c * qs + model.d).max(0.0)
}

/// Which of the two fitted lines a question refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rate,
    Dist,
}

/// Significance bound on the fitted slope: the two-parameter fit is kept
/// only when slope / stderr(slope) clears this, so a window whose apparent
/// trend is explainable by its own scatter falls back to the centroid line.
const MIN_SLOPE_T: f64 = 2.5;

fn ols(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    if points.iter().all(|p| p.0 == points[0].0) {
        return None;
    }
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, mean_y - slope * mean_x))
}

/// Whether the slope clears `MIN_SLOPE_T` standard errors, with the error
/// variance estimated from the window's own residuals. Two points leave no
/// residual and count as exact. The residual-over-spread form makes narrow
/// regressor windows fail on their own: the same scatter costs more there.
fn slope_is_significant(points: &[(f64, f64)], slope: f64, intercept: f64) -> bool {
    let n = points.len() as f64;
    let df = n - 2.0;
    if df <= 0.0 {
        return true;
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    slope * slope * sxx * df >= MIN_SLOPE_T * MIN_SLOPE_T * ss_res
}

fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    if let Some((slope, intercept)) = ols(points) {
        // A falling line is unphysical, and a slope within noise of zero is
        // mostly estimation error; both are safer served by the fallback.
        if slope >= 0.0 && slope_is_significant(points, slope, intercept) {
            return (slope, intercept);
        }
    }
    // Proportional line through the window centroid: positive whenever the
    // data is, monotone, and stable however narrow the window, so a live
    // region is never mistaken for one that ignores its quantizer.
    if mean_x > 0.0 && mean_y > 0.0 {
        (mean_y / mean_x, 0.0)
    } else {
        (0.0, mean_y.max(0.0))
    }
}

/// Refit both lines from the window. An empty window returns `current`
/// unchanged; windows without a significant slope fall back to a
/// proportional line through the centroid, and dead regressors to a flat
/// mean response.
pub fn refit(window: &ModelWindow, current: &RegionModel) -> RegionModel {
    if window.is_empty() {
        return *current;
    }
    let rate_pts: Vec<(f64, f64)> = window.iter().map(|o| (o.mad / o.qs, o.rate)).collect();
    let dist_pts: Vec<(f64, f64)> = window.iter().map(|o| (o.qs, o.dist)).collect();
    let (a, b) = fit_line(&rate_pts);
    let (c, d) = fit_line(&dist_pts);
    RegionModel {
        region: current.region,
        a,
        b,
        c,
        d,
    }
}

/// Coefficient of determination of the given line over the window, clamped
/// to [0, 1]. A window with zero response variance fits perfectly.
pub fn r_squared(window: &ModelWindow, model: &RegionModel, kind: ModelKind) -> f64 {
    if window.is_empty() {
        return 1.0;
    }
    let points: Vec<(f64, f64)> = match kind {
        ModelKind::Rate => window.iter().map(|o| (o.mad / o.qs, o.rate)).collect(),
        ModelKind::Dist => window.iter().map(|o| (o.qs, o.dist)).collect(),
    };
    let n = points.len() as f64;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    if ss_tot == 0.0 {
        return 1.0;
    }
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let pred = match kind {
                ModelKind::Rate => model.a * x + model.b,
                ModelKind::Dist => model.c * x + model.d,
            };
            (y - pred) * (y - pred)
        })
        .sum();
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}
