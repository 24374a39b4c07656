//! Full, split and jackknife conformal intervals with absolute-residual scores.
//!
//! Every constructor works on a [`Design`]: the data plus a grouping of its
//! rows. Each group has one scored ("anchor") row and possibly synthetic
//! companions that only ever enter training. A plain dataset is the design
//! where every row is its own group. Groups move together: a split sends a
//! whole group to one side, leave-one-out drops a whole group.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::interval::{ConformalMethod, Path, PredictionInterval};
use crate::regress::{ols_loo_residuals, Regressor};
use crate::seed;

pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_GRID_POINTS: usize = 100;
pub const DEFAULT_GRID_EXPANSION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalSpec {
    pub method: ConformalMethod,
    pub alpha: f64,
    /// Fraction of groups in the proper training part (split only).
    pub rho: f64,
    /// Number of candidate heads (full only).
    pub grid_points: usize,
    /// Extension of the candidate range beyond the observed heads, as a fraction of their range (full only).
    pub grid_expansion: f64,
}

impl ConformalSpec {
    pub fn new(method: ConformalMethod, alpha: f64) -> Self {
        ConformalSpec {
            method,
            alpha,
            rho: DEFAULT_RHO,
            grid_points: DEFAULT_GRID_POINTS,
            grid_expansion: DEFAULT_GRID_EXPANSION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0,1), got {}", self.alpha)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::param("rho", format!("must lie in (0,1), got {}", self.rho)));
        }
        if self.grid_points < 10 {
            return Err(Error::param(
                "grid_points",
                format!("must be at least 10, got {}", self.grid_points),
            ));
        }
        if !(self.grid_expansion >= 0.0 && self.grid_expansion.is_finite()) {
            return Err(Error::param(
                "grid_expansion",
                format!("must be finite and ≥ 0, got {}", self.grid_expansion),
            ));
        }
        Ok(())
    }

    /// Fewest groups the method can calibrate on.
    pub fn min_groups(&self) -> usize {
        match self.method {
            ConformalMethod::Full => 2,
            ConformalMethod::Jackknife => 3,
            ConformalMethod::Split => 4,
        }
    }
}

/// Data plus the calibration grouping of its rows.
#[derive(Debug, Clone)]
pub struct Design<'a> {
    data: &'a Dataset,
    anchors: Vec<usize>,
    members: Vec<Vec<usize>>,
    trial_companions: Vec<Vec<f64>>,
}

impl<'a> Design<'a> {
    /// Every row scored, every row its own group.
    pub fn plain(data: &'a Dataset) -> Self {
        Design {
            data,
            anchors: (0..data.n()).collect(),
            members: (0..data.n()).map(|i| vec![i]).collect(),
            trial_companions: Vec::new(),
        }
    }

    /// `group_of[i]` names the group of row `i`; `anchors[g]` is the scored
    /// row of group `g`. `trial_companions` are extra tails that accompany the
    /// trial point in full conformal, carrying the trial head.
    pub fn grouped(
        data: &'a Dataset,
        anchors: Vec<usize>,
        group_of: &[usize],
        trial_companions: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if group_of.len() != data.n() {
            return Err(Error::Dimension {
                expected: data.n(),
                got: group_of.len(),
            });
        }
        let mut members = vec![Vec::new(); anchors.len()];
        for (row, &g) in group_of.iter().enumerate() {
            members
                .get_mut(g)
                .ok_or_else(|| Error::param("group_of", format!("group {g} has no anchor")))?
                .push(row);
        }
        for (g, &a) in anchors.iter().enumerate() {
            if group_of.get(a) != Some(&g) {
                return Err(Error::param("anchors", format!("row {a} is not in group {g}")));
            }
        }
        if let Some(c) = trial_companions.iter().find(|c| c.len() != data.p()) {
            return Err(Error::Dimension {
                expected: data.p(),
                got: c.len(),
            });
        }
        Ok(Design {
            data,
            anchors,
            members,
            trial_companions,
        })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn groups(&self) -> usize {
        self.anchors.len()
    }

    fn is_plain(&self) -> bool {
        self.trial_companions.is_empty() && self.members.iter().all(|m| m.len() == 1)
    }

    fn rows_of(&self, groups: impl Iterator<Item = usize>) -> Vec<usize> {
        groups.flat_map(|g| self.members[g].iter().copied()).collect()
    }

    fn xy(&self, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let x = self.data.x().select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.data.y()[i]));
        (x, y)
    }
}

/// `ceil(x)` that ignores floating-point dust just above an integer.
fn ceil_rank(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Rank of the calibration quantile for `m` scores: `ceil((m+1)(1−α))`, clamped to `[1, m]`.
pub fn split_rank(m: usize, alpha: f64) -> usize {
    ceil_rank((m as f64 + 1.0) * (1.0 - alpha)).clamp(1, m)
}

/// Rank of the jackknife quantile for `m` scores: `ceil(m(1−α))`, clamped to `[1, m]`.
pub fn jackknife_rank(m: usize, alpha: f64) -> usize {
    ceil_rank(m as f64 * (1.0 - alpha)).clamp(1, m)
}

fn kth_smallest(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth
}

/// Half-width from absolute calibration residuals under the split rule.
pub fn split_half_width(abs_residuals: &[f64], alpha: f64) -> f64 {
    kth_smallest(abs_residuals, split_rank(abs_residuals.len(), alpha))
}

/// Half-width from absolute leave-one-out residuals under the jackknife rule.
pub fn jackknife_half_width(abs_loo: &[f64], alpha: f64) -> f64 {
    kth_smallest(abs_loo, jackknife_rank(abs_loo.len(), alpha))
}

fn check_query(d: &Dataset, x0: &[f64]) -> Result<()> {
    if x0.len() != d.p() {
        return Err(Error::Dimension {
            expected: d.p(),
            got: x0.len(),
        });
    }
    Ok(())
}

fn need_groups(design: &Design, needed: usize, what: &'static str) -> Result<()> {
    if design.groups() < needed {
        return Err(Error::InsufficientData {
            what,
            needed,
            got: design.groups(),
        });
    }
    Ok(())
}

fn interval(point: f64, half: f64, spec: &ConformalSpec, reg: &Regressor) -> PredictionInterval {
    PredictionInterval {
        point,
        lo: point - half,
        up: point + half,
        path: Path::Standard,
        conformal_method: spec.method,
        regressor: reg.kind(),
        degenerate: false,
    }
}

/// Dispatches on `spec.method`. `seed` is only read by split conformal.
pub fn conformal_interval(
    design: &Design,
    reg: &Regressor,
    x0: &[f64],
    spec: &ConformalSpec,
    seed: u64,
) -> Result<PredictionInterval> {
    match spec.method {
        ConformalMethod::Split => split_on(design, reg, x0, spec, seed),
        ConformalMethod::Full => full_on(design, reg, x0, spec),
        ConformalMethod::Jackknife => jackknife_on(design, reg, x0, spec),
    }
}

/// Split conformal: fit on a seeded `floor(ρ·n)` part, calibrate on the rest.
pub fn split_conformal(
    d: &Dataset,
    reg: &Regressor,
    x0: &[f64],
    spec: &ConformalSpec,
    seed: u64,
) -> Result<PredictionInterval> {
    split_on(&Design::plain(d), reg, x0, spec, seed)
}

pub fn split_on(
    design: &Design,
    reg: &Regressor,
    x0: &[f64],
    spec: &ConformalSpec,
    seed: u64,
) -> Result<PredictionInterval> {
    spec.validate()?;
    check_query(design.data, x0)?;
    need_groups(design, 4, "split conformal")?;
    let g = design.groups();
    let n_train = (spec.rho * g as f64).floor() as usize;
    if n_train < 2 || n_train > g - 2 {
        return Err(Error::param(
            "rho",
            format!("floor(rho·n) = {n_train} leaves fewer than 2 rows on one side of {g}"),
        ));
    }
    let mut order: Vec<usize> = (0..g).collect();
    order.shuffle(&mut seed::stream(seed, "split", 0));
    let train_rows = design.rows_of(order[..n_train].iter().copied());
    let (xt, yt) = design.xy(&train_rows);
    let model = reg.fit_xy(&xt, &yt)?;

    let x = design.data.x();
    let y = design.data.y();
    let scores: Vec<f64> = order[n_train..]
        .iter()
        .map(|&grp| {
            let i = design.anchors[grp];
            (y[i] - model.predict_row(x, i)).abs()
        })
        .collect();
    let point = model.predict(x0)?;
    Ok(interval(point, split_half_width(&scores, spec.alpha), spec, reg))
}

/// Leave-one-out residuals `y_i − ŷ_{−i}(x_i)`, refitting with `reg` as given.
pub fn loo_residuals(d: &Dataset, reg: &Regressor) -> Result<Vec<f64>> {
    loo_on(&Design::plain(d), reg)
}

fn loo_on(design: &Design, reg: &Regressor) -> Result<Vec<f64>> {
    if matches!(reg, Regressor::Ols) && design.is_plain() {
        if let Some(r) = ols_loo_residuals(design.data.x(), design.data.y()) {
            return Ok(r);
        }
    }
    let x = design.data.x();
    let y = design.data.y();
    (0..design.groups())
        .map(|g| {
            let rows = design.rows_of((0..design.groups()).filter(|&h| h != g));
            let (xt, yt) = design.xy(&rows);
            let m = reg.fit_xy(&xt, &yt)?;
            let i = design.anchors[g];
            Ok(y[i] - m.predict_row(x, i))
        })
        .collect()
}

/// Jackknife conformal: half-width from leave-one-out residuals, centered on
/// the full-data forecast. Refits reuse the hyperparameters of the full fit.
pub fn jackknife_conformal(
    d: &Dataset,
    reg: &Regressor,
    x0: &[f64],
    spec: &ConformalSpec,
) -> Result<PredictionInterval> {
    jackknife_on(&Design::plain(d), reg, x0, spec)
}

pub fn jackknife_on(
    design: &Design,
    reg: &Regressor,
    x0: &[f64],
    spec: &ConformalSpec,
) -> Result<PredictionInterval> {
    spec.validate()?;
    check_query(design.data, x0)?;
    need_groups(design, 3, "jackknife conformal")?;
    let base = reg.fit(design.data)?;
    let frozen = Regressor::frozen(&base);
    let loo: Vec<f64> = loo_on(design, &frozen)?.iter().map(|r| r.abs()).collect();
    let point = base.predict(x0)?;
    Ok(interval(point, jackknife_half_width(&loo, spec.alpha), spec, reg))
}

/// The trial grid and which candidates full conformal accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct FullConformalGrid {
    pub candidates: Vec<f64>,
    pub accepted: Vec<bool>,
    pub point: f64,
}

impl FullConformalGrid {
    pub fn accepted_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.candidates
            .iter()
            .zip(&self.accepted)
            .filter(|(_, a)| **a)
            .map(|(c, _)| *c)
    }
}

/// Equally spaced candidates over `[min y − e, max y + e]`, `e = expansion · range`.
pub fn trial_grid(y: &DVector<f64>, points: usize, expansion: f64) -> Vec<f64> {
    let lo = y.min();
    let hi = y.max();
    let e = expansion * (hi - lo);
    let (a, b) = (lo - e, hi + e);
    (0..points)
        .map(|k| a + (b - a) * k as f64 / (points as f64 - 1.0))
        .collect()
}

pub fn full_conformal_grid(
    design: &Design,
    reg: &Regressor,
    x0: &[f64],
    spec: &ConformalSpec,
) -> Result<FullConformalGrid> {
    spec.validate()?;
    check_query(design.data, x0)?;
    need_groups(design, 2, "full conformal")?;
    let base = reg.fit(design.data)?;
    let frozen = Regressor::frozen(&base);
    let point = base.predict(x0)?;

    let d = design.data;
    let (n, p) = (d.n(), d.p());
    let extra = 1 + design.trial_companions.len();
    let mut x = DMatrix::zeros(n + extra, p);
    x.rows_mut(0, n).copy_from(d.x());
    for j in 0..p {
        x[(n, j)] = x0[j];
    }
    for (c, tail) in design.trial_companions.iter().enumerate() {
        for j in 0..p {
            x[(n + 1 + c, j)] = tail[j];
        }
    }
    let mut y = DVector::zeros(n + extra);
    y.rows_mut(0, n).copy_from(d.y());

    let m = design.groups();
    let limit = ceil_rank((m as f64 + 1.0) * (1.0 - spec.alpha)).max(1);
    let candidates = trial_grid(d.y(), spec.grid_points, spec.grid_expansion);
    let mut accepted = Vec::with_capacity(candidates.len());
    for &cand in &candidates {
        for k in n..n + extra {
            y[k] = cand;
        }
        let model = frozen.fit_xy(&x, &y)?;
        let trial = (cand - model.predict_row(&x, n)).abs();
        let rank = 1 + design
            .anchors
            .iter()
            .filter(|&&i| (y[i] - model.predict_row(&x, i)).abs() <= trial)
            .count();
        accepted.push(rank <= limit);
    }
    Ok(FullConformalGrid {
        candidates,
        accepted,
        point,
    })
}

/// Full conformal over a trial grid; falls back to a flagged point interval
/// when no candidate is accepted.
pub fn full_conformal(
    d: &Dataset,
    reg: &Regressor,
    x0: &[f64],
    spec: &ConformalSpec,
) -> Result<PredictionInterval> {
    full_on(&Design::plain(d), reg, x0, spec)
}

pub fn full_on(
    design: &Design,
    reg: &Regressor,
    x0: &[f64],
    spec: &ConformalSpec,
) -> Result<PredictionInterval> {
    let grid = full_conformal_grid(design, reg, x0, spec)?;
    let mut acc = grid.accepted_values();
    let mut out = interval(grid.point, 0.0, spec, reg);
    match acc.next() {
        Some(first) => {
            let (lo, up) = acc.fold((first, first), |(lo, up), v| (lo.min(v), up.max(v)));
            out.lo = lo;
            out.up = up;
        }
        None => out.degenerate = true,
    }
    Ok(out)
}
