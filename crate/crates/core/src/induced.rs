//! The induced first-zooming-return Markov map.
//!
//! Around a periodic source with zooming data `(ell, delta)` we fix a base
//! `Delta = B_r(p')` with `r < delta/4` and enumerate, return time by return
//! time, the composed inverse branches of `f~ = f^ell` that map `Delta`
//! strictly into itself and certify zooming at that block time. Cells of
//! smaller return time claim their territory first; later candidates that
//! overlap a committed cell are discarded. The result is a map `F(x) =
//! f~^{R(x)}(x)` whose branches each cover `Delta` with expansion above 8
//! per block.
//!
//! Enumeration is budgeted: the pre-image frontier is pruned to one
//! representative per grid cell once it outgrows its budget, so deep levels
//! carry a deterministic subset of the full (exponentially large) partition.
//! The truncation report records exactly what was kept.

use serde::{Deserialize, Serialize};

use crate::error::InducedError;
use crate::exec;
use crate::map::TorusMap;
use crate::numeric;
use crate::tolerances::{MARKOV_TOL, SAMPLE_TOL, STRICT_INTERIOR_MARGIN};
use crate::torus::{sphere_directions, torus_distance, CoverGrid, TorusPoint};
use crate::zooming::{pull_back_chain, SourceZoomingData, ZoomingContraction};

/// The induced base `Delta = B_r(p')`, approximated by the metric ball: with
/// the rate-1/8 contraction the series sum at `r` equals `r/7 < r/4`, so the
/// nested-ball correction stays below the radius slack used in all
/// certificates. Every report flags the approximation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedBase {
    pub center: TorusPoint,
    pub radius: f64,
    pub delta: f64,
    pub ell: usize,
    /// `sum_n alpha_n(r) = r/7` for the 1/8 family; recorded because the
    /// construction requires it below `r/4`.
    pub series_sum_at_r: f64,
    /// Metric-ball approximation flag (the nested ball is not constructed).
    pub nested_ball_approximation: bool,
}

/// Build the base from source zooming data; `r` must be below `delta/4`.
pub fn build_base(
    source_data: &SourceZoomingData,
    r: f64,
) -> Result<InducedBase, InducedError> {
    let limit = source_data.delta / 4.0;
    if !(r > 0.0 && r < limit) {
        return Err(InducedError::RadiusTooLarge { r, limit });
    }
    let alpha = ZoomingContraction::new(0.125);
    Ok(InducedBase {
        center: source_data.source_point.clone(),
        radius: r,
        delta: source_data.delta,
        ell: source_data.ell,
        series_sum_at_r: alpha.series_sum(r),
        nested_ball_approximation: true,
    })
}

/// One branch of the induced map: the cell is the pull-back of `Delta`
/// through the recorded inverse-branch chain.
#[derive(Debug, Clone)]
pub struct InducedCell {
    pub id: usize,
    /// Return time in f~-blocks.
    pub return_time: usize,
    /// Branch index per f-step, cell side first: `itinerary[j]` selects the
    /// branch pulling `center_chain[j+1]` back to `center_chain[j]`.
    pub itinerary: Vec<u16>,
    /// Pull-back chain of the base center: `center_chain[0]` is the cell
    /// center, `center_chain[return_time * ell]` is `p'`.
    pub center_chain: Vec<TorusPoint>,
    /// Largest pull-back distance of base boundary samples from the center.
    pub radius_est: f64,
    /// Exact interval endpoints on the circle (1-D only).
    pub endpoints: Option<(f64, f64)>,
    /// Lower bound on the smallest singular value of `DF` over the cell
    /// (product of per-step minima along sampled chains).
    pub df_min: f64,
    pub log_df_min: f64,
    /// Worst slack in the sampled block-time contraction inequalities.
    pub zooming_margin: f64,
    /// Worst single-step forward residual over all sampled pull-backs.
    pub markov_residual: f64,
}

impl InducedCell {
    pub fn center(&self) -> &TorusPoint {
        &self.center_chain[0]
    }

    /// Total f-steps of this branch.
    pub fn depth(&self) -> usize {
        self.itinerary.len()
    }
}

/// What the budgeted enumeration kept and dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationReport {
    pub max_return: usize,
    pub cells_found: usize,
    /// Cells per return time, index 0 <-> return time 1.
    pub level_counts: Vec<usize>,
    pub rejected_overlap: usize,
    pub rejected_zooming: usize,
    pub rejected_interior: usize,
    pub rejected_early_return: usize,
    pub frontier_pruned: bool,
    pub cell_budget_hit: bool,
    /// Fraction of the base covered by found cells (exact interval widths in
    /// 1-D, ball-volume proxy otherwise).
    pub lebesgue_covered_fraction: f64,
}

/// The induced Markov map.
#[derive(Debug, Clone)]
pub struct InducedMarkovMap {
    pub base: InducedBase,
    pub cells: Vec<InducedCell>,
    pub truncation: TruncationReport,
}

impl InducedMarkovMap {
    pub fn ell(&self) -> usize {
        self.base.ell
    }

    /// Cells with a given return time.
    pub fn cells_with_return(&self, k: usize) -> impl Iterator<Item = &InducedCell> {
        self.cells.iter().filter(move |c| c.return_time == k)
    }

    /// Pull a base point back through the branch of `cell`, returning the
    /// full f-step chain (`chain[0]` in the cell, `chain[depth] = y`).
    pub fn pull_back(
        &self,
        f: &dyn TorusMap,
        cell: &InducedCell,
        y: &TorusPoint,
    ) -> Result<Vec<TorusPoint>, InducedError> {
        let depth = cell.depth();
        Ok(pull_back_chain(f, &cell.center_chain, depth, y)?)
    }
}

/// Budgets and sampling density for [`build_induced_map`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedBuildOptions {
    pub max_return: usize,
    pub cell_budget: usize,
    pub frontier_budget: usize,
    /// Frontier prune grid: `2^k` cells per axis (chosen from the dimension
    /// when absent).
    pub prune_mesh_power: Option<u32>,
    /// Boundary samples per cell certificate.
    pub boundary_samples: usize,
}

impl Default for InducedBuildOptions {
    fn default() -> Self {
        Self {
            max_return: 8,
            cell_budget: 4096,
            frontier_budget: 8192,
            prune_mesh_power: None,
            boundary_samples: 16,
        }
    }
}

fn default_prune_power(dim: usize) -> u32 {
    match dim {
        1 => 11,
        2 => 6,
        _ => 4,
    }
}

struct Node {
    point: TorusPoint,
    parent: usize,
    branch: u16,
}

/// Enumerate first-zooming-return cells up to `max_return` blocks.
///
/// Candidates are generated in deterministic order (frontier order, then
/// branch index, i.e. lexicographic in the root-first itinerary); commitment
/// is a serial reduction so the first-return tie-breaking is reproducible.
pub fn build_induced_map(
    f: &dyn TorusMap,
    base: &InducedBase,
    alpha: &ZoomingContraction,
    opts: &InducedBuildOptions,
) -> Result<InducedMarkovMap, InducedError> {
    if opts.max_return == 0 {
        return Err(InducedError::InvalidParameter("max_return must be >= 1".into()));
    }
    let dim = f.dimension();
    let ell = base.ell;
    let prune_grid = CoverGrid::with_mesh_power(
        dim,
        opts.prune_mesh_power.unwrap_or_else(|| default_prune_power(dim)),
    );

    let mut arena: Vec<Node> = vec![Node {
        point: base.center.clone(),
        parent: usize::MAX,
        branch: 0,
    }];
    let mut frontier: Vec<usize> = vec![0];
    let mut cells: Vec<InducedCell> = Vec::new();
    let mut report = TruncationReport {
        max_return: opts.max_return,
        cells_found: 0,
        level_counts: vec![0; opts.max_return],
        rejected_overlap: 0,
        rejected_zooming: 0,
        rejected_interior: 0,
        rejected_early_return: 0,
        frontier_pruned: false,
        cell_budget_hit: false,
        lebesgue_covered_fraction: 0.0,
    };

    'depth: for depth in 1..=opts.max_return * ell {
        // parallel branch generation, serial commit in frontier order
        let branch_sets: Vec<Result<Vec<TorusPoint>, crate::error::MapError>> =
            exec::map_indexed(frontier.len(), |i| {
                f.inverse_branches(&arena[frontier[i]].point)
            });
        let mut children: Vec<usize> = Vec::with_capacity(frontier.len() * f.degree());
        for (i, set) in branch_sets.into_iter().enumerate() {
            for (b, w) in set?.into_iter().enumerate() {
                arena.push(Node {
                    point: w,
                    parent: frontier[i],
                    branch: b as u16,
                });
                children.push(arena.len() - 1);
            }
        }

        if depth % ell == 0 {
            let k = depth / ell;
            for &child in &children {
                if cells.len() >= opts.cell_budget {
                    report.cell_budget_hit = true;
                    break 'depth;
                }
                let d = torus_distance(&arena[child].point, &base.center);
                if d >= base.radius {
                    continue;
                }
                let chain = chain_to_root(&arena, child);
                let itinerary = itinerary_to_root(&arena, child);
                match certify_cell(f, base, alpha, k, &chain, opts.boundary_samples) {
                    CellVerdict::Accept(data) => {
                        let overlaps = cells
                            .iter()
                            .any(|c| cells_overlap(c, &chain[0], &data, dim));
                        if overlaps {
                            report.rejected_overlap += 1;
                        } else {
                            let id = cells.len();
                            cells.push(InducedCell {
                                id,
                                return_time: k,
                                itinerary,
                                center_chain: chain,
                                radius_est: data.radius_est,
                                endpoints: data.endpoints,
                                df_min: data.df_min,
                                log_df_min: data.log_df_min,
                                zooming_margin: data.zooming_margin,
                                markov_residual: data.markov_residual,
                            });
                            report.level_counts[k - 1] += 1;
                        }
                    }
                    CellVerdict::NotInterior => report.rejected_interior += 1,
                    CellVerdict::NotZooming => report.rejected_zooming += 1,
                    CellVerdict::NotFirstReturn => report.rejected_early_return += 1,
                }
            }
        }

        // prune the frontier for the next depth: one representative per grid
        // cell, the one nearest the cell center. Canonical spatial choice;
        // lexicographic-first would keep the coarse dyadic points that sit
        // inside already-claimed cells and starve deeper levels.
        if children.len() > opts.frontier_budget {
            report.frontier_pruned = true;
            let half_mesh = prune_grid.mesh() / 2.0;
            let mut best: std::collections::BTreeMap<usize, (usize, f64)> =
                std::collections::BTreeMap::new();
            for &c in &children {
                let p = &arena[c].point;
                let cell_idx = prune_grid.cell_index(p);
                let cell_center = prune_grid.point(cell_idx).translate(
                    &crate::torus::TorusVector::new(vec![half_mesh; dim]),
                );
                let d = torus_distance(p, &cell_center);
                match best.get(&cell_idx) {
                    Some((_, bd)) if *bd <= d => {}
                    _ => {
                        best.insert(cell_idx, (c, d));
                    }
                }
            }
            frontier = best.values().map(|(c, _)| *c).collect();
            frontier.truncate(opts.frontier_budget);
        } else {
            frontier = children;
        }
    }

    if cells.is_empty() {
        return Err(InducedError::NoCellsFound {
            max_r: opts.max_return,
        });
    }
    report.cells_found = cells.len();
    report.lebesgue_covered_fraction = covered_fraction(&cells, base, dim);
    Ok(InducedMarkovMap {
        base: base.clone(),
        cells,
        truncation: report,
    })
}

fn chain_to_root(arena: &[Node], leaf: usize) -> Vec<TorusPoint> {
    let mut chain = Vec::new();
    let mut cur = leaf;
    loop {
        chain.push(arena[cur].point.clone());
        if arena[cur].parent == usize::MAX {
            return chain;
        }
        cur = arena[cur].parent;
    }
}

fn itinerary_to_root(arena: &[Node], leaf: usize) -> Vec<u16> {
    let mut it = Vec::new();
    let mut cur = leaf;
    while arena[cur].parent != usize::MAX {
        it.push(arena[cur].branch);
        cur = arena[cur].parent;
    }
    it
}

struct CellData {
    radius_est: f64,
    endpoints: Option<(f64, f64)>,
    df_min: f64,
    log_df_min: f64,
    zooming_margin: f64,
    markov_residual: f64,
}

enum CellVerdict {
    Accept(CellData),
    NotInterior,
    NotZooming,
    /// An intermediate block image touches the base, so the return label
    /// would not be the first return.
    NotFirstReturn,
}

/// Full certificate for a candidate branch: strict containment of the
/// pulled-back base, block-time zooming contraction on delta-ball samples,
/// per-step forward residuals, and the expansion lower bound.
fn certify_cell(
    f: &dyn TorusMap,
    base: &InducedBase,
    alpha: &ZoomingContraction,
    k: usize,
    chain: &[TorusPoint],
    boundary_samples: usize,
) -> CellVerdict {
    let dim = f.dimension();
    let depth = chain.len() - 1;
    let ell = base.ell;
    debug_assert_eq!(depth, k * ell);

    // pull back base boundary samples; all must land strictly inside Delta
    let dirs = sphere_directions(dim, boundary_samples.max(2 * dim));
    let mut samples: Vec<TorusPoint> = dirs
        .iter()
        .map(|d| base.center.translate(&d.scale(base.radius)))
        .collect();
    samples.extend(
        dirs.iter()
            .take(dim * 2)
            .map(|d| base.center.translate(&d.scale(base.radius * 0.5))),
    );

    let pulled: Vec<Option<Vec<TorusPoint>>> = exec::map_indexed(samples.len(), |i| {
        pull_back_chain(f, chain, depth, &samples[i]).ok()
    });
    let mut radius_est = 0.0f64;
    let mut markov_residual = 0.0f64;
    let mut boundary_chains: Vec<Vec<TorusPoint>> = Vec::with_capacity(pulled.len());
    for p in pulled {
        let Some(sample_chain) = p else {
            return CellVerdict::NotZooming;
        };
        let landing = torus_distance(&sample_chain[0], &base.center);
        if landing >= base.radius * (1.0 - STRICT_INTERIOR_MARGIN) {
            return CellVerdict::NotInterior;
        }
        radius_est = radius_est.max(torus_distance(&sample_chain[0], &chain[0]));
        for j in 0..depth {
            let r = torus_distance(&f.eval(&sample_chain[j]), &sample_chain[j + 1]);
            markov_residual = markov_residual.max(r);
        }
        boundary_chains.push(sample_chain);
    }
    if markov_residual >= MARKOV_TOL {
        return CellVerdict::NotZooming;
    }

    // first-return guard: no intermediate block image may touch the base.
    // The sampled boundary chains bound the image extent at every block, so
    // this holds regardless of which shallower cells the budget found.
    for block in 1..k {
        let pos = block * ell;
        let image_radius = boundary_chains
            .iter()
            .map(|c| torus_distance(&c[pos], &chain[pos]))
            .fold(0.0f64, f64::max);
        if torus_distance(&chain[pos], &base.center) < base.radius + image_radius {
            return CellVerdict::NotFirstReturn;
        }
    }

    // exact endpoints on the circle
    let endpoints = if dim == 1 {
        let lo = base.center.translate(&crate::torus::TorusVector::new(vec![-base.radius]));
        let hi = base.center.translate(&crate::torus::TorusVector::new(vec![base.radius]));
        let plo = pull_back_chain(f, chain, depth, &lo).ok();
        let phi = pull_back_chain(f, chain, depth, &hi).ok();
        match (plo, phi) {
            (Some(a), Some(b)) => Some((a[0].coords()[0], b[0].coords()[0])),
            _ => return CellVerdict::NotZooming,
        }
    } else {
        None
    };

    // zooming certificate at block granularity on delta-ball samples
    let zdirs = sphere_directions(dim, (8 * k).max(4));
    let mut zooming_margin = f64::INFINITY;
    for d in &zdirs {
        let a = base.center.translate(&d.scale(base.delta));
        let b = base.center.translate(&d.scale(-base.delta));
        let (Ok(ca), Ok(cb)) = (
            pull_back_chain(f, chain, depth, &a),
            pull_back_chain(f, chain, depth, &b),
        ) else {
            return CellVerdict::NotZooming;
        };
        let dist_end = torus_distance(&ca[depth], &cb[depth]);
        for block in 0..k {
            let dist_j = torus_distance(&ca[block * ell], &cb[block * ell]);
            let bound = alpha.alpha(k - block, dist_end);
            if dist_j > bound + SAMPLE_TOL {
                return CellVerdict::NotZooming;
            }
            zooming_margin = zooming_margin.min(bound - dist_j);
        }
    }

    // expansion lower bound: product of per-step sigma_min along the center
    // chain and all boundary chains
    let mut df_min = f64::INFINITY;
    let mut log_df_min = f64::INFINITY;
    let mut eval_chain = |c: &[TorusPoint]| {
        let mut prod = 1.0f64;
        let mut log_sum = 0.0f64;
        for p in c.iter().take(depth) {
            let s = numeric::min_singular_value(&f.derivative(p));
            prod *= s;
            log_sum += s.ln();
        }
        df_min = df_min.min(prod);
        log_df_min = log_df_min.min(log_sum);
    };
    eval_chain(chain);
    for c in &boundary_chains {
        eval_chain(c);
    }

    CellVerdict::Accept(CellData {
        radius_est,
        endpoints,
        df_min,
        log_df_min,
        zooming_margin,
        markov_residual,
    })
}

/// Conservative pairwise-disjointness test: exact arc overlap in 1-D,
/// bounding-ball overlap otherwise.
fn cells_overlap(
    existing: &InducedCell,
    cand_center: &TorusPoint,
    candidate: &CellData,
    dim: usize,
) -> bool {
    if dim == 1 {
        if let (Some((lo_a, hi_a)), Some((lo_b, hi_b))) =
            (existing.endpoints, candidate.endpoints)
        {
            let (ca, wa) = arc_center_halfwidth(lo_a, hi_a);
            let (cb, wb) = arc_center_halfwidth(lo_b, hi_b);
            return crate::torus::wrap_signed(ca - cb).abs() < wa + wb;
        }
    }
    torus_distance(existing.center(), cand_center) < existing.radius_est + candidate.radius_est
}

fn arc_center_halfwidth(lo: f64, hi: f64) -> (f64, f64) {
    let width = crate::torus::wrap_signed(hi - lo).abs();
    let center = lo + crate::torus::wrap_signed(hi - lo) / 2.0;
    (crate::torus::wrap_unit(center), width / 2.0)
}

/// Covered fraction of the base: exact interval widths over `2r` in 1-D,
/// a ball-volume proxy in higher dimension.
fn covered_fraction(cells: &[InducedCell], base: &InducedBase, dim: usize) -> f64 {
    if dim == 1 {
        let widths: Vec<f64> = cells
            .iter()
            .map(|c| {
                let (lo, hi) = c.endpoints.expect("1-D cells carry endpoints");
                crate::torus::wrap_signed(hi - lo).abs()
            })
            .collect();
        numeric::pairwise_sum(&widths) / (2.0 * base.radius)
    } else {
        let vols: Vec<f64> = cells
            .iter()
            .map(|c| (c.radius_est / base.radius).powi(dim as i32))
            .collect();
        numeric::pairwise_sum(&vols).min(1.0)
    }
}

// ---------------------------------------------------------------------------
// certification and tails
// ---------------------------------------------------------------------------

/// Result of a full Markov certification pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovReport {
    pub cells_checked: usize,
    pub samples_per_cell: usize,
    /// Worst single-step forward residual over all cells and samples.
    pub worst_step_residual: f64,
    /// Smallest pairwise separation among pulled-back targets, witnessed
    /// one block above the cell where the spacing is still representable
    /// (the deepest cells are ulp-sized, so separation at the cell itself
    /// can round to zero without breaking injectivity).
    pub min_pair_separation: f64,
    /// Smallest slack `r - dist(pull_back(target), center)` over boundary
    /// targets (containment witness).
    pub worst_interior_margin: f64,
    /// Set when the map has no cells: the report passes vacuously.
    pub empty_warning: bool,
}

/// Certify `F(P) = Delta` per cell: pull a covering grid of targets back
/// through the branch, demand per-step forward residuals below `MARKOV_TOL`,
/// pairwise-distinct pull-backs, and containment in the cell.
pub fn certify_markov(
    f: &dyn TorusMap,
    map: &InducedMarkovMap,
    samples_per_cell: usize,
) -> Result<MarkovReport, InducedError> {
    if map.cells.is_empty() {
        return Ok(MarkovReport {
            cells_checked: 0,
            samples_per_cell,
            worst_step_residual: 0.0,
            min_pair_separation: f64::INFINITY,
            worst_interior_margin: f64::INFINITY,
            empty_warning: true,
        });
    }
    let dim = f.dimension();
    let base = &map.base;
    let targets = target_grid(base, dim, samples_per_cell);

    let results: Vec<Result<(f64, f64, f64), InducedError>> =
        exec::map_indexed(map.cells.len(), |ci| {
            let cell = &map.cells[ci];
            let depth = cell.depth();
            // injectivity witness position: one block above the cell, where
            // target spacing has only contracted once and stays far above
            // the f64 resolution floor (the cell itself may be ulp-sized)
            let sep_pos = depth.saturating_sub(map.base.ell.min(depth));
            let mut worst_residual = 0.0f64;
            let mut worst_margin = f64::INFINITY;
            let mut witnesses: Vec<TorusPoint> = Vec::with_capacity(targets.len());
            for t in &targets {
                let chain = pull_back_chain(f, &cell.center_chain, depth, t).map_err(|e| {
                    InducedError::MarkovViolation {
                        cell: cell.id,
                        reason: format!("pull-back failed: {e}"),
                    }
                })?;
                for j in 0..depth {
                    let r = torus_distance(&f.eval(&chain[j]), &chain[j + 1]);
                    worst_residual = worst_residual.max(r);
                    if r >= MARKOV_TOL {
                        return Err(InducedError::MarkovViolation {
                            cell: cell.id,
                            reason: format!(
                                "forward residual {r:.3e} at step {j} exceeds {MARKOV_TOL:.0e}"
                            ),
                        });
                    }
                }
                let inside = torus_distance(&chain[0], cell.center());
                worst_margin = worst_margin.min(cell.radius_est * 1.000001 - inside);
                witnesses.push(chain[sep_pos].clone());
            }
            if worst_margin < 0.0 {
                return Err(InducedError::MarkovViolation {
                    cell: cell.id,
                    reason: "pull-back escaped the cell".into(),
                });
            }
            let mut min_sep = f64::INFINITY;
            for i in 0..witnesses.len() {
                for j in (i + 1)..witnesses.len() {
                    min_sep = min_sep.min(torus_distance(&witnesses[i], &witnesses[j]));
                }
            }
            if min_sep <= 0.0 {
                return Err(InducedError::MarkovViolation {
                    cell: cell.id,
                    reason: "two targets pulled back to the same point".into(),
                });
            }
            Ok((worst_residual, min_sep, worst_margin))
        });

    let mut worst_step_residual = 0.0f64;
    let mut min_pair_separation = f64::INFINITY;
    let mut worst_interior_margin = f64::INFINITY;
    for r in results {
        let (res, sep, margin) = r?;
        worst_step_residual = worst_step_residual.max(res);
        min_pair_separation = min_pair_separation.min(sep);
        worst_interior_margin = worst_interior_margin.min(margin);
    }
    Ok(MarkovReport {
        cells_checked: map.cells.len(),
        samples_per_cell: targets.len(),
        worst_step_residual,
        min_pair_separation,
        worst_interior_margin,
        empty_warning: false,
    })
}

/// Deterministic covering grid of the base for surjectivity checks.
fn target_grid(base: &InducedBase, dim: usize, count: usize) -> Vec<TorusPoint> {
    let count = count.max(4);
    let mut out = vec![base.center.clone()];
    if dim == 1 {
        for i in 1..count {
            let t = -1.0 + 2.0 * i as f64 / count as f64;
            if t.abs() < 1e-12 {
                continue; // center already present
            }
            out.push(base.center.translate(&crate::torus::TorusVector::new(vec![
                t * base.radius * 0.999,
            ])));
        }
    } else {
        let rings = [0.33, 0.66, 0.999];
        let per_ring = count.div_ceil(rings.len());
        for r in rings {
            for d in sphere_directions(dim, per_ring) {
                out.push(base.center.translate(&d.scale(base.radius * r)));
            }
        }
    }
    out
}

/// Tail mass of `{R >= n}` under cell masses: attached weights when given,
/// otherwise the Lebesgue proxy (cell width as mass, normalized over found
/// cells).
pub fn return_time_tail(map: &InducedMarkovMap, masses: Option<&[f64]>, n: usize) -> f64 {
    let cell_mass = |c: &InducedCell| -> f64 {
        match masses {
            Some(m) => m[c.id],
            None => match c.endpoints {
                Some((lo, hi)) => crate::torus::wrap_signed(hi - lo).abs(),
                None => c.radius_est.powi(map.base.center.dim() as i32),
            },
        }
    };
    let total: Vec<f64> = map.cells.iter().map(cell_mass).collect();
    let tail: Vec<f64> = map
        .cells
        .iter()
        .filter(|c| c.return_time >= n)
        .map(cell_mass)
        .collect();
    let denom = numeric::pairwise_sum(&total);
    if denom == 0.0 {
        return 0.0;
    }
    numeric::pairwise_sum(&tail) / denom
}

// ---------------------------------------------------------------------------
// interchange document
// ---------------------------------------------------------------------------

/// Serializable exchange format: everything needed to audit the partition or
/// rebuild it against the same map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedMapDocument {
    pub family: String,
    pub base: InducedBase,
    pub cells: Vec<CellDocument>,
    pub truncation: TruncationReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellDocument {
    pub id: usize,
    pub return_time: usize,
    pub itinerary: Vec<u16>,
    pub center: Vec<f64>,
    pub radius_est: f64,
    pub endpoints: Option<(f64, f64)>,
    pub df_min: f64,
    pub log_df_min: f64,
    pub zooming_margin: f64,
    pub markov_residual: f64,
}

impl InducedMarkovMap {
    pub fn to_document(&self, f: &dyn TorusMap) -> InducedMapDocument {
        InducedMapDocument {
            family: f.family_name().to_string(),
            base: self.base.clone(),
            cells: self
                .cells
                .iter()
                .map(|c| CellDocument {
                    id: c.id,
                    return_time: c.return_time,
                    itinerary: c.itinerary.clone(),
                    center: c.center().coords().to_vec(),
                    radius_est: c.radius_est,
                    endpoints: c.endpoints,
                    df_min: c.df_min,
                    log_df_min: c.log_df_min,
                    zooming_margin: c.zooming_margin,
                    markov_residual: c.markov_residual,
                })
                .collect(),
            truncation: self.truncation.clone(),
        }
    }

    /// Rebuild chains by replaying each itinerary against the map. The
    /// branch indices refer to the lexicographic branch order, which is
    /// stable for a fixed map.
    pub fn from_document(
        f: &dyn TorusMap,
        doc: &InducedMapDocument,
    ) -> Result<Self, InducedError> {
        let mut cells = Vec::with_capacity(doc.cells.len());
        for cd in &doc.cells {
            let depth = cd.itinerary.len();
            let mut chain = vec![TorusPoint::origin(f.dimension()); depth + 1];
            chain[depth] = doc.base.center.clone();
            for j in (0..depth).rev() {
                let branches = f.inverse_branches(&chain[j + 1])?;
                let idx = cd.itinerary[j] as usize;
                if idx >= branches.len() {
                    return Err(InducedError::InvalidParameter(format!(
                        "cell {} itinerary index {idx} out of range",
                        cd.id
                    )));
                }
                chain[j] = branches[idx].clone();
            }
            let center = &chain[0];
            if torus_distance(center, &TorusPoint::new(cd.center.clone())) > 1e-9 {
                return Err(InducedError::InvalidParameter(format!(
                    "cell {} replay drifted from the recorded center",
                    cd.id
                )));
            }
            cells.push(InducedCell {
                id: cd.id,
                return_time: cd.return_time,
                itinerary: cd.itinerary.clone(),
                center_chain: chain,
                radius_est: cd.radius_est,
                endpoints: cd.endpoints,
                df_min: cd.df_min,
                log_df_min: cd.log_df_min,
                zooming_margin: cd.zooming_margin,
                markov_residual: cd.markov_residual,
            });
        }
        Ok(Self {
            base: doc.base.clone(),
            cells,
            truncation: doc.truncation.clone(),
        })
    }
}
