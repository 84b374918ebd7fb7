//! Empirical checks of posterior box-probability laws.
//!
//! Replicated path draws run in parallel with one ChaCha stream per replica,
//! `stream = replica index` under a shared master seed, so results do not
//! depend on thread scheduling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{dp_raw, PathSampler};
use crate::error::{Error, Result};
use crate::geometry::{HalfOpenBox, Point};
use crate::measures::{Atom, BaseMeasure, DiscreteMeasure, EmpiricalPart, Measure, MixtureBase};
use crate::posterior::{arc_fraction, fit, fit_limit_with, DipPosterior, PosteriorGroup, DEFAULT_K_SYM};
use crate::scalar::{stable_sum, Scalar};
use crate::symmetry::{make_cyclic_group_2d, FiniteGroup, GroupElement};

/// Generator for replica `index` under `master` seed.
pub fn replica_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Child seed for a labelled sub-experiment (splitmix64 finalizer).
pub fn derive_seed(master: u64, label: u64) -> u64 {
    let mut z = master ^ label.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Multiplies the weight of every path atom lying in `region` by
/// `1 + factor` and renormalizes. Used as a negative control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightDistortion<T> {
    pub factor: f64,
    pub region: HalfOpenBox<T>,
}

/// `reps × boxes` matrix of sampled box masses, one row per path.
pub fn finite_dim_sample<T: Scalar>(
    posterior: &DipPosterior<T>,
    boxes: &[HalfOpenBox<T>],
    reps: usize,
    sampler: PathSampler,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    finite_dim_sample_with(posterior, boxes, reps, sampler, seed, None)
}

pub fn finite_dim_sample_with<T: Scalar>(
    posterior: &DipPosterior<T>,
    boxes: &[HalfOpenBox<T>],
    reps: usize,
    sampler: PathSampler,
    seed: u64,
    distortion: Option<&WeightDistortion<T>>,
) -> Result<Vec<Vec<f64>>> {
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    sampler.validate()?;
    let dim = posterior.group().dim();
    for b in boxes {
        Error::check_dim(dim, b.dim())?;
    }
    if let Some(d) = distortion {
        Error::check_dim(dim, d.region.dim())?;
    }
    let params = posterior.dp_params();
    let elements = posterior.group().path_group().elements();
    (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, i);
            let raw = dp_raw(&params, sampler, &mut rng)?;
            Ok(masses(&raw.atoms, &raw.weights, elements, boxes, distortion))
        })
        .collect()
}

fn masses<T: Scalar>(
    atoms: &[Point<T>],
    weights: &[f64],
    elements: &[GroupElement<T>],
    boxes: &[HalfOpenBox<T>],
    distortion: Option<&WeightDistortion<T>>,
) -> Vec<f64> {
    let mut out = vec![0.0; boxes.len()];
    let mut total = 0.0;
    for (x, &w) in atoms.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for g in elements {
            let y = g.apply_unchecked(x);
            let f = match distortion {
                Some(d) if d.region.contains(&y) => w * (1.0 + d.factor),
                _ => w,
            };
            total += f;
            for (m, b) in out.iter_mut().zip(boxes) {
                if b.contains(&y) {
                    *m += f;
                }
            }
        }
    }
    out.into_iter().map(|m| m / total).collect()
}

/// Copy of `measure` with the distortion applied and weights renormalized.
pub fn distort_measure<T: Scalar>(
    measure: &DiscreteMeasure<T>,
    distortion: &WeightDistortion<T>,
) -> Result<DiscreteMeasure<T>> {
    let scale = T::lit(1.0 + distortion.factor);
    let atoms = measure
        .atoms()
        .iter()
        .map(|a| Atom {
            point: a.point,
            weight: if distortion.region.contains(&a.point) {
                a.weight * scale
            } else {
                a.weight
            },
        })
        .collect();
    DiscreteMeasure::normalized(atoms)
}

/// Closed-form first and second moments of box masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentOracle {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// `E[P(B_i) P(B_j)]` for `i < j`.
    pub cross: Vec<(usize, usize, f64)>,
}

/// Dirichlet moments for pairwise disjoint boxes:
/// `E P(B) = H*(B)`, `Var P(B) = H*(B)(1 − H*(B))/(α*+1)`,
/// `E[P(B_i)P(B_j)] = α*/(α*+1)·H*(B_i)H*(B_j)`.
pub fn moment_oracle<T: Scalar>(
    alpha_star: T,
    base: &MixtureBase<T>,
    boxes: &[HalfOpenBox<T>],
) -> Result<MomentOracle> {
    let a = alpha_star.as_f64();
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid("alpha_star must be positive"));
    }
    for (i, bi) in boxes.iter().enumerate() {
        for bj in &boxes[i + 1..] {
            if bi.overlaps(bj) {
                return Err(Error::invalid(format!("box {i} overlaps another box")));
            }
        }
    }
    let h: Vec<f64> = boxes
        .iter()
        .map(|b| base.eval_box(b).map(|v| v.as_f64()))
        .collect::<Result<_>>()?;
    let variances = h.iter().map(|&p| p * (1.0 - p) / (a + 1.0)).collect();
    let mut cross = Vec::new();
    for i in 0..h.len() {
        for j in i + 1..h.len() {
            cross.push((i, j, a / (a + 1.0) * h[i] * h[j]));
        }
    }
    Ok(MomentOracle {
        means: h,
        variances,
        cross,
    })
}

/// Moments of box masses for orbit-symmetrized posterior paths.
///
/// With `Q ~ DP(α*, H*)` and `P = (1/k) Σ_g Q∘g⁻¹`, invariance of `H*` gives
/// `E[P(A)P(B)] = (α* H*(A)H*(B) + O(A,B)) / (α*+1)` where
/// `O(A,B) = (1/k) Σ_g H*(A ∩ gB)`. For the trivial group this is
/// [`moment_oracle`]. `O` is exact whenever `gB` is a box or provably
/// misses `A`; otherwise the result is [`Error::Unsupported`].
pub fn dip_moment_oracle<T: Scalar>(posterior: &DipPosterior<T>, boxes: &[HalfOpenBox<T>]) -> Result<MomentOracle> {
    let group = posterior.group().path_group();
    if group.order() > 1 && !posterior.warnings().is_empty() {
        return Err(Error::Unsupported(
            "posterior base is not invariant under its group; symmetrized moments are not available".into(),
        ));
    }
    let base = posterior.base();
    let a = posterior.alpha_star().as_f64();
    let h: Vec<f64> = boxes
        .iter()
        .map(|b| base.eval_box(b).map(|v| v.as_f64()))
        .collect::<Result<_>>()?;
    let overlap = |i: usize, j: usize| -> Result<f64> {
        let k = group.order() as f64;
        let mut acc = 0.0;
        for g in group.elements() {
            acc += mass_of_box_and_image(base, &boxes[i], g, &boxes[j])?;
        }
        Ok(acc / k)
    };
    let mut variances = Vec::with_capacity(h.len());
    for i in 0..h.len() {
        variances.push((overlap(i, i)? - h[i] * h[i]) / (a + 1.0));
    }
    let mut cross = Vec::new();
    for i in 0..h.len() {
        for j in i + 1..h.len() {
            cross.push((i, j, (a * h[i] * h[j] + overlap(i, j)?) / (a + 1.0)));
        }
    }
    Ok(MomentOracle {
        means: h,
        variances,
        cross,
    })
}

/// `H*(A ∩ g(B))`.
fn mass_of_box_and_image<T: Scalar>(
    base: &MixtureBase<T>,
    a: &HalfOpenBox<T>,
    g: &GroupElement<T>,
    b: &HalfOpenBox<T>,
) -> Result<f64> {
    if g.box_image(a).as_ref() == Some(a) && a.low().iter().all(|v| v.is_infinite()) {
        // A is the whole space, and H* is invariant: H*(gB) = H*(B)
        return Ok(base.eval_box(b)?.as_f64());
    }
    let image = g.box_image(b);
    let region = match &image {
        Some(img) => match img.intersection(a) {
            Some(r) => Some(r),
            None => return Ok(0.0),
        },
        None => {
            if !b.is_bounded() || !a.is_bounded() {
                return Err(Error::Unsupported("rotated unbounded boxes are not supported".into()));
            }
            if separated(a, g, b) {
                return Ok(0.0);
            }
            return Err(Error::Unsupported(
                "a rotated box overlaps another box; choose boxes whose orbits are separated".into(),
            ));
        }
    };
    let region = region.expect("intersection present");
    let p = base.p_cont().as_f64();
    let cont = base.continuous().eval_box(&region)?.as_f64();
    let emp = match base.empirical() {
        None => 0.0,
        // atoms x with x ∈ A and g⁻¹x ∈ B, computed without box-image rounding
        Some(EmpiricalPart::Atoms(m)) => discrete_mass_of_box_and_image(m, a, g, b),
        Some(EmpiricalPart::Orbits(o)) => o.eval_box(&region)?.as_f64(),
    };
    Ok(p * cont + (1.0 - p) * emp)
}

fn discrete_mass_of_box_and_image<T: Scalar>(
    m: &DiscreteMeasure<T>,
    a: &HalfOpenBox<T>,
    g: &GroupElement<T>,
    b: &HalfOpenBox<T>,
) -> f64 {
    let inv = g.inverse();
    stable_sum(
        m.atoms()
            .iter()
            .filter(|at| a.contains(&at.point) && b.contains(&inv.apply_unchecked(&at.point)))
            .map(|at| at.weight.as_f64()),
    )
}

/// True when `g(B)` and `A` provably share no volume.
fn separated<T: Scalar>(a: &HalfOpenBox<T>, g: &GroupElement<T>, b: &HalfOpenBox<T>) -> bool {
    if !g.image_bounding_box(b).overlaps(a) {
        return true;
    }
    if a.dim() != 2 {
        return false;
    }
    // separating-axis test against the rotated rectangle's edge normals
    let corners: Vec<[f64; 2]> = b
        .corners()
        .iter()
        .map(|c| {
            let y = g.apply_unchecked(c);
            [y.get(0).as_f64(), y.get(1).as_f64()]
        })
        .collect();
    let a_corners: Vec<[f64; 2]> = a
        .corners()
        .iter()
        .map(|c| [c.get(0).as_f64(), c.get(1).as_f64()])
        .collect();
    // corners are ordered (lo,lo), (hi,lo), (lo,hi), (hi,hi)
    let edges = [(corners[0], corners[1]), (corners[0], corners[2])];
    edges.iter().any(|(p, q)| {
        let n = [-(q[1] - p[1]), q[0] - p[0]];
        let proj = |pts: &[[f64; 2]]| {
            pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let d = v[0] * n[0] + v[1] * n[1];
                (lo.min(d), hi.max(d))
            })
        };
        let (alo, ahi) = proj(&a_corners);
        let (blo, bhi) = proj(&corners);
        ahi <= blo || bhi <= alo
    })
}

/// One compared moment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub statistic: String,
    pub box_i: usize,
    pub box_j: usize,
    pub analytic: f64,
    pub empirical: f64,
    pub mc_sigma: f64,
    pub z: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MomentCheck<T> {
    pub boxes: Vec<HalfOpenBox<T>>,
    pub reps: usize,
    pub z_threshold: f64,
    pub rows: Vec<MomentRow>,
}

impl<T: Scalar> MomentCheck<T> {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| !r.flagged)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("statistic,box_i,box_j,analytic,empirical,mc_sigma,z,flagged\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:?},{:?},{:?},{:?},{}",
                r.statistic, r.box_i, r.box_j, r.analytic, r.empirical, r.mc_sigma, r.z, r.flagged
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub const MOMENT_Z_THRESHOLD: f64 = 4.0;

fn z_score(diff: f64, sigma: f64) -> f64 {
    if diff.abs() <= 1e-12 && sigma <= 1e-12 {
        0.0
    } else if sigma == 0.0 {
        f64::INFINITY.copysign(diff)
    } else {
        diff / sigma
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Compares empirical box-mass moments from `reps` paths with
/// [`dip_moment_oracle`]; rows with `|z| > 4` are flagged.
pub fn check_moments<T: Scalar>(
    posterior: &DipPosterior<T>,
    boxes: &[HalfOpenBox<T>],
    reps: usize,
    sampler: PathSampler,
    seed: u64,
) -> Result<MomentCheck<T>> {
    check_moments_with(posterior, boxes, reps, sampler, seed, None)
}

pub fn check_moments_with<T: Scalar>(
    posterior: &DipPosterior<T>,
    boxes: &[HalfOpenBox<T>],
    reps: usize,
    sampler: PathSampler,
    seed: u64,
    distortion: Option<&WeightDistortion<T>>,
) -> Result<MomentCheck<T>> {
    if reps < 2 {
        return Err(Error::invalid("moment checks need at least two replicas"));
    }
    let oracle = dip_moment_oracle(posterior, boxes)?;
    let sample = finite_dim_sample_with(posterior, boxes, reps, sampler, seed, distortion)?;
    let n = reps as f64;
    let column = |i: usize| -> Vec<f64> { sample.iter().map(|r| r[i]).collect() };
    let mut rows = Vec::new();
    let mut push = |statistic: &str, i: usize, j: usize, analytic: f64, empirical: f64, sigma: f64| {
        let z = z_score(empirical - analytic, sigma);
        rows.push(MomentRow {
            statistic: statistic.into(),
            box_i: i,
            box_j: j,
            analytic,
            empirical,
            mc_sigma: sigma,
            z,
            flagged: !(z.abs() <= MOMENT_Z_THRESHOLD),
        });
    };
    for i in 0..boxes.len() {
        let col = column(i);
        let m = mean(&col);
        let dev2: Vec<f64> = col.iter().map(|x| (x - m).powi(2)).collect();
        let var = dev2.iter().sum::<f64>() / (n - 1.0);
        let m4 = col.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        push("mean", i, i, oracle.means[i], m, (var / n).sqrt());
        push(
            "var",
            i,
            i,
            oracle.variances[i],
            var,
            ((m4 - var * var).max(0.0) / n).sqrt(),
        );
    }
    for &(i, j, analytic) in &oracle.cross {
        let prod: Vec<f64> = sample.iter().map(|r| r[i] * r[j]).collect();
        let m = mean(&prod);
        let v = prod.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        push("cross", i, j, analytic, m, (v / n).sqrt());
    }
    Ok(MomentCheck {
        boxes: boxes.to_vec(),
        reps,
        z_threshold: MOMENT_Z_THRESHOLD,
        rows,
    })
}

/// Result of [`invariance_gap`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceGap {
    pub max_gap: f64,
    pub checked: usize,
    /// Boxes skipped because an atom image lies within the boundary buffer.
    pub skipped: Vec<usize>,
}

pub const BOUNDARY_BUFFER: f64 = 1e-9;

/// `max_{g, B} |P(B) − P(g⁻¹B)|` over boxes with no atom image near their
/// boundary.
pub fn invariance_gap<T: Scalar>(
    measure: &DiscreteMeasure<T>,
    group: &FiniteGroup<T>,
    boxes: &[HalfOpenBox<T>],
) -> Result<InvarianceGap> {
    Error::check_dim(group.dim(), measure.dim())?;
    let tol = T::lit(BOUNDARY_BUFFER);
    let mut max_gap = 0.0f64;
    let mut skipped = Vec::new();
    let mut checked = 0;
    'boxes: for (bi, b) in boxes.iter().enumerate() {
        Error::check_dim(group.dim(), b.dim())?;
        let mut per_g = Vec::with_capacity(group.order());
        for g in group.elements() {
            let mut mass = Vec::new();
            for a in measure.atoms() {
                let y = g.apply_unchecked(&a.point);
                if b.near_boundary(&y, tol) {
                    skipped.push(bi);
                    continue 'boxes;
                }
                if b.contains(&y) {
                    mass.push(a.weight);
                }
            }
            per_g.push(stable_sum(mass).as_f64());
        }
        checked += 1;
        let direct = per_g[0];
        for v in &per_g {
            max_gap = max_gap.max((v - direct).abs());
        }
    }
    Ok(InvarianceGap {
        max_gap,
        checked,
        skipped,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    K,
    M,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub level: usize,
    pub box_id: usize,
    pub statistic: String,
    pub value: f64,
    pub mc_sigma: f64,
}

/// Per-level distance statistics of a k- or m-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub sweep: SweepKind,
    pub levels: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl ConvergenceReport {
    pub fn values(&self, statistic: &str, box_id: usize) -> Vec<f64> {
        self.levels
            .iter()
            .map(|&l| {
                self.rows
                    .iter()
                    .find(|r| r.level == l && r.box_id == box_id && r.statistic == statistic)
                    .map_or(f64::NAN, |r| r.value)
            })
            .collect()
    }

    fn sigmas(&self, statistic: &str, box_id: usize) -> Vec<f64> {
        self.levels
            .iter()
            .map(|&l| {
                self.rows
                    .iter()
                    .find(|r| r.level == l && r.box_id == box_id && r.statistic == statistic)
                    .map_or(0.0, |r| r.mc_sigma)
            })
            .collect()
    }

    pub fn box_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.rows.iter().map(|r| r.box_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// True when `statistic` never rises between consecutive levels by more
    /// than `n_sigma` combined standard errors, for every box.
    pub fn non_increasing(&self, statistic: &str, n_sigma: f64) -> bool {
        self.box_ids().into_iter().all(|id| {
            let v = self.values(statistic, id);
            let s = self.sigmas(statistic, id);
            (1..v.len()).all(|i| v[i] <= v[i - 1] + n_sigma * (s[i] * s[i] + s[i - 1] * s[i - 1]).sqrt())
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,box_id,statistic,value,mc_sigma\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:?},{:?}",
                r.level, r.box_id, r.statistic, r.value, r.mc_sigma
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::invalid("at least one level is required"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("levels must be strictly increasing"));
    }
    Ok(())
}

/// KS scale `sqrt((n+m)/(nm))` of the two-sample statistic.
fn ks_sigma(n: usize, m: usize) -> f64 {
    ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Compares `k`-group posteriors with the rotation-limit posterior.
///
/// For each level: `base_gap = |H*_{k,m}(B) − H*_m(B)|` (exact, zero MC
/// error) and, when `reps > 0`, the KS distance between sampled `P(B)` under
/// both posteriors.
#[allow(clippy::too_many_arguments)]
pub fn sweep_k<T: Scalar>(
    alpha: T,
    h: BaseMeasure<T>,
    data: &[Point<T>],
    k_levels: &[usize],
    boxes: &[HalfOpenBox<T>],
    reps: usize,
    sampler: PathSampler,
    seed: u64,
) -> Result<ConvergenceReport> {
    check_levels(k_levels)?;
    let limit = fit_limit_with(alpha, h, data, DEFAULT_K_SYM)?;
    let limit_h: Vec<f64> = boxes
        .iter()
        .map(|b| limit.base().eval_box(b).map(|v| v.as_f64()))
        .collect::<Result<_>>()?;
    let limit_sample = if reps > 0 {
        Some(finite_dim_sample(&limit, boxes, reps, sampler, derive_seed(seed, 0))?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for (li, &k) in k_levels.iter().enumerate() {
        let post = fit(alpha, h, data, &make_cyclic_group_2d(k)?)?;
        let level_sample = match reps {
            0 => None,
            _ => Some(finite_dim_sample(
                &post,
                boxes,
                reps,
                sampler,
                derive_seed(seed, 1 + li as u64),
            )?),
        };
        for (bi, b) in boxes.iter().enumerate() {
            let gap = (post.base().eval_box(b)?.as_f64() - limit_h[bi]).abs();
            rows.push(ReportRow {
                level: k,
                box_id: bi,
                statistic: "base_gap".into(),
                value: gap,
                mc_sigma: 0.0,
            });
            if let (Some(ls), Some(lim)) = (&level_sample, &limit_sample) {
                let a: Vec<f64> = ls.iter().map(|r| r[bi]).collect();
                let c: Vec<f64> = lim.iter().map(|r| r[bi]).collect();
                rows.push(ReportRow {
                    level: k,
                    box_id: bi,
                    statistic: "ks".into(),
                    value: ks_distance(&a, &c),
                    mc_sigma: ks_sigma(reps, reps),
                });
            }
        }
    }
    Ok(ConvergenceReport {
        sweep: SweepKind::K,
        levels: k_levels.to_vec(),
        reps,
        seed,
        rows,
    })
}

/// Regular grid of `cells^dim` boxes covering `[-half_width, half_width]^dim`.
pub fn box_grid<T: Scalar>(dim: usize, half_width: f64, cells: usize) -> Result<Vec<HalfOpenBox<T>>> {
    if cells == 0 || !(half_width > 0.0) {
        return Err(Error::invalid("grid needs positive width and at least one cell"));
    }
    let step = 2.0 * half_width / cells as f64;
    let edges: Vec<f64> = (0..=cells).map(|i| -half_width + step * i as f64).collect();
    let mut out = Vec::new();
    let total = cells.pow(dim as u32);
    for mut idx in 0..total {
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for _ in 0..dim {
            let c = idx % cells;
            idx /= cells;
            lo.push(T::lit(edges[c]));
            hi.push(T::lit(edges[c + 1]));
        }
        out.push(HalfOpenBox::new(&lo, &hi)?);
    }
    Ok(out)
}

/// Fits with either a finite group or the rotation limit.
pub fn fit_with_group<T: Scalar>(
    alpha: T,
    h: BaseMeasure<T>,
    data: &[Point<T>],
    group: &PosteriorGroup<T>,
) -> Result<DipPosterior<T>> {
    match group {
        PosteriorGroup::Finite(g) => fit(alpha, h, data, g),
        PosteriorGroup::RotationLimit { k_sym, .. } => fit_limit_with(alpha, h, data, *k_sym),
    }
}

/// For each sample size `m`, draws data from `truth`, fits, and reports
/// `sup_B |H*(B) − F_true(B)|` over `boxes` (row `box_id` is the argmax).
#[allow(clippy::too_many_arguments)]
pub fn sweep_m<T: Scalar>(
    truth: BaseMeasure<T>,
    alpha: T,
    h: BaseMeasure<T>,
    group: &PosteriorGroup<T>,
    m_levels: &[usize],
    boxes: &[HalfOpenBox<T>],
    seed: u64,
) -> Result<ConvergenceReport> {
    check_levels(m_levels)?;
    if boxes.is_empty() {
        return Err(Error::invalid("at least one box is required"));
    }
    Error::check_dim(Measure::dim(&truth), Measure::dim(&h))?;
    let truth_mass: Vec<f64> = boxes
        .iter()
        .map(|b| truth.eval_box(b).map(|v| v.as_f64()))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (li, &m) in m_levels.iter().enumerate() {
        let mut rng = replica_rng(derive_seed(seed, li as u64), 0);
        let data = truth.sample(m, &mut rng);
        let post = fit_with_group(alpha, h, &data, group)?;
        let mut best = (0usize, -1.0f64);
        for (bi, b) in boxes.iter().enumerate() {
            let gap = (post.base().eval_box(b)?.as_f64() - truth_mass[bi]).abs();
            if gap > best.1 {
                best = (bi, gap);
            }
        }
        rows.push(ReportRow {
            level: m,
            box_id: best.0,
            statistic: "sup_gap".into(),
            value: best.1,
            mc_sigma: 0.0,
        });
    }
    Ok(ConvergenceReport {
        sweep: SweepKind::M,
        levels: m_levels.to_vec(),
        reps: 0,
        seed,
        rows,
    })
}

/// Uniformly random boxes inside `[-half_width, half_width]^dim` with no atom
/// image of `measure` under `group` within the boundary buffer.
pub fn boundary_safe_boxes<T: Scalar, R: Rng + ?Sized>(
    measure: &DiscreteMeasure<T>,
    group: &FiniteGroup<T>,
    count: usize,
    half_width: f64,
    rng: &mut R,
) -> Vec<HalfOpenBox<T>> {
    let tol = T::lit(BOUNDARY_BUFFER);
    let images: Vec<Point<T>> = measure
        .atoms()
        .iter()
        .flat_map(|a| group.elements().iter().map(move |g| g.apply_unchecked(&a.point)))
        .collect();
    let dim = measure.dim();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for _ in 0..dim {
            let a = half_width * (2.0 * rng.gen::<f64>() - 1.0);
            let b = half_width * (2.0 * rng.gen::<f64>() - 1.0);
            lo.push(T::lit(a.min(b)));
            hi.push(T::lit(a.max(b)));
        }
        if let Ok(b) = HalfOpenBox::new(&lo, &hi) {
            if !images.iter().any(|p| b.near_boundary(p, tol)) {
                out.push(b);
            }
        }
    }
    out
}

/// Orbit mass the limit base puts on a box, per datum: the arc fraction of
/// the circle through the datum.
pub fn orbit_mass<T: Scalar>(x: &Point<T>, b: &HalfOpenBox<T>) -> T {
    arc_fraction(x.norm(), b)
}
