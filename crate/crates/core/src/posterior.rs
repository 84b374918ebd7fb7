//! Dirichlet invariant process posteriors.
//!
//! For a finite group `G = {g_1, …, g_k}` and data `X_1, …, X_m` the posterior
//! has concentration `α + m` and base
//! `(α·H + (1/k) Σ_i Σ_j δ_{g_j(X_i)}) / (α + m)`. As the order of the planar
//! rotation group grows, the orbit atoms of each datum spread uniformly over
//! the circle through it; [`fit_limit`] builds that limit directly.
//!
//! Paths are sampled as a Dirichlet process path with the posterior
//! parameters followed by orbit symmetrization, which makes every sampled
//! path exactly invariant under the group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{check_alpha, dp_raw, finite_n_raw, DPParams, PathSampler, RawPath, TruncatedPath};
use crate::error::{Error, Result};
use crate::geometry::{HalfOpenBox, Point};
use crate::measures::{
    estimate_preimage, orbit_symmetrize_measure, symmetrized_empirical, Atom, BaseMeasure, DiscreteMeasure,
    EmpiricalPart, Measure, MixtureBase,
};
use crate::scalar::Scalar;
use crate::symmetry::{
    make_cyclic_group_2d, make_cyclic_group_3d, make_reflection_group, FiniteGroup, GroupElement, GroupSpec,
};

/// Default number of equally spaced copies used to discretize full orbits.
pub const DEFAULT_K_SYM: usize = 360;

const INVARIANCE_BOXES: usize = 64;
const INVARIANCE_MC_SAMPLES: usize = 20_000;
const INVARIANCE_SEED: u64 = 0x5eed_1a7a;

/// Uniform mixture over the data of the law of `A_Θ X_i`, `Θ ~ U[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitOrbitSampler<T> {
    data: Vec<Point<T>>,
}

impl<T: Scalar> LimitOrbitSampler<T> {
    pub fn new(data: Vec<Point<T>>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("orbit sampler needs data"));
        }
        for x in &data {
            Error::check_dim(2, x.dim())?;
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &[Point<T>] {
        &self.data
    }
}

/// Fraction of the circle of radius `r` about the origin lying in `b`.
pub fn arc_fraction<T: Scalar>(r: T, b: &HalfOpenBox<T>) -> T {
    let r = r.as_f64();
    let (x0, y0) = (b.low()[0].as_f64(), b.low()[1].as_f64());
    let (x1, y1) = (b.high()[0].as_f64(), b.high()[1].as_f64());
    if r == 0.0 {
        let inside = x0 < 0.0 && 0.0 <= x1 && y0 < 0.0 && 0.0 <= y1;
        return if inside { T::one() } else { T::zero() };
    }
    let tau = std::f64::consts::TAU;
    let mut cuts = vec![0.0, tau];
    let mut push = |a: f64| cuts.push(a.rem_euclid(tau));
    for x in [x0, x1] {
        if x.is_finite() && x.abs() <= r {
            let a = (x / r).acos();
            push(a);
            push(-a);
        }
    }
    for y in [y0, y1] {
        if y.is_finite() && y.abs() <= r {
            let a = (y / r).asin();
            push(a);
            push(std::f64::consts::PI - a);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
    let mut inside = 0.0;
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let (s, c) = mid.sin_cos();
        let (px, py) = (r * c, r * s);
        if x0 < px && px <= x1 && y0 < py && py <= y1 {
            inside += len;
        }
    }
    T::lit((inside / tau).clamp(0.0, 1.0))
}

impl<T: Scalar> Measure<T> for LimitOrbitSampler<T> {
    fn dim(&self) -> usize {
        2
    }

    fn eval_box(&self, b: &HalfOpenBox<T>) -> Result<T> {
        Error::check_dim(2, b.dim())?;
        let total = crate::scalar::stable_sum(self.data.iter().map(|x| arc_fraction(x.norm(), b)));
        Ok(total / T::from_usize_lossy(self.data.len()))
    }

    /// One uniform picks the datum, a second gives `Θ`.
    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<T> {
        let i = ((rng.gen::<f64>() * self.data.len() as f64) as usize).min(self.data.len() - 1);
        let theta = std::f64::consts::TAU * rng.gen::<f64>();
        let (s, c) = theta.sin_cos();
        let (s, c) = (T::lit(s), T::lit(c));
        let x = &self.data[i];
        let (a, b) = (x.get(0), x.get(1));
        Point::from_slice_unchecked(&[c * a - s * b, s * a + c * b])
    }
}

/// Symmetry of a posterior: a finite group, or the full rotation group of
/// the plane discretized by `k_sym` equally spaced rotations for sampling.
#[derive(Clone, Debug, PartialEq)]
pub enum PosteriorGroup<T> {
    Finite(FiniteGroup<T>),
    RotationLimit {
        k_sym: usize,
        discretization: FiniteGroup<T>,
    },
}

impl<T: Scalar> PosteriorGroup<T> {
    pub fn rotation_limit(k_sym: usize) -> Result<Self> {
        Ok(PosteriorGroup::RotationLimit {
            k_sym,
            discretization: make_cyclic_group_2d(k_sym)?,
        })
    }

    /// The finite group used to symmetrize sampled paths.
    pub fn path_group(&self) -> &FiniteGroup<T> {
        match self {
            PosteriorGroup::Finite(g) => g,
            PosteriorGroup::RotationLimit { discretization, .. } => discretization,
        }
    }

    pub fn dim(&self) -> usize {
        self.path_group().dim()
    }

    pub fn is_limit(&self) -> bool {
        matches!(self, PosteriorGroup::RotationLimit { .. })
    }
}

/// Posterior law `DIP(α*, H*)` together with the data it was fitted to.
#[derive(Clone, Debug, PartialEq)]
pub struct DipPosterior<T> {
    alpha: T,
    alpha_star: T,
    group: PosteriorGroup<T>,
    base: MixtureBase<T>,
    data: Vec<Point<T>>,
    warnings: Vec<String>,
}

impl<T: Scalar> DipPosterior<T> {
    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn alpha_star(&self) -> T {
        self.alpha_star
    }

    pub fn p_cont(&self) -> T {
        self.base.p_cont()
    }

    pub fn group(&self) -> &PosteriorGroup<T> {
        &self.group
    }

    pub fn base(&self) -> &MixtureBase<T> {
        &self.base
    }

    pub fn data(&self) -> &[Point<T>] {
        &self.data
    }

    /// Diagnostics recorded during fitting, such as a failed invariance check.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn dp_params(&self) -> DPParams<T> {
        DPParams {
            alpha: self.alpha_star,
            base: self.base.clone(),
        }
    }

    /// Number of atoms in the discrete part of the base (0 without data).
    pub fn atom_count(&self) -> usize {
        self.base.discrete().map_or(0, |d| d.len())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PosteriorRepr::from_posterior(self)?)?)
    }

    /// Rebuilds the posterior from its JSON snapshot by refitting.
    pub fn from_json(s: &str) -> Result<Self> {
        let repr: PosteriorRepr<T> = serde_json::from_str(s)?;
        repr.into_posterior()
    }
}

fn check_data<T: Scalar>(data: &[Point<T>], dim: usize) -> Result<()> {
    for x in data {
        Error::check_dim(dim, x.dim())?;
    }
    Ok(())
}

/// Finite-group posterior: `α* = α + m`, base `p·H + (1 − p)·F^G_m` with
/// `p = α/(α+m)` and `F^G_m` the orbit-symmetrized empirical measure.
pub fn fit<T: Scalar>(
    alpha: T,
    h: BaseMeasure<T>,
    data: &[Point<T>],
    group: &FiniteGroup<T>,
) -> Result<DipPosterior<T>> {
    check_alpha(alpha)?;
    h.validate()?;
    Error::check_dim(group.dim(), Measure::dim(&h))?;
    check_data(data, group.dim())?;
    let warnings = invariance_warnings(&h, group);
    let (alpha_star, base) = if data.is_empty() {
        (alpha, MixtureBase::pure(h))
    } else {
        let alpha_star = alpha + T::from_usize_lossy(data.len());
        let emp = symmetrized_empirical(group, data)?;
        (
            alpha_star,
            MixtureBase::new(alpha / alpha_star, h, Some(EmpiricalPart::Atoms(emp)))?,
        )
    };
    Ok(DipPosterior {
        alpha,
        alpha_star,
        group: PosteriorGroup::Finite(group.clone()),
        base,
        data: data.to_vec(),
        warnings,
    })
}

/// Posterior under `{x, 2μ − x}` for real-valued data.
pub fn fit_univariate_symmetric<T: Scalar>(alpha: T, h: BaseMeasure<T>, data: &[T], mu: T) -> Result<DipPosterior<T>> {
    let group = make_reflection_group(mu)?;
    let pts = data.iter().map(|&x| Point::scalar(x)).collect::<Result<Vec<_>>>()?;
    fit(alpha, h, &pts, &group)
}

/// Limit posterior under the full rotation group of the plane.
pub fn fit_limit<T: Scalar>(alpha: T, h: BaseMeasure<T>, data: &[Point<T>]) -> Result<DipPosterior<T>> {
    fit_limit_with(alpha, h, data, DEFAULT_K_SYM)
}

/// [`fit_limit`] with a custom number of orbit copies for path sampling.
pub fn fit_limit_with<T: Scalar>(
    alpha: T,
    h: BaseMeasure<T>,
    data: &[Point<T>],
    k_sym: usize,
) -> Result<DipPosterior<T>> {
    check_alpha(alpha)?;
    h.validate()?;
    Error::check_dim(2, Measure::dim(&h))?;
    check_data(data, 2)?;
    let group = PosteriorGroup::rotation_limit(k_sym)?;
    let warnings = invariance_warnings(&h, group.path_group());
    let (alpha_star, base) = if data.is_empty() {
        (alpha, MixtureBase::pure(h))
    } else {
        let alpha_star = alpha + T::from_usize_lossy(data.len());
        let orbits = LimitOrbitSampler::new(data.to_vec())?;
        (
            alpha_star,
            MixtureBase::new(alpha / alpha_star, h, Some(EmpiricalPart::Orbits(orbits)))?,
        )
    };
    Ok(DipPosterior {
        alpha,
        alpha_star,
        group,
        base,
        data: data.to_vec(),
        warnings,
    })
}

/// Deterministic spot check that `H(g⁻¹B) = H(B)` on 64 random boxes.
///
/// Box images that are boxes (reflections, quarter turns) are compared
/// exactly. Other rotations are estimated by Monte Carlo and the box
/// z-scores are pooled into a chi-square statistic, flagged when it sits
/// more than three standard errors above its null mean.
pub fn invariance_warnings<T: Scalar>(h: &BaseMeasure<T>, group: &FiniteGroup<T>) -> Vec<String> {
    if group.order() < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(INVARIANCE_SEED);
    let (center, scale) = probe_window(h);
    let dim = group.dim();
    let mut exact_worst = 0.0f64;
    let mut chi2 = 0.0f64;
    let mut mc_boxes = 0usize;
    for i in 0..INVARIANCE_BOXES {
        let b = random_box(&mut rng, dim, &center, scale);
        let g = &group.elements()[1 + i % (group.order() - 1)];
        let target = h.eval_box(&b).expect("dims checked").as_f64();
        match g.inverse().box_image(&b) {
            Some(pre) => {
                let v = h.eval_box(&pre).expect("dims checked").as_f64();
                exact_worst = exact_worst.max((v - target).abs());
            }
            None => {
                let est = estimate_preimage(h, g, &b, INVARIANCE_MC_SAMPLES, &mut rng);
                let se = (target * (1.0 - target) / est.samples as f64)
                    .sqrt()
                    .max(0.5 / est.samples as f64);
                chi2 += ((est.value - target) / se).powi(2);
                mc_boxes += 1;
            }
        }
    }
    let mut warnings = Vec::new();
    if exact_worst > 1e-9 {
        warnings.push(format!(
            "base measure {} is not invariant under the group: box mass changes by {exact_worst:.3e}",
            h.name()
        ));
    }
    if mc_boxes > 0 {
        let df = mc_boxes as f64;
        let z = (chi2 - df) / (2.0 * df).sqrt();
        if z > 3.0 {
            warnings.push(format!(
                "base measure {} failed the Monte Carlo invariance check (pooled z = {z:.2})",
                h.name()
            ));
        }
    }
    warnings
}

fn probe_window<T: Scalar>(h: &BaseMeasure<T>) -> (Vec<f64>, f64) {
    match *h {
        BaseMeasure::Gauss1d { mu, sigma } => (vec![mu.as_f64()], 2.5 * sigma.as_f64()),
        BaseMeasure::Gauss2d { sigma } => (vec![0.0; 2], 2.5 * sigma.as_f64()),
        BaseMeasure::Gauss3d { sigma } => (vec![0.0; 3], 2.5 * sigma.as_f64()),
        BaseMeasure::Disk { radius } => (vec![0.0; 2], radius.as_f64()),
        BaseMeasure::Square => (vec![0.0; 2], 1.0),
    }
}

fn random_box<T: Scalar, R: Rng + ?Sized>(rng: &mut R, dim: usize, center: &[f64], scale: f64) -> HalfOpenBox<T> {
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for c in center.iter().take(dim) {
        let a = c + scale * (2.0 * rng.gen::<f64>() - 1.0);
        let w = scale * (0.2 + 0.8 * rng.gen::<f64>());
        lo.push(T::lit(a - 0.5 * w));
        hi.push(T::lit(a + 0.5 * w));
    }
    HalfOpenBox::new(&lo, &hi).expect("positive widths")
}

fn symmetrize_raw<T: Scalar>(raw: RawPath<T>, group: &FiniteGroup<T>) -> Result<TruncatedPath<T>> {
    let mut path = raw.into_path();
    path.measure = orbit_symmetrize_measure(group, &path.measure)?;
    path.symmetry_order = Some(group.order());
    Ok(path)
}

/// Draws a DP path with the posterior parameters, then orbit-symmetrizes it
/// with the posterior's group (or its `k_sym` discretization in the limit).
pub fn sample_path<T: Scalar, R: Rng + ?Sized>(
    posterior: &DipPosterior<T>,
    sampler: PathSampler,
    rng: &mut R,
) -> Result<TruncatedPath<T>> {
    sampler.validate()?;
    let raw = dp_raw(&posterior.dp_params(), sampler, rng)?;
    symmetrize_raw(raw, posterior.group.path_group())
}

/// Box masses `P(B_1), …, P(B_n)` of one sampled path, computed without
/// materializing the symmetrized atoms. Consumes the generator exactly like
/// [`sample_path`].
pub fn sample_path_box_masses<T: Scalar, R: Rng + ?Sized>(
    posterior: &DipPosterior<T>,
    sampler: PathSampler,
    boxes: &[HalfOpenBox<T>],
    rng: &mut R,
) -> Result<Vec<f64>> {
    sampler.validate()?;
    for b in boxes {
        Error::check_dim(posterior.group.dim(), b.dim())?;
    }
    let raw = dp_raw(&posterior.dp_params(), sampler, rng)?;
    Ok(symmetrized_masses(&raw, posterior.group.path_group().elements(), boxes))
}

pub(crate) fn symmetrized_masses<T: Scalar>(
    raw: &RawPath<T>,
    elements: &[GroupElement<T>],
    boxes: &[HalfOpenBox<T>],
) -> Vec<f64> {
    let total: f64 = raw.weights.iter().sum();
    let k = elements.len() as f64;
    let mut masses = vec![0.0; boxes.len()];
    for (x, &w) in raw.atoms.iter().zip(&raw.weights) {
        if w == 0.0 {
            continue;
        }
        let mut counts = vec![0usize; boxes.len()];
        for g in elements {
            let y = g.apply_unchecked(x);
            for (c, b) in counts.iter_mut().zip(boxes) {
                if b.contains(&y) {
                    *c += 1;
                }
            }
        }
        for (m, c) in masses.iter_mut().zip(counts) {
            *m += w * c as f64 / k;
        }
    }
    masses.into_iter().map(|m| m / total).collect()
}

/// The five-step construction for planar data: angle grid, rotated data,
/// equal-weight empirical measure, `N` draws from the posterior base,
/// Dirichlet weights; the path is then orbit-symmetrized.
pub fn five_step_sample<T: Scalar, R: Rng + ?Sized>(
    alpha: T,
    h: BaseMeasure<T>,
    data: &[Point<T>],
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<TruncatedPath<T>> {
    check_alpha(alpha)?;
    check_data(data, 2)?;
    Error::check_dim(2, Measure::dim(&h))?;
    // angle grid θ_j = 2πj/k
    let group = make_cyclic_group_2d::<T>(k)?;
    let m = data.len();
    let (alpha_star, base) = if m == 0 {
        (alpha, MixtureBase::pure(h))
    } else {
        // A_{θ_j} X_i, each with weight 1/(km)
        let w = T::one() / T::from_usize_lossy(k * m);
        let mut atoms = Vec::with_capacity(k * m);
        for x in data {
            for g in group.elements() {
                atoms.push(Atom {
                    point: g.apply_unchecked(x),
                    weight: w,
                });
            }
        }
        let emp = DiscreteMeasure::new(atoms)?;
        let alpha_star = alpha + T::from_usize_lossy(m);
        (
            alpha_star,
            MixtureBase::new(alpha / alpha_star, h, Some(EmpiricalPart::Atoms(emp)))?,
        )
    };
    // N draws from H*_{k,m}, then Dirichlet(α*/N, …) weights
    let raw = finite_n_raw(alpha_star.as_f64(), &base, n, rng)?;
    symmetrize_raw(raw, &group)
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct GroupRepr<T> {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<[T; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_sym: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct PosteriorRepr<T> {
    alpha: T,
    alpha_star: T,
    p_cont: T,
    group: GroupRepr<T>,
    base_continuous: BaseMeasure<T>,
    data: Vec<Point<T>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

impl<T: Scalar> PosteriorRepr<T> {
    fn from_posterior(p: &DipPosterior<T>) -> Result<Self> {
        let group = match &p.group {
            PosteriorGroup::RotationLimit { k_sym, .. } => GroupRepr {
                kind: "limit".into(),
                k: None,
                mu: None,
                axis: None,
                k_sym: Some(*k_sym),
            },
            PosteriorGroup::Finite(g) => match g.spec() {
                GroupSpec::Cyclic2d { k } => GroupRepr {
                    kind: "cyclic2d".into(),
                    k: Some(*k),
                    mu: None,
                    axis: None,
                    k_sym: None,
                },
                GroupSpec::Reflection { mu } => GroupRepr {
                    kind: "reflection".into(),
                    k: Some(2),
                    mu: Some(*mu),
                    axis: None,
                    k_sym: None,
                },
                GroupSpec::Cyclic3d { k, axis } => GroupRepr {
                    kind: "cyclic3d".into(),
                    k: Some(*k),
                    mu: None,
                    axis: Some(*axis),
                    k_sym: None,
                },
                GroupSpec::Custom { .. } => {
                    return Err(Error::Unsupported(
                        "groups built from explicit elements cannot be serialized".into(),
                    ))
                }
            },
        };
        Ok(Self {
            alpha: p.alpha,
            alpha_star: p.alpha_star,
            p_cont: p.p_cont(),
            group,
            base_continuous: *p.base.continuous(),
            data: p.data.clone(),
            warnings: p.warnings.clone(),
        })
    }

    fn into_posterior(self) -> Result<DipPosterior<T>> {
        let need =
            |v: Option<usize>, what: &str| v.ok_or_else(|| Error::Serialization(format!("group is missing {what}")));
        let posterior = match self.group.kind.as_str() {
            "cyclic2d" => fit(
                self.alpha,
                self.base_continuous,
                &self.data,
                &make_cyclic_group_2d(need(self.group.k, "k")?)?,
            )?,
            "reflection" => {
                let mu = self
                    .group
                    .mu
                    .ok_or_else(|| Error::Serialization("reflection group is missing mu".into()))?;
                fit(
                    self.alpha,
                    self.base_continuous,
                    &self.data,
                    &make_reflection_group(mu)?,
                )?
            }
            "cyclic3d" => {
                let axis = self
                    .group
                    .axis
                    .ok_or_else(|| Error::Serialization("cyclic3d group is missing axis".into()))?;
                fit(
                    self.alpha,
                    self.base_continuous,
                    &self.data,
                    &make_cyclic_group_3d(need(self.group.k, "k")?, axis)?,
                )?
            }
            "limit" => fit_limit_with(
                self.alpha,
                self.base_continuous,
                &self.data,
                self.group.k_sym.unwrap_or(DEFAULT_K_SYM),
            )?,
            other => return Err(Error::Serialization(format!("unknown group kind {other:?}"))),
        };
        if posterior.alpha_star != self.alpha_star || posterior.p_cont() != self.p_cont {
            return Err(Error::Serialization(
                "alpha_star / p_cont do not match the stored alpha and data".into(),
            ));
        }
        Ok(posterior)
    }
}
