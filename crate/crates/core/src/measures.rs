//! Probability measures evaluated on half-open boxes.
//!
//! [`DiscreteMeasure`] holds weighted atoms, [`BaseMeasure`] is one of a few
//! continuous laws with closed-form box probabilities, and [`MixtureBase`] is
//! the convex combination `p·H + (1 − p)·F` that a posterior base measure
//! takes. Every type implements [`Measure`].

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{HalfOpenBox, Point};
use crate::posterior::LimitOrbitSampler;
use crate::scalar::{stable_sum, Scalar};
use crate::symmetry::{orbit, FiniteGroup, GroupElement};

/// Default sample count for Monte Carlo box estimates.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Tolerance used when merging coincident atoms.
pub const MERGE_TOL: f64 = 1e-12;

pub trait Measure<T: Scalar> {
    fn dim(&self) -> usize;

    /// Exact mass of a box.
    fn eval_box(&self, b: &HalfOpenBox<T>) -> Result<T>;

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<T>;

    /// `n` independent draws.
    fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Point<T>> {
        (0..n).map(|_| self.sample_point(rng)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Atom<T> {
    pub point: Point<T>,
    pub weight: T,
}

/// Finitely many weighted atoms with weights summing to one.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure<T> {
    dim: usize,
    atoms: Vec<Atom<T>>,
    cdf: Vec<f64>,
}

impl<T: PartialEq> PartialEq for DiscreteMeasure<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.atoms == other.atoms
    }
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        let dim = validate_atoms(&atoms)?;
        let total = stable_sum(atoms.iter().map(|a| a.weight));
        if (total - T::one()).abs() > T::weight_tol() {
            return Err(Error::invalid(format!("atom weights sum to {total}, not 1")));
        }
        Ok(Self::build(dim, atoms))
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(mut atoms: Vec<Atom<T>>) -> Result<Self> {
        let dim = validate_atoms(&atoms)?;
        let total = stable_sum(atoms.iter().map(|a| a.weight));
        if total <= T::zero() {
            return Err(Error::invalid("total weight must be positive"));
        }
        for a in &mut atoms {
            a.weight = a.weight / total;
        }
        Ok(Self::build(dim, atoms))
    }

    /// Equal weight `1/n` on each point.
    pub fn uniform(points: Vec<Point<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("need at least one point"));
        }
        let w = T::one() / T::from_usize_lossy(points.len());
        Self::new(points.into_iter().map(|point| Atom { point, weight: w }).collect())
    }

    pub fn dirac(x: Point<T>) -> Self {
        Self::build(
            x.dim(),
            vec![Atom {
                point: x,
                weight: T::one(),
            }],
        )
    }

    fn build(dim: usize, atoms: Vec<Atom<T>>) -> Self {
        let mut acc = 0.0;
        let cdf = atoms
            .iter()
            .map(|a| {
                acc += a.weight.as_f64();
                acc
            })
            .collect();
        Self { dim, atoms, cdf }
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> T {
        stable_sum(self.atoms.iter().map(|a| a.weight))
    }

    /// Merges atoms closer than [`MERGE_TOL`] in every coordinate, sorting
    /// the result lexicographically.
    pub fn merge_duplicates(&self) -> Self {
        let tol = T::lit(MERGE_TOL);
        let mut sorted = self.atoms.clone();
        sorted.sort_by(|a, b| a.point.lex_cmp(&b.point));
        let mut merged: Vec<Atom<T>> = Vec::with_capacity(sorted.len());
        for a in sorted {
            match merged
                .iter_mut()
                .rev()
                .take_while(|m| (m.point.get(0) - a.point.get(0)).abs() <= tol)
                .find(|m| m.point.approx_eq(&a.point, tol))
            {
                Some(m) => m.weight = m.weight + a.weight,
                None => merged.push(a),
            }
        }
        Self::build(self.dim, merged)
    }

    /// Mass of the set `{x : g(x) ∈ B}`, i.e. the measure of `g⁻¹B`.
    pub fn eval_preimage(&self, g: &GroupElement<T>, b: &HalfOpenBox<T>) -> Result<T> {
        Error::check_dim(self.dim, b.dim())?;
        Error::check_dim(self.dim, g.dim())?;
        Ok(stable_sum(
            self.atoms
                .iter()
                .filter(|a| b.contains(&g.apply_unchecked(&a.point)))
                .map(|a| a.weight),
        ))
    }

    pub fn mean(&self) -> Vec<T> {
        (0..self.dim)
            .map(|i| stable_sum(self.atoms.iter().map(|a| a.weight * a.point.get(i))))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub(crate) fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("nonempty");
        let u = rng.gen::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.atoms.len() - 1)
    }
}

fn validate_atoms<T: Scalar>(atoms: &[Atom<T>]) -> Result<usize> {
    let first = atoms
        .first()
        .ok_or_else(|| Error::invalid("a discrete measure needs at least one atom"))?;
    let dim = first.point.dim();
    for a in atoms {
        Error::check_dim(dim, a.point.dim())?;
        if !(a.weight.is_finite() && a.weight >= T::zero()) {
            return Err(Error::invalid(format!("invalid atom weight {}", a.weight)));
        }
    }
    Ok(dim)
}

impl<T: Scalar> Measure<T> for DiscreteMeasure<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_box(&self, b: &HalfOpenBox<T>) -> Result<T> {
        Error::check_dim(self.dim, b.dim())?;
        Ok(stable_sum(
            self.atoms.iter().filter(|a| b.contains(&a.point)).map(|a| a.weight),
        ))
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<T> {
        self.atoms[self.sample_index(rng)].point
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct DiscreteRepr<T> {
    dim: usize,
    atoms: Vec<Atom<T>>,
}

impl<T: Scalar> Serialize for DiscreteMeasure<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DiscreteRepr {
            dim: self.dim,
            atoms: self.atoms.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for DiscreteMeasure<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = DiscreteRepr::<T>::deserialize(deserializer)?;
        let m = DiscreteMeasure::new(r.atoms).map_err(serde::de::Error::custom)?;
        if m.dim != r.dim {
            return Err(serde::de::Error::custom("declared dim does not match atoms"));
        }
        Ok(m)
    }
}

/// Continuous base laws with closed-form box probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseMeasure<T> {
    /// N(0, σ²I) on R².
    Gauss2d { sigma: T },
    /// Uniform on the disk of the given radius centered at the origin.
    Disk { radius: T },
    /// Uniform on (0,1]².
    Square,
    /// N(μ, σ²) on R.
    Gauss1d { mu: T, sigma: T },
    /// N(0, σ²I) on R³.
    Gauss3d { sigma: T },
}

impl<T: Scalar> BaseMeasure<T> {
    pub fn gauss2d(sigma: T) -> Result<Self> {
        check_scale(sigma, "sigma")?;
        Ok(Self::Gauss2d { sigma })
    }

    pub fn disk(radius: T) -> Result<Self> {
        check_scale(radius, "radius")?;
        Ok(Self::Disk { radius })
    }

    pub fn gauss1d(mu: T, sigma: T) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu must be finite"));
        }
        check_scale(sigma, "sigma")?;
        Ok(Self::Gauss1d { mu, sigma })
    }

    pub fn gauss3d(sigma: T) -> Result<Self> {
        check_scale(sigma, "sigma")?;
        Ok(Self::Gauss3d { sigma })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gauss2d { sigma } | Self::Gauss3d { sigma } => check_scale(sigma, "sigma"),
            Self::Disk { radius } => check_scale(radius, "radius"),
            Self::Square => Ok(()),
            Self::Gauss1d { mu, sigma } => Self::gauss1d(mu, sigma).map(|_| ()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gauss2d { .. } => "gauss2d",
            Self::Disk { .. } => "disk",
            Self::Square => "square",
            Self::Gauss1d { .. } => "gauss1d",
            Self::Gauss3d { .. } => "gauss3d",
        }
    }
}

fn check_scale<T: Scalar>(v: T, name: &str) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite")))
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-z / SQRT_2)
    }
}

fn gauss_interval(lo: f64, hi: f64, mu: f64, sigma: f64) -> f64 {
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    // upper tail differences lose less precision on the positive side
    if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// Area of `{x² + y² ≤ r², x ≤ a, y ≤ b}`.
fn disk_corner_area(r: f64, a: f64, b: f64) -> f64 {
    let a = a.clamp(-r, r);
    let b = b.clamp(-r, r);
    let s = |x: f64| (r * r - x * x).max(0.0).sqrt();
    let prim = |x: f64| 0.5 * (x * s(x) + r * r * (x / r).clamp(-1.0, 1.0).asin());
    let chord = |lo: f64, hi: f64| {
        let hi = hi.min(a);
        if hi <= lo {
            0.0
        } else {
            prim(hi) - prim(lo)
        }
    };
    let span = |lo: f64, hi: f64| {
        let hi = hi.min(a);
        (hi - lo).max(0.0)
    };
    let c = s(b);
    let middle = b * span(-c, c) + chord(-c, c);
    if b >= 0.0 {
        2.0 * chord(-r, -c) + middle + 2.0 * chord(c, r)
    } else {
        middle
    }
}

impl<T: Scalar> Measure<T> for BaseMeasure<T> {
    fn dim(&self) -> usize {
        match self {
            Self::Gauss1d { .. } => 1,
            Self::Gauss2d { .. } | Self::Disk { .. } | Self::Square => 2,
            Self::Gauss3d { .. } => 3,
        }
    }

    fn eval_box(&self, b: &HalfOpenBox<T>) -> Result<T> {
        Error::check_dim(Measure::dim(self), b.dim())?;
        let lo: Vec<f64> = b.low().iter().map(|v| v.as_f64()).collect();
        let hi: Vec<f64> = b.high().iter().map(|v| v.as_f64()).collect();
        let p = match *self {
            Self::Gauss1d { mu, sigma } => gauss_interval(lo[0], hi[0], mu.as_f64(), sigma.as_f64()),
            Self::Gauss2d { sigma } | Self::Gauss3d { sigma } => {
                let s = sigma.as_f64();
                lo.iter()
                    .zip(&hi)
                    .map(|(&l, &h)| gauss_interval(l, h, 0.0, s))
                    .product()
            }
            Self::Square => lo
                .iter()
                .zip(&hi)
                .map(|(&l, &h)| (h.min(1.0) - l.max(0.0)).max(0.0))
                .product(),
            Self::Disk { radius } => {
                let r = radius.as_f64();
                let area = disk_corner_area(r, hi[0], hi[1])
                    - disk_corner_area(r, lo[0], hi[1])
                    - disk_corner_area(r, hi[0], lo[1])
                    + disk_corner_area(r, lo[0], lo[1]);
                (area / (PI * r * r)).clamp(0.0, 1.0)
            }
        };
        Ok(T::lit(p.clamp(0.0, 1.0)))
    }

    /// Draw order: Gaussians take one standard normal per coordinate; the
    /// disk takes a radius uniform then an angle uniform; the square takes
    /// x then y.
    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<T> {
        match *self {
            Self::Gauss1d { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                Point::from_slice_unchecked(&[mu + sigma * T::lit(z)])
            }
            Self::Gauss2d { sigma } => {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                Point::from_slice_unchecked(&[sigma * T::lit(x), sigma * T::lit(y)])
            }
            Self::Gauss3d { sigma } => {
                let v: [f64; 3] = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                Point::from_slice_unchecked(&v.map(|c| sigma * T::lit(c)))
            }
            Self::Disk { radius } => {
                let rad = radius.as_f64() * rng.gen::<f64>().sqrt();
                let (s, c) = (2.0 * PI * rng.gen::<f64>()).sin_cos();
                Point::from_slice_unchecked(&[T::lit(rad * c), T::lit(rad * s)])
            }
            Self::Square => {
                // (0,1]: 1 - [0,1)
                let x = 1.0 - rng.gen::<f64>();
                let y = 1.0 - rng.gen::<f64>();
                Point::from_slice_unchecked(&[T::lit(x), T::lit(y)])
            }
        }
    }
}

/// Data-driven component of a mixture base.
#[derive(Clone, Debug, PartialEq)]
pub enum EmpiricalPart<T> {
    /// Finite (possibly orbit-symmetrized) empirical measure.
    Atoms(DiscreteMeasure<T>),
    /// Uniform mixture of full rotation orbits of the data.
    Orbits(LimitOrbitSampler<T>),
}

impl<T: Scalar> EmpiricalPart<T> {
    fn dim(&self) -> usize {
        match self {
            Self::Atoms(m) => m.dim(),
            Self::Orbits(o) => o.dim(),
        }
    }

    fn eval_box(&self, b: &HalfOpenBox<T>) -> Result<T> {
        match self {
            Self::Atoms(m) => m.eval_box(b),
            Self::Orbits(o) => o.eval_box(b),
        }
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<T> {
        match self {
            Self::Atoms(m) => m.sample_point(rng),
            Self::Orbits(o) => o.sample_point(rng),
        }
    }
}

/// `p_cont·H + (1 − p_cont)·F`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureBase<T> {
    p_cont: T,
    continuous: BaseMeasure<T>,
    empirical: Option<EmpiricalPart<T>>,
}

impl<T: Scalar> MixtureBase<T> {
    pub fn new(p_cont: T, continuous: BaseMeasure<T>, empirical: Option<EmpiricalPart<T>>) -> Result<Self> {
        if !(p_cont >= T::zero() && p_cont <= T::one()) {
            return Err(Error::invalid(format!("mixing weight {p_cont} outside [0, 1]")));
        }
        continuous.validate()?;
        match &empirical {
            None if p_cont != T::one() => {
                return Err(Error::invalid("mixture without an empirical part must have p_cont = 1"))
            }
            Some(e) => Error::check_dim(Measure::dim(&continuous), e.dim())?,
            None => {}
        }
        Ok(Self {
            p_cont,
            continuous,
            empirical,
        })
    }

    /// The base measure alone (`p_cont = 1`).
    pub fn pure(continuous: BaseMeasure<T>) -> Self {
        Self {
            p_cont: T::one(),
            continuous,
            empirical: None,
        }
    }

    pub fn p_cont(&self) -> T {
        self.p_cont
    }

    pub fn continuous(&self) -> &BaseMeasure<T> {
        &self.continuous
    }

    pub fn empirical(&self) -> Option<&EmpiricalPart<T>> {
        self.empirical.as_ref()
    }

    /// The empirical part when it is a finite atom set.
    pub fn discrete(&self) -> Option<&DiscreteMeasure<T>> {
        match &self.empirical {
            Some(EmpiricalPart::Atoms(m)) => Some(m),
            _ => None,
        }
    }

    /// Mass that `g⁻¹B` receives. The continuous part must map `B` to a box
    /// under `g⁻¹`; otherwise the result is [`Error::Unsupported`].
    pub fn eval_preimage(&self, g: &GroupElement<T>, b: &HalfOpenBox<T>) -> Result<T> {
        let pre = g
            .inverse()
            .box_image(b)
            .ok_or_else(|| Error::Unsupported("preimage of the box is not a box".into()))?;
        let cont = self.continuous.eval_box(&pre)?;
        let emp = match &self.empirical {
            Some(EmpiricalPart::Atoms(m)) => m.eval_preimage(g, b)?,
            Some(EmpiricalPart::Orbits(o)) => o.eval_box(&pre)?,
            None => T::zero(),
        };
        Ok(self.p_cont * cont + (T::one() - self.p_cont) * emp)
    }
}

impl<T: Scalar> Measure<T> for MixtureBase<T> {
    fn dim(&self) -> usize {
        Measure::dim(&self.continuous)
    }

    fn eval_box(&self, b: &HalfOpenBox<T>) -> Result<T> {
        let cont = self.continuous.eval_box(b)?;
        match &self.empirical {
            None => Ok(cont),
            Some(e) => Ok(self.p_cont * cont + (T::one() - self.p_cont) * e.eval_box(b)?),
        }
    }

    /// One uniform chooses the component (continuous when `u < p_cont`),
    /// then the component draws.
    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<T> {
        let u: f64 = rng.gen();
        match &self.empirical {
            Some(e) if u >= self.p_cont.as_f64() => e.sample_point(rng),
            _ => self.continuous.sample_point(rng),
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Estimates the mass of `{x : pred(x)}` from `n` draws.
pub fn estimate_probability<T, M, R, F>(measure: &M, n: usize, rng: &mut R, mut pred: F) -> McEstimate
where
    T: Scalar,
    M: Measure<T>,
    R: Rng + ?Sized,
    F: FnMut(&Point<T>) -> bool,
{
    let n = n.max(1);
    let hits = (0..n).filter(|_| pred(&measure.sample_point(rng))).count();
    let q = hits as f64 / n as f64;
    McEstimate {
        value: q,
        std_err: (q * (1.0 - q) / n as f64).sqrt().max(0.5 / n as f64),
        samples: n,
    }
}

/// Estimates the mass of `g⁻¹B`, i.e. of a rotated box, by sampling.
pub fn estimate_preimage<T, M, R>(
    measure: &M,
    g: &GroupElement<T>,
    b: &HalfOpenBox<T>,
    n: usize,
    rng: &mut R,
) -> McEstimate
where
    T: Scalar,
    M: Measure<T>,
    R: Rng + ?Sized,
{
    estimate_probability(measure, n, rng, |x| b.contains(&g.apply_unchecked(x)))
}

/// `(1/k) Σ_j δ_{g_j(x)}`.
pub fn symmetrized_dirac<T: Scalar>(group: &FiniteGroup<T>, x: &Point<T>) -> Result<DiscreteMeasure<T>> {
    let pts = orbit(group, x)?;
    DiscreteMeasure::uniform(pts)
}

/// `(1/(km)) Σ_i Σ_j δ_{g_j(X_i)}`, ordered datum-major.
pub fn symmetrized_empirical<T: Scalar>(group: &FiniteGroup<T>, data: &[Point<T>]) -> Result<DiscreteMeasure<T>> {
    if data.is_empty() {
        return Err(Error::invalid("data must be nonempty"));
    }
    let mut pts = Vec::with_capacity(data.len() * group.order());
    for x in data {
        pts.extend(orbit(group, x)?);
    }
    DiscreteMeasure::uniform(pts)
}

/// `(1/m) Σ_i δ_{X_i − X̄}` on the line.
pub fn centered_empirical<T: Scalar>(data: &[T]) -> Result<DiscreteMeasure<T>> {
    if data.is_empty() {
        return Err(Error::invalid("data must be nonempty"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("data must be finite"));
    }
    let mean = stable_sum(data.iter().copied()) / T::from_usize_lossy(data.len());
    let pts = data.iter().map(|&x| Point::from_slice_unchecked(&[x - mean])).collect();
    DiscreteMeasure::uniform(pts)
}

/// Replaces each atom `(x, w)` with `k` atoms `(g_j(x), w/k)`.
pub fn orbit_symmetrize_measure<T: Scalar>(
    group: &FiniteGroup<T>,
    m: &DiscreteMeasure<T>,
) -> Result<DiscreteMeasure<T>> {
    Error::check_dim(group.dim(), m.dim())?;
    let k = T::from_usize_lossy(group.order());
    let mut atoms = Vec::with_capacity(m.len() * group.order());
    for a in m.atoms() {
        let w = a.weight / k;
        atoms.extend(group.elements().iter().map(|g| Atom {
            point: g.apply_unchecked(&a.point),
            weight: w,
        }));
    }
    Ok(DiscreteMeasure::build(m.dim(), atoms))
}
