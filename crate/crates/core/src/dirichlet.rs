//! Dirichlet distribution draws, Dirichlet process posterior updates, and two
//! truncated Dirichlet process path samplers.
//!
//! Gamma variates are produced in log space so that the tiny shapes of the
//! finite-N scheme (`α/N`) do not underflow before normalization.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::measures::{Atom, BaseMeasure, DiscreteMeasure, EmpiricalPart, Measure, MixtureBase};
use crate::scalar::Scalar;

pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_N_ATOMS: usize = 2000;

/// Refuse stick-breaking runs expected to produce more atoms than this.
const MAX_EXPECTED_STICKS: f64 = 5e7;

#[derive(Clone, Debug, PartialEq)]
pub struct DirichletParams<T> {
    a: Vec<T>,
}

impl<T: Scalar> DirichletParams<T> {
    pub fn new(a: Vec<T>) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::invalid("a Dirichlet needs at least two parameters"));
        }
        if let Some(bad) = a.iter().find(|v| !(v.is_finite() && **v > T::zero())) {
            return Err(Error::invalid(format!(
                "Dirichlet parameters must be positive (got {bad})"
            )));
        }
        Ok(Self { a })
    }

    pub fn params(&self) -> &[T] {
        &self.a
    }
}

/// `ln G` for `G ~ Gamma(shape, 1)`; shapes below one use
/// `G = G' · U^{1/shape}` with `G' ~ Gamma(shape + 1, 1)`.
pub fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("valid gamma shape");
        g.sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("valid gamma shape");
        let boosted = g.sample(rng).ln();
        let u = 1.0 - rng.gen::<f64>();
        boosted + u.ln() / shape
    }
}

/// Normalizes log-weights with the log-sum-exp shift.
fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Normalized independent `Gamma(a_i, 1)` draws, in parameter order.
pub fn sample_dirichlet<T: Scalar, R: Rng + ?Sized>(params: &DirichletParams<T>, rng: &mut R) -> Vec<T> {
    let logs: Vec<f64> = params.a.iter().map(|a| log_gamma_variate(a.as_f64(), rng)).collect();
    normalize_log_weights(&logs).into_iter().map(T::lit).collect()
}

/// Concentration plus base measure of a Dirichlet process.
#[derive(Clone, Debug, PartialEq)]
pub struct DPParams<T> {
    pub alpha: T,
    pub base: MixtureBase<T>,
}

impl<T: Scalar> DPParams<T> {
    pub fn new(alpha: T, base: MixtureBase<T>) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, base })
    }

    pub fn prior(alpha: T, base: BaseMeasure<T>) -> Result<Self> {
        Self::new(alpha, MixtureBase::pure(base))
    }
}

pub(crate) fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha.is_finite() && alpha > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(format!("concentration must be positive (got {alpha})")))
    }
}

/// Conjugate update: `α* = α + m`, base `α/(α+m)·H + m/(α+m)·F_m`.
pub fn dp_posterior_params<T: Scalar>(alpha: T, base: BaseMeasure<T>, data: &[Point<T>]) -> Result<DPParams<T>> {
    check_alpha(alpha)?;
    base.validate()?;
    if data.is_empty() {
        return DPParams::prior(alpha, base);
    }
    let m = T::from_usize_lossy(data.len());
    let alpha_star = alpha + m;
    let empirical = DiscreteMeasure::uniform(data.to_vec())?;
    let mix = MixtureBase::new(alpha / alpha_star, base, Some(EmpiricalPart::Atoms(empirical)))?;
    DPParams::new(alpha_star, mix)
}

/// How a path was truncated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Truncation<T> {
    StickBreaking { eps: T, residual: T },
    FiniteN { n: usize },
}

/// A realized, finitely supported random probability measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TruncatedPath<T> {
    #[serde(flatten)]
    pub measure: DiscreteMeasure<T>,
    pub truncation: Truncation<T>,
    /// Order of the group the path was symmetrized over, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry_order: Option<usize>,
}

impl<T: Scalar> TruncatedPath<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Path sampler configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "kebab-case")]
pub enum PathSampler {
    StickBreaking { eps: f64 },
    FiniteN { n: usize },
}

impl Default for PathSampler {
    fn default() -> Self {
        PathSampler::StickBreaking { eps: DEFAULT_EPS }
    }
}

impl PathSampler {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PathSampler::StickBreaking { eps } if !(eps > 0.0 && eps < 1.0) => {
                Err(Error::invalid(format!("eps must lie in (0, 1) (got {eps})")))
            }
            PathSampler::FiniteN { n: 0 } => Err(Error::invalid("atom count N must be at least 1")),
            _ => Ok(()),
        }
    }
}

/// Raw weights and atoms before packaging, shared by the path samplers.
pub(crate) struct RawPath<T> {
    pub atoms: Vec<Point<T>>,
    pub weights: Vec<f64>,
    pub truncation: Truncation<T>,
}

impl<T: Scalar> RawPath<T> {
    pub(crate) fn into_path(self) -> TruncatedPath<T> {
        let atoms = self
            .atoms
            .into_iter()
            .zip(self.weights)
            .map(|(point, w)| Atom {
                point,
                weight: T::lit(w),
            })
            .collect::<Vec<_>>();
        TruncatedPath {
            measure: DiscreteMeasure::normalized(atoms).expect("path weights are valid"),
            truncation: self.truncation,
            symmetry_order: None,
        }
    }
}

/// Per stick: one uniform for the break `v ~ Beta(1, α)`, then one base
/// draw for its atom. After the residual drops to `eps`, one more base draw
/// receives the remaining mass.
pub(crate) fn stick_breaking_raw<T: Scalar, M: Measure<T>, R: Rng + ?Sized>(
    alpha: f64,
    base: &M,
    eps: f64,
    rng: &mut R,
) -> Result<RawPath<T>> {
    PathSampler::StickBreaking { eps }.validate()?;
    if alpha * (1.0 / eps).ln() > MAX_EXPECTED_STICKS {
        return Err(Error::invalid(format!(
            "stick-breaking with alpha = {alpha} and eps = {eps} would need too many atoms"
        )));
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut rest = 1.0f64;
    while rest > eps {
        let u = 1.0 - rng.gen::<f64>();
        // 1 - v = U^{1/α}
        let keep = (u.ln() / alpha).exp();
        let v = -(u.ln() / alpha).exp_m1();
        weights.push(rest * v);
        atoms.push(base.sample_point(rng));
        rest *= keep;
    }
    weights.push(rest);
    atoms.push(base.sample_point(rng));
    Ok(RawPath {
        atoms,
        weights,
        truncation: Truncation::StickBreaking {
            eps: T::lit(eps),
            residual: T::lit(rest),
        },
    })
}

/// Draw order: `N` base draws, then `N` log-gamma draws of shape `α/N`.
pub(crate) fn finite_n_raw<T: Scalar, M: Measure<T>, R: Rng + ?Sized>(
    alpha: f64,
    base: &M,
    n: usize,
    rng: &mut R,
) -> Result<RawPath<T>> {
    PathSampler::FiniteN { n }.validate()?;
    let atoms = base.sample(n, rng);
    let shape = alpha / n as f64;
    let logs: Vec<f64> = (0..n).map(|_| log_gamma_variate(shape, rng)).collect();
    Ok(RawPath {
        atoms,
        weights: normalize_log_weights(&logs),
        truncation: Truncation::FiniteN { n },
    })
}

pub(crate) fn dp_raw<T: Scalar, R: Rng + ?Sized>(
    params: &DPParams<T>,
    sampler: PathSampler,
    rng: &mut R,
) -> Result<RawPath<T>> {
    match sampler {
        PathSampler::StickBreaking { eps } => stick_breaking_raw(params.alpha.as_f64(), &params.base, eps, rng),
        PathSampler::FiniteN { n } => finite_n_raw(params.alpha.as_f64(), &params.base, n, rng),
    }
}

/// Stick-breaking path truncated once the unassigned mass is at most `eps`.
pub fn sample_dp_stick_breaking<T: Scalar, R: Rng + ?Sized>(
    params: &DPParams<T>,
    eps: f64,
    rng: &mut R,
) -> Result<TruncatedPath<T>> {
    Ok(stick_breaking_raw(params.alpha.as_f64(), &params.base, eps, rng)?.into_path())
}

/// `N` base atoms with `Dirichlet(α/N, …, α/N)` weights.
pub fn sample_dp_finite<T: Scalar, R: Rng + ?Sized>(
    params: &DPParams<T>,
    n: usize,
    rng: &mut R,
) -> Result<TruncatedPath<T>> {
    Ok(finite_n_raw(params.alpha.as_f64(), &params.base, n, rng)?.into_path())
}

pub fn sample_dp<T: Scalar, R: Rng + ?Sized>(
    params: &DPParams<T>,
    sampler: PathSampler,
    rng: &mut R,
) -> Result<TruncatedPath<T>> {
    Ok(dp_raw(params, sampler, rng)?.into_path())
}
