//! Parsers for the compact `kind:param:...` flag values.

use dipsym::geometry::HalfOpenBox;
use dipsym::measures::BaseMeasure;
use dipsym::posterior::PosteriorGroup;
use dipsym::symmetry::{make_cyclic_group_2d, make_cyclic_group_3d, make_reflection_group};
use dipsym::PathSampler;

use crate::CliError;

fn numbers(parts: &[&str], what: &str) -> Result<Vec<f64>, CliError> {
    parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("invalid number {p:?} in {what}")))
        })
        .collect()
}

fn arity(spec: &str, args: &[f64], allowed: &[usize]) -> Result<(), CliError> {
    if allowed.contains(&args.len()) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("wrong number of parameters in {spec:?}")))
    }
}

/// `gauss2d[:sigma]`, `disk[:radius]`, `square`, `gauss1d[:mu:sigma]`,
/// `gauss3d[:sigma]`.
pub fn parse_base(spec: &str) -> Result<BaseMeasure<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let args = numbers(&parts[1..], spec)?;
    let base = match parts[0].trim() {
        "gauss2d" => {
            arity(spec, &args, &[0, 1])?;
            BaseMeasure::gauss2d(args.first().copied().unwrap_or(1.0))?
        }
        "disk" => {
            arity(spec, &args, &[0, 1])?;
            BaseMeasure::disk(args.first().copied().unwrap_or(1.0))?
        }
        "square" => {
            arity(spec, &args, &[0])?;
            BaseMeasure::Square
        }
        "gauss1d" => {
            arity(spec, &args, &[0, 2])?;
            match args.as_slice() {
                [mu, sigma] => BaseMeasure::gauss1d(*mu, *sigma)?,
                _ => BaseMeasure::gauss1d(0.0, 1.0)?,
            }
        }
        "gauss3d" => {
            arity(spec, &args, &[0, 1])?;
            BaseMeasure::gauss3d(args.first().copied().unwrap_or(1.0))?
        }
        other => return Err(CliError::Usage(format!("unknown distribution {other:?}"))),
    };
    Ok(base)
}

/// `cyclic2d:K`, `reflection:MU`, `cyclic3d:K:AX:AY:AZ` (axis normalized),
/// `limit[:K_SYM]`.
pub fn parse_group(spec: &str) -> Result<PosteriorGroup<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let order = |s: &str| -> Result<usize, CliError> {
        s.trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("invalid group order {s:?}")))
    };
    let group = match (parts[0].trim(), parts.len()) {
        ("cyclic2d", 2) => PosteriorGroup::Finite(make_cyclic_group_2d(order(parts[1])?)?),
        ("reflection", 2) => PosteriorGroup::Finite(make_reflection_group(numbers(&parts[1..], spec)?[0])?),
        ("cyclic3d", 5) => {
            let a = numbers(&parts[2..], spec)?;
            let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(CliError::Usage("rotation axis must be a nonzero finite vector".into()));
            }
            PosteriorGroup::Finite(make_cyclic_group_3d(
                order(parts[1])?,
                [a[0] / norm, a[1] / norm, a[2] / norm],
            )?)
        }
        ("limit", 1) => PosteriorGroup::rotation_limit(dipsym::posterior::DEFAULT_K_SYM)?,
        ("limit", 2) => PosteriorGroup::rotation_limit(order(parts[1])?)?,
        _ => return Err(CliError::Usage(format!("invalid group spec {spec:?}"))),
    };
    Ok(group)
}

/// `--n-atoms N` selects finite-N sampling, otherwise stick-breaking with
/// `--eps` (default 1e-6).
pub fn sampler(eps: Option<f64>, n_atoms: Option<usize>) -> Result<PathSampler, CliError> {
    let s = match (eps, n_atoms) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--eps and --n-atoms are mutually exclusive".into())),
        (_, Some(n)) => PathSampler::FiniteN { n },
        (Some(eps), None) => PathSampler::StickBreaking { eps },
        (None, None) => PathSampler::default(),
    };
    s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(s)
}

/// Comma-separated strictly increasing levels.
pub fn parse_levels(spec: &str) -> Result<Vec<usize>, CliError> {
    let levels = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("invalid level {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage("levels must be strictly increasing".into()));
    }
    Ok(levels)
}

/// Typical length scale of a base measure, used to place default boxes.
pub fn base_scale(h: &BaseMeasure<f64>) -> f64 {
    match *h {
        BaseMeasure::Gauss2d { sigma } | BaseMeasure::Gauss3d { sigma } | BaseMeasure::Gauss1d { sigma, .. } => sigma,
        BaseMeasure::Disk { radius } => radius,
        BaseMeasure::Square => 1.0,
    }
}

/// Default boxes for moment checks: the whole space plus two boxes whose
/// group orbits do not overlap each other or themselves, so that the
/// symmetrized moment formulas are exact.
pub fn default_check_boxes(h: &BaseMeasure<f64>, group: &PosteriorGroup<f64>) -> Vec<HalfOpenBox<f64>> {
    let dim = group.dim();
    let mut boxes = vec![HalfOpenBox::full(dim)];
    let s = base_scale(h);
    match (h, dim) {
        (BaseMeasure::Gauss1d { mu, sigma }, 1) => {
            boxes.push(HalfOpenBox::interval(mu + 0.25 * sigma, mu + sigma).expect("ordered"));
            boxes.push(HalfOpenBox::interval(mu + sigma, mu + 2.0 * sigma).expect("ordered"));
        }
        (BaseMeasure::Square, 2) => {
            boxes.push(HalfOpenBox::rect(0.0, 0.5, 0.0, 0.5).expect("ordered"));
            boxes.push(HalfOpenBox::rect(0.5, 1.0, 0.0, 0.5).expect("ordered"));
        }
        (_, 2) => {
            let k = group.path_group().order().max(2) as f64;
            // angular half-width well inside π/k keeps rotated copies apart
            let h = 0.5 * s * (0.4 * std::f64::consts::PI / k).tan();
            boxes.push(HalfOpenBox::rect(0.5 * s, s, -h, h).expect("ordered"));
            boxes.push(HalfOpenBox::rect(1.25 * s, 2.0 * s, -h, h).expect("ordered"));
        }
        _ => {}
    }
    boxes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_specs() {
        assert_eq!(parse_base("gauss2d").unwrap(), BaseMeasure::gauss2d(1.0).unwrap());
        assert_eq!(parse_base("disk:2.5").unwrap(), BaseMeasure::disk(2.5).unwrap());
        assert_eq!(
            parse_base("gauss1d:1:0.5").unwrap(),
            BaseMeasure::gauss1d(1.0, 0.5).unwrap()
        );
        assert!(parse_base("gauss1d:1").is_err());
        assert!(parse_base("square:1").is_err());
        assert!(parse_base("disk:-1").is_err());
        assert!(parse_base("cauchy").is_err());
    }

    #[test]
    fn group_specs() {
        assert_eq!(parse_group("cyclic2d:4").unwrap().path_group().order(), 4);
        assert_eq!(parse_group("reflection:0.5").unwrap().dim(), 1);
        assert_eq!(parse_group("cyclic3d:3:0:0:2").unwrap().path_group().order(), 3);
        assert!(parse_group("limit").unwrap().is_limit());
        assert_eq!(parse_group("limit:90").unwrap().path_group().order(), 90);
        assert!(parse_group("cyclic2d").is_err());
        assert!(parse_group("cyclic2d:0").is_err());
        assert!(parse_group("cyclic3d:3:0:0:0").is_err());
    }

    #[test]
    fn sampler_and_levels() {
        assert_eq!(sampler(None, None).unwrap(), PathSampler::default());
        assert_eq!(sampler(None, Some(10)).unwrap(), PathSampler::FiniteN { n: 10 });
        assert!(sampler(Some(1e-3), Some(10)).is_err());
        assert!(sampler(Some(2.0), None).is_err());
        assert_eq!(parse_levels("4, 16,64").unwrap(), vec![4, 16, 64]);
        assert!(parse_levels("16,4").is_err());
    }

    #[test]
    fn default_boxes_are_supported() {
        for (h, g) in [
            ("gauss2d", "cyclic2d:8"),
            ("disk:2", "cyclic2d:3"),
            ("disk", "limit"),
            ("gauss1d:0.5:1", "reflection:0.5"),
            ("square", "cyclic2d:1"),
        ] {
            let h = parse_base(h).unwrap();
            let group = parse_group(g).unwrap();
            let post = match &group {
                PosteriorGroup::Finite(fg) => dipsym::fit(1.0, h, &[], fg).unwrap(),
                _ => dipsym::fit_limit(1.0, h, &[]).unwrap(),
            };
            let boxes = default_check_boxes(&h, &group);
            let r = dipsym::dip_moment_oracle(&post, &boxes);
            assert!(r.is_ok(), "{g}: {r:?}");
        }
    }
}
