use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dipsym::convergence::{box_grid, WeightDistortion, BOUNDARY_BUFFER};
use dipsym::geometry::{HalfOpenBox, Point};
use dipsym::measures::{BaseMeasure, Measure};
use dipsym::posterior::DipPosterior;
use dipsym::{
    boundary_safe_boxes, check_moments_with, derive_seed, distort_measure, fit_with_group, invariance_gap, replica_rng,
    sample_path, sweep_k, sweep_m,
};

use crate::data;
use crate::spec::{base_scale, default_check_boxes, parse_base, parse_group, parse_levels, sampler};
use crate::{CliError, Opts};

const DEFAULT_CHECK_REPS: usize = 10_000;
const DEFAULT_INVARIANCE_BOXES: usize = 200;
const DEFAULT_GRID_CELLS: usize = 6;

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

fn out_path(o: &Opts) -> Result<PathBuf, CliError> {
    need(&o.out, "out")
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn positive_alpha(o: &Opts) -> Result<f64, CliError> {
    let a = need(&o.alpha, "alpha")?;
    if a > 0.0 && a.is_finite() {
        Ok(a)
    } else {
        Err(CliError::Usage("--alpha must be positive and finite".into()))
    }
}

fn positive_reps(o: &Opts, default: Option<usize>) -> Result<usize, CliError> {
    let reps = match default {
        Some(d) => o.reps.unwrap_or(d),
        None => need(&o.reps, "reps")?,
    };
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    Ok(reps)
}

fn read_data(path: Option<&Path>, dim: usize) -> Result<Vec<Point<f64>>, CliError> {
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let (file_dim, points) = data::points_from_csv(&data::read(path)?)?;
    if file_dim != dim {
        return Err(CliError::Usage(format!(
            "{}: data are {file_dim}-dimensional but the model is {dim}-dimensional",
            path.display()
        )));
    }
    Ok(points)
}

fn read_boxes(path: &Path) -> Result<Vec<HalfOpenBox<f64>>, CliError> {
    serde_json::from_str(&data::read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_posterior(o: &Opts) -> Result<DipPosterior<f64>, CliError> {
    let path = need(&o.posterior, "posterior")?;
    Ok(DipPosterior::from_json(&data::read(&path)?)?)
}

pub fn gen(o: &Opts) -> Result<(), CliError> {
    let dist = parse_base(&need(&o.dist, "dist")?)?;
    let m = need(&o.m, "m")?;
    let seed = need(&o.seed, "seed")?;
    let out = out_path(o)?;
    let mut rng = replica_rng(seed, 0);
    let points = dist.sample(m, &mut rng);
    data::write(&out, &data::points_to_csv(&points, Measure::dim(&dist)))?;
    println!(
        "wrote {m} points from {} to {} (seed {seed})",
        dist.name(),
        out.display()
    );
    Ok(())
}

pub fn fit_cmd(o: &Opts) -> Result<DipPosterior<f64>, CliError> {
    let alpha = positive_alpha(o)?;
    let h = parse_base(&need(&o.base, "base")?)?;
    let group = parse_group(&need(&o.group, "group")?)?;
    let points = read_data(o.data.as_deref(), group.dim())?;
    Ok(fit_with_group(alpha, h, &points, &group)?)
}

pub fn fit(o: &Opts) -> Result<(), CliError> {
    let post = fit_cmd(o)?;
    let out = out_path(o)?;
    data::write(&out, &post.to_json()?)?;
    for w in post.warnings() {
        eprintln!("warning: {w}");
    }
    println!(
        "alpha_star={:?} p_cont={:?} atoms={}",
        post.alpha_star(),
        post.p_cont(),
        post.atom_count()
    );
    Ok(())
}

pub fn sample(o: &Opts) -> Result<(), CliError> {
    let post = read_posterior(o)?;
    let s = sampler(o.eps, o.n_atoms)?;
    let reps = positive_reps(o, None)?;
    let seed = need(&o.seed, "seed")?;
    let out = out_path(o)?;
    let mut text = String::new();
    for i in 0..reps {
        let path = sample_path(&post, s, &mut replica_rng(seed, i as u64))?;
        let mut value = serde_json::to_value(&path).map_err(dipsym::Error::from)?;
        if let Some(map) = value.as_object_mut() {
            map.insert("seed".into(), seed.into());
            map.insert("replica".into(), i.into());
        }
        text.push_str(&value.to_string());
        text.push('\n');
    }
    data::write(&out, &text)?;
    println!("wrote {reps} paths to {} (seed {seed})", out.display());
    Ok(())
}

fn write_report(out: &Path, csv: String, json: dipsym::Result<String>) -> Result<(), CliError> {
    if is_json(out) {
        data::write(out, &json?)
    } else {
        data::write(out, &csv)
    }
}

pub fn converge(o: &Opts) -> Result<(), CliError> {
    let mode = need(&o.mode, "mode")?;
    let seed = need(&o.seed, "seed")?;
    let alpha = positive_alpha(o)?;
    let h = parse_base(&need(&o.base, "base")?)?;
    let out = out_path(o)?;
    let report = match mode.as_str() {
        "k-sweep" => {
            if Measure::dim(&h) != 2 {
                return Err(CliError::Usage("k-sweeps need a planar base".into()));
            }
            let levels = parse_levels(&need(&o.k_levels, "k-levels")?)?;
            let points = read_data(o.data.as_deref(), 2)?;
            let boxes = match &o.boxes {
                Some(p) => read_boxes(p)?,
                None => box_grid(2, 1.5 * base_scale(&h), 3)?,
            };
            let reps = o.reps.unwrap_or(0);
            sweep_k(
                alpha,
                h,
                &points,
                &levels,
                &boxes,
                reps,
                sampler(o.eps, o.n_atoms)?,
                seed,
            )?
        }
        "m-sweep" => {
            let truth = parse_base(&need(&o.dist, "dist")?)?;
            let group = parse_group(&need(&o.group, "group")?)?;
            let levels = parse_levels(&need(&o.m_levels, "m-levels")?)?;
            let boxes = match &o.boxes {
                Some(p) => read_boxes(p)?,
                None => box_grid(
                    group.dim(),
                    3.0 * base_scale(&truth),
                    o.grid.unwrap_or(DEFAULT_GRID_CELLS),
                )?,
            };
            sweep_m(truth, alpha, h, &group, &levels, &boxes, seed)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown mode {other:?}; use k-sweep or m-sweep"
            )))
        }
    };
    write_report(&out, report.to_csv(), report.to_json())?;
    println!("wrote {} rows to {} (seed {seed})", report.rows.len(), out.display());
    Ok(())
}

fn distortion(o: &Opts, boxes: &[HalfOpenBox<f64>]) -> Result<Option<WeightDistortion<f64>>, CliError> {
    let Some(factor) = o.distort else {
        return Ok(None);
    };
    if !(factor > -1.0 && factor.is_finite()) {
        return Err(CliError::Usage("--distort must exceed -1".into()));
    }
    let region = boxes
        .iter()
        .find(|b| b.is_bounded())
        .copied()
        .ok_or_else(|| CliError::Usage("--distort needs at least one bounded box".into()))?;
    Ok(Some(WeightDistortion { factor, region }))
}

pub fn check(o: &Opts) -> Result<(), CliError> {
    let kind = need(&o.kind, "kind")?;
    let seed = need(&o.seed, "seed")?;
    let post = read_posterior(o)?;
    let s = sampler(o.eps, o.n_atoms)?;
    let h = *post.base().continuous();
    let boxes = match &o.boxes {
        Some(p) => read_boxes(p)?,
        None => default_check_boxes(&h, post.group()),
    };
    let distort = distortion(o, &boxes)?;
    match kind.as_str() {
        "moments" => {
            let reps = positive_reps(o, Some(DEFAULT_CHECK_REPS))?;
            let report = check_moments_with(&post, &boxes, reps, s, seed, distort.as_ref())?;
            if let Some(out) = &o.out {
                write_report(out, report.to_csv(), report.to_json())?;
            }
            let flagged: Vec<String> = report
                .rows
                .iter()
                .filter(|r| r.flagged)
                .map(|r| format!("{}[{},{}] z={:.2}", r.statistic, r.box_i, r.box_j, r.z))
                .collect();
            println!(
                "moments: {} rows, max |z| = {:.3} (threshold {}, seed {seed})",
                report.rows.len(),
                report.max_abs_z(),
                report.z_threshold
            );
            if flagged.is_empty() {
                Ok(())
            } else {
                Err(CliError::Check(flagged.join("; ")))
            }
        }
        "invariance" => {
            let reps = positive_reps(o, Some(10))?;
            let n_boxes = o.n_boxes.unwrap_or(DEFAULT_INVARIANCE_BOXES);
            let group = post.group().path_group();
            let half_width = match h {
                BaseMeasure::Gauss1d { mu, sigma } => mu.abs() + 3.0 * sigma,
                BaseMeasure::Square => 1.0,
                _ => 2.5 * base_scale(&h),
            };
            let mut csv = String::from("replica,max_gap,checked,skipped\n");
            let mut worst = 0.0f64;
            for i in 0..reps {
                let path = sample_path(&post, s, &mut replica_rng(seed, i as u64))?;
                let measure = match &distort {
                    Some(d) => distort_measure(&path.measure, d)?,
                    None => path.measure,
                };
                let mut box_rng = replica_rng(derive_seed(seed, 1), i as u64);
                let test_boxes = boundary_safe_boxes(&measure, group, n_boxes, half_width, &mut box_rng);
                let gap = invariance_gap(&measure, group, &test_boxes)?;
                let _ = writeln!(csv, "{i},{:?},{},{}", gap.max_gap, gap.checked, gap.skipped.len());
                worst = worst.max(gap.max_gap);
            }
            if let Some(out) = &o.out {
                data::write(out, &csv)?;
            }
            println!("invariance: {reps} paths, max gap {worst:e} (tolerance {BOUNDARY_BUFFER:e}, seed {seed})");
            if worst <= BOUNDARY_BUFFER {
                Ok(())
            } else {
                Err(CliError::Check(format!(
                    "invariance gap {worst:e} exceeds {BOUNDARY_BUFFER:e}"
                )))
            }
        }
        other => Err(CliError::Usage(format!(
            "unknown check kind {other:?}; use moments or invariance"
        ))),
    }
}
