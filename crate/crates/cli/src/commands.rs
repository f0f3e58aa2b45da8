use std::path::Path;

use eigenorient::correlation::{
    dispersion_report, reconstruct_correlation, sample_correlation, CorrelationMatrix,
    DispersionReport,
};
use eigenorient::dirstats::{
    circular_variance, filter_eigenbases_with, participation_scores, EigenSeries, FilterKernel,
    RawSeries,
};
use eigenorient::orientation::{AngleMatrix, EigenSystem};
use eigenorient::rmt::{classify_modes_with, shrink_noise_subspace, MpModel};
use eigenorient::synth::{spiked_panel, wobble_series, ReflectionParity, WobbleSpec};
use eigenorient::{Execution, Matrix, Method};
use log::{info, warn};
use serde::Serialize;

use crate::args::{
    ClassifyArgs, Command, CorrArgs, InputArgs, OrientArgs, StabilizeArgs, SynthArgs,
};
use crate::error::{invalid, CliError, CliResult};
use crate::formats::{
    ensure_dir, is_series_dir, numbered, read_panel, read_series, write_atomic, write_json,
    write_matrix, write_series,
};

/// Eigenvalues this far below zero are rounding noise and are clamped.
const NEGATIVE_EIGENVALUE_SLACK: f64 = 1e-12;

pub fn run(command: &Command) -> CliResult<()> {
    command.validate()?;
    match command {
        Command::Orient(a) => orient(a),
        Command::Stabilize(a) => stabilize(a),
        Command::Classify(a) => classify(a),
        Command::Corr(a) => corr(a),
        Command::Synth(a) => synth(a),
    }
}

struct Snapshots {
    series: RawSeries,
    records: Option<usize>,
}

fn load_snapshots(io: &InputArgs) -> CliResult<Snapshots> {
    if is_series_dir(&io.input) {
        if io.window.is_some() {
            return invalid("--window applies to panel input only");
        }
        let (manifest, bases) = read_series(&io.input)?;
        let systems = bases
            .into_iter()
            .zip(manifest.eigenvalues)
            .map(|(b, e)| EigenSystem::with_tolerance(b, e, io.orthonormal_tol))
            .collect::<Result<Vec<_>, _>>()?;
        info!(
            "read {} snapshots from {}",
            systems.len(),
            io.input.display()
        );
        return Ok(Snapshots {
            series: RawSeries::new(systems, manifest.timestamps)?,
            records: manifest.records,
        });
    }

    let panel = read_panel(&io.input)?;
    let (t, n) = (panel.rows(), panel.cols());
    let window = io.window.unwrap_or(t);
    if window > t {
        return invalid(format!(
            "--window {window} exceeds the {t} records in the panel"
        ));
    }
    let starts: Vec<usize> = (0..=t - window).step_by(io.step).collect();
    let systems = io.execution().try_map_range(starts.len(), |k| {
        let s = starts[k];
        let rows = Matrix::new(
            window,
            n,
            panel.as_slice()[s * n..(s + window) * n].to_vec(),
        )?;
        sample_correlation(&rows)?.eigensystem()
    })?;
    let timestamps = starts.iter().map(|&s| (s + window - 1) as i64).collect();
    info!(
        "built {} correlation snapshots from a {t}x{n} panel",
        systems.len()
    );
    Ok(Snapshots {
        series: RawSeries::new(systems, timestamps)?,
        records: Some(window),
    })
}

fn angle_rows(angles: &AngleMatrix) -> Vec<Vec<f64>> {
    (0..angles.dim().saturating_sub(1))
        .map(|k| angles.row(k).to_vec())
        .collect()
}

fn clamp_eigenvalues(values: &[f64]) -> CliResult<Vec<f64>> {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    values
        .iter()
        .map(|&v| {
            if v >= 0.0 {
                Ok(v)
            } else if v >= -NEGATIVE_EIGENVALUE_SLACK * scale {
                Ok(0.0)
            } else {
                invalid(format!("negative eigenvalue {v}"))
            }
        })
        .collect()
}

fn correlations(
    bases: &[&Matrix],
    eigenvalues: &[&[f64]],
    exec: Execution,
) -> CliResult<Vec<CorrelationMatrix>> {
    exec.try_map_range(bases.len(), |k| {
        let ev = clamp_eigenvalues(eigenvalues[k])?;
        reconstruct_correlation(bases[k], &ev).map_err(CliError::from)
    })
}

#[derive(Serialize)]
struct OrientSnapshot {
    index: usize,
    timestamp: i64,
    basis: String,
    angles_file: String,
    eigenvalues: Vec<f64>,
    sort_indices: Vec<usize>,
    reflections: Vec<i8>,
    participation_scores: Vec<f64>,
    angles: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct OrientReport {
    command: &'static str,
    method: Method,
    first_orthant: bool,
    dim: usize,
    snapshots: Vec<OrientSnapshot>,
}

fn orient(a: &OrientArgs) -> CliResult<()> {
    let exec = a.io.execution();
    let method: Method = a.orientation.method.into();
    let loaded = load_snapshots(&a.io)?;
    let oriented = loaded
        .series
        .orient(method, a.orientation.first_orthant, exec)?;
    let out = &a.io.output;
    let bases: Vec<Matrix> = oriented
        .snapshots()
        .iter()
        .map(|s| s.oriented_basis.clone())
        .collect();
    let eigenvalues: Vec<Vec<f64>> = oriented
        .snapshots()
        .iter()
        .map(|s| s.sorted_eigenvalues.clone())
        .collect();
    let manifest = write_series(
        out,
        Some(method),
        loaded.records,
        oriented.timestamps(),
        &eigenvalues,
        &bases,
    )?;

    let mut snapshots = Vec::with_capacity(oriented.len());
    for (k, snap) in oriented.snapshots().iter().enumerate() {
        let angles_file = numbered("angles", k, "csv");
        write_matrix(&out.join(&angles_file), snap.angles.as_matrix())?;
        snapshots.push(OrientSnapshot {
            index: k,
            timestamp: oriented.timestamps()[k],
            basis: manifest.bases[k].clone(),
            angles_file,
            eigenvalues: snap.sorted_eigenvalues.clone(),
            sort_indices: snap.sort_indices.clone(),
            reflections: snap.reflections.signs().to_vec(),
            participation_scores: participation_scores(&snap.oriented_basis)?,
            angles: angle_rows(&snap.angles),
        });
    }
    write_json(
        &out.join("report.json"),
        &OrientReport {
            command: "orient",
            method,
            first_orthant: a.orientation.first_orthant,
            dim: oriented.dim().unwrap_or(0),
            snapshots,
        },
    )?;
    info!(
        "oriented {} snapshots into {}",
        oriented.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ModeVariance {
    mode: usize,
    raw: f64,
    filtered: f64,
}

#[derive(Serialize)]
struct StageDispersion {
    mean_stdev: f64,
    reduced_entrywise: bool,
    reduced_fraction: f64,
}

#[derive(Serialize)]
struct DispersionSummary {
    samples: usize,
    stdev_defined: bool,
    raw_mean_stdev: f64,
    dynamic: StageDispersion,
    #[serde(skip_serializing_if = "Option::is_none")]
    dynamic_and_static: Option<StageDispersion>,
}

#[derive(Serialize)]
struct StabilizeReport {
    command: &'static str,
    method: Method,
    first_orthant: bool,
    dim: usize,
    kernel: Vec<f64>,
    delay: f64,
    input_snapshots: usize,
    windows: usize,
    informative: Option<usize>,
    first_angle_circular_variance: Vec<ModeVariance>,
    dispersion: DispersionSummary,
}

fn stage(report: &DispersionReport, raw: &DispersionReport) -> CliResult<StageDispersion> {
    Ok(StageDispersion {
        mean_stdev: report.mean_stdev(),
        reduced_entrywise: report.stdev_reduced_entrywise(raw)?,
        reduced_fraction: report.reduced_fraction(raw)?,
    })
}

fn write_angle_files(dir: &Path, angles: &[AngleMatrix]) -> CliResult<()> {
    for (k, a) in angles.iter().enumerate() {
        write_matrix(&dir.join(numbered("angles", k, "csv")), a.as_matrix())?;
    }
    Ok(())
}

fn stabilize(a: &StabilizeArgs) -> CliResult<()> {
    let exec = a.io.execution();
    let method: Method = a.orientation.method.into();
    let loaded = load_snapshots(&a.io)?;
    let oriented: EigenSeries = loaded
        .series
        .orient(method, a.orientation.first_orthant, exec)?;
    let kernel = FilterKernel::normalized(a.kernel.clone())?;
    let filtered = filter_eigenbases_with(&oriented, &kernel, method, exec)?;
    let dim = oriented.dim().unwrap_or(0);
    let modal = a
        .informative
        .map(|k| filtered.statically_stabilized(k))
        .transpose()?;

    let out = &a.io.output;
    write_series(
        out,
        Some(method),
        loaded.records,
        &filtered.timestamps,
        &filtered.eigenvalues,
        &filtered.bases,
    )?;
    write_angle_files(out, &filtered.angle_matrices)?;
    if let Some(m) = &modal {
        let dir = out.join("modal");
        write_series(
            &dir,
            Some(method),
            loaded.records,
            &m.timestamps,
            &m.eigenvalues,
            &m.bases,
        )?;
        write_angle_files(&dir, &m.angle_matrices)?;
    }

    // Raw statistics use the snapshots that end each filter window.
    let skip = kernel.len() - 1;
    let aligned = &oriented.snapshots()[skip..];
    let first_angle_circular_variance = (0..dim.saturating_sub(1))
        .map(|k| {
            let raw: Vec<f64> = aligned.iter().map(|s| s.angles.get(k, k + 1)).collect();
            ModeVariance {
                mode: k,
                raw: circular_variance(&raw),
                filtered: circular_variance(&filtered.angle_series(k, k + 1)),
            }
        })
        .collect();

    let ev_refs: Vec<&[f64]> = filtered.eigenvalues.iter().map(Vec::as_slice).collect();
    let raw_corr = correlations(
        &aligned
            .iter()
            .map(|s| &s.oriented_basis)
            .collect::<Vec<_>>(),
        &aligned
            .iter()
            .map(|s| s.sorted_eigenvalues.as_slice())
            .collect::<Vec<_>>(),
        exec,
    )?;
    let raw_disp = dispersion_report(&raw_corr)?;
    let dyn_disp = dispersion_report(&correlations(
        &filtered.bases.iter().collect::<Vec<_>>(),
        &ev_refs,
        exec,
    )?)?;
    let static_stage = match &modal {
        Some(m) => Some(stage(
            &dispersion_report(&correlations(
                &m.bases.iter().collect::<Vec<_>>(),
                &ev_refs,
                exec,
            )?)?,
            &raw_disp,
        )?),
        None => None,
    };

    write_json(
        &out.join("report.json"),
        &StabilizeReport {
            command: "stabilize",
            method,
            first_orthant: a.orientation.first_orthant,
            dim,
            kernel: kernel.weights().to_vec(),
            delay: kernel.delay(),
            input_snapshots: oriented.len(),
            windows: filtered.len(),
            informative: a.informative,
            first_angle_circular_variance,
            dispersion: DispersionSummary {
                samples: raw_disp.samples,
                stdev_defined: raw_disp.stdev_defined,
                raw_mean_stdev: raw_disp.mean_stdev(),
                dynamic: stage(&dyn_disp, &raw_disp)?,
                dynamic_and_static: static_stage,
            },
        },
    )?;
    info!(
        "stabilized {} windows (delay {}) into {}",
        filtered.len(),
        kernel.delay(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ClassifySnapshot {
    index: usize,
    timestamp: i64,
    informative_count: usize,
    informative: Vec<usize>,
    noise: Vec<usize>,
    steps: Vec<MpModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    density_file: Option<String>,
}

#[derive(Serialize)]
struct ClassifyReport {
    command: &'static str,
    records: usize,
    edge_multiplier: f64,
    snapshots: Vec<ClassifySnapshot>,
}

fn classify(a: &ClassifyArgs) -> CliResult<()> {
    let loaded = load_snapshots(&a.io)?;
    let Some(records) = a.records.or(loaded.records) else {
        return invalid("--records is required when the input does not record it");
    };
    let out = &a.io.output;
    ensure_dir(out)?;
    let series = &loaded.series;
    let results = a.io.execution().try_map_range(series.len(), |k| {
        let mut ev = clamp_eigenvalues(series.systems()[k].eigenvalues())?;
        ev.sort_by(|x, y| y.total_cmp(x));
        classify_modes_with(&ev, records, a.edge_multiplier).map_err(CliError::from)
    })?;

    let mut snapshots = Vec::with_capacity(results.len());
    for (k, c) in results.into_iter().enumerate() {
        let density_file = match (a.density_samples, c.noise_model()) {
            (Some(n), Some(model)) => {
                let name = numbered("density", k, "csv");
                let mut text = String::from("lambda,density\n");
                for (x, y) in model.density_grid(n)? {
                    text.push_str(&format!("{x},{y}\n"));
                }
                write_atomic(&out.join(&name), text.as_bytes())?;
                Some(name)
            }
            _ => None,
        };
        snapshots.push(ClassifySnapshot {
            index: k,
            timestamp: series.timestamps()[k],
            informative_count: c.informative_count(),
            informative: c.informative,
            noise: c.noise,
            steps: c.steps,
            density_file,
        });
    }
    write_json(
        &out.join("report.json"),
        &ClassifyReport {
            command: "classify",
            records,
            edge_multiplier: a.edge_multiplier,
            snapshots,
        },
    )?;
    info!("classified {} spectra into {}", series.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct BaselineComparison {
    samples: usize,
    mean_stdev: f64,
    baseline_mean_stdev: f64,
    stdev_reduced_entrywise: bool,
    reduced_fraction: f64,
}

#[derive(Serialize)]
struct Shrinkage {
    alpha: f64,
    informative: usize,
    files: Vec<String>,
}

#[derive(Serialize)]
struct CorrReport {
    command: &'static str,
    dim: usize,
    files: Vec<String>,
    dispersion: DispersionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<BaselineComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shrinkage: Option<Shrinkage>,
}

fn corr(a: &CorrArgs) -> CliResult<()> {
    let exec = a.io.execution();
    let loaded = load_snapshots(&a.io)?;
    let systems = loaded.series.systems();
    let corr = correlations(
        &systems.iter().map(EigenSystem::basis).collect::<Vec<_>>(),
        &systems
            .iter()
            .map(EigenSystem::eigenvalues)
            .collect::<Vec<_>>(),
        exec,
    )?;
    let out = &a.io.output;
    ensure_dir(out)?;
    let mut files = Vec::with_capacity(corr.len());
    for (k, c) in corr.iter().enumerate() {
        let name = numbered("corr", k, "csv");
        write_matrix(&out.join(&name), c.as_matrix())?;
        files.push(name);
    }
    let dispersion = dispersion_report(&corr)?;

    let baseline = match &a.baseline {
        Some(dir) => {
            let (manifest, bases) = read_series(dir)?;
            let mut matched_bases = Vec::new();
            let mut matched_ev = Vec::new();
            for t in loaded.series.timestamps() {
                let Some(k) = manifest.timestamps.iter().position(|x| x == t) else {
                    return invalid(format!("baseline has no snapshot at timestamp {t}"));
                };
                matched_bases.push(&bases[k]);
                matched_ev.push(manifest.eigenvalues[k].as_slice());
            }
            let base = dispersion_report(&correlations(&matched_bases, &matched_ev, exec)?)?;
            Some(BaselineComparison {
                samples: base.samples,
                mean_stdev: dispersion.mean_stdev(),
                baseline_mean_stdev: base.mean_stdev(),
                stdev_reduced_entrywise: dispersion.stdev_reduced_entrywise(&base)?,
                reduced_fraction: dispersion.reduced_fraction(&base)?,
            })
        }
        None => None,
    };

    let shrinkage = match (a.alpha, a.informative) {
        (Some(alpha), Some(k)) => {
            let method: Method = a.orientation.method.into();
            let oriented = loaded
                .series
                .orient(method, a.orientation.first_orthant, exec)?;
            let shrunk = exec.try_map_range(oriented.len(), |i| {
                let r = &oriented.snapshots()[i];
                let ev = clamp_eigenvalues(&r.sorted_eigenvalues)?;
                shrink_noise_subspace(r, &ev, k, alpha).map_err(CliError::from)
            })?;
            let mut names = Vec::with_capacity(shrunk.len());
            for (i, m) in shrunk.iter().enumerate() {
                let name = numbered("shrunk", i, "csv");
                write_matrix(&out.join(&name), m)?;
                names.push(name);
            }
            Some(Shrinkage {
                alpha,
                informative: k,
                files: names,
            })
        }
        _ => None,
    };
    if !dispersion.stdev_defined {
        warn!("a single snapshot has no dispersion; stdev reported as 0");
    }

    write_json(
        &out.join("report.json"),
        &CorrReport {
            command: "corr",
            dim: dispersion.dim,
            files,
            dispersion,
            baseline,
            shrinkage,
        },
    )?;
    info!(
        "wrote {} correlation matrices into {}",
        corr.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SynthReport {
    command: &'static str,
    seed: u64,
    dim: usize,
    directed: usize,
    sigma: f64,
    length: usize,
    parity: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    panel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    panel_records: Option<usize>,
    spikes: Vec<f64>,
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let mut spec = WobbleSpec::standard(a.dim, a.directed, a.sigma, a.length, a.seed);
    spec.reflection_parity = a.parity.into();
    let raw = wobble_series(&spec)?;
    let bases: Vec<Matrix> = raw.systems().iter().map(|s| s.basis().clone()).collect();
    let eigenvalues: Vec<Vec<f64>> = raw
        .systems()
        .iter()
        .map(|s| s.eigenvalues().to_vec())
        .collect();
    write_series(
        &a.output,
        None,
        None,
        raw.timestamps(),
        &eigenvalues,
        &bases,
    )?;

    let panel = match a.panel_records {
        Some(t) => {
            let p = spiked_panel(t, a.dim, &a.spikes, a.seed)?;
            write_matrix(&a.output.join("panel.csv"), &p)?;
            Some("panel.csv".to_string())
        }
        None => None,
    };
    write_json(
        &a.output.join("synth.json"),
        &SynthReport {
            command: "synth",
            seed: a.seed,
            dim: a.dim,
            directed: a.directed,
            sigma: a.sigma,
            length: a.length,
            parity: match spec.reflection_parity {
                ReflectionParity::Even => "even",
                ReflectionParity::Odd => "odd",
            },
            panel,
            panel_records: a.panel_records,
            spikes: a.spikes.clone(),
        },
    )?;
    info!("wrote synthetic fixture into {}", a.output.display());
    Ok(())
}
