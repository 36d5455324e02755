use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use liekernels::gp::{fit_hyperparameters, log_marginal_likelihood, FitResult, Noise, Posterior};
use liekernels::io::{read_dataset, read_points, read_rows, write_json, write_metadata, write_table};
use liekernels::kernels::{build_kernel, SpectralKernel};
use liekernels::repr::enumerate_representations;
use liekernels::rng::{derive_seed, seeded};
use liekernels::sampling::{build_feature_basis, posterior_draws, prior_draws};
use liekernels::spaces::{haar_sample_space, MetricScale, SpaceId, SpacePoint};
use liekernels::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::Command;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `<out><suffix>`, e.g. `run.csv.config.json`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn eigenvalue_scale(space: &SpaceId) -> &'static str {
    match space {
        SpaceId::Sphere { metric, .. } | SpaceId::ProjectiveSpace { metric, .. } => match metric {
            MetricScale::Unit => "unit",
            MetricScale::Killing => "killing",
        },
        _ => "killing",
    }
}

fn kernel_meta(k: &SpectralKernel) -> Vec<(&'static str, String)> {
    vec![
        ("space", k.space().to_string()),
        ("eigenvalue_scale", eigenvalue_scale(k.space()).into()),
        ("density", serde_json::to_string(k.density()).unwrap_or_default()),
        ("budget", k.budget().to_string()),
        ("levels", k.levels().len().to_string()),
        ("normalizer", format!("{:?}", k.normalizer())),
        ("truncation_residual", format!("{:?}", k.truncation_residual())),
    ]
}

fn coordinate_header(prefix: &str, width: usize) -> Vec<String> {
    (1..=width).map(|i| format!("{prefix}{i}")).collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    liekernels::io::matrix_rows(m)
}

pub fn run(cmd: &Command, cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let space = cfg.space_id()?;
    let mut inputs = serde_json::Map::new();
    let mut extra: Vec<(PathBuf, serde_json::Value)> = Vec::new();
    let mut w = output(out)?;
    match cmd {
        Command::Reps => reps(&space, cfg, &mut w)?,
        Command::Kernel { points } => {
            inputs.insert("points".into(), json!(points));
            let pts = read_points(&space, open(points)?)?;
            let k = build_kernel(&space, &cfg.density()?, cfg.budget)?;
            let m = k.kernel_matrix(&pts, &pts)?;
            match cfg.format {
                Format::Csv => write_table(&mut w, &kernel_meta(&k), None, rows(&m))?,
                Format::Json => write_json(&mut w, &json!({ "kernel": k.info(), "matrix": rows(&m) }))?,
            }
        }
        Command::Sample { points, data, .. } => {
            inputs.insert("points".into(), json!(points));
            let seed = cfg.require_seed()?;
            let pts = read_points(&space, open(points)?)?;
            let k = build_kernel(&space, &cfg.density()?, cfg.budget)?;
            let (mode, draws) = match data {
                Some(d) => {
                    inputs.insert("data".into(), json!(d));
                    let data = read_dataset(&space, open(d)?, Noise::Scalar(cfg.noise))?;
                    ("posterior", posterior_draws(&k, cfg.features, &data, &pts, cfg.count, seed)?)
                }
                None => ("prior", prior_draws(&k, cfg.features, &pts, cfg.count, seed)?),
            };
            let mut meta = kernel_meta(&k);
            meta.extend([
                ("mode", mode.to_string()),
                ("seed", seed.to_string()),
                ("features", cfg.features.to_string()),
                ("count", cfg.count.to_string()),
            ]);
            match cfg.format {
                Format::Csv => write_table(&mut w, &meta, None, rows(&draws))?,
                Format::Json => write_json(
                    &mut w,
                    &json!({ "mode": mode, "seed": seed, "kernel": k.info(), "samples": rows(&draws) }),
                )?,
            }
        }
        Command::Regress { data, query, .. } => {
            inputs.insert("data".into(), json!(data));
            if let Some(q) = query {
                inputs.insert("query".into(), json!(q));
            }
            let report = regress(&space, cfg, data, query.as_deref())?;
            match cfg.format {
                Format::Csv => {
                    let width = space.coordinate_len();
                    let mut header = coordinate_header("x", width);
                    header.extend(["mean", "sd", "sample"].map(String::from));
                    let mut meta = kernel_meta(&report.kernel);
                    meta.push(("seed", report.seed.to_string()));
                    meta.push(("log_marginal_likelihood", format!("{:?}", report.log_marginal_likelihood)));
                    let table = report.query.iter().enumerate().map(|(i, p)| {
                        let mut r = p.to_flat();
                        r.extend([report.mean[i], report.sd[i], report.sample[i]]);
                        r
                    });
                    write_table(&mut w, &meta, Some(&header), table)?;
                    if let (Some(fit), Some(o)) = (&report.fit, out) {
                        extra.push((sibling(o, ".fit.json"), serde_json::to_value(fit).map_err(json_err)?));
                    }
                }
                Format::Json => write_json(&mut w, &report.to_json())?,
            }
        }
        Command::Converge { pairs, .. } => {
            inputs.insert("pairs".into(), json!(pairs));
            converge(&space, cfg, pairs, &mut w)?;
        }
    }
    w.flush()?;
    if let Some(o) = out {
        let echo = json!({ "command": command_name(cmd), "config": cfg, "inputs": inputs, "output": o });
        write_json(File::create(sibling(o, ".config.json"))?, &echo)?;
        for (path, value) in extra {
            write_json(File::create(&path)?, &value)?;
        }
    }
    Ok(())
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(e.to_string())
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Reps => "reps",
        Command::Kernel { .. } => "kernel",
        Command::Sample { .. } => "sample",
        Command::Regress { .. } => "regress",
        Command::Converge { .. } => "converge",
    }
}

#[derive(Serialize)]
struct LevelRow {
    level: usize,
    signature: Option<Vec<i64>>,
    dimension: u64,
    eigenvalue: f64,
}

fn reps(space: &SpaceId, cfg: &RunConfig, w: &mut dyn Write) -> Result<()> {
    let table: Vec<LevelRow> = match space {
        SpaceId::Group(g) => enumerate_representations(*g, cfg.budget)?
            .into_iter()
            .enumerate()
            .map(|(i, r)| LevelRow {
                level: i,
                signature: Some(r.signature.parts().to_vec()),
                dimension: r.dimension,
                eigenvalue: r.eigenvalue,
            })
            .collect(),
        _ => build_kernel(space, &cfg.density()?, cfg.budget)?
            .levels()
            .iter()
            .enumerate()
            .map(|(i, l)| LevelRow {
                level: i,
                signature: l.signature().map(|s| s.parts().to_vec()),
                dimension: l.dimension,
                eigenvalue: l.eigenvalue,
            })
            .collect(),
    };
    match cfg.format {
        Format::Json => write_json(w, &json!({ "space": space.to_string(), "levels": table })),
        Format::Csv => {
            let meta = [
                ("space", space.to_string()),
                ("eigenvalue_scale", eigenvalue_scale(space).to_string()),
                ("budget", cfg.budget.to_string()),
            ];
            let mut w = w;
            write_metadata(&mut w, &meta)?;
            writeln!(w, "level,signature,dimension,eigenvalue")?;
            for r in &table {
                let sig = r
                    .signature
                    .as_ref()
                    .map(|s| s.iter().map(i64::to_string).collect::<Vec<_>>().join(" "))
                    .unwrap_or_default();
                writeln!(w, "{},{},{},{:?}", r.level, sig, r.dimension, r.eigenvalue)?;
            }
            Ok(())
        }
    }
}

struct RegressReport {
    kernel: SpectralKernel,
    seed: u64,
    query: Vec<SpacePoint>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    sample: Vec<f64>,
    log_marginal_likelihood: f64,
    fit: Option<FitResult>,
}

impl RegressReport {
    fn to_json(&self) -> serde_json::Value {
        json!({
            "kernel": self.kernel.info(),
            "seed": self.seed,
            "log_marginal_likelihood": self.log_marginal_likelihood,
            "query": self.query.iter().map(SpacePoint::to_flat).collect::<Vec<_>>(),
            "mean": self.mean,
            "sd": self.sd,
            "sample": self.sample,
            "fit": self.fit,
        })
    }
}

fn regress(space: &SpaceId, cfg: &RunConfig, data: &Path, query: Option<&Path>) -> Result<RegressReport> {
    let seed = cfg.require_seed()?;
    let mut data = read_dataset(space, open(data)?, Noise::Scalar(cfg.noise))?;
    let query = match query {
        Some(q) => read_points(space, open(q)?)?,
        None => haar_sample_space(space, &mut seeded(derive_seed(seed, 1)), cfg.grid),
    };
    let mut density = cfg.density()?;
    let fit = if cfg.fit {
        let fit = fit_hyperparameters(space, cfg.kind(), &data, cfg.hyperparameters(), cfg.budget, derive_seed(seed, 2))?;
        density = density.with_params(fit.params.kappa, fit.params.sigma2)?;
        data.noise = Noise::Scalar(fit.params.noise);
        Some(fit)
    } else {
        None
    };
    let k = build_kernel(space, &density, cfg.budget)?;
    let lml = log_marginal_likelihood(&k, &data)?;
    let posterior = Posterior::new(k.clone(), data.clone())?;
    let (mean, var) = posterior.mean_var(&query)?;
    let sample = posterior_draws(&k, cfg.features, &data, &query, 1, derive_seed(seed, 3))?;
    Ok(RegressReport {
        kernel: k,
        seed,
        mean: mean.iter().copied().collect(),
        sd: var.iter().map(|v| v.max(0.0).sqrt()).collect(),
        sample: sample.column(0).iter().copied().collect(),
        query,
        log_marginal_likelihood: lml,
        fit,
    })
}

fn converge(space: &SpaceId, cfg: &RunConfig, pairs: &Path, w: &mut dyn Write) -> Result<()> {
    let width = space.coordinate_len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, row) in read_rows(open(pairs)?)? {
        if row.len() != 2 * width {
            return Err(Error::Parse(format!(
                "row {line}: expected {} columns (two points on {space}), found {}",
                2 * width,
                row.len()
            )));
        }
        let parse = |v: &[f64]| space.point_from_flat(v).map_err(|e| Error::Parse(format!("row {line}: {e}")));
        xs.push(parse(&row[..width])?);
        ys.push(parse(&row[width..])?);
    }
    let density = cfg.density()?;
    let values: Vec<Vec<f64>> = cfg
        .budgets
        .iter()
        .map(|&b| {
            let k = build_kernel(space, &density, b)?;
            xs.iter().zip(&ys).map(|(x, y)| k.value(x, y)).collect()
        })
        .collect::<Result<_>>()?;
    let differences: Vec<Vec<f64>> =
        values.windows(2).map(|p| p[1].iter().zip(&p[0]).map(|(a, b)| (a - b).abs()).collect()).collect();

    let mut rff = Vec::new();
    let mut errors = Vec::new();
    if !cfg.feature_ladder.is_empty() {
        let seed = cfg.require_seed()?;
        let k = build_kernel(space, &density, cfg.budget)?;
        let exact: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| k.value(x, y)).collect::<Result<_>>()?;
        for &l in &cfg.feature_ladder {
            let basis = build_feature_basis(&k, l, derive_seed(seed, l as u64))?;
            let (fx, fy) = (basis.features(&xs)?, basis.features(&ys)?);
            let est: Vec<f64> = (0..xs.len()).map(|i| fx.row(i).dot(&fy.row(i))).collect();
            errors.push(est.iter().zip(&exact).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>());
            rff.push(est);
        }
    }

    match cfg.format {
        Format::Json => write_json(
            w,
            &json!({
                "space": space.to_string(),
                "budgets": cfg.budgets,
                "values": values,
                "differences": differences,
                "features": cfg.feature_ladder,
                "reference_budget": cfg.budget,
                "rff": rff,
                "rff_errors": errors,
            }),
        ),
        Format::Csv => {
            let mut header: Vec<String> = cfg.budgets.iter().map(|b| format!("budget_{b}")).collect();
            header.extend(cfg.budgets.iter().skip(1).map(|b| format!("diff_{b}")));
            header.extend(cfg.feature_ladder.iter().map(|l| format!("rff_{l}")));
            header.extend(cfg.feature_ladder.iter().map(|l| format!("err_{l}")));
            let columns: Vec<&Vec<f64>> =
                values.iter().chain(&differences).chain(&rff).chain(&errors).collect();
            let table = (0..xs.len()).map(|i| columns.iter().map(|c| c[i]).collect::<Vec<f64>>());
            let meta = [
                ("space", space.to_string()),
                ("density", serde_json::to_string(&density).unwrap_or_default()),
                ("reference_budget", cfg.budget.to_string()),
            ];
            write_table(w, &meta, Some(&header), table)
        }
    }
}
