use std::fs;
use std::io::{ErrorKind, Write};
use std::path::Path;

use serde::Serialize;

use robcor::data::{fmt_full, write_records, write_table};
use robcor::fastddc::{self, ColumnSelection, DdcOptions, ReducedDim};
use robcor::knn::Backend;
use robcor::sim::{self, Contamination, Estimator, SimScenario};
use robcor::{
    distcor, moments, rpca, theory, DataMatrix, Error, PsiFamily, PsiSpec, Result, Scalar,
};

use crate::args::{
    BenchArgs, CorrArgs, DcorArgs, DdcArgs, Precision, RpcaArgs, SimArgs, TheoryArgs, TransformArgs,
};
use crate::SCHEMA_VERSION;

pub struct Context {
    pub seed: u64,
    pub invocation: String,
}

impl Context {
    /// Comment line of every CSV output.
    fn header(&self) -> String {
        format!("{} (seed {})", self.invocation, self.seed)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn print_json<T: Serialize>(kind: &str, value: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        schema_version: u32,
        kind: &'a str,
        #[serde(flatten)]
        result: &'a T,
    }
    let doc = Doc {
        schema_version: SCHEMA_VERSION,
        kind,
        result: value,
    };
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Input(format!("cannot encode JSON: {}", e)))?;
    match writeln!(std::io::stdout().lock(), "{}", text) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn psi_spec(t: &TransformArgs) -> Result<PsiSpec> {
    let spec = match &t.psi_config {
        Some(path) => PsiSpec::from_config(&read_text(path)?)?,
        None => {
            let family: PsiFamily = t.transform.parse()?;
            let (b, c) = match family {
                PsiFamily::Wrapping => (t.b.or(Some(1.5)), t.c.or(Some(4.0))),
                PsiFamily::Huber => (t.b.or(Some(1.5)), t.c),
                _ => (t.b, t.c),
            };
            let alpha = match family {
                PsiFamily::RankTruncatedNs => t.alpha.or(Some(0.05)),
                _ => t.alpha,
            };
            PsiSpec::build(family, b, c, alpha)?
        }
    };
    if let Some(path) = &t.save_psi {
        fs::write(path, spec.to_config()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    Ok(spec)
}

fn check_quantile(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!(
            "--{} must lie in (0, 1), got {}",
            name, p
        )));
    }
    Ok(())
}

fn matrix_rows<T: Scalar>(m: &nalgebra::DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].as_f64()).collect())
        .collect()
}

#[derive(Serialize)]
struct CorrSummary {
    transform: String,
    n: usize,
    d: usize,
    min_eigenvalue: f64,
    flagged_rows: Option<usize>,
}

pub fn corr(ctx: &Context, a: &CorrArgs) -> Result<()> {
    check_quantile("p", a.p)?;
    let spec = psi_spec(&a.transform)?;
    let x = DataMatrix::<f64>::read_csv(&a.input)?;
    match a.precision {
        Precision::F64 => corr_with(ctx, a, &spec, &x),
        Precision::F32 => corr_with(ctx, a, &spec, &x.cast::<f32>()),
    }
}

fn corr_with<T: Scalar>(
    ctx: &Context,
    a: &CorrArgs,
    spec: &PsiSpec,
    x: &DataMatrix<T>,
) -> Result<()> {
    let model = moments::scatter_matrix(x, spec)?;
    let names = model.names();
    let header = ctx.header();
    write_table(
        &a.output,
        Some(&header),
        Some(&names),
        &names,
        &matrix_rows(&model.correlation),
    )?;
    if let Some(path) = &a.covariance {
        write_table(
            path,
            Some(&header),
            Some(&names),
            &names,
            &matrix_rows(&model.covariance()),
        )?;
    }
    let mut flagged_rows = None;
    if let Some(path) = &a.distances {
        let md = model.mahalanobis_distances(x)?;
        let flags = moments::flag_rows(&md, model.dim(), a.p)?;
        flagged_rows = Some(flags.iter().filter(|f| **f).count());
        let rows: Vec<Vec<String>> = md
            .iter()
            .zip(&flags)
            .enumerate()
            .map(|(i, (m, f))| vec![(i + 1).to_string(), fmt_full(*m), f.to_string()])
            .collect();
        write_records(path, Some(&header), &["row", "distance", "flagged"], &rows)?;
    }
    print_json(
        "corr",
        &CorrSummary {
            transform: spec.label(),
            n: model.n,
            d: model.dim(),
            min_eigenvalue: model.min_eigenvalue(),
            flagged_rows,
        },
    )
}

fn report_rows(reports: &[theory::TheoryReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                fmt_full(r.breakdown),
                fmt_full(r.efficiency),
                fmt_full(r.gross_error_sensitivity),
                fmt_full(r.rejection_point),
                fmt_full(r.cor_x_gx),
            ]
        })
        .collect()
}

pub fn theory(ctx: &Context, a: &TheoryArgs) -> Result<()> {
    let spec = psi_spec(&a.transform)?;
    let header = ctx.header();
    if a.bias_curve {
        if !(a.eps_max > 0.0 && a.eps_max < 1.0) {
            return Err(Error::Config(format!(
                "--eps-max must lie in (0, 1), got {}",
                a.eps_max
            )));
        }
        if a.eps_steps == 0 {
            return Err(Error::Config("--eps-steps must be positive".into()));
        }
        let eps: Vec<f64> = (0..=a.eps_steps)
            .map(|i| a.eps_max * i as f64 / a.eps_steps as f64)
            .collect();
        let curve = theory::bias_curve(&spec, a.rho, &eps)?;
        let rows: Vec<Vec<f64>> = (0..eps.len())
            .map(|i| vec![curve.eps[i], curve.upper[i], curve.lower[i]])
            .collect();
        let out = a.out.as_ref().expect("clap requires --out");
        let cols = ["eps", "upper", "lower"].map(String::from);
        write_table(out, Some(&header), None, &cols, &rows)?;
        return print_json("bias-curve", &curve);
    }
    let reports = if a.all {
        theory::table2(&theory::standard_specs()?)?
    } else {
        vec![theory::theory_report(&spec)?]
    };
    if let Some(path) = &a.report {
        write_records(
            path,
            Some(&header),
            &[
                "transform",
                "breakdown",
                "efficiency",
                "gross_error_sensitivity",
                "rejection_point",
                "cor_x_gx",
            ],
            &report_rows(&reports),
        )?;
    }
    #[derive(Serialize)]
    struct Reports<'a> {
        reports: &'a [theory::TheoryReport],
    }
    print_json("theory", &Reports { reports: &reports })
}

pub fn dcor(ctx: &Context, a: &DcorArgs) -> Result<()> {
    let x = DataMatrix::<f64>::read_csv(&a.x)?;
    let y = DataMatrix::<f64>::read_csv(&a.y)?;
    let result = match a.perm {
        Some(b) => distcor::dcor_permutation_test(&x, &y, b, ctx.seed, a.robust)?,
        None if a.robust => distcor::robust_dcor(&x, &y)?,
        None => distcor::dcor(&x, &y)?,
    };
    #[derive(Serialize)]
    struct Out<'a> {
        seed: u64,
        #[serde(flatten)]
        result: &'a robcor::DCorResult,
    }
    print_json(
        "dcor",
        &Out {
            seed: ctx.seed,
            result: &result,
        },
    )
}

#[derive(Serialize)]
struct DdcSummary {
    n: usize,
    d: usize,
    q: usize,
    cutoff: f64,
    flagged_cells: usize,
    flagged_rows: usize,
    warnings: Vec<String>,
}

pub fn ddc(ctx: &Context, a: &DdcArgs) -> Result<()> {
    let opts = DdcOptions {
        k: a.k,
        q: a.q.parse::<ReducedDim>()?,
        min_cor: a.min_cor,
        p: a.p,
        backend: a.backend.parse::<Backend>()?,
        spec: psi_spec(&a.transform)?,
        ..Default::default()
    };
    opts.validate()?;
    let x = DataMatrix::<f64>::read_csv(&a.input)?;
    let report = fastddc::fast_ddc(&x, &opts)?;
    if let Some(path) = &a.flags {
        report.write_flags_csv(path, Some(&ctx.header()))?;
    }
    if let Some(path) = &a.cellmap {
        let cols = match a.top {
            Some(m) => ColumnSelection::TopFlagged(m),
            None => ColumnSelection::All,
        };
        report.export_cellmap(None, &cols, a.block, path)?;
    }
    print_json(
        "ddc",
        &DdcSummary {
            n: report.nrows(),
            d: report.ncols(),
            q: report.q,
            cutoff: report.cutoff,
            flagged_cells: report.flagged_count(),
            flagged_rows: report.row_flags.iter().filter(|f| **f).count(),
            warnings: report.warnings.clone(),
        },
    )
}

#[derive(Serialize)]
struct RpcaSummary {
    transform: String,
    k: usize,
    singular_values: Vec<f64>,
    iterations: usize,
    masked_cells: usize,
    warnings: Vec<String>,
}

pub fn rpca(ctx: &Context, a: &RpcaArgs) -> Result<()> {
    check_quantile("p", a.p)?;
    let spec = psi_spec(&a.transform)?;
    let x = DataMatrix::<f64>::read_csv(&a.input)?;
    let model = rpca::fit_rpca(&x, &spec, a.k)?;
    let header = ctx.header();
    if let Some(path) = &a.scores {
        let cols: Vec<String> = (1..=a.k).map(|i| format!("PC{}", i)).collect();
        write_table(
            path,
            Some(&header),
            None,
            &cols,
            &matrix_rows(&model.scores(&x)?),
        )?;
    }
    if let Some(path) = &a.loadings {
        let rows: Vec<String> = (1..=a.k).map(|i| format!("PC{}", i)).collect();
        write_table(
            path,
            Some(&header),
            Some(&rows),
            x.names(),
            &matrix_rows(&model.loadings),
        )?;
    }
    let mask = model.residual_mask(&x, a.p)?;
    if let Some(path) = &a.mask {
        let rows: Vec<Vec<f64>> = (0..x.nrows())
            .map(|i| {
                (0..x.ncols())
                    .map(|j| if mask.mask[(i, j)] { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        write_table(path, Some(&header), None, x.names(), &rows)?;
    }
    if let Some(path) = &a.mask_image {
        mask.image(a.block)?.write(path)?;
    }
    print_json(
        "rpca",
        &RpcaSummary {
            transform: spec.label(),
            k: model.k,
            singular_values: model.singular_values.clone(),
            iterations: model.iterations,
            masked_cells: mask.masked_count(),
            warnings: mask.warnings.clone(),
        },
    )
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{}' in --{}", v.trim(), flag)))
        })
        .collect()
}

pub fn sim(ctx: &Context, a: &SimArgs) -> Result<()> {
    let mut s = match &a.config {
        Some(path) => SimScenario::from_config(&read_text(path)?)?,
        None => SimScenario::new(Contamination::None, 0.0, 0.0)?,
    };
    s.seed = ctx.seed;
    if let Some(kind) = &a.kind {
        s.kind = kind.parse()?;
    }
    if let Some(v) = a.eps {
        s.eps = v;
    }
    if let Some(v) = a.outlier_k {
        s.k = v;
    }
    if let Some(v) = a.m {
        s.m = v;
    }
    if let Some(v) = a.n {
        s.n = v;
    }
    if let Some(r) = &a.rho {
        s.rhos = parse_list("rho", r)?;
    }
    if let Some(e) = &a.estimators {
        s.estimators = e
            .split(',')
            .map(|v| v.trim().parse::<Estimator>())
            .collect::<Result<_>>()?;
    }
    s.validate()?;
    let rows = sim::run_scenario(&s)?;
    sim::write_sim_csv(&a.output, Some(&ctx.header()), &rows)?;
    #[derive(Serialize)]
    struct Out {
        rows: usize,
        m: usize,
        seed: u64,
    }
    print_json(
        "sim",
        &Out {
            rows: rows.len(),
            m: s.m,
            seed: s.seed,
        },
    )
}

pub fn bench(ctx: &Context, a: &BenchArgs) -> Result<()> {
    let ds: Vec<usize> = parse_list("d", &a.d)?;
    if a.n < 3 || ds.iter().any(|&d| d < 2) {
        return Err(Error::Config(
            "--n must be at least 3 and every --d at least 2".into(),
        ));
    }
    let mut specs = vec![Estimator::new(PsiSpec::identity())];
    for e in a.estimators.split(',') {
        specs.push(e.trim().parse()?);
    }
    let rows = sim::timing_benchmark(a.n, &ds, &specs, a.repeats, ctx.seed)?;
    if let Some(path) = &a.output {
        let recs: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.estimator.clone(),
                    r.n.to_string(),
                    r.d.to_string(),
                    fmt_full(r.seconds),
                    fmt_full(r.ratio),
                ]
            })
            .collect();
        write_records(
            path,
            Some(&ctx.header()),
            &["estimator", "n", "d", "seconds", "ratio"],
            &recs,
        )?;
    }
    #[derive(Serialize)]
    struct Out<'a> {
        timings: &'a [sim::TimingRow],
    }
    print_json("bench", &Out { timings: &rows })
}
