use std::fmt;
use std::path::{Path, PathBuf};

use log::info;
use wavblur::bench::{bench_operator, loglog_slope, scaling_sweep, to_csv, BenchRow};
use wavblur::kernel::Kernel1d;
use wavblur::kv::KeyValues;
use wavblur::pattern::{build_theta_masked, generate_mask};
use wavblur::restore::SolveStatus;
use wavblur::theta::decay::verify_decay_1d;
use wavblur::theta::{load_theta, save_theta};
use wavblur::theta::{build_theta, build_theta_thresholded, operator_error_with, threshold_many};
use wavblur::wavelet::default_levels;
use wavblur::*;

use crate::manifest::{load_solver_config, parse_list, Manifest};
use crate::{Command, Transform};

#[derive(Debug)]
pub enum Failure {
    Lib(Error),
    /// The solver stalled outside the fidelity ball; outputs were still
    /// written.
    Infeasible,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Infeasible => f.write_str("restoration did not reach the fidelity ball"),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_image(path: &Path) -> Result<Image> {
    load_image(path, ImageFormat::from_path(path)?)
}

fn write_image(img: &Image, path: &Path) -> Result<()> {
    save_image(img, path, ImageFormat::from_path(path)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn make_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn transform_of(t: &Transform, size: usize) -> Result<(WaveletFamily, usize)> {
    Ok((WaveletFamily::from_name(&t.wavelet)?, t.levels.unwrap_or_else(|| default_levels(size))))
}

fn emit(kv: &KeyValues) {
    print!("{}", kv.to_text());
}

fn theta_report(kv: &mut KeyValues, theta: &SparseTheta) {
    kv.insert("dim", theta.dim());
    kv.insert("nnz", theta.nnz());
    kv.insert("density", format!("{:.4}", theta.density()));
    kv.insert("wavelet", &theta.meta().family);
    kv.insert("levels", theta.meta().levels);
    kv.insert("kernel", &theta.meta().kernel_id);
}

/// `{k}` in `out` is replaced by the budget; otherwise `out` is a directory.
fn budget_path(out: &Path, k: usize) -> PathBuf {
    let text = out.to_string_lossy();
    if text.contains("{k}") {
        PathBuf::from(text.replace("{k}", &k.to_string()))
    } else {
        out.join(format!("theta_k{k}.wbth"))
    }
}

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Blur { image, kernel, out } => blur(&image, &kernel, &out),
        Command::Degrade {
            image,
            kernel,
            sigma,
            seed,
            out,
            blurred,
        } => degrade(&image, &kernel, sigma, seed, &out, blurred.as_deref()),
        Command::BuildTheta {
            kernel,
            transform,
            k,
            out,
        } => build(&kernel, &transform, k, &out),
        Command::Threshold { theta, k, out } => threshold(&theta, &k, &out),
        Command::Pattern {
            kernel,
            pattern,
            transform,
            out,
        } => build_pattern(&kernel, &pattern, &transform, &out),
        Command::Restore {
            image,
            theta,
            config,
            sigma,
            iters,
            tol,
            clean,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => load_solver_config(&path)?,
                None => SolverConfig::default(),
            };
            cfg.sigma_noise = sigma.unwrap_or(cfg.sigma_noise);
            cfg.max_iters = iters.unwrap_or(cfg.max_iters);
            cfg.tol = tol.unwrap_or(cfg.tol);
            restore_cmd(&image, &theta, &cfg, clean.as_deref(), &out)
        }
        Command::Bench {
            kernel,
            transform,
            k,
            reps,
            seed,
            sizes,
            out,
            scaling_out,
        } => bench(&kernel, &transform, &k, reps, seed, &sizes, &out, scaling_out.as_deref()),
        Command::VerifyDecay {
            size,
            sigma_min,
            sigma_max,
            truncation,
            transform,
            out,
        } => verify_decay(size, sigma_min, sigma_max, truncation, &transform, &out),
        Command::Reproduce { manifest, reps, out } => {
            let manifest = match manifest {
                Some(path) => Manifest::load(&path)?,
                None => Manifest::default(),
            };
            reproduce(&manifest, reps, &out)
        }
    }
}

fn blur(image: &Path, kernel: &Path, out: &Path) -> Outcome {
    let spec = KernelSpec::load(kernel)?;
    let img = read_image(image)?;
    let blurred = ExactOperator::new(&spec).apply(&img)?;
    write_image(&blurred, out)?;
    let mut kv = KeyValues::default();
    kv.insert("command", "blur");
    kv.insert("kernel", spec.id());
    kv.insert("size", spec.size);
    kv.insert("out", out.display());
    emit(&kv);
    Ok(())
}

fn degrade(image: &Path, kernel: &Path, sigma: f64, seed: u64, out: &Path, blurred_out: Option<&Path>) -> Outcome {
    let spec = KernelSpec::load(kernel)?;
    let noise = NoiseModel::new(sigma, seed)?;
    let clean = read_image(image)?;
    let blurred = ExactOperator::new(&spec).apply(&clean)?;
    let degraded = add_noise(&blurred, noise);
    if let Some(path) = blurred_out {
        write_image(&blurred, path)?;
    }
    write_image(&degraded, out)?;
    let mut kv = KeyValues::default();
    kv.insert("command", "degrade");
    kv.insert("kernel", spec.id());
    kv.insert("sigma", sigma);
    kv.insert("seed", seed);
    kv.insert("snr_db", format!("{:.4}", snr_db(&degraded, &clean)?));
    kv.insert("out", out.display());
    emit(&kv);
    Ok(())
}

fn build(kernel: &Path, transform: &Transform, k: Option<usize>, out: &Path) -> Outcome {
    let spec = KernelSpec::load(kernel)?;
    let (family, levels) = transform_of(transform, spec.size)?;
    let theta = match k {
        Some(k) => build_theta_thresholded(&spec, &family, levels, k)?,
        None => build_theta(&spec, &family, levels)?,
    };
    save_theta(&theta, out)?;
    let mut kv = KeyValues::default();
    kv.insert("command", "build-theta");
    theta_report(&mut kv, &theta);
    kv.insert("budget", theta.meta().budget);
    kv.insert("out", out.display());
    emit(&kv);
    Ok(())
}

fn threshold(theta: &Path, ks: &str, out: &Path) -> Outcome {
    let ks = parse_list(ks)?;
    let full = load_theta(theta)?;
    if !out.to_string_lossy().contains("{k}") {
        make_dir(out)?;
    }
    for (k, t) in ks.iter().zip(threshold_many(&full, &ks)?) {
        let path = budget_path(out, *k);
        save_theta(&t, &path)?;
        let mut kv = KeyValues::default();
        kv.insert("command", "threshold");
        kv.insert("k", k);
        theta_report(&mut kv, &t);
        kv.insert("out", path.display());
        emit(&kv);
        println!();
    }
    Ok(())
}

fn build_pattern(kernel: &Path, pattern: &Path, transform: &Transform, out: &Path) -> Outcome {
    let spec = KernelSpec::load(kernel)?;
    let hood = NeighborhoodSpec::load(pattern)?;
    let (family, levels) = transform_of(transform, spec.size)?;
    let layout = Layout::new(spec.size, spec.size, levels)?;
    let mask = generate_mask(&hood, &layout)?;
    let theta = build_theta_masked(&spec, &mask, &family, levels)?;
    save_theta(&theta, out)?;
    let mut kv = KeyValues::default();
    kv.insert("command", "pattern");
    kv.insert("mask_nnz", mask.nnz());
    kv.insert("mask_density", format!("{:.4}", mask.density()));
    theta_report(&mut kv, &theta);
    kv.insert("out", out.display());
    emit(&kv);
    Ok(())
}

fn restore_report(kv: &mut KeyValues, r: &RestoreResult) {
    kv.insert("status", format!("{:?}", r.status).to_lowercase());
    kv.insert("iterations", r.iterations);
    kv.insert("residual", format!("{:.6}", r.residual));
    kv.insert("radius", format!("{:.6}", r.radius));
    kv.insert("tv", format!("{:.6}", r.tv));
    kv.insert("tau", format!("{:.6e}", r.tau));
    kv.insert("kappa", format!("{:.6e}", r.kappa));
    kv.insert("kappa_fidelity", format!("{:.6e}", r.kappa_fidelity));
    kv.insert("operator_norm", format!("{:.6}", r.operator_norm));
}

fn restore_cmd(image: &Path, theta: &Path, cfg: &SolverConfig, clean: Option<&Path>, out: &Path) -> Outcome {
    let v = read_image(image)?;
    let clean = clean.map(read_image).transpose()?;
    let theta = load_theta(theta)?;
    let result = restore(&v, &theta, cfg)?;
    write_image(&result.image, out)?;
    let mut kv = KeyValues::default();
    kv.insert("command", "restore");
    restore_report(&mut kv, &result);
    if let Some(clean) = &clean {
        kv.insert("snr_db", format!("{:.4}", snr_db(&result.image, clean)?));
    }
    kv.insert("out", out.display());
    emit(&kv);
    match result.status {
        SolveStatus::Infeasible => Err(Failure::Infeasible),
        _ => Ok(()),
    }
}

fn scaling_csv(rows: &[wavblur::bench::ScalingRow]) -> String {
    let mut out = String::from("N,nnz,madds,t_sparse_ms\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:.6}\n", r.n, r.nnz, r.madds, r.t_sparse_ms));
    }
    out
}

/// Timing rows for each budget and the full operator, plus the time taken
/// to build the full operator in milliseconds.
fn bench_rows(
    spec: &KernelSpec,
    family: &WaveletFamily,
    levels: usize,
    ks: &[usize],
    reps: usize,
    seed: u64,
) -> Result<(Vec<BenchRow>, f64)> {
    let exact = ExactOperator::new(spec);
    let start = std::time::Instant::now();
    let full = build_theta(spec, family, levels)?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut rows = Vec::new();
    for (k, t) in ks.iter().zip(threshold_many(&full, ks)?) {
        rows.push(bench_operator(&exact, &t, Some(*k), reps, seed)?);
    }
    rows.push(bench_operator(&exact, &full, None, reps, seed)?);
    Ok((rows, build_ms))
}

#[allow(clippy::too_many_arguments)]
fn bench(
    kernel: &Path,
    transform: &Transform,
    ks: &str,
    reps: usize,
    seed: u64,
    sizes: &str,
    out: &Path,
    scaling_out: Option<&Path>,
) -> Outcome {
    let spec = KernelSpec::load(kernel)?;
    let (family, levels) = transform_of(transform, spec.size)?;
    let ks = parse_list(ks)?;
    let (rows, build_ms) = bench_rows(&spec, &family, levels, &ks, reps, seed)?;
    write_text(out, &to_csv(&rows))?;
    let sizes = parse_list(sizes)?;
    let sweep_k = ks.iter().copied().max().unwrap_or(1);
    let sweep = scaling_sweep(&sizes, sweep_k, &family, reps)?;
    if let Some(path) = scaling_out {
        write_text(path, &scaling_csv(&sweep))?;
    }
    let slope = loglog_slope(&sweep.iter().map(|r| ((r.n * r.n) as f64, r.t_sparse_ms)).collect::<Vec<_>>());
    let mut kv = KeyValues::default();
    kv.insert("command", "bench");
    kv.insert("kernel", spec.id());
    for r in &rows {
        let key = match r.k {
            Some(k) => format!("speedup_k{k}"),
            None => "speedup_full".into(),
        };
        kv.insert(&key, format!("{:.3}", r.speedup));
    }
    kv.insert("t_build_full_ms", format!("{build_ms:.1}"));
    kv.insert("scaling_k", sweep_k);
    kv.insert("scaling_slope", format!("{slope:.4}"));
    kv.insert("out", out.display());
    emit(&kv);
    Ok(())
}

fn verify_decay(size: usize, sigma_min: f64, sigma_max: f64, truncation: f64, transform: &Transform, out: &Path) -> Outcome {
    let kernel = Kernel1d::new(size, sigma_min, sigma_max, truncation)?;
    let (family, levels) = transform_of(transform, size)?;
    let report = verify_decay_1d(&kernel, &family, levels)?;
    write_text(out, &report.to_csv())?;
    let mut kv = KeyValues::default();
    kv.insert("command", "verify-decay");
    kv.insert("wavelet", family.name());
    kv.insert("levels", levels);
    kv.insert("vanishing_moments", report.vanishing_moments);
    kv.insert("slope", format!("{:.4}", report.slope));
    kv.insert("slope_points", report.slope_points);
    kv.insert("fitted_constant", format!("{:.6e}", report.fitted_constant));
    kv.insert("violations", report.violations);
    kv.insert("far_pairs", report.far_pairs);
    kv.insert("far_nonzero", report.far_nonzero);
    kv.insert("out", out.display());
    emit(&kv);
    Ok(())
}

struct TableRow {
    criterion: u32,
    measure: String,
    value: f64,
    limit: String,
    pass: bool,
}

fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("criterion,measure,value,limit,pass\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.4},{},{}\n", r.criterion, r.measure, r.value, r.limit, r.pass));
    }
    out
}

fn row(criterion: u32, measure: impl Into<String>, value: f64, limit: impl Into<String>, pass: bool) -> TableRow {
    TableRow {
        criterion,
        measure: measure.into(),
        value,
        limit: limit.into(),
        pass,
    }
}

/// Runs blur, degradation, operator construction, restoration and timing at
/// the manifest's scale, writing images, operator files and CSV tables into
/// `out`.
fn reproduce(m: &Manifest, reps: usize, out: &Path) -> Outcome {
    make_dir(out)?;
    let n = m.kernel.size;
    let clean = match &m.image {
        Some(path) => read_image(path)?,
        None => Image::test_scene(n)?,
    };
    let exact = ExactOperator::new(&m.kernel);
    let blurred = exact.apply(&clean)?;
    let degraded = add_noise(&blurred, NoiseModel::new(m.solver.sigma_noise, m.seed)?);
    write_image(&clean, &out.join("clean.png"))?;
    write_image(&blurred, &out.join("blurred.png"))?;
    write_image(&degraded, &out.join("degraded.png"))?;
    let degraded_snr = snr_db(&degraded, &clean)?;

    info!("building full operator for {}", m.kernel.id());
    let full = build_theta(&m.kernel, &m.family, m.levels)?;
    save_theta(&full, out.join("theta_full.wbth"))?;
    let mut operators: Vec<(String, SparseTheta)> = Vec::new();
    for (k, t) in m.ks.iter().zip(threshold_many(&full, &m.ks)?) {
        save_theta(&t, budget_path(out, *k))?;
        operators.push((format!("k={k}"), t));
    }
    let layout = Layout::new(n, n, m.levels)?;
    for (i, path) in m.patterns.iter().enumerate() {
        let mask = generate_mask(&NeighborhoodSpec::load(path)?, &layout)?;
        let t = build_theta_masked(&m.kernel, &mask, &m.family, m.levels)?;
        save_theta(&t, out.join(format!("theta_pattern{}.wbth", i + 1)))?;
        operators.push((format!("pattern{}", i + 1), t));
    }
    operators.push(("full".into(), full.clone()));

    let mut restore_rows = String::from("operator,nnz,density,status,iterations,residual,radius,snr_db\n");
    let mut snrs = Vec::new();
    for (label, t) in &operators {
        info!("restoring with {label}");
        let r = restore(&degraded, t, &m.solver)?;
        let snr = snr_db(&r.image, &clean)?;
        write_image(&r.image, &out.join(format!("restored_{}.png", label.replace('=', ""))))?;
        restore_rows.push_str(&format!(
            "{label},{},{:.4},{:?},{},{:.6},{:.6},{snr:.4}\n",
            t.nnz(),
            t.density(),
            r.status,
            r.iterations,
            r.residual,
            r.radius
        ));
        snrs.push((label.clone(), snr, t.density()));
    }
    write_text(&out.join("restore.csv"), &restore_rows)?;

    let compression_ks = [1, 2, 4, 8, 16, 32];
    let mut compression = String::from("k,nnz,mc_error\n");
    let mut errors = Vec::new();
    for (k, t) in compression_ks.iter().zip(threshold_many(&full, &compression_ks)?) {
        let e = operator_error_with(&t, &exact, 10, 7)?;
        compression.push_str(&format!("{k},{},{e:.6}\n", t.nnz()));
        errors.push(e);
    }
    write_text(&out.join("compression.csv"), &compression)?;

    let (bench, _) = bench_rows(&m.kernel, &m.family, m.levels, &[1, 20], reps, m.seed)?;
    write_text(&out.join("bench.csv"), &to_csv(&bench))?;

    let mut table = Vec::new();
    let monotone = errors.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    table.push(row(4, "mc_error_monotone", monotone as u8 as f64, "1", monotone));
    let ratio = errors[5] / errors[0];
    table.push(row(4, "mc_error_ratio_k32_k1", ratio, "<=0.1", ratio <= 0.1));
    let snr_of = |label: &str| snrs.iter().find(|s| s.0 == label).map(|s| s.1);
    let thresholded: Vec<f64> = m.ks.iter().filter_map(|k| snr_of(&format!("k={k}"))).collect();
    let increasing = thresholded.windows(2).all(|w| w[1] > w[0]);
    table.push(row(5, "snr_increasing_in_k", increasing as u8 as f64, "1", increasing));
    let full_snr = snr_of("full").unwrap_or(f64::NAN);
    if let Some(k20) = snr_of("k=20") {
        let gap = (k20 - full_snr).abs();
        table.push(row(5, "snr_gap_k20_full_db", gap, "<=0.5", gap <= 0.5));
        if let Some(p2) = snr_of("pattern2") {
            let gap = (p2 - k20).abs();
            table.push(row(6, "snr_gap_pattern2_k20_db", gap, "<=1.0", gap <= 1.0));
        }
    }
    let worst = snrs.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    table.push(row(5, "min_snr_minus_degraded_db", worst - degraded_snr, ">0", worst > degraded_snr));
    if let (Some(p1), Some(p2)) = (snr_of("pattern1"), snr_of("pattern2")) {
        table.push(row(6, "snr_pattern2_minus_pattern1_db", p2 - p1, ">0", p2 > p1));
    }
    let (s1, s20) = (bench[0].speedup, bench[1].speedup);
    table.push(row(7, "speedup_k1", s1, ">speedup_k20", s1 > s20));
    table.push(row(7, "speedup_k20", s20, ">1", s20 > 1.0));
    table.sort_by_key(|r| r.criterion);
    write_text(&out.join("acceptance.csv"), &table_csv(&table))?;

    let mut kv = KeyValues::default();
    kv.insert("command", "reproduce");
    kv.insert("kernel", m.kernel.id());
    kv.insert("wavelet", m.family.name());
    kv.insert("levels", m.levels);
    kv.insert("degraded_snr_db", format!("{degraded_snr:.4}"));
    for (label, snr, _) in &snrs {
        kv.insert(&format!("snr_db_{}", label.replace('=', "")), format!("{snr:.4}"));
    }
    kv.insert("checks_passed", table.iter().filter(|r| r.pass).count());
    kv.insert("checks_total", table.len());
    kv.insert("out", out.display());
    emit(&kv);
    Ok(())
}
