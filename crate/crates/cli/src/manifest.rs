//! Experiment manifests and solver configuration files, both in the
//! `key = value` grammar of kernel specs.

use std::path::{Path, PathBuf};

use wavblur::kv::KeyValues;
use wavblur::wavelet::default_levels;
use wavblur::{Error, KernelSpec, Result, SolverConfig, WaveletFamily};

const SOLVER_KEYS: &[&str] = &[
    "sigma",
    "max_iters",
    "tol",
    "tau",
    "kappa",
    "kappa_fidelity",
    "operator_norm",
    "trace_every",
];

const MANIFEST_KEYS: &[&str] = &["image", "kernel", "wavelet", "levels", "k", "patterns", "seed"];

/// Overrides the fields of `base` present in `kv`.
pub fn solver_config(kv: &KeyValues, base: SolverConfig) -> Result<SolverConfig> {
    Ok(SolverConfig {
        sigma_noise: kv.parse_or("sigma", base.sigma_noise)?,
        max_iters: kv.parse_or("max_iters", base.max_iters)?,
        tol: kv.parse_or("tol", base.tol)?,
        tau: kv.parse_opt("tau")?.or(base.tau),
        kappa: kv.parse_opt("kappa")?.or(base.kappa),
        kappa_fidelity: kv.parse_opt("kappa_fidelity")?.or(base.kappa_fidelity),
        operator_norm: kv.parse_opt("operator_norm")?.or(base.operator_norm),
        trace_every: kv.parse_or("trace_every", base.trace_every)?,
    })
}

pub fn load_solver_config(path: &Path) -> Result<SolverConfig> {
    let kv = KeyValues::load(path)?;
    kv.check_keys(SOLVER_KEYS)?;
    solver_config(&kv, SolverConfig::default())
}

/// Comma-separated list of positive integers.
pub fn parse_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Format(format!("bad list entry `{t}` in `{text}`")))
        })
        .collect()
}

/// Everything one reproducible desk experiment needs. Relative paths are
/// resolved against the manifest's directory.
#[derive(Debug, Clone)]
pub struct Manifest {
    /// Clean image; the built-in test scene when absent.
    pub image: Option<PathBuf>,
    pub kernel: KernelSpec,
    pub family: WaveletFamily,
    pub levels: usize,
    pub ks: Vec<usize>,
    pub patterns: Vec<PathBuf>,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for Manifest {
    fn default() -> Self {
        let n = 64;
        Manifest {
            image: None,
            kernel: KernelSpec::default_for(n),
            family: WaveletFamily::db2(),
            levels: default_levels(n),
            ks: vec![1, 2, 5, 10, 20],
            patterns: Vec::new(),
            seed: 1,
            solver: SolverConfig::with_sigma(0.02),
        }
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let kv = KeyValues::load(path)?;
        let allowed: Vec<&str> = MANIFEST_KEYS.iter().chain(SOLVER_KEYS).copied().collect();
        kv.check_keys(&allowed)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let resolve = |rel: &str| -> Result<PathBuf> {
            let p = dir.join(rel.trim());
            if !p.is_file() {
                return Err(Error::Io {
                    path: p,
                    source: std::io::Error::from(std::io::ErrorKind::NotFound),
                });
            }
            Ok(p)
        };
        let base = Manifest::default();
        let kernel = match kv.get("kernel") {
            Some(rel) => KernelSpec::load(resolve(rel)?)?,
            None => base.kernel,
        };
        let family = match kv.get("wavelet") {
            Some(name) => WaveletFamily::from_name(name)?,
            None => base.family,
        };
        let levels = kv.parse_or("levels", default_levels(kernel.size))?;
        let ks = match kv.get("k") {
            Some(list) => parse_list(list)?,
            None => base.ks,
        };
        let patterns = match kv.get("patterns") {
            Some(list) => list.split(',').map(resolve).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        Ok(Manifest {
            image: kv.get("image").map(resolve).transpose()?,
            kernel,
            family,
            levels,
            ks,
            patterns,
            seed: kv.parse_or("seed", base.seed)?,
            solver: solver_config(&kv, base.solver)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wavblur::NeighborhoodSpec;

    fn asset(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets").join(name)
    }

    #[test]
    fn shipped_manifest_resolves_relative_paths() {
        let m = Manifest::load(&asset("manifest64.txt")).unwrap();
        assert_eq!(m.kernel, KernelSpec::default_for(64));
        assert_eq!((m.family.name(), m.levels), ("db2", 3));
        assert_eq!(m.ks, vec![1, 2, 5, 10, 20]);
        assert_eq!(m.patterns.len(), 2);
        assert_eq!(m.solver, SolverConfig::with_sigma(0.02));
    }

    #[test]
    fn shipped_patterns_match_builtin_scenarios() {
        let load = |f: &str| NeighborhoodSpec::load(asset("patterns").join(f)).unwrap();
        assert_eq!(load("scenario1.txt"), NeighborhoodSpec::same_scale_all_orientations());
        assert_eq!(load("scenario2.txt"), NeighborhoodSpec::same_scale_cross());
        assert_eq!(load("n1.txt").len(), 8);
    }

    #[test]
    fn solver_file_overrides_defaults() {
        let cfg = load_solver_config(&asset("solver.txt")).unwrap();
        assert_eq!(cfg, SolverConfig::with_sigma(0.02));
        let kv = KeyValues::parse("tau = 0.01\nmax_iters = 10").unwrap();
        let cfg = solver_config(&kv, SolverConfig::default()).unwrap();
        assert_eq!((cfg.tau, cfg.max_iters), (Some(0.01), 10));
    }

    #[test]
    fn lists_reject_zero_and_garbage() {
        assert_eq!(parse_list("1, 20").unwrap(), vec![1, 20]);
        assert!(parse_list("0").is_err());
        assert!(parse_list("1,x").is_err());
    }
}
