//! Command-line front end. Exit codes: 0 ok, 2 bad input, 3 numerical
//! failure, 4 failed regime or consistency check.

use arraycav::cache::KernelCache;
use arraycav::cavity_dynamics::{build_two_mode, evolve_full, spectrum_scan, FullModel, SpectrumPoint, SystemState};
use arraycav::config::Config;
use arraycav::confined::{
    confined_kernel_paraxial_with, fs_kernel, fs_kernel_d2z, projected_kernel_for, KernelKind, KernelMatrix, KernelRecord, Provenance,
};
use arraycav::lattice_sums::{
    cooperative_rates_hybrid, cooperative_rates_real_space, cooperative_rates_reciprocal_with, path_samples, symmetry_point, DispersionPoint,
    Method, RealSpaceOptions, RealSpaceSum,
};
use arraycav::ode::Tolerances;
use arraycav::om_dynamics::{evolve_multimode, evolve_reduced, OmDrive, OmState};
use arraycav::optomech::{brillouin_refinement, closed_form_params, kappa_sc_consistency, mechanical_basis, SiteCouplings};
use arraycav::output::{format_f64, to_json, RunManifest, Table};
use arraycav::regime::{validate_regime, MOTIONLESS_CHECKS, OPTOMECH_CHECKS};
use arraycav::{Error, Result, C64, Q};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "arraycav", version, about = "Atom arrays in optical cavities: dispersion, spectra, optomechanical parameters and dynamics")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band structure Γ_k, Δ_k along a path of symmetry points.
    Dispersion {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated symmetry points (G or Γ, X, Y, M).
        #[arg(long, default_value = "G,X,M,G")]
        path: String,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = DispersionRoute::Hybrid)]
        method: DispersionRoute,
        /// Cutoff radius of the real-space sum, in wavelengths.
        #[arg(long, default_value_t = 60.0)]
        radius: f64,
        /// Largest accepted real-space extrapolation residual (units of gamma).
        #[arg(long, default_value_t = 1e-2)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steady-state intracavity intensity across a cavity-detuning scan.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        dc_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        dc_max: f64,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = SpectrumModel::TwoMode)]
        model: SpectrumModel,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optomechanical parameters, optionally checked against the mode couplings.
    Omparams {
        #[arg(long)]
        config: PathBuf,
        /// Compare closed forms with the numerical couplings; exit 4 on failure.
        #[arg(long)]
        consistency: bool,
        /// Also check the Brillouin-grid sums against a lattice of twice the side.
        #[arg(long, requires = "consistency")]
        refine: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean-field time evolution from an empty cavity and motional ground state.
    Dynamics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        model: DynamicsModel,
        #[arg(long)]
        t_final: f64,
        /// Output spacing (default t_final / 1000).
        #[arg(long)]
        dt_out: Option<f64>,
        /// Seed completing the mechanical basis (multimode only).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-12)]
        atol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regime checks; exit 4 if any required check fails.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds (or loads from $ARRAYCAV_CACHE_DIR) a kernel and writes its displacement table.
    Kernel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = KernelChoice::Projected)]
        kind: KernelChoice,
        /// Second longitudinal derivative instead of the kernel itself.
        #[arg(long)]
        d2z: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DispersionRoute {
    Hybrid,
    Reciprocal,
    RealSpace,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectrumModel {
    TwoMode,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum DynamicsModel {
    Multimode,
    Reduced,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelChoice {
    Fs,
    Confined,
    Projected,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Writes `text` to `out` with a manifest beside it, or to stdout.
fn emit(text: &str, out: Option<&Path>, manifest: &mut RunManifest) -> Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, text)?;
            manifest.write_beside(p)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn options(config: &Config) -> RealSpaceOptions {
    RealSpaceOptions { dipole: config.physical.dipole, ..Default::default() }
}

/// Uniform-mode point of the infinite array: decay from the reciprocal
/// route, shift from the real-space route.
fn uniform_mode(config: &Config) -> Result<DispersionPoint> {
    let dipole = config.physical.dipole;
    let mut p = cooperative_rates_reciprocal_with([0.0, 0.0], config.lattice.a, dipole)?;
    p.delta_k = cooperative_rates_real_space([0.0, 0.0], config.lattice.a, &options(config))?.delta_k;
    p.method = Method::Hybrid;
    Ok(p)
}

fn manifest_for(command: &str, config: &Config) -> RunManifest {
    let mut m = RunManifest::new(command, Some(config));
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(c) = KernelCache::from_env() {
        m.arg("cache_dir", c.dir().display());
    }
    m
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Dispersion { config, path, samples, method, radius, tolerance, out } => {
            let cfg = Config::from_path(&config)?;
            let a = cfg.lattice.a;
            let waypoints = path
                .split(',')
                .map(|s| symmetry_point(s.trim(), a).ok_or_else(|| Error::InvalidArgument(format!("unknown symmetry point `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            let opts = RealSpaceOptions { radius, tolerance, ..options(&cfg) };
            let ks = path_samples(&waypoints, samples)?;
            let sum = match method {
                DispersionRoute::Reciprocal => None,
                _ => Some(RealSpaceSum::new(a, &opts)?),
            };
            let route = match method {
                DispersionRoute::Hybrid => Method::Hybrid,
                DispersionRoute::Reciprocal => Method::Reciprocal,
                DispersionRoute::RealSpace => Method::RealSpace,
            };
            // Points that fail keep their row with empty value cells.
            let rows: Vec<(Option<f64>, Option<f64>, Option<Error>)> = ks
                .par_iter()
                .map(|&k| {
                    let result = match (&sum, method) {
                        (Some(s), DispersionRoute::Hybrid) => cooperative_rates_hybrid(k, s),
                        (Some(s), _) => s.point(k),
                        (None, _) => cooperative_rates_reciprocal_with(k, a, opts.dipole),
                    };
                    match result {
                        Ok(p) => (Some(p.gamma_k), p.delta_k, None),
                        Err(e) => {
                            let gamma = match method {
                                DispersionRoute::Hybrid => cooperative_rates_reciprocal_with(k, a, opts.dipole).ok().map(|p| p.gamma_k),
                                _ => None,
                            };
                            (gamma, None, Some(e))
                        }
                    }
                })
                .collect();
            let mut t = Table::new(&["k_x/q", "k_y/q", "gamma_k/gamma", "delta_k/gamma", "method"]);
            let mut m = manifest_for("dispersion", &cfg);
            m.arg("config", config.display())
                .arg("path", &path)
                .arg("samples", samples)
                .arg("method", route.name())
                .arg("radius", radius)
                .arg("tolerance", tolerance);
            let mut first_error = None;
            for (k, (gamma, delta, err)) in ks.iter().zip(rows) {
                let (kx, ky) = (k[0] / Q, k[1] / Q);
                if let Some(e) = err {
                    let w = format!("k/q = ({kx:.6}, {ky:.6}): {e}");
                    eprintln!("warning: {w}");
                    m.warnings.push(w);
                    first_error.get_or_insert(e);
                }
                let cell = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
                t.push(vec![format_f64(kx), format_f64(ky), cell(gamma), cell(delta), route.name().to_string()]);
            }
            emit(&t.to_csv_string()?, out.as_deref(), &mut m)?;
            if let Some(e) = first_error {
                return Err(e);
            }
            Ok(())
        }
        Command::Spectrum { config, dc_min, dc_max, samples, model, out } => {
            let cfg = Config::from_path(&config)?;
            let uniform = uniform_mode(&cfg)?;
            let mut m = manifest_for("spectrum", &cfg);
            let points: Vec<SpectrumPoint> = match model {
                SpectrumModel::TwoMode => spectrum_scan(&build_two_mode(&cfg, &uniform)?, dc_min, dc_max, samples)?,
                SpectrumModel::Full => {
                    validate_regime(&cfg).require(MOTIONLESS_CHECKS)?;
                    let cache = KernelCache::from_env();
                    let (kernel, records) = projected_kernel_for(&cfg, false, cache.as_ref())?;
                    m.kernels = records;
                    let full = FullModel::new(&cfg, kernel, uniform.delta_k.unwrap_or(0.0), uniform.total_decay())?;
                    full.spectrum(dc_min, dc_max, samples)?
                }
            };
            let mut t = Table::new(&["delta_c", "abs_a2", "phase"]);
            for p in &points {
                t.push_numbers(&[p.delta_c, p.abs_a2, p.phase]);
            }
            m.arg("config", config.display())
                .arg("dc_min", dc_min)
                .arg("dc_max", dc_max)
                .arg("samples", samples)
                .arg("model", if matches!(model, SpectrumModel::Full) { "full" } else { "two-mode" });
            emit(&t.to_csv_string()?, out.as_deref(), &mut m)
        }
        Command::Omparams { config, consistency, refine, out } => {
            let cfg = Config::from_path(&config)?;
            validate_regime(&cfg).require(OPTOMECH_CHECKS)?;
            let uniform = uniform_mode(&cfg)?;
            let mut m = manifest_for("omparams", &cfg);
            m.arg("config", config.display()).arg("consistency", consistency).arg("refine", refine);
            if !consistency {
                let params = closed_form_params(&cfg, uniform.delta_k.unwrap_or(0.0), uniform.total_decay())?;
                return emit(&to_json(&params)?, out.as_deref(), &mut m);
            }
            let cache = KernelCache::from_env();
            let opts = options(&cfg);
            let couplings = SiteCouplings::build(&cfg, cache.as_ref(), &opts)?;
            m.kernels = couplings.records.clone();
            let params = closed_form_params(&cfg, couplings.grid().uniform_shift(), uniform.total_decay())?;
            let report = kappa_sc_consistency(&couplings, &params);
            emit(&to_json(&report)?, out.as_deref(), &mut m)?;
            if refine {
                let change = brillouin_refinement(&cfg, cache.as_ref(), &opts, 0.01)?;
                eprintln!("brillouin refinement: relative change {change:.3e}");
            }
            if !report.all_pass() {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
                return Err(Error::Consistency(failed.join(", ")));
            }
            Ok(())
        }
        Command::Dynamics { config, model, t_final, dt_out, seed, rtol, atol, out } => {
            let cfg = Config::from_path(&config)?;
            let dt = dt_out.unwrap_or(t_final / 1000.0);
            let tol = Tolerances::new(rtol, atol);
            let uniform = uniform_mode(&cfg)?;
            let shift = uniform.delta_k.unwrap_or(0.0);
            let mut m = manifest_for("dynamics", &cfg);
            m.arg("config", config.display()).arg("t_final", t_final).arg("dt_out", dt).arg("rtol", rtol).arg("atol", atol);
            let table = match model {
                DynamicsModel::Full => {
                    m.arg("model", "full");
                    validate_regime(&cfg).require(MOTIONLESS_CHECKS)?;
                    let (kernel, records) = projected_kernel_for(&cfg, false, KernelCache::from_env().as_ref())?;
                    m.kernels = records;
                    let full = FullModel::new(&cfg, kernel, shift, uniform.total_decay())?;
                    let init = SystemState { t: 0.0, a: C64::new(0.0, 0.0), sigma: vec![C64::new(0.0, 0.0); full.n_sites()] };
                    let states = evolve_full(&full, &init, t_final, dt, &tol)?;
                    if let Some(w) = states.iter().find_map(SystemState::saturation_warning) {
                        eprintln!("warning: {w}");
                        m.warnings.push(w);
                    }
                    let mut t = Table::new(&["t", "re_a", "im_a", "sum_abs_sigma2"]);
                    for s in &states {
                        t.push_numbers(&[s.t, s.a.re, s.a.im, s.atomic_excitation()]);
                    }
                    t
                }
                DynamicsModel::Reduced | DynamicsModel::Multimode => {
                    validate_regime(&cfg).require(OPTOMECH_CHECKS)?;
                    let drive = OmDrive::from_config(&cfg);
                    let states = if matches!(model, DynamicsModel::Reduced) {
                        m.arg("model", "reduced");
                        let params = closed_form_params(&cfg, shift, uniform.total_decay())?;
                        evolve_reduced(&params, &drive, &OmState::empty(1), t_final, dt, &tol)?
                    } else {
                        m.arg("model", "multimode").arg("seed", seed);
                        let couplings = SiteCouplings::build(&cfg, KernelCache::from_env().as_ref(), &options(&cfg))?;
                        m.kernels = couplings.records.clone();
                        let params = closed_form_params(&cfg, couplings.grid().uniform_shift(), uniform.total_decay())?;
                        let basis = mechanical_basis(&cfg.lattice, cfg.cavity.w, seed)?;
                        m.arg("basis", &basis.completion);
                        let c = couplings.coupling_matrix_c(&basis)?;
                        evolve_multimode(&params, &drive, &c, &OmState::empty(c.nrows()), t_final, dt, &tol)?
                    };
                    let mut t = Table::new(&["t", "re_a", "im_a", "re_b0", "im_b0", "abs_a2"]);
                    for s in &states {
                        t.push_numbers(&[s.t, s.a.re, s.a.im, s.b[0].re, s.b[0].im, s.a.norm_sqr()]);
                    }
                    t
                }
            };
            emit(&table.to_csv_string()?, out.as_deref(), &mut m)
        }
        Command::Validate { config, out } => {
            let cfg = Config::from_path(&config)?;
            let report = validate_regime(&cfg);
            let mut m = manifest_for("validate", &cfg);
            m.arg("config", config.display());
            emit(&to_json(&report)?, out.as_deref(), &mut m)?;
            if !report.all_pass() {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass && !c.advisory).map(|c| c.name).collect();
                return Err(Error::Regime(failed.join(", ")));
            }
            Ok(())
        }
        Command::Kernel { config, kind, d2z, out } => {
            let cfg = Config::from_path(&config)?;
            let cache = KernelCache::from_env();
            let (kernel, records) = build_kernel(&cfg, kind, d2z, cache.as_ref())?;
            let mut m = manifest_for("kernel", &cfg);
            m.arg("config", config.display()).arg("kind", kernel.kind.name()).arg("d2z", d2z);
            m.kernels = records;
            let n = kernel.n_side() as isize;
            let mut t = Table::new(&["di", "dj", "re", "im"]);
            for di in -(n - 1)..n {
                for dj in -(n - 1)..n {
                    let z = kernel.at_displacement(di, dj).unwrap_or_else(|| kernel.get(0, 0));
                    t.push(vec![di.to_string(), dj.to_string(), format_f64(z.re), format_f64(z.im)]);
                }
            }
            eprintln!("{} kernel, n_side {}, hash {}", kernel.kind.name(), kernel.n_side(), kernel.content_hash());
            emit(&t.to_csv_string()?, out.as_deref(), &mut m)
        }
    }
}

fn build_kernel(cfg: &Config, kind: KernelChoice, d2z: bool, cache: Option<&KernelCache>) -> Result<(KernelMatrix, Vec<KernelRecord>)> {
    let lattice = &cfg.lattice;
    let dipole = cfg.physical.dipole;
    let cav = &cfg.cavity;
    let record = |k: &KernelMatrix, entry: Option<(String, bool)>| KernelRecord {
        kind: k.kind.name(),
        d2z,
        content_hash: k.content_hash(),
        cache: entry,
    };
    let one = |kind: KernelKind, prov: Provenance, build: &dyn Fn() -> Result<KernelMatrix>| -> Result<(KernelMatrix, Vec<KernelRecord>)> {
        match cache {
            Some(c) => {
                let (k, status) = c.get_or_build(kind, &prov, build)?;
                let r = record(&k, Some((KernelCache::key(kind, &prov), status == arraycav::cache::CacheStatus::Hit)));
                Ok((k, vec![r]))
            }
            None => {
                let k = build()?;
                let r = record(&k, None);
                Ok((k, vec![r]))
            }
        }
    };
    match kind {
        KernelChoice::Fs => one(KernelKind::Fs, Provenance::new(lattice, dipole, d2z), &|| {
            Ok(if d2z { fs_kernel_d2z(lattice, dipole) } else { fs_kernel(lattice, dipole) })
        }),
        KernelChoice::Confined => {
            let mut prov = Provenance::new(lattice, dipole, d2z);
            prov.z0 = Some(cav.z0);
            prov.k_cut = Some(cav.k_cut);
            one(KernelKind::Confined, prov, &|| confined_kernel_paraxial_with(lattice, cav.z0, cav.k_cut, dipole, d2z))
        }
        KernelChoice::Projected => projected_kernel_for(cfg, d2z, cache),
    }
}
