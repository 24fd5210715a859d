use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches, Command};

use gpbe::assembly::{memory_words, CollisionOperator};
use gpbe::basis::eval_solution;
use gpbe::cache::{cache_header, cache_path, cache_read, cache_write, load_or_build, CacheKey};
use gpbe::config::{InitialCondition, RunConfig, KEYS, PRESETS};
use gpbe::diagnostics::{bkw_s, MomentSet, NodalBasis};
use gpbe::dsmc::dsmc_run;
use gpbe::experiments::{bkw_table, run_suite, Operators, SUITES};
use gpbe::integrator::{advance_with, project_initial};
use gpbe::{Error, Velocity};

const CSV_HEADER: &str = "t,rho,Vx,Vy,Vz,T,M11,M12,M13,M22,M23,M33,rx,ry,rz,s,H,clamped_mass";

const EXIT_CONFIG: u8 = 2;
const EXIT_CACHE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_VALIDATION: u8 = 5;

enum Failure {
    Lib(Error),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CliResult<T> = Result<T, Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::UnsupportedLebedevOrder { .. } | Error::InvalidKernel(_) | Error::TimeGrid(_) => {
            EXIT_CONFIG
        }
        Error::UnsupportedDsmcKernel(_) | Error::Particles(_) => EXIT_CONFIG,
        e if e.is_cache_error() => EXIT_CACHE,
        Error::Exists(_) => EXIT_CACHE,
        Error::NonFiniteState { .. }
        | Error::NonFiniteCollision { .. }
        | Error::NonFiniteIntegrand { .. }
        | Error::SingularKernel { .. }
        | Error::SingularMass { .. }
        | Error::Domain(_) => EXIT_NUMERICAL,
        _ => 1,
    }
}

/// Long flag for a configuration key: `N_GL` becomes `--n-gl`.
fn flag_name(key: &str) -> String {
    key.to_ascii_lowercase().replace('_', "-")
}

fn config_args(cmd: Command) -> Command {
    let mut cmd = cmd
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("FILE")
                .help("key = value configuration file"),
        )
        .arg(
            Arg::new("preset")
                .long("preset")
                .value_parser(PRESETS.to_vec())
                .help("start from a built-in configuration"),
        )
        .arg(
            Arg::new("set")
                .long("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("override one key (repeatable)"),
        )
        .arg(
            Arg::new("force")
                .long("force")
                .action(ArgAction::SetTrue)
                .help("rebuild and overwrite cached operators"),
        );
    for key in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(flag_name(key))
                .value_name("VALUE")
                .help(format!("set `{key}`")),
        );
    }
    cmd
}

fn cli() -> Command {
    Command::new("gpbe")
        .about("Spectral Galerkin-Petrov solver for the homogeneous Boltzmann equation")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .env("GPBE_THREADS")
                .value_parser(clap::value_parser!(usize))
                .help("worker threads (default: all cores)"),
        )
        .subcommand(config_args(
            Command::new("assemble").about("assemble collision matrices and store them in the cache"),
        ))
        .subcommand(config_args(
            Command::new("run").about("integrate a relaxation and write moments and density grids"),
        ))
        .subcommand(config_args(Command::new("dsmc").about("run the particle reference solver")))
        .subcommand(
            Command::new("validate")
                .about("run a validation suite against the reference values")
                .arg(Arg::new("suite").required(true).value_parser(SUITES.to_vec()))
                .arg(
                    Arg::new("cache_dir")
                        .long("cache-dir")
                        .env("GPBE_CACHE_DIR")
                        .default_value("gpbe-cache"),
                )
                .arg(
                    Arg::new("report")
                        .long("report")
                        .value_name("FILE")
                        .help("write a tab-separated status/name/detail report"),
                ),
        )
        .subcommand(
            Command::new("bkw-table")
                .about("projection errors of the BKW initial condition")
                .arg(
                    Arg::new("k_min")
                        .long("k-min")
                        .default_value("11")
                        .value_parser(clap::value_parser!(usize)),
                )
                .arg(
                    Arg::new("k_max")
                        .long("k-max")
                        .default_value("14")
                        .value_parser(clap::value_parser!(usize)),
                )
                .arg(
                    Arg::new("cache_dir")
                        .long("cache-dir")
                        .env("GPBE_CACHE_DIR")
                        .default_value("gpbe-cache"),
                ),
        )
        .subcommand(
            Command::new("info")
                .about("show the header of a cached operator")
                .arg(Arg::new("path").required(true))
                .arg(
                    Arg::new("verify")
                        .long("verify")
                        .action(ArgAction::SetTrue)
                        .help("read the whole file and check the checksum"),
                ),
        )
}

fn load_config(m: &ArgMatches) -> CliResult<(RunConfig, bool)> {
    let mut cfg = match m.get_one::<String>("preset") {
        Some(p) => RunConfig::preset(p)?,
        None => RunConfig::default(),
    };
    if let Some(path) = m.get_one::<String>("config") {
        let text = fs::read_to_string(path).map_err(|e| Error::config("config", format!("{path}: {e}")))?;
        cfg.apply_text(&text)?;
    }
    if let Ok(dir) = std::env::var("GPBE_CACHE_DIR") {
        cfg.cache_dir = PathBuf::from(dir);
    }
    // keys in the order they are declared, so that `kernel` precedes `lambda`
    for key in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    for kv in m.get_many::<String>("set").into_iter().flatten() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config("set", format!("expected KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok((cfg, m.get_flag("force")))
}

fn obtain_operator(cfg: &RunConfig, force: bool) -> CliResult<(CollisionOperator, bool, PathBuf)> {
    let key = cfg.cache_key()?;
    fs::create_dir_all(&cfg.cache_dir)?;
    let path = cache_path(&cfg.cache_dir, &key);
    if force {
        let op = CollisionOperator::build(cfg.disc()?, key.kernel, key.n_gl, key.n_l)?;
        cache_write(&op, &path, true)?;
        return Ok((op, false, path));
    }
    let (op, reused) = load_or_build(&cfg.cache_dir, &key)?;
    Ok((op, reused, path))
}

fn cmd_assemble(m: &ArgMatches) -> CliResult<()> {
    let (cfg, force) = load_config(m)?;
    let key = cfg.cache_key()?;
    let disc = cfg.disc()?;
    let (radial, angular, pq) = memory_words(&disc, key.n_gl, key.n_l);
    let n = disc.n();
    let start = Instant::now();
    let (op, reused, path) = obtain_operator(&cfg, force)?;
    let inv = op.invariant_max_abs();
    println!("cache      {}", path.display());
    println!("n          {n}");
    if reused {
        println!("status     reused existing cache (no assembly)");
    } else {
        println!("status     assembled in {:.2} s", start.elapsed().as_secs_f64());
    }
    println!(
        "memory     Q {:.1} MiB, factors {} words, P_Q {} words",
        (n * n * n * 8) as f64 / 1048576.0,
        radial + angular,
        pq
    );
    println!(
        "invariants max |Q_i| = {inv:.2e} ({})",
        if inv <= 1e-12 { "ok" } else { "above 1e-12" }
    );
    Ok(())
}

fn moment_row(t: f64, m: &MomentSet, h: f64, clamped: f64) -> String {
    format!(
        "{t},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{h:e},{clamped:e}",
        m.rho,
        m.v[0],
        m.v[1],
        m.v[2],
        m.t,
        m.m[(0, 0)],
        m.m[(0, 1)],
        m.m[(0, 2)],
        m.m[(1, 1)],
        m.m[(1, 2)],
        m.m[(2, 2)],
        m.r[0],
        m.r[1],
        m.r[2],
        m.s
    )
}

fn open_csv(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    Ok(w)
}

fn write_grid(cfg: &RunConfig, state: &gpbe::basis::SpectralState, prefix: &Path) -> CliResult<PathBuf> {
    let path = PathBuf::from(format!("{}_t{}.csv", prefix.display(), state.time));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(&path)?);
    writeln!(w, "v1,v2,f")?;
    let (np, ext) = (cfg.grid_points, cfg.grid_extent);
    for i in 0..np {
        let v1 = -ext + 2.0 * ext * i as f64 / (np - 1) as f64;
        for j in 0..np {
            let v2 = -ext + 2.0 * ext * j as f64 / (np - 1) as f64;
            writeln!(w, "{v1},{v2},{:e}", eval_solution(state, &Velocity::new(v1, v2, 0.0)))?;
        }
    }
    w.flush()?;
    Ok(path)
}

fn cmd_run(m: &ArgMatches) -> CliResult<()> {
    let (cfg, force) = load_config(m)?;
    let start = Instant::now();
    let (op, reused, path) = obtain_operator(&cfg, force)?;
    eprintln!(
        "operator n={} from {} ({})",
        op.n(),
        path.display(),
        if reused { "cache" } else { "assembled" }
    );
    let rule = op.rule()?;
    let nb = NodalBasis::new(op.disc, &rule);
    let init = cfg.init;
    let st0 = project_initial(|v| init.density(v), &op, &rule)?;
    let grid = cfg.grid()?;

    let grid_steps: Vec<usize> = cfg
        .grid_times
        .iter()
        .map(|t| (t / grid.tau()).round() as usize)
        .collect();
    let mut csv = cfg.csv.as_deref().map(open_csv).transpose()?;
    let mut dumps = Vec::new();
    let mut io_error: Option<Failure> = None;
    let first = nb.moments(&st0.coeffs);
    let mut last = first;
    let mut max_bkw: f64 = 0.0;

    let mut emit = |k: usize, state: &gpbe::basis::SpectralState| -> CliResult<()> {
        let mom = nb.moments(&state.coeffs);
        if k % cfg.stride == 0 || k == grid.steps() {
            if let Some(w) = csv.as_mut() {
                let h = nb.h_functional(&state.coeffs);
                writeln!(w, "{}", moment_row(state.time, &mom, h.h, h.clamped_mass))?;
            }
        }
        if let Some(prefix) = &cfg.grid_prefix {
            if grid_steps.contains(&k) {
                dumps.push(write_grid(&cfg, state, prefix)?);
            }
        }
        if matches!(init, InitialCondition::Bkw) {
            max_bkw = max_bkw.max((mom.s - bkw_s(state.time)).abs());
        }
        last = mom;
        Ok(())
    };
    emit(0, &st0)?;
    let result = advance_with(&op, &st0, grid, cfg.scheme, |k, s| {
        if io_error.is_none() {
            if let Err(e) = emit(k, s) {
                io_error = Some(e);
            }
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    result?;
    if let Some(mut w) = csv {
        w.flush()?;
    }

    println!("steps      {} x tau {} ({})", grid.steps(), grid.tau(), cfg.scheme);
    println!(
        "drift      rho {:.2e}, T {:.2e}",
        (last.rho - first.rho).abs() / first.rho,
        (last.t - first.t).abs() / first.t
    );
    println!(
        "final      rho {} T {} M11 {} s {}",
        last.rho,
        last.t,
        last.m[(0, 0)],
        last.s
    );
    if matches!(init, InitialCondition::Bkw) {
        println!("bkw        max |s - s_exact| {max_bkw:.3e}");
    }
    if let Some(p) = &cfg.csv {
        println!("moments    {}", p.display());
    }
    for d in dumps {
        println!("grid       {}", d.display());
    }
    println!("wall time  {:.2} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_dsmc(m: &ArgMatches) -> CliResult<()> {
    let (cfg, _) = load_config(m)?;
    let InitialCondition::Mixture(init) = cfg.init else {
        return Err(Error::config("init", "the particle solver supports init = mixture only").into());
    };
    let start = Instant::now();
    let series = dsmc_run(
        cfg.kernel_spec()?,
        &init,
        cfg.particles,
        cfg.trajectories,
        cfg.grid()?,
        cfg.seed,
    )?;
    if let Some(path) = &cfg.csv {
        let mut w = open_csv(path)?;
        for s in &series.samples {
            writeln!(w, "{}", moment_row(s.t, &s.mean, f64::NAN, f64::NAN))?;
        }
        w.flush()?;
        println!("moments    {}", path.display());
    }
    let last = series.samples.last().expect("grid has samples");
    println!(
        "ensemble   {} trajectories x {} particles",
        series.n_traj, series.n_particles
    );
    println!("events     {} real, {} null", series.counts.real, series.counts.null);
    println!(
        "final      M11 {} +- {:.1e}, s {} +- {:.1e}, T {} +- {:.1e}",
        last.mean.m[(0, 0)],
        last.m11_se,
        last.mean.s,
        last.s_se,
        last.mean.t,
        last.t_se
    );
    println!("wall time  {:.2} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_validate(m: &ArgMatches) -> CliResult<()> {
    let suite = m.get_one::<String>("suite").expect("required");
    let dir = PathBuf::from(m.get_one::<String>("cache_dir").expect("defaulted"));
    let ops = Operators::new(Some(dir.clone()));
    let checks = run_suite(suite, &ops, &dir, |c| println!("{c}"))?;
    if let Some(path) = m.get_one::<String>("report") {
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "status\tname\tdetail")?;
        for c in &checks {
            writeln!(w, "{}\t{}\t{}", c.status(), c.name, c.detail)?;
        }
        w.flush()?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| c.failed()).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("RESULT PASS ({} checks)", checks.len());
        Ok(())
    } else {
        println!("RESULT FAIL ({} of {})", failed.len(), checks.len());
        Err(Failure::Validation(failed.join(", ")))
    }
}

fn cmd_bkw_table(m: &ArgMatches) -> CliResult<()> {
    let k_min = *m.get_one::<usize>("k_min").expect("defaulted");
    let k_max = *m.get_one::<usize>("k_max").expect("defaulted");
    if k_min > k_max {
        return Err(Error::config("k-min", format!("{k_min} > k-max {k_max}")).into());
    }
    let ops = Operators::new(Some(PathBuf::from(m.get_one::<String>("cache_dir").expect("defaulted"))));
    let (n_gl, n_l) = gpbe::experiments::BKW_RULE;
    println!("K,L,n,N_L,N_GL,L2,CF");
    let mut prev: Option<f64> = None;
    for row in bkw_table(&ops, k_min..=k_max)? {
        let cf = prev.map(|p| format!("{:.2}", p / row.l2)).unwrap_or_else(|| "-".into());
        println!("{},0,{},{n_l},{n_gl},{:.3e},{cf}", row.k, row.n, row.l2);
        prev = Some(row.l2);
    }
    Ok(())
}

fn cmd_info(m: &ArgMatches) -> CliResult<()> {
    let path = PathBuf::from(m.get_one::<String>("path").expect("required"));
    let h = cache_header(&path)?;
    let k: &CacheKey = &h.key;
    println!("file       {}", path.display());
    println!("version    {}", h.version);
    println!("K, L       {}, {}", k.k_max, k.l_max);
    println!("n          {}", h.n);
    println!("N_GL, N_L  {}, {}", k.n_gl, k.n_l);
    println!(
        "kernel     {} (C_lambda {}, lambda {})",
        k.kernel.family(),
        k.kernel.c_lambda(),
        k.kernel.lambda()
    );
    if m.get_flag("verify") {
        let op = cache_read(&path, Some(k))?;
        println!("checksum   {:016x} ok", op.meta.checksum);
        println!("invariants max |Q_i| = {:.2e}", op.invariant_max_abs());
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    if let Some(&threads) = matches.get_one::<usize>("threads") {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = match name {
        "assemble" => cmd_assemble(sub),
        "run" => cmd_run(sub),
        "dsmc" => cmd_dsmc(sub),
        "validate" => cmd_validate(sub),
        "bkw-table" => cmd_bkw_table(sub),
        "info" => cmd_info(sub),
        _ => unreachable!("clap rejects unknown subcommands"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Validation(names)) => {
            eprintln!("validation failed: {names}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
