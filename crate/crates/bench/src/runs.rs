//! The four subcommands: single runs, convergence sweeps, stability
//! studies and ground-state solves.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::time::Instant;

use gpe_core::assembly::StateVector;
use gpe_core::evolution::{run_evolution, EvolutionOptions, RunReport};
use gpe_core::observables::{energy, eoc, error_norms, mass, ErrorNorms, Reference};
use gpe_core::problems::{
    count_vortices, ground_state, ground_state_energy, load_state, save_state, ExactSolution, InitialState,
    ProblemSpec,
};
use gpe_core::spectral::{PeriodicGrid, SplitStep};
use gpe_core::steppers::{SchemeId, StepParams, Stepper};
use gpe_core::{Complex64, GroundStateResult64, Mesh64, Operators64, PeriodicGrid64};
use rayon::prelude::*;

use crate::config::{elements_from, Method, RunConfig};
use crate::error::{BenchError, Result};
use crate::output::{write_csv, write_json, EocRow, GroundStateRecord, Report, RunRecord, Row, StabilityRow};

/// Where outputs go and how much parallelism sweeps may use.
#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    pub workers: usize,
    pub seed: Option<u64>,
    /// Log progress to stderr.
    pub verbose: bool,
}

impl Context {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { out: out.into(), workers: 1, seed: None, verbose: false }
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.max(1))
            .build()
            .map_err(|e| BenchError::Io(e.to_string()))
    }
}

fn cfg_err(field: &str, msg: impl Into<String>) -> BenchError {
    BenchError::Config { field: field.into(), msg: msg.into() }
}

/// Copy of `cfg` with every defaulted quantity filled in.
pub fn resolved(cfg: &RunConfig, spec: &ProblemSpec) -> Result<RunConfig> {
    let mut r = cfg.clone();
    let (tau, n) = cfg.time_grid(spec)?;
    let e = cfg.elements(spec)?;
    r.tau = Some(tau);
    r.n_steps = Some(n);
    r.final_time = Some(cfg.final_time(spec)?);
    r.elements = Some(if spec.dim == 1 { vec![e[0]] } else { e.to_vec() });
    if matches!(spec.initial, InitialState::GroundState { .. }) {
        r.groundstate.tau = Some(cfg.ground_state_options(spec)?.tau);
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// initial data

/// Ground state of the problem's stationary problem on `mesh`.
pub fn solve_ground_state(cfg: &RunConfig, spec: &ProblemSpec, mesh: &Mesh64) -> Result<(GroundStateResult64, f64)> {
    let InitialState::GroundState { beta, omega, .. } = spec.initial else {
        return Err(cfg_err("problem", format!("`{}` starts from closed-form data; set groundstate.potential", spec.name)));
    };
    let ops = spec.ground_state_operators(mesh.clone())?.expect("ground-state problem");
    let opts = cfg.ground_state_options(spec)?;
    Ok((ground_state(&ops, beta, omega, None, &opts)?, opts.tau))
}

fn cache_path(cfg: &RunConfig, spec: &ProblemSpec, mesh: &Mesh64, ctx: &Context) -> Result<PathBuf> {
    let opts = cfg.ground_state_options(spec)?;
    let mut h = DefaultHasher::new();
    format!("{:?}|{}|{}|{}|{}", spec.initial, spec.kinetic, opts.tau, opts.tol, opts.stages).hash(&mut h);
    mesh.fingerprint().hash(&mut h);
    let dir = cfg.state_cache.clone().unwrap_or_else(|| ctx.out.join("cache"));
    let (nx, ny) = mesh.resolution();
    Ok(dir.join(format!("{}-{nx}x{ny}-{:016x}.state", spec.name, h.finish())))
}

/// Initial state: an explicit file, the exact solution, or a cached or
/// freshly computed ground state. Also returns where it came from.
pub fn initial_state(cfg: &RunConfig, spec: &ProblemSpec, mesh: &Mesh64, ctx: &Context) -> Result<(StateVector<f64>, String)> {
    if let Some(p) = &cfg.initial_state {
        let u = load_state(p, mesh).map_err(|e| cfg_err("initial_state", format!("{}: {e}", p.display())))?;
        return Ok((u, p.display().to_string()));
    }
    if let Some(u) = spec.exact_initial(mesh) {
        return Ok((u, "exact".into()));
    }
    let path = cache_path(cfg, spec, mesh, ctx)?;
    if path.exists() {
        if let Ok(u) = load_state(&path, mesh) {
            ctx.log(format!("ground state from {}", path.display()));
            return Ok((u, path.display().to_string()));
        }
    }
    ctx.log(format!("computing ground state of {} on {:?}", spec.name, mesh.resolution()));
    let (gs, _) = solve_ground_state(cfg, spec, mesh)?;
    save_state(&path, mesh, &gs.state)?;
    Ok((gs.state, "computed".into()))
}

// ---------------------------------------------------------------------------
// single evolutions

fn step_params(cfg: &RunConfig, tau: f64, beta: f64) -> Result<StepParams<f64>> {
    let mut p = StepParams::new(tau, beta);
    p.newton = cfg.newton()?;
    p.solver = cfg.solver()?;
    Ok(p)
}

/// One finite element evolution. Stepper failures end up in
/// `record.failure`, not in `Err`.
pub fn run_fem(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    ops: &Operators64,
    u0: StateVector<f64>,
    scheme: SchemeId,
    tau: f64,
    n_steps: usize,
    stride: usize,
    exact: Option<ExactSolution>,
) -> Result<(RunRecord, Vec<Row>, StateVector<f64>)> {
    let mut opts = EvolutionOptions::new(scheme, step_params(cfg, tau, spec.beta)?, n_steps);
    opts.stride = stride.max(1);
    opts.re_init = cfg.re_init()?;
    opts.energy_ceiling = cfg.energy_ceiling;
    let (nx, ny) = ops.mesh().resolution();
    let mut record = RunRecord {
        method: scheme.name().into(),
        tau,
        n_steps,
        nx,
        ny,
        unknowns: ops.n_dofs(),
        repeats: 1,
        ..Default::default()
    };
    let hook = |t: f64, u: &[Complex64]| -> Option<ErrorNorms<f64>> {
        let sol = exact?;
        error_norms(ops.space(), u, Reference::Exact(&sol.at(t))).ok()
    };
    match run_evolution(ops, u0.clone(), &opts, hook) {
        Ok((rep, state)) => {
            fill_record(&mut record, &rep);
            let rows = rep.samples.iter().map(Row::from).collect();
            Ok((record, rows, state.u))
        }
        Err(e) => {
            record.failure = Some(e.to_string());
            Ok((record, vec![], u0))
        }
    }
}

fn fill_record(r: &mut RunRecord, rep: &RunReport) {
    let last = rep.samples.last().copied().unwrap_or_default();
    r.steps_taken = rep.steps_taken;
    r.final_t = last.t;
    r.final_mass = last.mass;
    r.final_energy = last.energy;
    r.err_l2 = last.errors.map(|e| e.l2);
    r.err_h1 = last.errors.map(|e| e.h1);
    r.err_l1rho = last.errors.map(|e| e.l1_density);
    r.blow_up_time = rep.blow_up_time;
    r.newton_iterations = rep.newton_iterations;
    r.max_newton_iterations = rep.max_newton_iterations;
    r.linear_solves = rep.linear_solves;
    r.linear_iterations = rep.linear_iterations;
    r.mean_step_wall_s = rep.step_wall_s;
    r.mean_wall_s = rep.wall_s;
    r.failure = rep.failure.clone();
}

/// Periodic grid, sampled potential and initial data of a spectral run.
#[derive(Debug, Clone)]
pub struct Sp2Setup {
    pub grid: PeriodicGrid64,
    pub potential: Vec<f64>,
    pub u0: Vec<Complex64>,
    pub exact: Option<ExactSolution>,
}

pub fn sp2_setup(spec: &ProblemSpec, points: usize) -> Result<Sp2Setup> {
    if spec.dim != 1 {
        return Err(cfg_err("scheme", "SP2 runs are one-dimensional"));
    }
    let Some(sol) = spec.exact else {
        return Err(cfg_err("scheme", format!("SP2 needs closed-form initial data, `{}` has none", spec.name)));
    };
    let grid = PeriodicGrid::new(spec.lower[0], spec.upper[0], points).map_err(|e| cfg_err("elements", e.to_string()))?;
    let potential = grid.points().iter().map(|&x| spec.potential.eval(&[x])).collect();
    let u0 = grid.sample(|x| sol.value(&[x], 0.0));
    Ok(Sp2Setup { grid, potential, u0, exact: Some(sol) })
}

/// Grid L2 and L1-density errors against the exact solution or a state on
/// the same grid.
pub fn sp2_errors(grid: &PeriodicGrid64, u: &[Complex64], reference: &[Complex64]) -> (f64, f64) {
    let (mut l2, mut l1) = (0.0, 0.0);
    for (a, b) in u.iter().zip(reference) {
        l2 += (a - b).norm_sqr();
        l1 += (a.norm_sqr() - b.norm_sqr()).abs();
    }
    ((grid.dx * l2).sqrt(), grid.dx * l1)
}

pub fn run_sp2(cfg: &RunConfig, spec: &ProblemSpec, s: &Sp2Setup, tau: f64, n_steps: usize, stride: usize) -> (RunRecord, Vec<Row>, Vec<Complex64>) {
    let start = Instant::now();
    let stride = stride.max(1);
    let mut sp = SplitStep::new(s.grid.clone(), spec.kinetic);
    let mut u = s.u0.clone();
    let mut record = RunRecord {
        method: "SP2".into(),
        tau,
        n_steps,
        nx: s.grid.n,
        unknowns: s.grid.n,
        repeats: 1,
        ..Default::default()
    };
    let mut rows = Vec::new();
    let sample = |sp: &mut SplitStep<f64>, u: &[Complex64], t: f64| -> Row {
        let mut row = Row { t, mass: s.grid.mass(u), wall_s: start.elapsed().as_secs_f64(), ..Default::default() };
        row.energy = sp.energy(u, spec.beta, &s.potential).unwrap_or(f64::NAN);
        if let Some(sol) = s.exact {
            let (l2, l1) = sp2_errors(&s.grid, u, &s.grid.sample(|x| sol.value(&[x], t)));
            row.err_l2 = Some(l2);
            row.err_l1rho = Some(l1);
        }
        row
    };
    let first = sample(&mut sp, &u, 0.0);
    let e0 = first.energy;
    rows.push(first);
    let mut step_wall = 0.0;
    for k in 1..=n_steps {
        let t0 = Instant::now();
        let res = sp.step(&mut u, tau, spec.beta, &s.potential);
        step_wall += t0.elapsed().as_secs_f64();
        if let Err(e) = res {
            record.failure = Some(e.to_string());
            record.blow_up_time.get_or_insert(k as f64 * tau);
            break;
        }
        record.steps_taken = k;
        if k % stride == 0 || k == n_steps {
            let row = sample(&mut sp, &u, k as f64 * tau);
            if (!row.energy.is_finite() || row.energy.abs() > cfg.energy_ceiling * e0.abs()) && record.blow_up_time.is_none() {
                record.blow_up_time = Some(row.t);
            }
            rows.push(row);
        }
    }
    let last = *rows.last().expect("initial row");
    record.final_t = last.t;
    record.final_mass = last.mass;
    record.final_energy = last.energy;
    record.err_l2 = last.err_l2;
    record.err_l1rho = last.err_l1rho;
    record.mean_step_wall_s = step_wall;
    record.mean_wall_s = start.elapsed().as_secs_f64();
    (record, rows, u)
}

// ---------------------------------------------------------------------------
// run

pub fn cmd_run(cfg: &RunConfig, ctx: &Context) -> Result<Report> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let method = cfg.method()?;
    let (tau, n) = cfg.time_grid(&spec)?;
    let elements = cfg.elements(&spec)?;
    fs::create_dir_all(&ctx.out)?;
    let start = Instant::now();
    let mut report = Report::new("run", resolved(cfg, &spec)?);
    report.seed = ctx.seed;

    let mut records = Vec::new();
    let (rows, state) = match method {
        Method::Sp2 => {
            let setup = sp2_setup(&spec, elements[0])?;
            let mut out = None;
            for _ in 0..cfg.repeats {
                let (rec, rows, u) = run_sp2(cfg, &spec, &setup, tau, n, cfg.stride);
                records.push(rec);
                out.get_or_insert((rows, u));
            }
            (out.expect("repeats >= 1").0, None)
        }
        Method::Fem(scheme) => {
            let mesh: Mesh64 = spec.mesh_with(elements)?;
            let (u0, source) = initial_state(cfg, &spec, &mesh, ctx)?;
            ctx.log(format!("initial state: {source}"));
            let ops = spec.operators(mesh)?;
            let mut out = None;
            for r in 0..cfg.repeats {
                ctx.log(format!("{} repeat {}/{}", scheme, r + 1, cfg.repeats));
                let (rec, rows, u) = run_fem(cfg, &spec, &ops, u0.clone(), scheme, tau, n, cfg.stride, spec.exact)?;
                records.push(rec);
                out.get_or_insert((rows, u));
            }
            let (rows, u) = out.expect("repeats >= 1");
            (rows, Some((ops, u)))
        }
    };
    let mut record = records[0].clone();
    let k = records.len() as f64;
    record.repeats = records.len();
    record.mean_wall_s = records.iter().map(|r| r.mean_wall_s).sum::<f64>() / k;
    record.mean_step_wall_s = records.iter().map(|r| r.mean_step_wall_s).sum::<f64>() / k;
    if record.failure.is_some() {
        report.failed_runs = 1;
    }
    if let Some((ops, u)) = state {
        if record.failure.is_none() {
            save_state(&ctx.out.join("final_state.state"), ops.mesh(), &u)?;
        }
    }
    write_csv(&ctx.out.join("observables.csv"), &rows)?;
    write_csv(&ctx.out.join("summary.csv"), std::slice::from_ref(&record))?;
    report.runs.push(record);
    report.wall_s = start.elapsed().as_secs_f64();
    write_json(&ctx.out.join("report.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// converge

#[derive(Debug, Clone, Copy)]
struct Cell {
    method: Method,
    ratio: Option<f64>,
    tau: f64,
    n: usize,
    elements: [usize; 2],
}

/// Element counts with `h = ratio * tau` in every direction.
fn coupled_elements(spec: &ProblemSpec, ratio: f64, tau: f64) -> Result<[usize; 2]> {
    let mut e = [0; 2];
    for c in 0..spec.dim {
        let n = (spec.upper[c] - spec.lower[c]) / (ratio * tau);
        if !(n >= 1.0) || (n - n.round()).abs() > 1e-6 * n {
            return Err(cfg_err(
                "converge.h_over_tau",
                format!("h = {ratio} * {tau} does not divide the domain (gives {n} elements)"),
            ));
        }
        e[c] = n.round() as usize;
    }
    Ok(e)
}

enum Prepared {
    Fem(Operators64, StateVector<f64>),
    Sp2(Sp2Setup),
}

enum Target<'a> {
    Exact(ExactSolution),
    Fine(&'a HashMap<String, Vec<Complex64>>),
}

fn prepare(cfg: &RunConfig, spec: &ProblemSpec, method: Method, e: [usize; 2], ctx: &Context) -> Result<Prepared> {
    Ok(match method {
        Method::Sp2 => Prepared::Sp2(sp2_setup(spec, e[0])?),
        Method::Fem(_) => {
            let mesh: Mesh64 = spec.mesh_with(e)?;
            let (u0, _) = initial_state(cfg, spec, &mesh, ctx)?;
            Prepared::Fem(spec.operators(mesh)?, u0)
        }
    })
}

fn prep_key(method: Method, e: [usize; 2]) -> (bool, [usize; 2]) {
    (method == Method::Sp2, e)
}

/// Final state of one evolution; stepper failures become `Err(message)`.
fn final_state(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    prep: &Prepared,
    method: Method,
    tau: f64,
    n: usize,
) -> Result<(std::result::Result<Vec<Complex64>, String>, RunRecord)> {
    let (rec, u) = match (prep, method) {
        (Prepared::Fem(ops, u0), Method::Fem(s)) => {
            let (rec, _, u) = run_fem(cfg, spec, ops, u0.clone(), s, tau, n, n, None)?;
            (rec, u)
        }
        (Prepared::Sp2(setup), Method::Sp2) => {
            let (rec, _, u) = run_sp2(cfg, spec, setup, tau, n, n);
            (rec, u)
        }
        _ => unreachable!("prepared per method kind"),
    };
    let out = match &rec.failure {
        Some(f) => Err(f.clone()),
        None => Ok(u),
    };
    Ok((out, rec))
}

pub fn cmd_converge(cfg: &RunConfig, ctx: &Context) -> Result<Report> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let methods = cfg.methods()?;
    let steps = cfg.sweep_steps(&spec)?;
    let cv = &cfg.converge;
    fs::create_dir_all(&ctx.out)?;
    let start = Instant::now();

    let mut cells = Vec::new();
    for &method in &methods {
        if !cv.h_over_tau.is_empty() {
            for &r in &cv.h_over_tau {
                for &(tau, n) in &steps {
                    cells.push(Cell { method, ratio: Some(r), tau, n, elements: coupled_elements(&spec, r, tau)? });
                }
            }
        } else if !cv.elements.is_empty() {
            if cv.elements.len() != steps.len() {
                return Err(cfg_err("converge.elements", "needs one entry per step size"));
            }
            for (i, (&(tau, n), e)) in steps.iter().zip(&cv.elements).enumerate() {
                let e = elements_from(e, spec.dim, &format!("converge.elements[{i}]"))?;
                cells.push(Cell { method, ratio: None, tau, n, elements: e });
            }
        } else {
            let e = cfg.elements(&spec)?;
            cells.extend(steps.iter().map(|&(tau, n)| Cell { method, ratio: None, tau, n, elements: e }));
        }
    }

    let mode = match cv.reference.as_str() {
        "auto" if spec.exact.is_some() => "exact",
        "auto" => "fine",
        m @ ("exact" | "fine") => m,
        m => return Err(cfg_err("converge.reference", format!("expected exact, fine or auto, got `{m}`"))),
    };
    if mode == "exact" && spec.exact.is_none() {
        return Err(cfg_err("converge.reference", format!("`{}` has no closed-form solution", spec.name)));
    }
    let fixed_mesh = cells.windows(2).all(|w| w[0].elements == w[1].elements);
    if mode == "fine" && !fixed_mesh {
        return Err(cfg_err("converge.reference", "a fine-step reference needs one mesh for all cells"));
    }

    // meshes, operators and initial data, once per distinct mesh
    let mut preps: BTreeMap<(bool, [usize; 2]), Prepared> = BTreeMap::new();
    let mut extra = Vec::new();
    let ref_method = |m: Method| -> Result<Method> {
        match &cv.reference_scheme {
            Some(s) => s.parse().map_err(|e: gpe_core::Error| cfg_err("converge.reference_scheme", e.to_string())),
            None => Ok(m),
        }
    };
    if mode == "fine" {
        for &m in &methods {
            let rm = ref_method(m)?;
            extra.push((m, rm));
        }
    }
    for c in cells.iter().map(|c| (c.method, c.elements)).chain(extra.iter().map(|&(_, rm)| (rm, cells[0].elements))) {
        let key = prep_key(c.0, c.1);
        if !preps.contains_key(&key) {
            preps.insert(key, prepare(cfg, &spec, c.0, c.1, ctx)?);
        }
    }
    let pool = ctx.pool()?;

    let mut fine: HashMap<String, Vec<Complex64>> = HashMap::new();
    if mode == "fine" {
        let n_ref = cv.reference_steps.ok_or_else(|| cfg_err("converge.reference_steps", "required for a fine reference"))?;
        let t = cfg.final_time(&spec)?;
        let tau_ref = t / n_ref as f64;
        if steps.iter().any(|&(tau, _)| tau <= tau_ref) {
            return Err(cfg_err("converge.reference_steps", "the reference must use a smaller step than every cell"));
        }
        let mut wanted: Vec<Method> = extra.iter().map(|&(_, rm)| rm).collect();
        wanted.dedup();
        let e = cells[0].elements;
        let results: Vec<Result<(Method, std::result::Result<Vec<Complex64>, String>)>> = pool.install(|| {
            wanted
                .par_iter()
                .map(|&rm| {
                    ctx.log(format!("reference {rm} with {n_ref} steps"));
                    let (u, _) = final_state(cfg, &spec, &preps[&prep_key(rm, e)], rm, tau_ref, n_ref)?;
                    Ok((rm, u))
                })
                .collect()
        });
        for r in results {
            let (rm, u) = r?;
            let u = u.map_err(|f| BenchError::Core(gpe_core::Error::InvalidArgument(format!("reference run {rm} failed: {f}"))))?;
            fine.insert(rm.name().to_string(), u);
        }
    }
    let target = match mode {
        "exact" => Target::Exact(spec.exact.expect("checked")),
        _ => Target::Fine(&fine),
    };
    let t_end = cfg.final_time(&spec)?;

    let rows: Vec<Result<EocRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                ctx.log(format!("{} tau={} elements={:?}", c.method, c.tau, c.elements));
                let prep = &preps[&prep_key(c.method, c.elements)];
                let (u, rec) = final_state(cfg, &spec, prep, c.method, c.tau, c.n)?;
                let mut row = EocRow {
                    method: c.method.name().into(),
                    ratio: c.ratio,
                    tau: c.tau,
                    n_steps: c.n,
                    nx: c.elements[0],
                    ny: if spec.dim == 2 { c.elements[1] } else { 0 },
                    err_l2: f64::NAN,
                    err_l1rho: f64::NAN,
                    blow_up_time: rec.blow_up_time,
                    wall_s: rec.mean_wall_s,
                    failure: rec.failure.clone(),
                    ..Default::default()
                };
                let Ok(u) = u else { return Ok(row) };
                let reference: std::result::Result<Vec<Complex64>, ExactSolution> = match &target {
                    Target::Exact(sol) => Err(*sol),
                    Target::Fine(map) => Ok(map[ref_method(c.method)?.name()].clone()),
                };
                match prep {
                    Prepared::Fem(ops, _) => {
                        let e = match &reference {
                            Err(sol) => error_norms(ops.space(), &u, Reference::Exact(&sol.at(t_end)))?,
                            Ok(r) => error_norms(ops.space(), &u, Reference::Discrete(r))?,
                        };
                        row.err_l2 = e.l2;
                        row.err_h1 = Some(e.h1);
                        row.err_l1rho = e.l1_density;
                    }
                    Prepared::Sp2(s) => {
                        let r = match reference {
                            Err(sol) => s.grid.sample(|x| sol.value(&[x], t_end)),
                            Ok(r) => r,
                        };
                        (row.err_l2, row.err_l1rho) = sp2_errors(&s.grid, &u, &r);
                    }
                }
                Ok(row)
            })
            .collect()
    });
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    fill_eoc(&mut rows);

    let mut report = Report::new("converge", resolved(cfg, &spec)?);
    report.seed = ctx.seed;
    report.failed_runs = rows.iter().filter(|r| r.failure.is_some() && r.blow_up_time.is_none()).count();
    write_csv(&ctx.out.join("eoc.csv"), &rows)?;
    report.eoc = rows;
    report.wall_s = start.elapsed().as_secs_f64();
    write_json(&ctx.out.join("report.json"), &report)?;
    Ok(report)
}

/// Rates between consecutive step sizes within each (method, ratio) group.
pub fn fill_eoc(rows: &mut [EocRow]) {
    let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry((r.method.clone(), format!("{:?}", r.ratio))).or_default().push(i);
    }
    for idx in groups.values_mut() {
        idx.sort_by(|&a, &b| rows[b].tau.total_cmp(&rows[a].tau));
        let taus: Vec<f64> = idx.iter().map(|&i| rows[i].tau).collect();
        let rates = |f: &dyn Fn(&EocRow) -> f64| -> Vec<Option<f64>> {
            let errs: Vec<f64> = idx.iter().map(|&i| f(&rows[i])).collect();
            eoc(&errs, &taus).unwrap_or_else(|_| vec![None; idx.len().saturating_sub(1)])
        };
        let l2 = rates(&|r| r.err_l2);
        let h1 = rates(&|r| r.err_h1.unwrap_or(f64::NAN));
        let l1 = rates(&|r| r.err_l1rho);
        for (k, &i) in idx.iter().enumerate().skip(1) {
            rows[i].eoc_l2 = l2.get(k - 1).copied().flatten();
            rows[i].eoc_h1 = h1.get(k - 1).copied().flatten();
            rows[i].eoc_l1rho = l1.get(k - 1).copied().flatten();
        }
    }
}

// ---------------------------------------------------------------------------
// stability

/// Energy trace of one (method, tau) cell until the first threshold
/// crossing (or the end).
pub fn stability_cell(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    prep: &(Option<(Operators64, StateVector<f64>)>, Option<Sp2Setup>),
    method: Method,
    tau: f64,
    n: usize,
) -> Result<(StabilityRow, Vec<Row>)> {
    let st = &cfg.stability;
    let start = Instant::now();
    let mut row = StabilityRow { method: method.name().into(), tau, n_steps: n, crossing: "none".into(), ..Default::default() };
    let mut trace = Vec::new();
    let stride = cfg.stride.max(1);

    // energy after k steps, or Err(message) on a stepper failure
    let mut energies: Box<dyn FnMut(usize) -> std::result::Result<(f64, f64), String> + '_> = match method {
        Method::Fem(scheme) => {
            let (ops, u0) = prep.0.as_ref().expect("FEM setup");
            let params = step_params(cfg, tau, spec.beta)?;
            let stepper = Stepper::new(ops, scheme, params).with_re_init(cfg.re_init()?);
            let mut state = stepper.start(u0.clone())?;
            Box::new(move |k| {
                if k > 0 {
                    stepper.step(&mut state).map_err(|e| e.to_string())?;
                }
                let e = energy(ops, &state.u, spec.beta).map_err(|e| e.to_string())?;
                let m = mass(&ops.mass, &state.u).map_err(|e| e.to_string())?;
                Ok((e, m))
            })
        }
        Method::Sp2 => {
            let s = prep.1.as_ref().expect("spectral setup");
            let mut sp = SplitStep::new(s.grid.clone(), spec.kinetic);
            let mut u = s.u0.clone();
            Box::new(move |k| {
                if k > 0 {
                    sp.step(&mut u, tau, spec.beta, &s.potential).map_err(|e| e.to_string())?;
                }
                let e = sp.energy(&u, spec.beta, &s.potential).map_err(|e| e.to_string())?;
                Ok((e, s.grid.mass(&u)))
            })
        }
    };

    let (e0, m0) = energies(0).map_err(|m| BenchError::Core(gpe_core::Error::InvalidArgument(m)))?;
    row.initial_energy = e0;
    row.max_energy = e0;
    row.threshold = if st.relative { st.energy_threshold * e0.abs() } else { st.energy_threshold };
    trace.push(Row { t: 0.0, mass: m0, energy: e0, ..Default::default() });
    for k in 1..=n {
        let t = k as f64 * tau;
        match energies(k) {
            Ok((e, m)) => {
                row.steps_taken = k;
                row.max_energy = row.max_energy.max(e);
                let crossed = !e.is_finite() || e > row.threshold;
                if k % stride == 0 || k == n || crossed {
                    trace.push(Row { t, mass: m, energy: e, wall_s: start.elapsed().as_secs_f64(), ..Default::default() });
                }
                if crossed && row.crossing == "none" {
                    row.crossing = format!("{t}");
                    if st.stop_at_crossing {
                        break;
                    }
                }
            }
            Err(msg) => {
                row.failure = Some(format!("t = {t}: {msg}"));
                break;
            }
        }
    }
    row.wall_s = start.elapsed().as_secs_f64();
    Ok((row, trace))
}

pub fn cmd_stability(cfg: &RunConfig, ctx: &Context) -> Result<Report> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let methods = cfg.methods()?;
    let steps = cfg.stability_steps(&spec)?;
    let elements = cfg.elements(&spec)?;
    fs::create_dir_all(&ctx.out)?;
    let start = Instant::now();

    let fem = if methods.iter().any(|m| matches!(m, Method::Fem(_))) {
        let mesh: Mesh64 = spec.mesh_with(elements)?;
        let (u0, _) = initial_state(cfg, &spec, &mesh, ctx)?;
        Some((spec.operators(mesh)?, u0))
    } else {
        None
    };
    let sp2 = if methods.contains(&Method::Sp2) { Some(sp2_setup(&spec, cfg.stability.sp2_points)?) } else { None };
    let prep = (fem, sp2);

    let cells: Vec<(Method, f64, usize)> = methods.iter().flat_map(|&m| steps.iter().map(move |&(tau, n)| (m, tau, n))).collect();
    let results: Vec<Result<(StabilityRow, Vec<Row>)>> = ctx.pool()?.install(|| {
        cells
            .par_iter()
            .map(|&(m, tau, n)| {
                ctx.log(format!("stability {m} tau={tau}"));
                stability_cell(cfg, &spec, &prep, m, tau, n)
            })
            .collect()
    });
    let traces = ctx.out.join("traces");
    fs::create_dir_all(&traces)?;
    let mut rows = Vec::new();
    for r in results {
        let (row, trace) = r?;
        write_csv(&traces.join(format!("{}_tau{}.csv", row.method, row.tau)), &trace)?;
        rows.push(row);
    }
    let mut report = Report::new("stability", resolved(cfg, &spec)?);
    report.seed = ctx.seed;
    // a failure after the threshold was crossed is the expected blow-up
    report.failed_runs = rows.iter().filter(|r| r.failure.is_some() && r.crossing == "none").count();
    write_csv(&ctx.out.join("stability.csv"), &rows)?;
    report.stability = rows;
    report.wall_s = start.elapsed().as_secs_f64();
    write_json(&ctx.out.join("report.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// groundstate

pub fn cmd_groundstate(cfg: &RunConfig, ctx: &Context) -> Result<Report> {
    let spec = cfg.spec()?;
    let elements = cfg.elements(&spec)?;
    fs::create_dir_all(&ctx.out)?;
    let start = Instant::now();
    let mesh: Mesh64 = spec.mesh_with(elements)?;
    let (gs, flow_step) = solve_ground_state(cfg, &spec, &mesh)?;
    let InitialState::GroundState { beta, omega, .. } = spec.initial else { unreachable!("solved") };
    let ops = spec.ground_state_operators(mesh.clone())?.expect("ground-state problem");
    let state_file = ctx.out.join("ground_state.state");
    save_state(&state_file, &mesh, &gs.state)?;
    // later runs on the same mesh pick the state up without recomputing it
    save_state(&cache_path(cfg, &spec, &mesh, ctx)?, &mesh, &gs.state)?;
    let vortices = if spec.dim == 2 && omega != 0.0 {
        Some(count_vortices(&mesh, &gs.state, cfg.groundstate.vortex_density_fraction)?)
    } else {
        None
    };
    let record = GroundStateRecord {
        eigenvalue: gs.eigenvalue,
        energy: ground_state_energy(&ops, &gs.state, beta, omega)?,
        mass: mass(&ops.mass, &gs.state)?,
        iterations: gs.iterations,
        residual: gs.residual,
        eigen_residual: gs.eigen_residual,
        vortices,
        flow_step,
        state_file: state_file.display().to_string(),
        wall_s: start.elapsed().as_secs_f64(),
    };
    #[derive(serde::Serialize)]
    struct FlowRow {
        iteration: usize,
        energy: f64,
    }
    let flow: Vec<FlowRow> = gs.energies.iter().enumerate().map(|(i, &energy)| FlowRow { iteration: i + 1, energy }).collect();
    write_csv(&ctx.out.join("flow_energy.csv"), &flow)?;

    let mut report = Report::new("groundstate", resolved(cfg, &spec)?);
    report.seed = ctx.seed;
    report.ground_state = Some(record);
    report.wall_s = start.elapsed().as_secs_f64();
    write_json(&ctx.out.join("report.json"), &report)?;
    Ok(report)
}
