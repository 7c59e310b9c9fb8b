//! The named experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use resonet_core::des::{self, export::write_des_csv, InitSpec, SimConfig};
use resonet_core::fluid::experiments::{
    attractor_experiment, cyclic_inflow, distance_to_cycle_measure, lyapunov_decay_with,
    node_loads, synchronization_check, AttractorConfig, SyncConfig,
};
use resonet_core::fluid::export::write_fluid_csv;
use resonet_core::fluid::{run_closed, BranchPolicy, ClosedTrajectory};
use resonet_core::format::fmt_sig;
use resonet_core::metrics::{
    exp_moment_ensemble, imbalance, marginal_w1, moment_bound_check, oscillation_report,
    sync_index_on,
};
use resonet_core::model::lyapunov_l;
use resonet_core::nlmp::{self, write_lattice, write_nlmp_csv, MarginalLattice, NlmpConfig};
use resonet_core::studies::{self, median, PersistenceConfig};
use resonet_core::{CycleTrajectory, NetworkParams, ParticleEnsemble, TriangleState};

use crate::config::{ExperimentConfig, InitConfig, Scenario};
use crate::error::{CliError, Result};
use crate::output::{Check, Outcome, Series, Table};

pub const ATTRACTOR_CSV_HEADER: &str = "sample,phase,initial_dist,max_dist_after";
pub const LYAPUNOV_CSV_HEADER: &str = "sample,l_before,l_after,decrease";
pub const EULER_CSV_HEADER: &str = "replica,seed,sup_distance";
pub const OSCILLATION_CSV_HEADER: &str =
    "tau,mean_x_o,mean_x_a,mean_x_ba,mean_x_b,mean_x_ab,imbalance,krov,exp_moment";
pub const COMPARISON_CSV_HEADER: &str = "replica,seed,n_events,sup_mean_l1,final_marginal_w1";

/// Resolved inputs shared by the scenarios.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub params: NetworkParams,
    pub seed: u64,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, params: cfg.params()?, seed: cfg.seed.unwrap_or(0) })
    }

    fn branch(&self) -> BranchPolicy {
        self.cfg.branch.unwrap_or_default()
    }

    fn n(&self) -> Result<u32> {
        self.cfg.n.ok_or_else(|| CliError::config("n", "required by this scenario"))
    }
}

pub fn run_scenario(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ctx = Ctx::new(cfg)?;
    match cfg.scenario()? {
        Scenario::CycleCheck => cycle_check(&ctx),
        Scenario::FixedPoint => fixed_point(&ctx),
        Scenario::Attractor => attractor(&ctx),
        Scenario::BranchSplit => branch_split(&ctx),
        Scenario::Lyapunov => lyapunov(&ctx),
        Scenario::Sync => sync(&ctx),
        Scenario::DesRun => des_run(&ctx),
        Scenario::NlmpRun => nlmp_run(&ctx),
        Scenario::MeasureRun => measure_run(&ctx),
        Scenario::EulerConvergence => euler_convergence(&ctx),
        Scenario::Oscillation => oscillation(&ctx),
        Scenario::MomentBound => moment_bound(&ctx),
    }
}

fn fluid_init(ctx: &Ctx, default: TriangleState) -> Result<ParticleEnsemble> {
    Ok(match &ctx.cfg.init {
        None => ParticleEnsemble::delta(default)?,
        Some(InitConfig::Delta { state }) => ParticleEnsemble::delta(TriangleState::from_array(*state))?,
        Some(InitConfig::CyclePhase { phase }) => {
            ParticleEnsemble::delta(CycleTrajectory::new(&ctx.params)?.point(*phase)?)?
        }
        Some(InitConfig::Atoms { atoms }) => {
            let total: f64 = atoms.iter().map(|(w, _)| w).sum();
            ParticleEnsemble::new(
                atoms.iter().map(|(w, x)| (w / total, TriangleState::from_array(*x))).collect(),
            )?
        }
        Some(InitConfig::Counts { .. }) => {
            return Err(CliError::config("init", "count initial conditions need a stochastic scenario"))
        }
    })
}

fn lattice_counts(ctx: &Ctx, n: u32) -> Result<[u32; 5]> {
    Ok(match &ctx.cfg.init {
        None => [0, n, 0, 0, 0],
        Some(InitConfig::Counts { counts }) => {
            if counts.len() != 1 || counts[0].iter().sum::<u32>() != n {
                return Err(CliError::config("init.counts", format!("need one row summing to n = {n}")));
            }
            counts[0]
        }
        Some(InitConfig::Delta { state }) => des::scale_to_counts(&TriangleState::from_array(*state), n)?,
        Some(InitConfig::CyclePhase { phase }) => {
            des::scale_to_counts(&CycleTrajectory::new(&ctx.params)?.point(*phase)?, n)?
        }
        Some(InitConfig::Atoms { .. }) => {
            return Err(CliError::config("init", "atomic initial conditions need a fluid scenario"))
        }
    })
}

fn des_init(ctx: &Ctx, m: usize, n: u32) -> Result<InitSpec> {
    Ok(match &ctx.cfg.init {
        None => InitSpec::Counts(vec![[0, n, 0, 0, 0]; m]),
        Some(InitConfig::Counts { counts }) if counts.len() == 1 => InitSpec::Counts(vec![counts[0]; m]),
        Some(InitConfig::Counts { counts }) => InitSpec::Counts(counts.clone()),
        Some(InitConfig::Delta { state }) => InitSpec::Delta(TriangleState::from_array(*state)),
        Some(InitConfig::CyclePhase { phase }) => InitSpec::CyclePhase(*phase),
        Some(InitConfig::Atoms { .. }) => {
            return Err(CliError::config("init", "atomic initial conditions need a fluid scenario"))
        }
    })
}

/// Every `sample_dt / h`-th record, plus the last.
fn thinned(tr: &ClosedTrajectory, sample_dt: f64) -> ClosedTrajectory {
    let stride = ((sample_dt / tr.h).round() as usize).max(1);
    let last = tr.records.len() - 1;
    ClosedTrajectory {
        params: tr.params,
        h: tr.h,
        records: tr
            .records
            .iter()
            .enumerate()
            .filter(|(k, _)| k % stride == 0 || *k == last)
            .map(|(_, r)| r.clone())
            .collect(),
    }
}

fn add_fluid(out: &mut Outcome, ctx: &Ctx, name: &str, tr: &ClosedTrajectory) -> Result<()> {
    let tr = thinned(tr, ctx.cfg.sample_dt.unwrap_or(0.01));
    out.tables.push(Table::from_writer(name, |w| write_fluid_csv(w, &tr))?);
    let path = |f: &dyn Fn(&resonet_core::fluid::ClosedRecord) -> f64| {
        tr.records.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>()
    };
    out.series.push(Series::new(&format!("{name}_imbalance"), "t", "imbalance", path(&|r| imbalance(&r.mean()))));
    out.series.push(Series::new(
        &format!("{name}_dist_to_cycle"),
        "t",
        "distance to cycle",
        path(&|r| r.diagnostics.dist_to_cycle),
    ));
    Ok(())
}

fn cycle_check(ctx: &Ctx) -> Result<Outcome> {
    let h = ctx.cfg.dt.unwrap_or(1e-4);
    let t_end = ctx.cfg.t_end.unwrap_or(6.0);
    let ens = fluid_init(ctx, TriangleState::new(0.0, 1.0, 0.0, 0.0, 0.0))?;
    let tr = run_closed(&ens, &ctx.params, t_end, h, ctx.branch())?;
    let th = &ctx.cfg.thresholds;
    let a = tr.at(1.0 / 9.0).mean();
    let b = tr.at(1.0).mean();
    let path: Vec<_> = tr.records.iter().map(|r| (r.t, r.mean())).collect();
    let osc = oscillation_report(&path);
    let mut out = Outcome::with_checks(vec![
        Check::at_most("x_ab(1/9) error", (a.x_ab - 8.0 / 9.0).abs(), th.waypoint_tol),
        Check::at_most("x_b(1/9) error", (a.x_b - 1.0 / 9.0).abs(), th.waypoint_tol),
        Check::at_most("x_a(1/9)", a.x_a, th.waypoint_tol),
        Check::at_most("x_b(1) error", (b.x_b - 1.0).abs(), th.waypoint_tol),
        Check::at_most(
            "period error",
            osc.period.map_or(f64::NAN, |p| (p - th.period).abs()),
            th.period_tol,
        ),
    ]);
    out.put("period", osc.period);
    out.put("drift", osc.drift);
    out.put("alternations", osc.alternations);
    out.put("state_at_1_9", a.to_array());
    out.put("state_at_1", b.to_array());
    out.metrics(&["period"], vec![vec![osc.period.unwrap_or(f64::NAN)]]);
    add_fluid(&mut out, ctx, "fluid", &tr)?;
    Ok(out)
}

fn fixed_point(ctx: &Ctx) -> Result<Outcome> {
    let h = ctx.cfg.dt.unwrap_or(1e-3);
    let t_end = ctx.cfg.t_end.unwrap_or(10.0);
    let ens = fluid_init(ctx, TriangleState::star())?;
    let x0 = ens.mean();
    let tr = run_closed(&ens, &ctx.params, t_end, h, ctx.branch())?;
    let dev = tr.records.iter().map(|r| r.mean().l1(&x0)).fold(0.0, f64::max);
    let (load_o, load_a, load_b) = node_loads(&tr.records[0].outflow_rates, &ctx.params);
    let mut out = Outcome::with_checks(vec![Check::at_most("sup deviation", dev, ctx.cfg.thresholds.fixed_point_tol)]);
    out.put("sup_deviation", dev);
    out.put("node_loads", [load_o, load_a, load_b]);
    out.metrics(&["sup_deviation"], vec![vec![dev]]);
    add_fluid(&mut out, ctx, "fluid", &tr)?;
    Ok(out)
}

fn attractor(ctx: &Ctx) -> Result<Outcome> {
    let acfg = AttractorConfig {
        eps: ctx.cfg.eps.unwrap_or(0.01),
        n_samples: ctx.cfg.replicas.unwrap_or(20),
        policy: ctx.branch(),
        seed: ctx.seed,
        h: ctx.cfg.dt.unwrap_or(1e-4),
        t_settle: ctx.cfg.t_settle.unwrap_or(5.0),
        t_end: ctx.cfg.t_end.unwrap_or(10.0),
    };
    let r = attractor_experiment(&ctx.params, &acfg)?;
    let mut out = Outcome::with_checks(vec![Check::at_most("max distance after settling", r.max_dist_after, ctx.cfg.thresholds.attractor_tol)]);
    out.put("max_dist_after", r.max_dist_after);
    let rows: Vec<Vec<String>> = r
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i.to_string(), fmt_sig(s.phase), fmt_sig(s.initial_dist), fmt_sig(s.max_dist_after)])
        .collect();
    out.tables.push(Table::from_rows("attractor", ATTRACTOR_CSV_HEADER, &rows));
    out.series.push(Series::new(
        "max_dist_after",
        "sample",
        "max distance",
        r.samples.iter().enumerate().map(|(i, s)| (i as f64, s.max_dist_after)).collect(),
    ));
    out.metrics(
        &["initial_dist", "max_dist_after"],
        r.samples.iter().map(|s| vec![s.initial_dist, s.max_dist_after]).collect(),
    );
    Ok(out)
}

fn branch_split(ctx: &Ctx) -> Result<Outcome> {
    let h = ctx.cfg.dt.unwrap_or(1e-3);
    let t_split = ctx.cfg.t_split.unwrap_or(0.2);
    let t_end = ctx.cfg.t_end.unwrap_or(3.0);
    let ens = fluid_init(ctx, TriangleState::new(0.5, 0.25, 0.0, 0.25, 0.0))?;
    let runs: Vec<_> = [BranchPolicy::AFirst, BranchPolicy::BFirst, BranchPolicy::Symmetric]
        .into_par_iter()
        .map(|p| run_closed(&ens, &ctx.params, t_end.max(t_split), h, p))
        .collect::<resonet_core::Result<_>>()?;
    let split = runs[0].at(t_split).mean().l1(&runs[1].at(t_split).mean());
    let to_star = runs[2].at(t_end).mean().l1(&TriangleState::star());
    let th = &ctx.cfg.thresholds;
    let mut out = Outcome::with_checks(vec![
        Check::at_least("A-first vs B-first split", split, th.split_min),
        Check::at_most("symmetric distance to fixed point", to_star, th.symmetric_tol),
    ]);
    out.put("split", split);
    out.put("symmetric_distance_to_star", to_star);
    out.metrics(&["split", "symmetric_distance_to_star"], vec![vec![split, to_star]]);
    for (name, tr) in ["fluid_a_first", "fluid_b_first", "fluid_symmetric"].iter().zip(&runs) {
        add_fluid(&mut out, ctx, name, tr)?;
    }
    Ok(out)
}

/// A state whose largest scaled node workload equals `l`.
fn state_with_workload<R: Rng>(p: &NetworkParams, l: f64, rng: &mut R) -> TriangleState {
    let mut x = [0.0; 5];
    let split: f64 = rng.random();
    let other = rng.random::<f64>() * 0.5 * l;
    match rng.random_range(0..3) {
        0 => {
            x[0] = l * p.gamma_o;
            x[1] = other * p.gamma_a;
        }
        1 => {
            x[1] = split * l * p.gamma_a;
            x[2] = (1.0 - split) * l * p.gamma_ba;
            x[0] = other * p.gamma_o;
        }
        _ => {
            x[3] = split * l * p.gamma_b;
            x[4] = (1.0 - split) * l * p.gamma_ab;
            x[0] = other * p.gamma_o;
        }
    }
    TriangleState::from_array(x)
}

fn lyapunov(ctx: &Ctx) -> Result<Outcome> {
    let h = ctx.cfg.dt.unwrap_or(1e-3);
    let [lo, hi] = ctx.cfg.l_range.unwrap_or([15.0, 30.0]);
    if lo <= ctx.params.k_threshold {
        return Err(CliError::config("l_range", format!("must lie above k_threshold = {}", ctx.params.k_threshold)));
    }
    let samples = ctx.cfg.replicas.unwrap_or(10);
    let inflow = cyclic_inflow(&ctx.params, h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let starts: Vec<_> = (0..samples)
        .map(|_| {
            let l = rng.random_range(lo..hi);
            state_with_workload(&ctx.params, l, &mut rng)
        })
        .collect();
    let decays = starts
        .par_iter()
        .map(|x| lyapunov_decay_with(x, &ctx.params, h, &inflow))
        .collect::<resonet_core::Result<Vec<_>>>()?;
    let least = decays.iter().map(|d| d.decrease).fold(f64::INFINITY, f64::min);
    let mut out = Outcome::with_checks(vec![Check::at_least("smallest decrease per period", least, ctx.cfg.thresholds.min_decrease)]);
    out.put("min_decrease", least);
    let rows: Vec<Vec<String>> = decays
        .iter()
        .enumerate()
        .map(|(i, d)| vec![i.to_string(), fmt_sig(d.l_before), fmt_sig(d.l_after), fmt_sig(d.decrease)])
        .collect();
    out.tables.push(Table::from_rows("lyapunov", LYAPUNOV_CSV_HEADER, &rows));
    out.series.push(Series::new(
        "decrease",
        "L before",
        "decrease over one period",
        decays.iter().map(|d| (d.l_before, d.decrease)).collect(),
    ));
    out.metrics(
        &["l_before", "l_after", "decrease"],
        decays.iter().map(|d| vec![d.l_before, d.l_after, d.decrease]).collect(),
    );
    Ok(out)
}

fn sync(ctx: &Ctx) -> Result<Outcome> {
    let h = ctx.cfg.dt.unwrap_or(1e-3);
    let t_end = ctx.cfg.t_end.unwrap_or(5.0);
    let eps = ctx.cfg.eps.unwrap_or(0.02);
    let cycle = CycleTrajectory::new(&ctx.params)?;
    let ens = match &ctx.cfg.init {
        Some(InitConfig::Atoms { .. }) => fluid_init(ctx, TriangleState::star())?,
        _ => {
            let phase = match &ctx.cfg.init {
                Some(InitConfig::CyclePhase { phase }) => *phase,
                None => 0.0,
                Some(_) => {
                    return Err(CliError::config("init", "sync starts from a cycle phase or explicit atoms"))
                }
            };
            let m = ctx.cfg.m.unwrap_or(8);
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let center = cycle.point(phase)?;
            // Mixtures (1 - s) c + s q with |q| = 1 and s < eps / 2 stay
            // within eps of the cycle point in L1.
            let states: Vec<_> = (0..m)
                .map(|_| {
                    let q: [f64; 5] = std::array::from_fn(|_| -(1.0 - rng.random::<f64>()).ln());
                    let sum: f64 = q.iter().sum();
                    let s = 0.5 * eps * rng.random::<f64>();
                    let c = center.to_array();
                    TriangleState::from_array(std::array::from_fn(|i| (1.0 - s) * c[i] + s * q[i] / sum))
                })
                .collect();
            ParticleEnsemble::uniform(&states)?
        }
    };
    let scfg = SyncConfig { t_end, h, eps, policy: ctx.branch(), ..SyncConfig::default() };
    let report = synchronization_check(&ens, &ctx.params, &scfg)?;
    let tr = run_closed(&ens, &ctx.params, t_end, h, ctx.branch())?;
    let (d0, _) = distance_to_cycle_measure(&cycle, &ens);
    let mut out = Outcome::with_checks(vec![Check::at_most("final diameter", report.residual, ctx.cfg.thresholds.sync_tol)]);
    out.put("t_sync", report.t_sync);
    out.put("residual", report.residual);
    out.put("initial_distance", d0);
    out.metrics(&["t_sync", "residual"], vec![vec![report.t_sync.unwrap_or(f64::NAN), report.residual]]);
    let thin = thinned(&tr, ctx.cfg.sample_dt.unwrap_or(0.01));
    out.series.push(Series::new(
        "diameter",
        "t",
        "ensemble diameter",
        thin.records.iter().map(|r| (r.t, r.ensemble.diameter())).collect(),
    ));
    out.series.push(Series::new(
        "sync_index",
        "t",
        "sync index",
        thin
            .records
            .iter()
            .map(|r| {
                let xs: Vec<_> = r.ensemble.atoms().iter().map(|a| a.state).collect();
                (r.t, sync_index_on(&cycle, &xs).index.unwrap_or(f64::NAN))
            })
            .collect(),
    ));
    add_fluid(&mut out, ctx, "fluid", &tr)?;
    Ok(out)
}

fn des_run(ctx: &Ctx) -> Result<Outcome> {
    let m = ctx.cfg.m.ok_or_else(|| CliError::config("m", "required by des-run"))?;
    let n = ctx.n()?;
    let t_end = ctx.cfg.t_end.ok_or_else(|| CliError::config("t_end", "required by des-run"))?;
    let replicas = ctx.cfg.replicas.unwrap_or(1);
    let compare = ctx.cfg.compare_nlmp.unwrap_or(false);
    let mut scfg = SimConfig::new(m, n, t_end, ctx.seed, des_init(ctx, m, n)?);
    scfg.dt_out = Some(ctx.cfg.dt.unwrap_or(t_end / 200.0));
    scfg.keep_states = true;
    scfg.initial_state(&ctx.params)?;
    let runs = des::run_replicas(&scfg, &ctx.params, replicas)
        .into_iter()
        .collect::<resonet_core::Result<Vec<_>>>()?;

    let mut out = Outcome::default();
    let nf = n as f64;
    for (i, tr) in runs.iter().enumerate() {
        let name = if replicas == 1 { "des".to_string() } else { format!("des_r{i}") };
        out.tables.push(Table::from_writer(&name, |w| write_des_csv(w, tr, &ctx.params))?);
        out.series.push(Series::new(
            &format!("{name}_imbalance"),
            "t",
            "imbalance",
            tr.times
                .iter()
                .zip(&tr.means)
                .map(|(t, c)| (*t, imbalance(&TriangleState::from_array(c.map(|v| v / nf)))))
                .collect(),
        ));
    }
    out.put("n_events", runs.iter().map(|r| r.n_events).collect::<Vec<_>>());
    out.put("final_means", runs.iter().map(|r| *r.means.last().expect("snapshot")).collect::<Vec<_>>());

    if !compare {
        out.metrics(
            &["n_events", "final_imbalance"],
            runs.iter()
                .map(|r| {
                    let c = r.means.last().expect("snapshot");
                    vec![r.n_events as f64, imbalance(&TriangleState::from_array(c.map(|v| v / nf)))]
                })
                .collect(),
        );
        return Ok(out);
    }

    // Master equation from the same start, sampled on the simulator's grid.
    let counts = match &scfg.init {
        InitSpec::Counts(c) if c.iter().all(|r| r == &c[0]) => c[0],
        InitSpec::Delta(x) => des::scale_to_counts(x, n)?,
        InitSpec::CyclePhase(phi) => des::scale_to_counts(&CycleTrajectory::new(&ctx.params)?.point(*phi)?, n)?,
        InitSpec::Counts(_) => {
            return Err(CliError::config("init.counts", "comparison needs every triangle in the same state"))
        }
    };
    let x_max = ctx.cfg.x_max.unwrap_or(5 * n as usize);
    let dt = scfg.dt_out.expect("set above");
    let mut ncfg = NlmpConfig::new(t_end, 0.02f64.min(nlmp::step_limit(&ctx.params, nlmp::Method::Rk4)));
    ncfg.record_dt = Some(dt);
    ncfg.boundary_threshold = ctx.cfg.thresholds.boundary_mass;
    let mut lattices = Vec::new();
    let nl = nlmp::integrate_with(
        &MarginalLattice::product_delta(x_max, n, counts)?,
        &ctx.params,
        &ncfg,
        |_, mu| lattices.push(mu.clone()),
    )?;
    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    for (i, tr) in runs.iter().enumerate() {
        let mut sup: f64 = 0.0;
        for (t, c) in tr.times.iter().zip(&tr.means) {
            let Some(s) = nl.samples.get((t / dt).round() as usize) else { break };
            sup = sup.max((0..5).map(|k| (c[k] / nf - s.scaled_means[k]).abs()).sum());
        }
        let last = tr.states.as_ref().and_then(|s| s.last()).expect("states kept");
        let k = ((tr.times.last().expect("snapshot") / dt).round() as usize).min(lattices.len() - 1);
        let w1 = marginal_w1(&des::empirical_measure(last, n)?, &lattices[k]);
        let seed = ctx.seed ^ i as u64;
        rows.push(vec![i.to_string(), seed.to_string(), tr.n_events.to_string(), fmt_sig(sup), fmt_sig(w1)]);
        metrics.push(vec![sup, w1]);
    }
    out.put("median_sup_mean_l1", median(&metrics.iter().map(|r| r[0]).collect::<Vec<_>>()));
    out.put("median_final_marginal_w1", median(&metrics.iter().map(|r| r[1]).collect::<Vec<_>>()));
    out.tables.push(Table::from_writer("nlmp", |w| write_nlmp_csv(w, &nl))?);
    out.tables.push(Table::from_rows("comparison", COMPARISON_CSV_HEADER, &rows));
    out.metrics(&["sup_mean_l1", "final_marginal_w1"], metrics);
    Ok(out)
}

fn nlmp_run(ctx: &Ctx) -> Result<Outcome> {
    let n = ctx.n()?;
    let t_end = ctx.cfg.t_end.ok_or_else(|| CliError::config("t_end", "required by nlmp-run"))?;
    let x_max = ctx.cfg.x_max.unwrap_or(4 * n as usize);
    let mu0 = MarginalLattice::product_delta(x_max, n, lattice_counts(ctx, n)?)?;
    let mut ncfg = NlmpConfig::new(t_end, ctx.cfg.dt.unwrap_or(0.02));
    ncfg.record_dt = Some(ctx.cfg.sample_dt.unwrap_or(t_end / 1000.0));
    ncfg.boundary_threshold = ctx.cfg.thresholds.boundary_mass;
    let tr = nlmp::integrate(&mu0, &ctx.params, &ncfg)?;
    let mut out = Outcome::default();
    out.put("final_time", tr.final_time);
    out.put("steps", tr.steps);
    out.put("max_drift", tr.max_drift);
    out.put("final_scaled_means", tr.final_state.scaled_means());
    out.put("final_boundary_mass", tr.final_state.boundary_mass());
    let path: Vec<_> = tr.samples.iter().map(|s| (s.t, TriangleState::from_array(s.scaled_means))).collect();
    let osc = oscillation_report(&path);
    out.put("alternations", osc.alternations);
    out.put("period", osc.period);
    out.tables.push(Table::from_writer("nlmp", |w| write_nlmp_csv(w, &tr))?);
    out.series.push(Series::new(
        "imbalance",
        "t",
        "imbalance",
        path.iter().map(|(t, x)| (*t, imbalance(x))).collect(),
    ));
    out.series.push(Series::new(
        "boundary_mass",
        "t",
        "boundary mass",
        tr.samples.iter().map(|s| (s.t, s.boundary_mass)).collect(),
    ));
    let mut bin = Vec::new();
    write_lattice(&mut bin, &tr.final_state, tr.final_time)?;
    out.put("final_lattice_bytes", bin.len());
    out.binaries.push(("final_lattice.rsnl".into(), bin));
    out.metrics(
        &["final_imbalance", "alternations"],
        vec![vec![imbalance(&TriangleState::from_array(tr.final_state.scaled_means())), osc.alternations as f64]],
    );
    Ok(out)
}

fn measure_run(ctx: &Ctx) -> Result<Outcome> {
    let h = ctx.cfg.dt.unwrap_or(1e-3);
    let t_end = ctx.cfg.t_end.unwrap_or(10.0);
    let alpha = ctx.cfg.alpha.unwrap_or(0.05);
    let ens = match &ctx.cfg.init {
        None => ParticleEnsemble::uniform(&[
            TriangleState::new(0.0, 1.0, 0.0, 0.0, 0.0),
            TriangleState::new(0.0, 0.0, 0.0, 1.0, 0.0),
        ])?,
        Some(_) => fluid_init(ctx, TriangleState::star())?,
    };
    let tr = run_closed(&ens, &ctx.params, t_end, h, ctx.branch())?;
    let last = tr.last();
    let mean = last.mean();
    let cycle = CycleTrajectory::new(&ctx.params)?;
    let (d_measure, _) = distance_to_cycle_measure(&cycle, &last.ensemble);
    let mut out = Outcome::default();
    out.put("final_mean", mean.to_array());
    out.put("final_atoms", last.ensemble.len());
    out.put("final_diameter", last.ensemble.diameter());
    out.put("final_mean_dist_to_cycle", last.diagnostics.dist_to_cycle);
    out.put("final_measure_dist_to_cycle", d_measure);
    out.put("final_exp_moment", exp_moment_ensemble(&last.ensemble, alpha, &ctx.params));
    out.put("final_lyapunov_mean", last.ensemble.expect(|x| lyapunov_l(x, &ctx.params)));
    out.metrics(
        &["final_diameter", "final_measure_dist_to_cycle"],
        vec![vec![last.ensemble.diameter(), d_measure]],
    );
    add_fluid(&mut out, ctx, "fluid", &tr)?;
    Ok(out)
}

fn euler_convergence(ctx: &Ctx) -> Result<Outcome> {
    let n = ctx.n()?;
    let tau_end = ctx.cfg.t_end.unwrap_or(2.0);
    let replicas = ctx.cfg.replicas.unwrap_or(30);
    let sups = studies::euler_convergence(n, tau_end, replicas, ctx.seed, &ctx.params)?;
    let med = median(&sups);
    let mut out = Outcome::with_checks(vec![Check::at_most("median sup distance", med, ctx.cfg.thresholds.max_median)]);
    out.put("median", med);
    out.put("sup_distances", &sups);
    let rows: Vec<Vec<String>> = sups
        .iter()
        .enumerate()
        .map(|(i, d)| vec![i.to_string(), (ctx.seed ^ i as u64).to_string(), fmt_sig(*d)])
        .collect();
    out.tables.push(Table::from_rows("euler", EULER_CSV_HEADER, &rows));
    out.series.push(Series::new(
        "sup_distance",
        "replica",
        "sup distance",
        sups.iter().enumerate().map(|(i, d)| (i as f64, *d)).collect(),
    ));
    out.metrics(&["sup_distance"], sups.iter().map(|d| vec![*d]).collect());
    Ok(out)
}

fn persistence_config(ctx: &Ctx) -> PersistenceConfig {
    let d = PersistenceConfig::default();
    let n = ctx.cfg.n.unwrap_or(d.n);
    PersistenceConfig {
        n,
        x_max: ctx.cfg.x_max.unwrap_or(4 * n as usize),
        tau_end: ctx.cfg.t_end.unwrap_or(d.tau_end),
        dtau: ctx.cfg.sample_dt.unwrap_or(d.dtau),
        h: ctx.cfg.dt.unwrap_or(d.h),
        alpha: ctx.cfg.alpha.unwrap_or(d.alpha),
        boundary_threshold: ctx.cfg.thresholds.boundary_mass,
    }
}

fn persistence_tables(out: &mut Outcome, r: &studies::PersistenceReport) {
    let rows: Vec<Vec<String>> = r
        .mean_path
        .iter()
        .zip(&r.krov_series)
        .zip(&r.exp_moment_series)
        .map(|(((tau, x), (_, k)), (_, e))| {
            let mut row = vec![fmt_sig(*tau)];
            row.extend(x.to_array().iter().map(|v| fmt_sig(*v)));
            row.extend([fmt_sig(imbalance(x)), fmt_sig(*k), fmt_sig(*e)]);
            row
        })
        .collect();
    out.tables.push(Table::from_rows("oscillation", OSCILLATION_CSV_HEADER, &rows));
    out.series.push(Series::new(
        "imbalance",
        "tau",
        "imbalance",
        r.mean_path.iter().map(|(t, x)| (*t, imbalance(x))).collect(),
    ));
    out.series.push(Series::new("krov", "tau", "distance to tracked cycle point", r.krov_series.clone()));
    out.series.push(Series::new("exp_moment", "tau", "exponential moment", r.exp_moment_series.clone()));
}

fn oscillation(ctx: &Ctx) -> Result<Outcome> {
    let pcfg = persistence_config(ctx);
    let r = studies::oscillation_persistence(&pcfg, &ctx.params)?;
    let th = &ctx.cfg.thresholds;
    let mut out = Outcome::with_checks(vec![
        Check::at_least("alternations", r.oscillation.alternations as f64, th.min_alternations as f64),
        Check::at_most("period drift", r.oscillation.drift.unwrap_or(f64::NAN), th.max_drift),
        Check::at_most("max distance to tracked cycle point", r.max_krov, th.max_krov),
    ]);
    out.put("n", pcfg.n);
    out.put("x_max", pcfg.x_max);
    out.put("period", r.oscillation.period);
    out.put("drift", r.oscillation.drift);
    out.put("alternations", r.oscillation.alternations);
    out.put("max_krov", r.max_krov);
    out.put("up_crossings", &r.oscillation.up_crossings);
    out.metrics(
        &["period", "drift", "alternations", "max_krov"],
        vec![vec![
            r.oscillation.period.unwrap_or(f64::NAN),
            r.oscillation.drift.unwrap_or(f64::NAN),
            r.oscillation.alternations as f64,
            r.max_krov,
        ]],
    );
    persistence_tables(&mut out, &r);
    Ok(out)
}

fn moment_bound(ctx: &Ctx) -> Result<Outcome> {
    let pcfg = persistence_config(ctx);
    let r = studies::oscillation_persistence(&pcfg, &ctx.params)?;
    let first = CycleTrajectory::new(&ctx.params)?.period();
    let reference = r
        .exp_moment_series
        .iter()
        .filter(|(t, _)| *t <= first)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound = ctx.cfg.thresholds.moment_factor * reference;
    let check = moment_bound_check(&r.exp_moment_series, bound, first);
    let mut out = Outcome::with_checks(vec![Check::at_most("sup of later moments", check.sup, bound)]);
    out.put("alpha", pcfg.alpha);
    out.put("first_period_max", reference);
    out.put("moment_check", &check);
    out.metrics(&["sup_moment", "bound"], vec![vec![check.sup, bound]]);
    persistence_tables(&mut out, &r);
    Ok(out)
}
