//! End-to-end acceptance checks, one test per criterion. Each test writes a
//! `criterion N: PASS|FAIL ...` line to stdout before asserting.

mod common;

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{announce, stationary_law, transient_law, Vec5};
use resonet_core::des::export::write_des_csv;
use resonet_core::des::{self, InitSpec, MfState, SimConfig, Simulator};
use resonet_core::fluid::experiments::{
    attractor_experiment, cyclic_inflow, lyapunov_decay_with, node_loads, underload_integrals,
    AttractorConfig,
};
use resonet_core::fluid::export::write_fluid_csv;
use resonet_core::fluid::{run_closed, BranchPolicy};
use resonet_core::metrics::{krov_atomic, oscillation_report};
use resonet_core::model::lyapunov_l;
use resonet_core::nlmp::{
    integrate, rhs, rhs_tail, to_tail, write_nlmp_csv, MarginalLattice, NlmpConfig,
};
use resonet_core::studies::{
    euler_convergence, median, nlmp_des_agreement, oscillation_persistence, AgreementConfig,
    PersistenceConfig, PersistenceReport,
};
use resonet_core::{CycleTrajectory, NetworkParams, ParticleEnsemble, TriangleState};

fn params() -> NetworkParams {
    NetworkParams::default()
}

fn verdict(n: u32, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    announce(&format!("criterion {n}: {tag} {detail}"));
}

#[test]
fn criterion_01_cycle_reproduction() {
    let start = Instant::now();
    let p = params();
    let x0 = TriangleState::new(0.0, 1.0, 0.0, 0.0, 0.0);
    let tr = run_closed(&ParticleEnsemble::delta(x0).unwrap(), &p, 6.0, 1e-4, BranchPolicy::Symmetric)
        .unwrap();
    let a = tr.at(1.0 / 9.0).mean();
    let b = tr.at(1.0).mean();
    let path: Vec<_> = tr.records.iter().map(|r| (r.t, r.mean())).collect();
    let period = oscillation_report(&path).period;
    let elapsed = start.elapsed().as_secs_f64();
    let checks = [
        (a.x_ab - 8.0 / 9.0).abs() <= 1e-3,
        (a.x_b - 1.0 / 9.0).abs() <= 1e-3,
        a.x_a <= 1e-3,
        (b.x_b - 1.0).abs() <= 1e-3,
        period.is_some_and(|t| (t - 2.0).abs() <= 1e-2),
        elapsed < 5.0,
    ];
    let pass = checks.iter().all(|c| *c);
    verdict(
        1,
        pass,
        format!(
            "x(1/9) = ({:.5}, {:.5}, {:.5}), x_b(1) = {:.5}, period {:?}, {elapsed:.2}s",
            a.x_a, a.x_b, a.x_ab, b.x_b, period
        ),
    );
    assert!(pass, "{checks:?}");
}

#[test]
fn criterion_02_fixed_point() {
    let p = params();
    let star = TriangleState::star();
    let tr = run_closed(&ParticleEnsemble::delta(star).unwrap(), &p, 10.0, 1e-3, BranchPolicy::Symmetric)
        .unwrap();
    let dev = tr.records.iter().map(|r| r.mean().l1(&star)).fold(0.0, f64::max);
    let (_, load_a, load_b) = node_loads(&tr.records[0].outflow_rates, &p);
    let pass = dev <= 1e-6 && load_a == 0.9 && load_b == 0.9;
    verdict(2, pass, format!("sup deviation {dev:e}, node loads {load_a} / {load_b}"));
    assert!(pass);
}

#[test]
fn criterion_03_branch_multiplicity() {
    let p = params();
    let x0 = ParticleEnsemble::delta(TriangleState::new(0.5, 0.25, 0.0, 0.25, 0.0)).unwrap();
    let a = run_closed(&x0, &p, 0.2, 1e-3, BranchPolicy::AFirst).unwrap();
    let b = run_closed(&x0, &p, 0.2, 1e-3, BranchPolicy::BFirst).unwrap();
    let split = a.last().mean().l1(&b.last().mean());
    let s = run_closed(&x0, &p, 3.0, 1e-3, BranchPolicy::Symmetric).unwrap();
    let to_star = s.last().mean().l1(&TriangleState::star());
    let pass = split >= 0.1 && to_star <= 1e-3;
    verdict(3, pass, format!("A/B split at t=0.2: {split:.4}, symmetric distance to * at t=3: {to_star:e}"));
    assert!(pass);
}

#[test]
fn criterion_04_local_attractor() {
    let start = Instant::now();
    let p = params();
    let mut worst: f64 = 0.0;
    for (i, policy) in [BranchPolicy::AFirst, BranchPolicy::BFirst, BranchPolicy::Symmetric]
        .into_iter()
        .enumerate()
    {
        let cfg = AttractorConfig {
            eps: 0.01,
            n_samples: 20,
            policy,
            seed: 11 + i as u64,
            h: 1e-4,
            t_settle: 5.0,
            t_end: 10.0,
        };
        let r = attractor_experiment(&p, &cfg).unwrap();
        assert_eq!(r.samples.len(), 20);
        worst = worst.max(r.max_dist_after);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-3 && elapsed < 30.0;
    verdict(4, pass, format!("max distance on [5, 10] over 60 runs: {worst:e}, {elapsed:.1}s"));
    assert!(pass);
}

/// State whose largest node workload is `l` at a random node, other nodes
/// at most half of it.
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

#[test]
fn criterion_05_lyapunov_decrease() {
    let p = params();
    let h = 1e-3;
    let inflow = cyclic_inflow(&p, h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut least = f64::INFINITY;
    for _ in 0..10 {
        let l = rng.random_range(15.0..30.0);
        let x = state_with_workload(&p, l, &mut rng);
        assert!((lyapunov_l(&x, &p) - l).abs() < 1e-9);
        let d = lyapunov_decay_with(&x, &p, h, &inflow).unwrap();
        assert!(d.l_after < d.l_before);
        least = least.min(d.decrease);
    }
    let pass = least >= 0.05;
    verdict(5, pass, format!("smallest decrease over one period: {least:.4}"));
    assert!(pass);
}

#[test]
fn criterion_06_underload() {
    let p = params();
    let cycle = CycleTrajectory::new(&p).unwrap();
    let u = underload_integrals(&cycle, &p, 1e-3).unwrap();
    // Fine-grid midpoint integration along the closed-form orbit, where the
    // O buffer is empty and serves its inflow.
    let n = 200_000;
    let dt = cycle.period() / n as f64;
    let mut busy_o = 0.0;
    for k in 0..n {
        let x = cycle.point((k as f64 + 0.5) * dt).unwrap();
        let inflow = if x.x_ab > 0.0 { p.gamma_ab } else { 0.0 } + if x.x_ba > 0.0 { p.gamma_ba } else { 0.0 };
        busy_o += inflow / p.gamma_o * dt;
    }
    let oracle = busy_o / cycle.period();
    let pass = (u.rho_o - 2.0 / 3.0).abs() <= 1e-3
        && (u.rho_o - oracle).abs() <= 1e-3
        && u.rho_abar < 1.0
        && u.rho_bbar < 1.0;
    verdict(
        6,
        pass,
        format!("rho_o {:.6} (oracle {oracle:.6}), node loads {:.4} / {:.4}", u.rho_o, u.rho_abar, u.rho_bbar),
    );
    assert!(pass);
}

#[test]
fn criterion_07_euler_convergence() {
    let start = Instant::now();
    let p = params();
    let meds: Vec<f64> = [10u32, 100, 1000]
        .iter()
        .map(|n| median(&euler_convergence(*n, 2.0, 30, 7, &p).unwrap()))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = meds[0] > meds[1] && meds[1] > meds[2] && meds[2] <= 0.05 && elapsed < 120.0;
    verdict(7, pass, format!("medians N=10/100/1000: {meds:.4?}, {elapsed:.1}s"));
    assert!(pass);
}

#[test]
fn criterion_08_nlmp_des_agreement() {
    let start = Instant::now();
    let r = nlmp_des_agreement(&AgreementConfig::default(), &params()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = r.median <= 0.05 && elapsed < 120.0;
    verdict(8, pass, format!("median sup L1 over 20 seeds: {:.4}, {elapsed:.1}s", r.median));
    assert!(pass, "median {} > 0.05", r.median);
}

fn persistence() -> &'static PersistenceReport {
    static RUN: OnceLock<PersistenceReport> = OnceLock::new();
    RUN.get_or_init(|| oscillation_persistence(&PersistenceConfig::default(), &params()).unwrap())
}

#[test]
fn criterion_09_oscillation_persistence() {
    let start = Instant::now();
    let r = persistence();
    let elapsed = start.elapsed().as_secs_f64();
    let osc = &r.oscillation;
    let alternations = osc.alternations >= 5;
    let drift = osc.drift.is_some_and(|d| d <= 0.10);
    let close = r.max_krov <= 0.15;
    let pass = alternations && drift && close && elapsed < 300.0;
    verdict(
        9,
        pass,
        format!(
            "alternations {}, period {:?}, drift {:?}, max distance to tracked orbit point {:.4}, {elapsed:.1}s",
            osc.alternations, osc.period, osc.drift, r.max_krov
        ),
    );
    assert!(alternations && drift, "oscillation part failed: {osc:?}");
    assert!(close, "max transport distance {} > 0.15", r.max_krov);
}

#[test]
fn criterion_10_moment_boundedness() {
    let r = persistence();
    let m = &r.moment_check;
    let pass = m.pass;
    verdict(10, pass, format!("sup after first period {:.6} vs bound {:.6}", m.sup, m.bound));
    assert!(pass, "{m:?}");
}

fn random_lattice<R: Rng>(rng: &mut R, x_max: usize) -> MarginalLattice {
    let d = x_max + 1;
    let mut draw = |len: usize| {
        let mut v: Vec<f64> = (0..len)
            .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() })
            .collect();
        v[0] += 1e-3;
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    };
    let o = draw(d);
    let a = draw(d * d);
    let b = draw(d * d);
    MarginalLattice::new(x_max, 1 + rng.random_range(0..5), o, a, b).unwrap()
}

#[test]
fn criterion_11_exactness_oracles() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // rhs against the tail-coordinate equation.
    let mut tail_err: f64 = 0.0;
    for i in 0..1000 {
        let mu = random_lattice(&mut rng, 2 + i % 7);
        let a = to_tail(&rhs(&mu, &p)).flat();
        let b = rhs_tail(&to_tail(&mu), &p).unwrap().flat();
        for (x, y) in a.iter().zip(&b) {
            tail_err = tail_err.max((x - y).abs());
        }
    }
    let tail_ok = tail_err <= 1e-10;

    // N = 1 master equation against the single-customer chain.
    let mu0 = MarginalLattice::product_delta(1, 1, [0, 1, 0, 0, 0]).unwrap();
    let mut cfg = NlmpConfig::new(2.0, 1e-3);
    cfg.record_dt = Some(0.05);
    cfg.boundary_threshold = f64::INFINITY;
    let tr = integrate(&mu0, &p, &cfg).unwrap();
    let p0 = Vec5::from([0.0, 1.0, 0.0, 0.0, 0.0]);
    let mut chain_err: f64 = 0.0;
    for s in &tr.samples {
        let law = transient_law(&p, p0, s.t);
        for c in 0..5 {
            chain_err = chain_err.max((s.scaled_means[c] - law[c]).abs());
        }
    }
    let chain_ok = chain_err <= 1e-8;

    // One triangle, one customer: occupancy frequencies by batch means.
    let pi = stationary_law(&p);
    let state = MfState { n: 1, counts: vec![[1, 0, 0, 0, 0]] };
    let mut sim = Simulator::new(state, p, 2024).unwrap();
    let batches = 100;
    let per_batch = 10_000;
    let mut batch_freq = vec![[0.0; 5]; batches];
    for freq in batch_freq.iter_mut() {
        let mut occ = [0.0; 5];
        let t0 = sim.time();
        for _ in 0..per_batch {
            let class = sim.state().counts[0].iter().position(|c| *c == 1).unwrap();
            let before = sim.time();
            sim.step().expect("a customer is always in service");
            occ[class] += sim.time() - before;
        }
        let span = sim.time() - t0;
        for c in 0..5 {
            freq[c] = occ[c] / span;
        }
    }
    let mut occupancy_ok = true;
    let mut worst_z: f64 = 0.0;
    for c in 0..5 {
        let xs: Vec<f64> = batch_freq.iter().map(|f| f[c]).collect();
        let mean = xs.iter().sum::<f64>() / batches as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt();
        let z = (mean - pi[c]).abs() / se;
        worst_z = worst_z.max(z);
        occupancy_ok &= z <= 3.0;
    }
    assert_eq!(sim.events(), (batches * per_batch) as u64);

    // Metric axioms of the exact transport distance.
    let mut axioms_ok = true;
    let mut tri_slack: f64 = 0.0;
    let random_ens = |rng: &mut ChaCha8Rng| {
        let k = rng.random_range(1..6);
        let atoms: Vec<(f64, TriangleState)> = (0..k)
            .map(|_| {
                let x = TriangleState::from_array(std::array::from_fn(|_| rng.random_range(0.0..1.0)));
                (1.0 / k as f64, x)
            })
            .collect();
        ParticleEnsemble::new(atoms).unwrap()
    };
    for _ in 0..500 {
        let (a, b, c) = (random_ens(&mut rng), random_ens(&mut rng), random_ens(&mut rng));
        let ab = krov_atomic(&a, &b).unwrap();
        let ba = krov_atomic(&b, &a).unwrap();
        let bc = krov_atomic(&b, &c).unwrap();
        let ac = krov_atomic(&a, &c).unwrap();
        let aa = krov_atomic(&a, &a).unwrap();
        tri_slack = tri_slack.max(ac - ab - bc);
        axioms_ok &= ab == ba && aa.abs() <= 1e-12 && ab > 0.0 && ac <= ab + bc + 1e-9;
    }

    let pass = tail_ok && chain_ok && occupancy_ok && axioms_ok;
    verdict(
        11,
        pass,
        format!(
            "rhs/tail {tail_err:e}; N=1 vs chain {chain_err:e}; occupancy worst z {worst_z:.2}; \
             transport axioms {} (triangle slack {tri_slack:e})",
            if axioms_ok { "ok" } else { "violated" }
        ),
    );
    assert!(tail_ok, "rhs/tail disagreement {tail_err}");
    assert!(occupancy_ok, "occupancy z = {worst_z}");
    assert!(axioms_ok);
    assert!(chain_ok, "N = 1 master equation differs from the chain by {chain_err}");
}

#[test]
fn criterion_12_determinism_and_equivariance() {
    let p = params();

    let des_bytes = || {
        let mut cfg = SimConfig::new(20, 6, 20.0, 99, InitSpec::CyclePhase(0.3));
        cfg.dt_out = Some(0.5);
        let tr = des::run(&cfg, &p).unwrap();
        let mut buf = Vec::new();
        write_des_csv(&mut buf, &tr, &p).unwrap();
        buf
    };
    let fluid_bytes = || {
        let e = ParticleEnsemble::new(vec![
            (0.25, TriangleState::new(0.2, 0.5, 0.1, 0.1, 0.1)),
            (0.75, TriangleState::new(0.0, 0.3, 0.0, 0.4, 0.3)),
        ])
        .unwrap();
        let tr = run_closed(&e, &p, 2.0, 1e-3, BranchPolicy::Symmetric).unwrap();
        let mut buf = Vec::new();
        write_fluid_csv(&mut buf, &tr).unwrap();
        buf
    };
    let nlmp_bytes = || {
        let mu = MarginalLattice::product_delta(20, 4, [1, 2, 0, 1, 0]).unwrap();
        let mut cfg = NlmpConfig::new(2.0, 0.01);
        cfg.boundary_threshold = 1.0;
        let tr = integrate(&mu, &p, &cfg).unwrap();
        let mut buf = Vec::new();
        write_nlmp_csv(&mut buf, &tr).unwrap();
        buf
    };
    let reproducible = des_bytes() == des_bytes() && fluid_bytes() == fluid_bytes() && nlmp_bytes() == nlmp_bytes();

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut equivariant = true;
    for _ in 0..5 {
        let atoms: Vec<(f64, TriangleState)> = (0..3)
            .map(|_| {
                let mut v: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                (1.0 / 3.0, TriangleState::from_array(v))
            })
            .collect();
        let e = ParticleEnsemble::uniform(&atoms.iter().map(|a| a.1).collect::<Vec<_>>()).unwrap();
        for (pol, mirror) in [
            (BranchPolicy::AFirst, BranchPolicy::BFirst),
            (BranchPolicy::Symmetric, BranchPolicy::Symmetric),
        ] {
            let a = run_closed(&e, &p, 1.0, 1e-3, pol).unwrap();
            let b = run_closed(&e.swap_ab(), &p, 1.0, 1e-3, mirror).unwrap();
            for (ra, rb) in a.records.iter().zip(&b.records) {
                equivariant &= ra.ensemble.swap_ab() == rb.ensemble;
            }
        }
    }
    let pass = reproducible && equivariant;
    verdict(12, pass, format!("byte-identical reruns {reproducible}, bit-exact swap equivariance {equivariant}"));
    assert!(pass);
}
