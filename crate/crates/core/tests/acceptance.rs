//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use fallingballs::dynamics::pair_velocities;
use fallingballs::lyapunov::lyapunov_batch;
use fallingballs::output::{write_cone_csv, write_json, write_scan_csv, write_trajectory_csv};
use fallingballs::sampling::{rng_from_seed, sample_state_with_contacts};
use fallingballs::tangent::{flow_qv, from_symplectic, propagate_frame, symplectic_product, to_symplectic};
use fallingballs::transversality::{mass_scan, singular_rank_test, ScanConfig, ScanTable};
use fallingballs::*;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).expect("create output dir");
    dir
}

fn jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(2)
}

// ---------------------------------------------------------------------------
// 1. Conservation

fn conservation() -> Outcome {
    let start = Instant::now();
    let m = MassVector::new(vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap().normalized();
    let s = sample_state(&m, 1, Locus::Interior);
    let mut b = Billiard::new(s, m.clone(), DynamicsConfig::default()).unwrap();
    let (mut max_h, mut max_p, mut max_k) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100_000 {
        let hit = b.step().unwrap();
        let st = b.state();
        max_h = max_h.max((b.energy() - 1.0).abs());
        if let EventKind::Pair(i) = hit.event.kind {
            let (mi, mj) = (m[i], m[i + 1]);
            let [a, c] = hit.v_pre;
            let (a2, c2) = (st.v[i], st.v[i + 1]);
            let p_scale = mi * a.abs() + mj * c.abs();
            let k_scale = mi * a * a + mj * c * c;
            max_p = max_p.max((mi * a + mj * c - mi * a2 - mj * c2).abs() / p_scale);
            max_k = max_k.max((mi * a * a + mj * c * c - mi * a2 * a2 - mj * c2 * c2).abs() / k_scale);
        }
    }
    let took = start.elapsed();
    outcome(
        max_h < 1e-9 && max_p < 1e-12 && max_k < 1e-12 && took < Duration::from_secs(10),
        format!("max|H-1| = {max_h:.2e}, momentum {max_p:.2e}, kinetic {max_k:.2e}, {took:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 2. Collision-map algebra

fn collision_algebra() -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut worst_inv = 0.0f64;
    let mut worst_mom = 0.0f64;
    for _ in 0..10_000 {
        let mi = 10f64.powf(rng.random_range(-3.0..3.0));
        let mj = 10f64.powf(rng.random_range(-3.0..3.0));
        let m = MassVector::new(vec![mi, mj]).unwrap();
        // Columns of R from the outgoing velocities of unit inputs.
        let c0 = pair_velocities(&m, 0, 1.0, 0.0);
        let c1 = pair_velocities(&m, 0, 0.0, 1.0);
        let r = [[c0.0, c1.0], [c0.1, c1.1]];
        for (row, rr) in r.iter().enumerate() {
            for (col, (top, bottom)) in r[0].iter().zip(&r[1]).enumerate() {
                let sq = rr[0] * top + rr[1] * bottom;
                let id = if row == col { 1.0 } else { 0.0 };
                worst_inv = worst_inv.max((sq - id).abs());
            }
        }
        for (col, mc) in [mi, mj].iter().enumerate() {
            let mr = mi * r[0][col] + mj * r[1][col];
            worst_mom = worst_mom.max((mr - mc).abs() / (mi + mj));
        }
    }
    outcome(
        worst_inv < 1e-12 && worst_mom < 1e-12,
        format!("|R^2 - I| = {worst_inv:.2e}, |m^T R - m^T| / sum m = {worst_mom:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 3. Cocycle against finite differences

/// Independent event-driven integrator used as the finite-difference oracle.
struct OracleRun {
    q: Vec<f64>,
    v: Vec<f64>,
    times: Vec<f64>,
    symbols: Vec<usize>,
}

fn oracle_flow(q0: &[f64], v0: &[f64], m: &[f64], t_end: f64, max_events: usize) -> OracleRun {
    let n = m.len();
    let (mut q, mut v) = (q0.to_vec(), v0.to_vec());
    let mut t = 0.0;
    let (mut times, mut symbols) = (Vec::new(), Vec::new());
    while symbols.len() < max_events {
        let root = (v[0] * v[0] + 2.0 * q[0]).sqrt();
        let mut best = if v[0] < 0.0 { 2.0 * q[0] / (root - v[0]) } else { v[0] + root };
        let mut who = 0usize;
        for i in 0..n - 1 {
            let closing = v[i] - v[i + 1];
            if closing > 0.0 {
                let s = (q[i + 1] - q[i]) / closing;
                if s < best {
                    best = s;
                    who = i + 1;
                }
            }
        }
        let s = best.min(t_end - t);
        for i in 0..n {
            q[i] += v[i] * s - 0.5 * s * s;
            v[i] -= s;
        }
        t += s;
        if t >= t_end {
            break;
        }
        if who == 0 {
            q[0] = 0.0;
            v[0] = -v[0];
        } else {
            let (i, j) = (who - 1, who);
            let tot = m[i] + m[j];
            let (a, b) = (v[i], v[j]);
            v[i] = ((m[i] - m[j]) * a + 2.0 * m[j] * b) / tot;
            v[j] = ((m[j] - m[i]) * b + 2.0 * m[i] * a) / tot;
            q[j] = q[i];
        }
        times.push(t);
        symbols.push(who);
    }
    OracleRun { q, v, times, symbols }
}

fn cocycle_fd() -> Outcome {
    let h = 1e-7;
    let mut rng = rng_from_seed(3);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut worst = 0.0f64;
    let mut worst_round_trip = 0.0f64;
    let mut trial = 0u64;
    while accepted < 100 {
        trial += 1;
        let n = 2 + (trial % 4) as usize;
        let mut raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        if trial.is_multiple_of(3) {
            raw.sort_by(|a, b| b.partial_cmp(a).unwrap());
        }
        let m = MassVector::new(raw).unwrap();
        let s = sample_state(&m, 1000 + trial, Locus::Interior);
        if s.min_clearance() < 1e-3 {
            rejected += 1;
            continue;
        }
        let c = rng.random_range(10..=30usize);
        let events = oracle_flow(&s.q, &s.v, m.as_slice(), f64::INFINITY, c + 1);
        let t_end = 0.5 * (events.times[c - 1] + events.times[c]);
        let tau = {
            let dq: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let dv: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dq.iter().chain(&dv).map(|x| x * x).sum::<f64>().sqrt();
            TangentQV {
                dq: dq.iter().map(|x| x / norm).collect(),
                dv: dv.iter().map(|x| x / norm).collect(),
            }
        };
        let shift = |sign: f64| -> (Vec<f64>, Vec<f64>) {
            (
                s.q.iter().zip(&tau.dq).map(|(a, d)| a + sign * h * d).collect(),
                s.v.iter().zip(&tau.dv).map(|(a, d)| a + sign * h * d).collect(),
            )
        };
        let (qp, vp) = shift(1.0);
        let (qm, vm) = shift(-1.0);
        let base = oracle_flow(&s.q, &s.v, m.as_slice(), t_end, usize::MAX);
        let plus = oracle_flow(&qp, &vp, m.as_slice(), t_end, usize::MAX);
        let minus = oracle_flow(&qm, &vm, m.as_slice(), t_end, usize::MAX);
        let separated = base.times.windows(2).all(|w| w[1] - w[0] > 1e-5);
        if plus.symbols != base.symbols || minus.symbols != base.symbols || !separated {
            rejected += 1;
            continue;
        }
        let Ok(an) = flow_qv(&s, &m, &tau, t_end - s.t, FloorDerivativeMode::Full, &DynamicsConfig::default())
        else {
            rejected += 1;
            continue;
        };
        let sym: Vec<usize> = an.sequence.symbols.clone();
        assert_eq!(sym, base.symbols, "analytic and oracle base trajectories disagree");
        let fd: Vec<f64> = plus
            .q
            .iter()
            .zip(&minus.q)
            .chain(plus.v.iter().zip(&minus.v))
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let exact: Vec<f64> = an.tangent.dq.iter().chain(&an.tangent.dv).copied().collect();
        let err = fd.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = exact.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(err / scale);

        let hv = to_symplectic(&an.state, &m, &an.tangent).unwrap();
        let back = from_symplectic(&an.state, &m, &hv).unwrap();
        let rt = back
            .dq
            .iter()
            .zip(&an.tangent.dq)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        worst_round_trip = worst_round_trip.max(rt);
        accepted += 1;
    }
    outcome(
        worst < 1e-4 && worst_round_trip < 1e-12,
        format!(
            "100 segments ({rejected} rejected), max rel FD error {worst:.2e}, round trip {worst_round_trip:.2e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Symplecticity

fn random_reduced(rng: &mut impl Rng, n: usize) -> TangentHV {
    let mut t = TangentHV {
        dh: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        dv: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
    };
    let (mh, mv) = (t.sum_dh() / n as f64, t.sum_dv() / n as f64);
    t.dh.iter_mut().for_each(|x| *x -= mh);
    t.dv.iter_mut().for_each(|x| *x -= mv);
    let norm = t.norm();
    t.scale(1.0 / norm);
    t
}

fn symplecticity() -> Outcome {
    let mut rng = rng_from_seed(4);
    let cases = [
        vec![3.0, 2.0, 1.0],
        vec![1.0, 2.0],
        vec![0.4, 0.3, 0.2, 0.1],
        vec![1.0, 3.0, 2.0, 5.0, 4.0],
    ];
    let mut worst_drift = 0.0f64;
    let mut worst_sum = 0.0f64;
    for (ci, raw) in cases.iter().enumerate() {
        let m = MassVector::new(raw.clone()).unwrap().normalized();
        let mut state = sample_state(&m, 40 + ci as u64, Locus::Interior);
        let mut frame = vec![random_reduced(&mut rng, m.n()), random_reduced(&mut rng, m.n())];
        let mut drift = 0.0;
        for _ in 0..1000 {
            let before = symplectic_product(&frame[0], &frame[1]);
            let out = propagate_frame(&state, &m, &frame, 1, FloorDerivativeMode::Full, &Default::default()).unwrap();
            let (na, nb) = (out.frame[0].norm(), out.frame[1].norm());
            let after = symplectic_product(&out.frame[0], &out.frame[1]);
            drift += (after - before).abs() / (na * nb);
            for tau in &out.frame {
                worst_sum = worst_sum.max(tau.sum_dh().abs() / tau.norm());
            }
            state = out.state;
            frame = out.frame;
            frame[0].scale(1.0 / na);
            frame[1].scale(1.0 / nb);
        }
        worst_drift = worst_drift.max(drift);
    }
    outcome(
        worst_drift < 1e-9 && worst_sum < 1e-12,
        format!("omega drift per 1e3 events {worst_drift:.2e}, max |sum dh| {worst_sum:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 5. Cone condition

fn cone_condition() -> Outcome {
    let cases = [
        vec![3.0, 2.0, 1.0],
        vec![5.0, 4.0, 3.0, 2.0, 1.0],
        vec![2.0, 2.0, 1.0],
        vec![1.0, 1.0, 1.0, 1.0],
        vec![2.0, 1.0],
    ];
    let mut collisions = 0;
    let mut min_dq = f64::INFINITY;
    let mut floor_err = 0.0f64;
    for (i, raw) in cases.iter().enumerate() {
        let m = MassVector::new(raw.clone()).unwrap().normalized();
        let audit = qform_audit(&m, 50 + i as u64, 10_000, 8, &Default::default()).unwrap();
        collisions += audit.collisions;
        min_dq = min_dq.min(audit.min_delta_q);
        floor_err = floor_err.max(audit.max_floor_rel_error);
    }
    outcome(
        collisions >= 10_000 && min_dq >= -1e-12 && floor_err <= 1e-10,
        format!("{collisions} collisions, min dQ {min_dq:.2e}, floor increment error {floor_err:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 6. Lyapunov spectra

fn hyperbolicity() -> Outcome {
    let start = Instant::now();
    let inputs = vec![
        (MassVector::new(vec![3.0, 2.0, 1.0]).unwrap().normalized(), 6),
        (MassVector::equal(3, 1.0 / 3.0).unwrap(), 6),
        (MassVector::new(vec![2.0, 1.0]).unwrap().normalized(), 6),
    ];
    let cfg = LyapunovConfig::new(1_000_000, 1);
    let res: Vec<LyapunovResult> = lyapunov_batch(&inputs, &cfg, 3)
        .into_iter()
        .map(|r| r.unwrap())
        .collect();
    let took = start.elapsed();
    let (a, eq, two) = (&res[0], &res[1], &res[2]);
    let max = a.max_abs();
    let separated = a
        .exponents_map
        .iter()
        .zip(&a.stderr)
        .all(|(l, s)| l.abs() > 3.0 * s);
    let paired = a.pairing_defect() < 0.01 * max;
    let eq_ok = eq.max_abs() < 1e-3;
    let two_ok = two.exponents_map[0] > 0.0 && two.pairing_defect() < 0.01 * two.exponents_map[0];
    let write = |name: &str, r: &LyapunovResult| {
        write_json(fs::File::create(out_dir().join(name)).unwrap(), r).unwrap();
    };
    write("lyapunov_321.json", a);
    write("lyapunov_equal.json", eq);
    write("lyapunov_21.json", two);
    outcome(
        separated && paired && eq_ok && two_ok && took < Duration::from_secs(120),
        format!(
            "(3,2,1)/6: {:?} stderr max {:.1e} pairing {:.1e}; equal max {:.1e}; (2,1): {:.4} pairing {:.1e}; {took:.1?}",
            a.exponents_map.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>(),
            a.stderr.iter().fold(0.0f64, |x, y| x.max(*y)),
            a.pairing_defect(),
            eq.max_abs(),
            two.exponents_map[0],
            two.pairing_defect(),
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Stable periodic orbit

fn stable_orbit() -> Outcome {
    let m = MassVector::new(vec![1.0, 2.0]).unwrap();
    match stable_orbit_probe(&m, &OrbitSearch::default()) {
        Ok(o) => {
            let [a, b] = o.eigen_moduli;
            let ok = o.residual < 1e-10
                && (a - 1.0).abs() < 1e-6
                && (b - 1.0).abs() < 1e-6
                && (a * b - 1.0).abs() < 1e-8;
            outcome(
                ok,
                format!(
                    "period {} ({}), residual {:.1e}, moduli {:.12}, {:.12}",
                    o.period,
                    o.sequence.symbol_string(),
                    o.residual,
                    a,
                    b
                ),
            )
        }
        Err(e) => outcome(false, format!("{e}")),
    }
}

// ---------------------------------------------------------------------------
// 8. Rank probes

fn scan(n: usize, locus: Locus, mode: FloorDerivativeMode, jobs: usize) -> ScanTable {
    let mut cfg = ScanConfig::new(n, (3..=8).collect(), 1000, 8000 + n as u64);
    cfg.locus = locus;
    cfg.mode = mode;
    cfg.rank_tol = 1e-8;
    cfg.jobs = jobs;
    mass_scan(&cfg).unwrap()
}

fn transversality() -> Outcome {
    let mut worst = 1.0f64;
    let mut slowest = Duration::ZERO;
    let mut summary_lines = Vec::new();
    for n in [3, 4] {
        for locus in [Locus::Boundary, Locus::SingularDouble] {
            for mode in [FloorDerivativeMode::Full, FloorDerivativeMode::ReflectOnly] {
                let start = Instant::now();
                let table = scan(n, locus, mode, jobs());
                slowest = slowest.max(start.elapsed() / 6);
                let stem = format!("scan_n{n}_{}_{}", locus.name(), mode.name());
                write_scan_csv(fs::File::create(out_dir().join(format!("{stem}.csv"))).unwrap(), &table).unwrap();
                write_json(fs::File::create(out_dir().join(format!("{stem}_summary.json"))).unwrap(), &table.summary)
                    .unwrap();
                for s in &table.summary {
                    worst = worst.min(s.full_rank_fraction);
                }
                let low = table.summary.iter().map(|s| s.sigma_ratio_quantiles[0]).fold(1.0, f64::min);
                summary_lines.push(format!("n={n} {} {}: 1% quantile >= {low:.3}", locus.name(), mode.name()));
            }
        }
    }
    let m = MassVector::new(vec![3.0, 2.0, 1.0]).unwrap().normalized();
    let mut full = 0;
    for seed in 0..1000 {
        let r = singular_rank_test(&m, seed, 5, FloorDerivativeMode::Full, 1e-8, &Default::default());
        if r.is_ok_and(|r| r.report.is_full_rank() && r.report.k == Some(5)) {
            full += 1;
        }
    }
    let single = full as f64 / 1000.0;
    eprintln!("    {}", summary_lines.join("\n    "));
    outcome(
        worst >= 0.99 && single >= 0.99 && slowest < Duration::from_secs(300),
        format!(
            "min full-rank fraction {worst:.3} over 48 (n,k,locus,mode) cells; singular-point probe {single:.3}; slowest cell {slowest:.2?}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Equal-mass oracle

fn limiting_oracle() -> Outcome {
    let m = MassVector::equal(4, 0.25).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let s = sample_state(&m, 900 + seed, Locus::Boundary);
        worst = worst.max(equal_mass_oracle(&s, &m, 10_000, &Default::default()).unwrap());
    }
    outcome(worst < 1e-10, format!("max |dq - t dv| over 10 runs of 1e4 events: {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 10. Reproducibility

fn bytes<F: Fn(&mut Vec<u8>)>(f: F) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf);
    buf
}

fn reproducibility() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, a: Vec<u8>, b: Vec<u8>| {
        if a != b || a.is_empty() {
            failures.push(name.to_string());
        }
    };

    let m = MassVector::new(vec![3.0, 2.0, 1.0]).unwrap();
    let traj = || {
        bytes(|w| {
            let s = sample_state(&m, 7, Locus::Interior);
            let t = simulate(&s, &m, 1000, &Default::default()).unwrap();
            write_trajectory_csv(w, &t, 3).unwrap();
        })
    };
    check("simulate", traj(), traj());

    let cone = || {
        bytes(|w| write_cone_csv(w, &qform_audit(&m, 5, 2000, 4, &Default::default()).unwrap()).unwrap())
    };
    check("qform-audit", cone(), cone());

    let inputs: Vec<(MassVector, u64)> = (0..8).map(|s| (m.normalized(), s)).collect();
    let lyap = |jobs: usize| {
        bytes(|w| {
            let res: Vec<LyapunovResult> = lyapunov_batch(&inputs, &LyapunovConfig::new(20_000, 1), jobs)
                .into_iter()
                .map(|r| r.unwrap())
                .collect();
            write_json(w, &res).unwrap();
        })
    };
    check("lyapunov jobs=1 vs 8", lyap(1), lyap(8));
    check("lyapunov repeat", lyap(8), lyap(8));

    for n in [3, 4] {
        for locus in [Locus::Boundary, Locus::SingularDouble] {
            let table = |jobs| bytes(|w| write_scan_csv(w, &scan(n, locus, FloorDerivativeMode::Full, jobs)).unwrap());
            check(&format!("mass-scan n={n} {} jobs=1 vs 8", locus.name()), table(1), table(8));
        }
    }

    let orbit = || {
        bytes(|w| {
            let o = stable_orbit_probe(&MassVector::new(vec![1.0, 2.0]).unwrap(), &OrbitSearch::default()).unwrap();
            write_json(w, &o).unwrap();
        })
    };
    check("stable-orbit", orbit(), orbit());

    let oracle = || {
        let m = MassVector::equal(4, 0.25).unwrap();
        let s = sample_state_with_contacts(&m, 3, Locus::Boundary).state;
        equal_mass_oracle(&s, &m, 10_000, &Default::default())
            .unwrap()
            .to_bits()
            .to_le_bytes()
            .to_vec()
    };
    check("oracle", oracle(), oracle());

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "byte-identical outputs for all modules, including jobs=1 vs jobs=8".into()
        } else {
            format!("differences in {}", failures.join(", "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("conservation", conservation),
        ("collision-map algebra", collision_algebra),
        ("cocycle vs finite differences", cocycle_fd),
        ("symplecticity", symplecticity),
        ("cone condition", cone_condition),
        ("Lyapunov spectrum", hyperbolicity),
        ("stable periodic orbit", stable_orbit),
        ("transversality rank", transversality),
        ("equal-mass oracle", limiting_oracle),
        ("reproducibility", reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag}  {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
