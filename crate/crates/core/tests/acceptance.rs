//! Acceptance report: one PASS/FAIL line per criterion, plus INFO lines with
//! supporting measurements. Exits non-zero on failure only when
//! `ACCEPTANCE_STRICT` is set, so the report can run inside `cargo test`.

use std::time::Instant;

use bulk_surface_ch::bdf::{bdf_coefficients, bdf_rational_coefficients, run, StartingValues, StepView};
use bulk_surface_ch::fem::{
    assemble, bulk_element_mass, bulk_element_stiffness, dual_norm_with, surface_element_mass,
    surface_element_stiffness, NodalVector,
};
use bulk_surface_ch::harness::{self, config::RunConfig, SimulationReport};
use bulk_surface_ch::linsolve::SolverOptions;
use bulk_surface_ch::mesh::{unit_disk_mesh, DomainKind, Mesh, Point};
use bulk_surface_ch::model::{double_well, manufactured_disk_problem, Problem};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn info(msg: &str) {
    println!("INFO  {msg}");
}

fn eoc_list(v: &[Option<f64>]) -> String {
    v.iter().map(|e| e.map_or("-".to_string(), |x| format!("{x:.2}"))).collect::<Vec<_>>().join(", ")
}

fn config(text: &str) -> RunConfig {
    RunConfig::from_toml_str(text).expect("acceptance config")
}

fn spatial_order() -> Outcome {
    let cfg = config("experiment = \"converge-space\"\nq = 3\ntau = [0.00125]\nlevels = [2, 3, 4, 5]\nt_end = 1.0\n");
    let recs = match harness::converge_space(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    for r in &recs {
        info(&format!(
            "space  level {} h {:.3e}  u_L2 {:.3e}  u_H1 {:.3e}  w_L2 {:.3e}  w_H1 {:.3e}  eoc [{}]",
            r.level,
            r.h,
            r.errors.u_l2,
            r.errors.u_h1,
            r.errors.w_l2,
            r.errors.w_h1,
            eoc_list(&r.eoc)
        ));
    }
    let last = recs.last().unwrap();
    let [u_l2, u_h1, w_l2, _] = last.eoc.map(|e| e.unwrap_or(f64::NAN));
    let in_band = |x: f64| (1.8..=2.2).contains(&x);
    let pass = in_band(u_l2) && in_band(w_l2) && u_h1 >= 1.7;
    outcome(
        pass,
        format!("finest increment EOC u_L2 {u_l2:.3}, w_L2 {w_l2:.3} (need [1.8, 2.2]); u_H1 {u_h1:.3} (need ≥ 1.7)"),
    )
}

fn time_config(q: usize) -> RunConfig {
    config(&format!(
        "experiment = \"converge-time\"\nq = {q}\ntau = [0.05, 0.025, 0.0125, 0.00625, 0.003125]\nlevels = [5]\nt_end = 1.0\n"
    ))
}

fn temporal_order() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for q in 1..=5 {
        let recs = match harness::converge_time(&time_config(q)) {
            Ok(r) => r,
            Err(e) => {
                pass = false;
                parts.push(format!("q={q} run failed: {e}"));
                continue;
            }
        };
        let u: Vec<Option<f64>> = recs.iter().skip(1).map(|r| r.eoc[0]).collect();
        let w: Vec<Option<f64>> = recs.iter().skip(1).map(|r| r.eoc[2]).collect();
        info(&format!(
            "time   q={q} level 5  u_L2 {}  eoc u_L2 [{}]  eoc w_L2 [{}]",
            recs.iter().map(|r| format!("{:.3e}", r.errors.u_l2)).collect::<Vec<_>>().join(" "),
            eoc_list(&u),
            eoc_list(&w)
        ));
        if q <= 3 {
            let ok = u.iter().all(|e| e.is_some_and(|x| (x - q as f64).abs() <= 0.3));
            pass &= ok;
            parts.push(format!("q={q} u_L2 EOC [{}] {}", eoc_list(&u), if ok { "ok" } else { "outside q±0.3" }));
        } else {
            let finite = recs.iter().all(|r| r.errors.as_array().iter().all(|e| e.is_finite()));
            pass &= finite;
            parts.push(format!("q={q} smoke {}", if finite { "ok" } else { "non-finite errors" }));
        }
    }
    outcome(pass, parts.join("; "))
}

/// Temporal order with the spatial error cancelled (same-mesh differences).
fn temporal_self_convergence_info() {
    for q in 1..=3 {
        match harness::temporal_self_convergence(&time_config(q)) {
            Ok(rows) => {
                let eocs: Vec<Option<f64>> = rows.iter().skip(1).map(|r| r.eoc_u).collect();
                info(&format!(
                    "time   q={q} level 5 same-mesh differences ‖u_τ − u_τ/2‖_M(T): {}  eoc [{}]",
                    rows.iter().map(|r| format!("{:.3e}", r.diff_u_l2)).collect::<Vec<_>>().join(" "),
                    eoc_list(&eocs)
                ));
            }
            Err(e) => info(&format!("time   q={q} self-convergence failed: {e}")),
        }
    }
}

fn droplet_config(tau: f64, t_end: f64) -> RunConfig {
    config(&format!(
        r#"
        experiment = "simulate"
        q = 2
        tau = [{tau:e}]
        t_end = {t_end}
        [problem]
        eps = 0.02
        delta = 0.02
        kappa = 1.0
        potential_scale = 0.125
        [simulate]
        scenario = "droplet"
        square_n = 54
        "#
    ))
}

fn mass_drift(report: &SimulationReport) -> f64 {
    let m0 = report.series[0].mass;
    report.series.iter().map(|r| (r.mass - m0).abs() / m0.abs()).fold(0.0, f64::max)
}

fn energy_excess(report: &SimulationReport) -> (f64, usize) {
    report
        .series
        .windows(2)
        .filter(|w| w[0].step >= 5)
        .map(|w| (w[1].energy - w[0].energy, w[1].step))
        .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
}

fn abort_note(report: &SimulationReport) -> String {
    match &report.aborted {
        Some(e) => format!("run aborted ({e}) after {} recorded steps", report.series.len()),
        None => "run completed".into(),
    }
}

fn mass_conservation(report: &SimulationReport) -> Outcome {
    let drift = mass_drift(report);
    let complete = report.aborted.is_none() && report.series.last().map(|r| r.step) == Some(500);
    outcome(complete && drift <= 1e-8, format!("max relative drift {drift:.3e} (need ≤ 1e-8); {}", abort_note(report)))
}

fn energy_dissipation(report: &SimulationReport) -> Outcome {
    let (excess, step) = energy_excess(report);
    let complete = report.aborted.is_none() && report.series.last().map(|r| r.step) == Some(500);
    outcome(
        complete && excess <= 1e-8,
        format!("max E(uⁿ⁺¹) − E(uⁿ) after step 5: {excess:.3e} at step {step} (need ≤ 1e-8); {}", abort_note(report)),
    )
}

fn bdf_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for q in 1..=5 {
        let s = bdf_coefficients(q).unwrap();
        for _ in 0..200 {
            let t: f64 = rng.random_range(-2.0..2.0);
            let tau: f64 = rng.random_range(0.01..0.5);
            for k in 0..=q as i32 {
                let dp = if k == 0 { 0.0 } else { k as f64 * t.powi(k - 1) };
                let approx: f64 =
                    s.delta.iter().enumerate().map(|(j, d)| d * (t - j as f64 * tau).powi(k)).sum::<f64>() / tau;
                // scaled by τ: the defect of Σ δ_j p(t − jτ) itself
                worst = worst.max((approx - dp).abs() * tau / (1.0 + dp.abs()));
                if k < q as i32 {
                    let ex: f64 = s.gamma.iter().enumerate().map(|(j, g)| g * (t - (1 + j) as f64 * tau).powi(k)).sum();
                    worst = worst.max((ex - t.powi(k)).abs() / (1.0 + t.powi(k).abs()));
                }
            }
        }
    }
    let (d3, _) = bdf_rational_coefficients(3).unwrap();
    let table = [Rational64::new(11, 6), Rational64::new(-3, 1), Rational64::new(3, 2), Rational64::new(-1, 3)];
    let exact = d3 == table;
    outcome(
        worst <= 1e-12 && exact,
        format!("max order-condition defect {worst:.2e} (need ≤ 1e-12); q=3 table exact: {exact}"),
    )
}

fn manufactured_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut analytic: f64 = 0.0;
    let mut fd: f64 = 0.0;
    for &(eps, delta, kappa) in &[(1.0, 1.0, 1.0), (0.5, 0.3, 2.0)] {
        let p: Problem = manufactured_disk_problem(eps, delta, kappa).unwrap();
        let phi = p.exact_u.clone().unwrap();
        let w = p.exact_w.clone().unwrap();
        let src = &p.sources;
        let ev = |f: &Option<bulk_surface_ch::model::ScalarField>, x: Point, t: f64| f.as_ref().unwrap().eval(x, t);
        let h = 1e-4;
        let dt = |f: &dyn Fn(Point, f64) -> f64, x: Point, t: f64| (f(x, t + h) - f(x, t - h)) / (2.0 * h);
        let lap = |f: &dyn Fn(Point, f64) -> f64, x: Point, t: f64| {
            let k = 1e-3;
            (f([x[0] + k, x[1]], t) + f([x[0] - k, x[1]], t) + f([x[0], x[1] + k], t) + f([x[0], x[1] - k], t)
                - 4.0 * f(x, t))
                / (k * k)
        };
        let polar = |r: f64, th: f64| [r * th.cos(), r * th.sin()];
        let lap_gamma = |f: &dyn Fn(Point, f64) -> f64, th: f64, t: f64| {
            let k = 1e-3;
            (f(polar(1.0, th + k), t) + f(polar(1.0, th - k), t) - 2.0 * f(polar(1.0, th), t)) / (k * k)
        };
        let normal = |f: &dyn Fn(Point, f64) -> f64, th: f64, t: f64| {
            let k = 1e-5;
            (f(polar(1.0 + k, th), t) - f(polar(1.0 - k, th), t)) / (2.0 * k)
        };
        let u_f = |x: Point, t: f64| phi.eval(x, t);
        let w_f = |x: Point, t: f64| w.eval(x, t);
        for _ in 0..100 {
            let t: f64 = rng.random_range(0.0..1.0);
            let r = rng.random_range(0.0f64..1.0).sqrt();
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let x = polar(r, th);
            let u = u_f(x, t);
            let wp = |s| p.w_bulk.derivative(s);
            let ws = |s| p.w_surf.derivative(s);
            // analytic: u_t = −φ, Δφ = 0
            let r1 = -u - 0.0 - ev(&src.f_bulk, x, t);
            let r2 = w_f(x, t) - (-eps * 0.0 + wp(u) / eps + ev(&src.g_bulk, x, t));
            let fd1 = dt(&u_f, x, t) - lap(&w_f, x, t) - ev(&src.f_bulk, x, t);
            let fd2 = w_f(x, t) - (-eps * lap(&u_f, x, t) + wp(u) / eps + ev(&src.g_bulk, x, t));
            // on the circle: Δ_Γ φ = −4φ, ∂_ν φ = 2φ
            let y = polar(1.0, th);
            let v = u_f(y, t);
            let r3 = -v - (-4.0 * w_f(y, t)) + 2.0 * w_f(y, t) - ev(&src.f_surf, y, t);
            let r4 = w_f(y, t) - (-delta * kappa * (-4.0 * v) + ws(v) / delta + eps * 2.0 * v + ev(&src.g_surf, y, t));
            let fd3 = dt(&u_f, y, t) - lap_gamma(&w_f, th, t) + normal(&w_f, th, t) - ev(&src.f_surf, y, t);
            let fd4 = w_f(y, t)
                - (-delta * kappa * lap_gamma(&u_f, th, t)
                    + ws(v) / delta
                    + eps * normal(&u_f, th, t)
                    + ev(&src.g_surf, y, t));
            analytic = analytic.max(r1.abs()).max(r2.abs()).max(r3.abs()).max(r4.abs());
            fd = fd.max(fd1.abs()).max(fd2.abs()).max(fd3.abs()).max(fd4.abs());
        }
    }
    outcome(
        analytic <= 1e-10 && fd <= 1e-5,
        format!(
            "max analytic residual {analytic:.2e} (need ≤ 1e-10); finite-difference cross-check {fd:.2e} (need ≤ 1e-5)"
        ),
    )
}

fn polygon_with_center(k: usize) -> Mesh {
    let mut v = vec![[0.0, 0.0]];
    for i in 0..k {
        let a = std::f64::consts::TAU * i as f64 / k as f64 + 0.3;
        v.push([a.cos() * (1.0 + 0.1 * i as f64), a.sin()]);
    }
    let tris = (0..k).map(|i| [0, 1 + i, 1 + (i + 1) % k]).collect();
    let edges = (0..k).map(|i| [1 + i, 1 + (i + 1) % k]).collect();
    Mesh::from_parts(v, tris, edges, DomainKind::Polygon).unwrap()
}

fn single_triangle(p: [Point; 3]) -> Mesh {
    Mesh::from_parts(p.to_vec(), vec![[0, 1, 2]], vec![[0, 1], [1, 2], [2, 0]], DomainKind::Polygon).unwrap()
}

/// Maximizes `gᵀv / ‖v‖_K` over the unit sphere in hyperspherical coordinates.
fn brute_force_dual(g: &[f64], k: &[Vec<f64>]) -> f64 {
    let n = g.len();
    let point = |ang: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; n];
        let mut s = 1.0;
        for i in 0..n - 1 {
            v[i] = s * ang[i].cos();
            s *= ang[i].sin();
        }
        v[n - 1] = s;
        v
    };
    let ratio = |ang: &[f64]| {
        let v = point(ang);
        let num: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        let den: f64 = (0..n).map(|i| (0..n).map(|j| v[i] * k[i][j] * v[j]).sum::<f64>()).sum::<f64>().sqrt();
        num / den
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut best: Vec<f64> = vec![0.0; n - 1];
    let mut best_val = f64::NEG_INFINITY;
    for _ in 0..20000 {
        let ang: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let val = ratio(&ang);
        if val > best_val {
            best_val = val;
            best = ang;
        }
    }
    let mut step = 0.1;
    while step > 1e-10 {
        let mut improved = false;
        for i in 0..n - 1 {
            for sign in [1.0, -1.0] {
                let mut trial = best.clone();
                trial[i] += sign * step;
                let val = ratio(&trial);
                if val > best_val {
                    best_val = val;
                    best = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best_val
}

fn element_oracles() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut upd = |a: f64, b: f64| worst = worst.max((a - b).abs());

    // reference right triangle
    let mats = assemble(&single_triangle([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])).unwrap();
    let mb = mats.m_bulk.to_dense();
    let ab = mats.a_bulk.to_dense();
    let stiff = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    for i in 0..3 {
        for j in 0..3 {
            upd(mb[i][j], if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 });
            upd(ab[i][j], stiff[i][j]);
        }
    }
    // surface of the triangle: edges of length 1, 1, √2
    let s2 = 2f64.sqrt();
    let ms = mats.m_surf.to_dense();
    let as_ = mats.a_surf.to_dense();
    let lens = [[0.0, 1.0, 1.0], [1.0, 0.0, s2], [1.0, s2, 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                let adj: f64 = (0..3).filter(|&k| k != i).map(|k| lens[i][k]).sum();
                upd(ms[i][j], adj / 3.0);
                upd(as_[i][j], (0..3).filter(|&k| k != i).map(|k| 1.0 / lens[i][k]).sum());
            } else {
                upd(ms[i][j], lens[i][j] / 6.0);
                upd(as_[i][j], -1.0 / lens[i][j]);
            }
        }
    }
    // random triangles and edges against the closed forms
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let p: [Point; 3] = std::array::from_fn(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        if area2.abs() < 0.1 {
            continue;
        }
        let area = 0.5 * area2.abs();
        let m = bulk_element_mass(area);
        let k = bulk_element_stiffness(p);
        for i in 0..3 {
            // gradient of the hat function: rotated opposite edge over 2·area
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            let gi = [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
            for j in 0..3 {
                let (c, d) = (p[(j + 1) % 3], p[(j + 2) % 3]);
                let gj = [(c[1] - d[1]) / area2, (d[0] - c[0]) / area2];
                upd(k[i][j], area * (gi[0] * gj[0] + gi[1] * gj[1]));
                upd(m[i][j], area / 12.0 * if i == j { 2.0 } else { 1.0 });
            }
        }
        let len: f64 = rng.random_range(0.01..2.0);
        let (me, ke) = (surface_element_mass(len), surface_element_stiffness(len));
        for i in 0..2 {
            for j in 0..2 {
                upd(me[i][j], len / 6.0 * if i == j { 2.0 } else { 1.0 });
                upd(ke[i][j], if i == j { 1.0 / len } else { -1.0 / len });
            }
        }
    }

    // dual norm vs brute-force maximization on 3..6 dof meshes
    let mut dual_err: f64 = 0.0;
    let meshes = vec![
        single_triangle([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]),
        polygon_with_center(3),
        polygon_with_center(4),
        polygon_with_center(5),
    ];
    let opts = SolverOptions { rel_tol: 1e-14, ..SolverOptions::default() };
    for mesh in &meshes {
        let mats = assemble(mesh).unwrap();
        let kd = mats.k.to_dense();
        for _ in 0..3 {
            let d: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = mats.mass.mul_vec(&d);
            let fast = dual_norm_with(&mats.mass, &mats.k, &d, opts).unwrap();
            dual_err = dual_err.max((fast - brute_force_dual(&g, &kd)).abs());
        }
    }
    outcome(
        worst <= 1e-14 && dual_err <= 1e-8,
        format!(
            "max element deviation {worst:.2e} (need ≤ 1e-14); dual norm vs brute force {dual_err:.2e} (need ≤ 1e-8)"
        ),
    )
}

fn stationarity_and_determinism() -> Outcome {
    let mesh = unit_disk_mesh(3).unwrap();
    let mats = assemble(&mesh).unwrap();
    let w = double_well(0.25).unwrap();
    let problem = Problem::new(1.0, 1.0, 1.0, w.clone(), w).unwrap();
    let mut worst_u: f64 = 0.0;
    let mut worst_w: f64 = 0.0;
    for q in 1..=5 {
        for c in [1.0, -1.0] {
            let start = StartingValues::EulerBootstrap { initial: NodalVector::constant(mesh.n_vertices(), c) };
            let mut obs = |v: &StepView<'_>| {
                worst_u = worst_u.max(v.u.iter().map(|x| (x - c).abs()).fold(0.0, f64::max));
                worst_w = worst_w.max(v.w.iter().map(|x| x.abs()).fold(0.0, f64::max));
                Ok(())
            };
            let scheme = bdf_coefficients(q).unwrap();
            if let Err(e) =
                run(&scheme, &problem, &mesh, &mats, 0.01, 0.2, &start, SolverOptions::default(), &mut [&mut obs])
            {
                return outcome(false, format!("pure-phase run q={q} failed: {e}"));
            }
        }
    }
    let stationary = worst_u <= 1e-10 && worst_w <= 1e-8;

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/simulate_random.toml");
    let mut cfg = RunConfig::load(std::path::Path::new(path)).unwrap();
    cfg.t_end = 2e-3;
    let csv = || {
        let dir = tempfile::tempdir().unwrap();
        let report = harness::simulate(&cfg, Some(dir.path())).unwrap();
        assert!(report.aborted.is_none());
        std::fs::read(dir.path().join("series.csv")).unwrap()
    };
    let (a, b) = (csv(), csv());
    let identical = a == b && !a.is_empty();
    outcome(
        stationary && identical,
        format!(
            "pure phase q=1..5: max |u − c| {worst_u:.2e}, max |w| {worst_w:.2e}; seeded random CSV bit-identical: {identical} ({} bytes)",
            a.len()
        ),
    )
}

fn main() {
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    let mut failures = 0;
    let mut report = |name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!(
            "{}  {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failures += 1;
        }
    };

    report("spatial order", &spatial_order);
    report("temporal order", &temporal_order);
    temporal_self_convergence_info();

    let droplet = harness::simulate(&droplet_config(1e-4, 0.05), None).expect("droplet setup");
    report("mass conservation", &|| mass_conservation(&droplet));
    report("energy dissipation", &|| energy_dissipation(&droplet));
    match harness::simulate(&droplet_config(1e-5, 0.005), None) {
        Ok(small) => {
            let (excess, _) = energy_excess(&small);
            info(&format!(
                "droplet at tau = 1e-5, 500 steps: mass drift {:.2e}, max energy increase after step 5 {excess:.2e}; {}",
                mass_drift(&small),
                abort_note(&small)
            ));
        }
        Err(e) => info(&format!("droplet at tau = 1e-5 failed to start: {e}")),
    }

    report("BDF coefficient suite", &bdf_suite);
    report("manufactured-solution residual", &manufactured_residual);
    report("element oracles and dual norm", &element_oracles);
    report("stationarity and determinism", &stationarity_and_determinism);

    println!("{failures} criterion(s) failed");
    if strict && failures > 0 {
        std::process::exit(1);
    }
}
