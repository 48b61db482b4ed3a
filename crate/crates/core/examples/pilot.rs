// Temporary calibration probe used during development; not part of the
// deliverable surface.

use std::time::Instant;

use colemit::coherence::Axis;
use colemit::coupling::{assemble_exchange, decompose, sigma_h_closed_form, SpectrumStats};
use colemit::ensemble::{sample_cloud, CloudSpec};
use colemit::harness::config::RunConfig;
use colemit::harness::runner::{run_experiment_with, sweep, InstanceNeeds};

fn config_toml(
    l: (f64, f64, f64),
    n: usize,
    instances: usize,
    times: &str,
    scenario: &str,
    extra: &str,
) -> RunConfig {
    let seed: u64 = std::env::var("PILOT_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    RunConfig::from_toml_str(&format!(
        r#"
[cloud]
lx = {}
ly = {}
lz = {}
n_atoms = {}

[run]
scenario = "{scenario}"
instances = {instances}
base_seed = {seed}
times = {times}
{extra}
"#,
        l.0, l.1, l.2, n
    ))
    .unwrap()
}

fn pilot_std(instances: usize) {
    faer::set_global_parallelism(faer::Par::Seq);
    for n in [375usize, 750, 1500] {
        let mut sigmas = Vec::new();
        for i in 0..instances {
            let cloud = sample_cloud(&CloudSpec::cubic(40.0, n, 3000 + i as u64)).unwrap();
            let m = assemble_exchange(&cloud, &nalgebra::Vector3::y()).unwrap();
            let eig = decompose(&m).unwrap();
            let stats = SpectrumStats::from_decomposition(&eig, 1.0);
            sigmas.push(stats.sample_sigma);
        }
        let mean = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
        println!(
            "N={n:5} sample_sigma_mean={mean:.5} closed_form={:.5} (ratio to closed form {:.4})",
            sigma_h_closed_form(n, 40.0),
            mean / sigma_h_closed_form(n, 40.0)
        );
    }
}

fn pilot_time(instances: usize) {
    let config = config_toml(
        (40.0, 40.0, 40.0),
        1500,
        instances,
        "[0.0, 10.0, 20.0, 30.0, 40.0, 50.0]",
        "coherence-vs-time",
        "",
    );
    let needs = InstanceNeeds::for_scenario(config.scenario, false);
    let result = run_experiment_with(&config, needs).unwrap();
    for &t in &config.times {
        let (wx, sx, _, satx) = result.width_stats(t, Axis::X).unwrap();
        let (wy, _, _, _) = result.width_stats(t, Axis::Y).unwrap();
        println!("t={t:4}  w_x={wx:7.3} ± {sx:5.3} (sat {satx})   w_y={wy:7.3}");
    }
    // norm check: subradiance at late times
    let mut above = 0;
    for rec in &result.records {
        let _ = rec;
    }
    println!("instances: {}", result.records.len());
}

fn pilot_norm(instances: usize) {
    let config = config_toml(
        (40.0, 40.0, 40.0),
        1500,
        instances,
        "[0.0, 40.0]",
        "norm-trace",
        "norm_dt = 1.0",
    );
    let needs = InstanceNeeds::for_scenario(config.scenario, false);
    let result = run_experiment_with(&config, needs).unwrap();
    let mut above_all = 0usize;
    let mut slow_rate = 0usize;
    for rec in &result.records {
        let trace = rec.norms.as_ref().unwrap();
        let ok = trace
            .times
            .iter()
            .zip(&trace.norms)
            .filter(|(t, _)| **t >= 10.0)
            .all(|(t, n)| *n >= (-t).exp());
        if ok {
            above_all += 1;
        }
        // centered difference at t=40 with ±1 window (norm_dt=1)
        let idx40 = trace.times.iter().position(|&t| (t - 40.0).abs() < 1e-9).unwrap();
        let rate = -(trace.norms[idx40 + 0].ln() - trace.norms[idx40 - 2].ln())
            / (trace.times[idx40] - trace.times[idx40 - 2]);
        if rate < 1.0 {
            slow_rate += 1;
        }
    }
    println!(
        "norm >= e^-t for all t in [10,40]: {above_all}/{}  rate(40) < Gamma: {slow_rate}/{}",
        result.records.len(),
        result.records.len()
    );
}

fn pilot_nsweep(instances: usize) {
    let config = config_toml(
        (40.0, 40.0, 40.0),
        1500,
        instances,
        "[0.0, 40.0]",
        "coherence-vs-N",
        "\n[sweep]\nn_values = [200, 1500, 3000]\n",
    );
    let result = sweep(&config).unwrap();
    for p in &result.points {
        let (w, s, _, sat) = p.result.width_stats(40.0, Axis::X).unwrap();
        let (w0, _, _, _) = p.result.width_stats(0.0, Axis::X).unwrap();
        println!("N={:5}  w0={w0:7.3}  w40={w:7.3} ± {s:5.3} (sat {sat})", p.n_atoms);
    }
}

fn pilot_asym(instances: usize) {
    for (label, l) in [
        ("sym 40x40x40", (40.0, 40.0, 40.0)),
        ("asym-x 80x40x20", (80.0, 40.0, 20.0)),
        ("asym-z 20x40x80", (20.0, 40.0, 80.0)),
    ] {
        let config = config_toml(l, 1500, instances, "[0.0, 40.0]", "coherence-vs-time", "");
        let needs = InstanceNeeds::for_scenario(config.scenario, false);
        let result = run_experiment_with(&config, needs).unwrap();
        let (w0, _, _, _) = result.width_stats(0.0, Axis::X).unwrap();
        let (w40, s40, _, sat) = result.width_stats(40.0, Axis::X).unwrap();
        let (w40y, _, _, _) = result.width_stats(40.0, Axis::Y).unwrap();
        println!("{label}: w0={w0:7.3}  w40_x={w40:7.3} ± {s40:5.3} (sat {sat})  w40_y={w40y:7.3}");
    }
}

fn pilot_fom(instances: usize) {
    let config = config_toml(
        (40.0, 40.0, 40.0),
        1500,
        instances,
        "[0.0, 40.0]",
        "fom-sweep",
        "\n[sweep]\nn_values = [50, 100, 200, 400, 800, 1500, 2500, 4000]\n",
    );
    let result = sweep(&config).unwrap();
    for p in &result.points {
        let l = p.box_l.unwrap();
        let sigma = sigma_h_closed_form(p.n_atoms, l);
        let (w0, _, _, _) = p.result.width_stats(0.0, Axis::X).unwrap();
        let (w, s, _, sat) = p.result.width_stats(40.0, Axis::X).unwrap();
        println!(
            "N={:5} L={l:6.2} sigma={sigma:7.3}  w0={w0:7.3}  w40={w:7.3} ± {s:5.3} (sat {sat})",
            p.n_atoms
        );
    }
    if let Some(fit) = &result.fom_fit {
        println!("xi = {:.4}  w_u = {:.4}", fit.xi, result.fom_w_u.unwrap());
        println!("residuals: {:?}", fit.residuals);
    } else {
        println!("fit unavailable (w_u = {:?})", result.fom_w_u);
    }
}

fn pilot_timing() {
    faer::set_global_parallelism(faer::Par::Seq);
    let n = 4000;
    let t0 = Instant::now();
    let cloud = sample_cloud(&CloudSpec::cubic(55.47, n, 77)).unwrap();
    println!("sample:   {:?}", t0.elapsed());
    let t0 = Instant::now();
    let m = assemble_exchange(&cloud, &nalgebra::Vector3::y()).unwrap();
    println!("assemble: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let eig = decompose(&m).unwrap();
    println!("decompose+residual: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let c0 = colemit::evolution::initial_amplitudes(&cloud, &nalgebra::Vector3::x());
    let prop = colemit::evolution::Propagator::new(&eig, 1.0, &c0).unwrap();
    let amps = prop.at(40.0);
    println!("propagate: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let grid = colemit::radiation::ObservationGrid::default();
    let map = colemit::radiation::field_map(&cloud, &amps, &nalgebra::Vector3::y(), &grid).unwrap();
    println!("field_map: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let profile = colemit::coherence::cross_correlation(&map, Axis::X, 10.0).unwrap();
    let w = colemit::coherence::coherence_width(&profile).unwrap();
    println!("correlation: {:?} (w={:.3}, sat={})", t0.elapsed(), w.w, w.saturated);
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "std".into());
    let instances: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(6);
    match mode.as_str() {
        "std" => pilot_std(instances),
        "time" => pilot_time(instances),
        "norm" => pilot_norm(instances),
        "nsweep" => pilot_nsweep(instances),
        "asym" => pilot_asym(instances),
        "fom" => pilot_fom(instances),
        "timing" => pilot_timing(),
        other => eprintln!("unknown pilot '{other}'"),
    }
}
