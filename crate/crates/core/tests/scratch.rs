use qpnn_core::engine::{cost, EvalOptions};
use qpnn_core::trainer::{build_task, Parameterization, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn probe_landscape_floor() {
    let cfg = TrainConfig::qd_bsa(4, 1, 1, 2);
    let (task, _) = build_task(&cfg).unwrap();
    let par = Parameterization::new(4, 2, true).unwrap();
    let opts = EvalOptions { visibility: 1.0, grid_size: 128, sigma_p: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut samples: Vec<(f64, Vec<f64>)> = Vec::new();
    for _ in 0..20000 {
        let x = par.random_init(&mut rng, 1.0);
        let spec = par.network(&x, &cfg.nonlinearity, 1).unwrap();
        if let Ok(c) = cost(&spec, &task, &opts, 0.0) {
            samples.push((c.raw, x));
        }
    }
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let q = |p: f64| samples[(p * samples.len() as f64) as usize].0;
    println!(
        "n={} min={:.4} q01={:.4} q10={:.4} median={:.4}",
        samples.len(),
        samples[0].0,
        q(0.01),
        q(0.10),
        q(0.50)
    );
    for (c, x) in samples.iter().take(8) {
        let (tau, det) = par.emitter_params(x).unwrap();
        println!("  c={c:.4} tau={tau:.3} delta={:.3}", det[0]);
    }
}
