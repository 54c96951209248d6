use cartan_kak::hamsim::*;
use std::time::Instant;

fn main() {
    // criterion-4 style sweep
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for n in 2..=8usize {
        for seed in 0..20u64 {
            let m = XYModel::random(n, 1000 + seed);
            for t in [0.1, 1.0] {
                let (c, rep) = compile_evolution(&m, t).unwrap();
                assert_eq!(rep.gate_count, 2 * n * n - n);
                let got = evaluate_circuit(&c).unwrap();
                let want = dense_evolution(&m, t).unwrap();
                let r = got.residual(&want) / ((1u64 << n) as f64).sqrt();
                if r > worst { worst = r; }
            }
        }
        println!("n={n} done, worst so far {worst:.3e}, elapsed {:?}", t0.elapsed());
    }
    println!("sweep n<=8 worst scaled residual: {worst:.3e}");
}
