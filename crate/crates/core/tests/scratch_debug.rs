// Temporary diagnostic (removed before finalizing).
use rand::Rng;
use rpsketch::coding::CellCounts;
use rpsketch::estimate::{estimate_1bit, estimate_2bit_mle, log_likelihood, CellMode, MleConfig};
use rpsketch::region::{build_table, RHO_MAX};
use rpsketch::simulate::trial_rng;

#[test]
#[ignore]
fn dissect_case_131() {
    let table = build_table(0.75, 1e-3).unwrap();
    let k = 200u64;
    for case in [131u64] {
        let mut rng = trial_rng(0x0B0B_0000, case);
        let raw: Vec<f64> = (0..6).map(|_| -rng.random::<f64>().ln()).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mut groups = [0.0f64; 6];
        for _ in 0..k {
            let mut u = rng.random::<f64>();
            let mut idx = 5;
            for (i, &p) in probs.iter().enumerate() {
                if u < p {
                    idx = i;
                    break;
                }
                u -= p;
            }
            groups[idx] += 1.0;
        }
        let counts = CellCounts::from_groups(groups);
        println!("case {case}: groups {groups:?}");
        let init = estimate_1bit(counts.same_sign(), counts.total());
        let (li, fi, di) = log_likelihood(&counts, CellMode::SixCell, &table, init);
        println!("  init {init}: l {li} l' {fi} l'' {di}");
        for rho in [-RHO_MAX, -0.9, -0.5, 0.0, 0.5, 0.9, RHO_MAX] {
            let (l, f, d) = log_likelihood(&counts, CellMode::SixCell, &table, rho);
            println!("  rho {rho:+.4}: l {l:.6} l' {f:.6e} l'' {d:.6e}");
        }
        let est = estimate_2bit_mle(&counts, &table, &MleConfig::default());
        println!("  result: {est:?}");
        let (lr, fr, _) = log_likelihood(&counts, CellMode::SixCell, &table, est.rho_hat);
        println!("  at result: l {lr} l' {fr}");
        for rho in [-RHO_MAX, RHO_MAX, -RHO_MAX + 1e-9] {
            let e = table.lookup(rho);
            println!("  lookup({rho}):");
            for (name, v) in ["II", "IO", "OO"].iter().zip(e.iter()) {
                println!("    {name}: p {:.6e} d1 {:.6e} d2 {:.6e}", v.p, v.d1, v.d2);
            }
        }
    }
}
