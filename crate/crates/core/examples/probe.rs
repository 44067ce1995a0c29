use uirs_core::channels::{depolarizing, Channel, NoiseModel};
use uirs_core::circuit::{sample_shadows, DataMode, SequenceSpec};
use uirs_core::correlators::{khat_identical_unitarity, OutcomeWeights};
use uirs_core::fitting::fit_offset_decay;

fn main() {
    let n = 2;
    let noise = NoiseModel {
        left: depolarizing(0.1, n).unwrap(),
        right: Channel::identity(n),
        spam_prep: Channel::identity(n),
        spam_meas: Channel::identity(n),
    };
    let weights = OutcomeWeights::z_first_qubit(n);
    let mut errs = Vec::new();
    for seed in 0..20u64 {
        let mut points = Vec::new();
        for m in 1..=8 {
            let spec = SequenceSpec::computational(n, m, None, noise.clone()).unwrap();
            let records = sample_shadows(&spec, 2000, 2, DataMode::Exact, seed, (m as u64) << 32).unwrap();
            let (k, se) = khat_identical_unitarity(&records, &weights, DataMode::Exact).unwrap();
            points.push((m, k, se));
        }
        let fit = fit_offset_decay(&points).unwrap();
        errs.push((fit.decay() - 0.81f64).abs());
        print!("{:.4} ", fit.decay());
    }
    println!();
    errs.sort_by(f64::total_cmp);
    println!("median |err| = {:.4}, max = {:.4}", errs[10], errs[19]);
}
