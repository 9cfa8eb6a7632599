// Desk-scale case 1.2 convergence probe: how fast do segment medians converge?
use std::time::Instant;
use varicoef::forward::*;
use varicoef::inverse::*;

fn medians(trace: &BurgersTrace) -> (f64, f64, f64) {
    let med = |mut v: Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let seg1: Vec<f64> = trace
        .times
        .iter()
        .zip(&trace.lambda1)
        .filter(|(t, _)| **t < 4.8)
        .map(|(_, l)| *l)
        .collect();
    let seg2: Vec<f64> = trace
        .times
        .iter()
        .zip(&trace.lambda1)
        .filter(|(t, _)| **t > 5.2)
        .map(|(_, l)| *l)
        .collect();
    let l2: Vec<f64> = trace.lambda2.clone();
    (med(seg1), med(seg2), med(l2))
}

fn main() {
    let grid = Grid1D::paper(256, 256);
    let lam1 = PiecewiseSchedule::steps(vec![0.0, 5.0, 10.0], vec![0.5, 1.0]).unwrap();
    let lam2 = PiecewiseSchedule::constant(0.1, 10.0);
    let field = solve_burgers(&grid, &lam1, &lam2).unwrap();
    let obs = sample_observations(&field, 2000, 42).unwrap();

    let mut cfg = BurgersInverseConfig::paper(42);
    cfg.n_r = 16000;
    cfg.batch_r = 1000;
    cfg.batch_o = 1000;
    cfg.backbone = NetSpec { depth: 4, width: 64, gated: true };
    cfg.subnet = NetSpec { depth: 3, width: 32, gated: true };
    cfg.lr_decay_every = 800; // 16000 epochs / 20
    cfg.log_every = 200;

    let stages = [4000usize, 4000, 8000];
    let t0 = Instant::now();
    let mut total = 0usize;
    for (k, &extra) in stages.iter().enumerate() {
        total += extra;
        cfg.epochs = total;
        let out = train_burgers(&obs, &cfg).unwrap();
        let (m1, m2, ml2) = medians(&out.trace);
        let last = out.losses.last().unwrap();
        println!(
            "epochs {:5}: med(l1|t<4.8)={:+.4} (want 0.5, rel {:+.3})  med(l1|t>5.2)={:+.4} (want 1.0, rel {:+.3})  med(l2)={:.4}  mse_o={:.2e} wres={:.2e}  [{:.1} min cum]",
            total, m1, (m1 - 0.5) / 0.5, m2, (m2 - 1.0), ml2, last.mse_o, last.mse_r,
            t0.elapsed().as_secs_f64() / 60.0
        );
        let _ = k;
    }
}
