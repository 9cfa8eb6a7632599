use std::time::Instant;
use varicoef::forward::*;
use varicoef::inverse::*;

fn main() {
    let grid = Grid1D::paper(256, 256);
    let lam1 = PiecewiseSchedule::steps(vec![0.0, 5.0, 10.0], vec![0.5, 1.0]).unwrap();
    let lam2 = PiecewiseSchedule::constant(0.1, 10.0);
    let t0 = Instant::now();
    let field = solve_burgers(&grid, &lam1, &lam2).unwrap();
    println!("solve_burgers 256x256: {:.2?}", t0.elapsed());
    let obs = sample_observations(&field, 2000, 1).unwrap();

    for (name, depth, width, gated, batch, nr) in [
        ("bb4x64g b2000", 4usize, 64usize, true, 2000usize, 16000usize),
        ("bb4x64g b1000", 4, 64, true, 1000, 16000),
        ("bb4x48g b1500", 4, 48, true, 1500, 16000),
        ("bb5x64p b2000", 5, 64, false, 2000, 16000),
    ] {
        let mut cfg = BurgersInverseConfig::paper(1);
        cfg.n_r = nr;
        cfg.batch_r = batch;
        cfg.epochs = 60;
        cfg.backbone = NetSpec { depth, width, gated };
        cfg.subnet = NetSpec { depth: 3, width: 32, gated: true };
        cfg.log_every = 1000;
        let t0 = Instant::now();
        let out = train_burgers(&obs, &cfg).unwrap();
        let dt = t0.elapsed().as_secs_f64() / 60.0;
        println!("{name}: {:.1} ms/epoch -> 20k epochs = {:.1} min | loss0={:.4} lossN={:.4}",
            dt * 1000.0, dt * 20000.0 / 60.0, out.losses.first().unwrap().total, out.losses.last().unwrap().total);
    }
}
