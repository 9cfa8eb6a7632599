use ndarray::Array2;
use std::time::Instant;

fn main() {
    let w = Array2::<f64>::from_elem((64, 64), 0.5);
    let a = Array2::<f64>::from_elem((64, 2000), 0.25);
    // warmup
    let mut acc = w.dot(&a);
    let t0 = Instant::now();
    let n = 200;
    for _ in 0..n {
        acc = w.dot(&a);
    }
    let dt = t0.elapsed().as_secs_f64() / n as f64;
    let flops = 2.0 * 64.0 * 64.0 * 2000.0;
    println!("dgemm 64x64x2000: {:.3} ms -> {:.1} GFLOP/s ({})", dt * 1e3, flops / dt / 1e9, acc[(0,0)]);

    let at = a.t();
    let g = Array2::<f64>::from_elem((64, 2000), 0.1);
    let t0 = Instant::now();
    for _ in 0..n {
        acc = g.dot(&at);
    }
    let dt = t0.elapsed().as_secs_f64() / n as f64;
    println!("dgemm grad 64x2000x64: {:.3} ms -> {:.1} GFLOP/s ({})", dt * 1e3, flops / dt / 1e9, acc[(0,0)]);

    // tanh cost
    let z = Array2::<f64>::from_elem((64, 2000), 0.3);
    let t0 = Instant::now();
    for _ in 0..n {
        acc = z.mapv(f64::tanh);
    }
    let dt = t0.elapsed().as_secs_f64() / n as f64;
    println!("tanh 128k: {:.3} ms ({})", dt * 1e3, acc[(0,0)]);

    // zeros alloc cost
    let t0 = Instant::now();
    let mut s = 0.0;
    for _ in 0..n {
        let m = Array2::<f64>::zeros((64, 2000));
        s += m[(10, 10)];
    }
    let dt = t0.elapsed().as_secs_f64() / n as f64;
    println!("zeros 1MB: {:.3} ms ({s})", dt * 1e3);

    // elementwise 3-way zip
    let t0 = Instant::now();
    let b = Array2::<f64>::from_elem((64, 2000), 0.7);
    let mut out = Array2::<f64>::zeros((64, 2000));
    for _ in 0..n {
        ndarray::Zip::from(&mut out).and(&z).and(&b).for_each(|o, &x, &y| *o = x * y + x);
    }
    let dt = t0.elapsed().as_secs_f64() / n as f64;
    println!("zip3 128k: {:.3} ms ({})", dt * 1e3, out[(0,0)]);
}
